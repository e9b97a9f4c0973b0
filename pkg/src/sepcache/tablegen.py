"""Greedy cache-table generation: per step, compare fresh and cached
prediction norms against a threshold, tag the step, aggregate over n
seeded samples by majority vote."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .cache import CacheTable, CacheTag, validate_table
from .model import NoisePredictor
from .numerics import SeededRng, l2
from .sampler import ddpm_step
from .schedule import (
    NoiseSchedule,
    ScalingSchedule,
    ThresholdSchedule,
    scaling_factor,
    threshold,
)


@dataclass(frozen=True)
class TableGenConfig:
    T: int
    n: int = 8
    scaling: ScalingSchedule | None = ScalingSchedule()
    threshold: ThresholdSchedule = ThresholdSchedule()
    t_thre_norm: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"sample count n must be >= 1, got {self.n}")
        if self.T < 2:
            raise ValueError(f"T must be >= 2, got {self.T}")


def stage_candidate(t: int, T: int, t_thre_norm: float = 0.4) -> CacheTag:
    """Stage-specific cache candidate: MLP while noise is high, Attn late.

    The boundary t/T == t_thre_norm belongs to the early (high-noise)
    stage.
    """
    if not 1 <= t <= T:
        raise ValueError(f"step t={t} outside [1, {T}]")
    return CacheTag.MLP if t / T >= t_thre_norm else CacheTag.ATTN


def generate_table_single(
    predictor: NoisePredictor,
    s: NoiseSchedule,
    config: TableGenConfig,
    rng: SeededRng,
) -> CacheTable:
    """One greedy pass over a seeded trajectory.

    Steps T and T-1 run fresh and seed the cache.  At each later step
    the cached candidates replay the previous step's fresh deltas, the
    fresh pass then refreshes the cache, and the state advances with the
    chosen tag's prediction (scaled only when cached).
    """
    T = config.T
    if T != s.T:
        raise ValueError(f"config T={T} disagrees with schedule T={s.T}")
    cache = predictor.new_cache()
    x = rng.normal(predictor.grid_shape)
    tags = [CacheTag.NONE, CacheTag.NONE]
    for t in (T, T - 1):
        eps = predictor.predict(x, t, CacheTag.NONE, cache)
        x = ddpm_step(x, t, eps, 1.0, s, rng)
    for t in range(T - 2, 0, -1):
        b_t = scaling_factor(t / T, config.scaling) if config.scaling is not None else 1.0
        eps_both = predictor.predict(x, t, CacheTag.BOTH, cache)
        cand = stage_candidate(t, T, config.t_thre_norm)
        eps_cand = predictor.predict(x, t, cand, cache.clone())
        eps_fresh = predictor.predict(x, t, CacheTag.NONE, cache)
        e_ori = l2(eps_fresh)
        e_both = b_t * l2(eps_both)
        e_cand = b_t * l2(eps_cand)
        delta = threshold(t, T, config.threshold)
        if abs(e_ori - e_both) < delta:
            tag, eps, b_adv = CacheTag.BOTH, eps_both, b_t
        elif abs(e_ori - e_cand) < delta:
            tag, eps, b_adv = cand, eps_cand, b_t
        else:
            tag, eps, b_adv = CacheTag.NONE, eps_fresh, 1.0
        tags.append(tag)
        x = ddpm_step(x, t, eps, b_adv, s, rng)
    return CacheTable(T=T, tags=tuple(tags))


def _tag_rank(tag: CacheTag, candidate: CacheTag) -> float:
    if tag is CacheTag.NONE:
        return 0.0
    if tag is CacheTag.BOTH:
        return 2.0
    # the stage candidate sits below a foreign partial tag
    return 1.0 if tag is candidate else 1.5


def aggregate_tables(
    tables: list[CacheTable], t_thre_norm: float = 0.4
) -> tuple[CacheTable, list[dict[str, int]]]:
    """Per-step majority vote; count ties fall to the less aggressive tag.

    Returns the aggregated table plus per-step vote counts.
    """
    if not tables:
        raise ValueError("aggregate_tables needs at least one table")
    T = tables[0].T
    if any(tb.T != T for tb in tables):
        raise ValueError("all tables must share T")
    tags = []
    votes: list[dict[str, int]] = []
    for i in range(T):
        t = T - i
        counts: dict[CacheTag, int] = {}
        for tb in tables:
            counts[tb.tags[i]] = counts.get(tb.tags[i], 0) + 1
        votes.append({tag.value: n for tag, n in sorted(counts.items(), key=lambda kv: kv[0].value)})
        best = max(counts.values())
        cand = stage_candidate(t, T, t_thre_norm) if 1 <= t <= T else CacheTag.MLP
        winner = min(
            (tag for tag, n in counts.items() if n == best),
            key=lambda tag: _tag_rank(tag, cand),
        )
        tags.append(winner)
    table = CacheTable(T=T, tags=tuple(tags))
    validate_table(table)
    return table, votes


def generate_table(
    predictor: NoisePredictor,
    s: NoiseSchedule,
    config: TableGenConfig,
    workers: int = 1,
) -> tuple[CacheTable, dict]:
    """Run n single-sample generations on independent streams and aggregate.

    The result is byte-identical for a fixed (seed, config) regardless of
    worker count: sample i always uses stream i and aggregation is a
    deterministic reduce in stream order.
    """

    def one(i: int) -> CacheTable:
        return generate_table_single(predictor, s, config, SeededRng(config.seed, stream=i))

    if workers <= 1:
        singles = [one(i) for i in range(config.n)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            singles = list(pool.map(one, range(config.n)))
    table, votes = aggregate_tables(singles, config.t_thre_norm)
    provenance = {
        "n": config.n,
        "seed": config.seed,
        "T": config.T,
        "t_thre_norm": config.t_thre_norm,
        "threshold": {"a": config.threshold.a, "b": config.threshold.b},
        "scaling": None
        if config.scaling is None
        else {"b_h": config.scaling.b_h, "b_l": config.scaling.b_l, "t_thre": config.scaling.t_thre},
        "votes": votes,
    }
    return table, provenance
