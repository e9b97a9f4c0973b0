"""Cache tags, per-step cache tables, and reuse policies."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union


class CacheTag(enum.Enum):
    """What a step reuses: nothing, the Attn deltas, the MLP deltas, or both."""

    NONE = "none"
    ATTN = "attn"
    MLP = "mlp"
    BOTH = "both"

    @property
    def reuses_attn(self) -> bool:
        return self in (CacheTag.ATTN, CacheTag.BOTH)

    @property
    def reuses_mlp(self) -> bool:
        return self in (CacheTag.MLP, CacheTag.BOTH)


class InvalidTableError(Exception):
    """A cache table violates its structural invariants."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class CacheMissError(Exception):
    """A step asked to reuse a component that was never computed."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class CacheTable:
    """Tags in execution order, indexed by denoising step t = T down to 1."""

    T: int
    tags: tuple[CacheTag, ...]

    def __post_init__(self):
        if len(self.tags) != self.T:
            raise ValueError(f"table has {len(self.tags)} tags for T={self.T}")

    def tag_at(self, t: int) -> CacheTag:
        """Tag for denoising step t (T-based, counting down to 1)."""
        if not 1 <= t <= self.T:
            raise ValueError(f"step t={t} outside [1, {self.T}]")
        return self.tags[self.T - t]

    def histogram(self) -> dict[str, int]:
        counts = {tag.value: 0 for tag in CacheTag}
        for tag in self.tags:
            counts[tag.value] += 1
        return counts

    def to_json(self) -> str:
        return json.dumps({"T": self.T, "tags": [t.value for t in self.tags]})

    @classmethod
    def from_json(cls, text: str) -> "CacheTable":
        obj = json.loads(text)
        T = int(obj["T"])
        raw = obj["tags"]
        if len(raw) != T:
            raise ValueError(f"table file lists {len(raw)} tags for T={T}")
        try:
            tags = tuple(CacheTag(v) for v in raw)
        except ValueError as exc:
            raise ValueError(f"unknown cache tag in table file: {exc}") from exc
        return cls(T=T, tags=tags)


def save_table(table: CacheTable, path: str | Path) -> None:
    Path(path).write_text(table.to_json() + "\n")


def load_table(path: str | Path) -> CacheTable:
    return CacheTable.from_json(Path(path).read_text())


@dataclass(frozen=True)
class NoCache:
    pass


@dataclass(frozen=True)
class IntervalBoth:
    """Recompute every n-th step, reuse both components otherwise."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"interval must be >= 1, got {self.n}")


@dataclass(frozen=True)
class IntervalSeparate:
    """Independent recompute intervals for the Attn and MLP components."""

    n_attn: int
    n_mlp: int

    def __post_init__(self):
        if self.n_attn < 1 or self.n_mlp < 1:
            raise ValueError(f"intervals must be >= 1, got ({self.n_attn}, {self.n_mlp})")


@dataclass(frozen=True)
class TableDriven:
    table: CacheTable


CachePolicy = Union[NoCache, IntervalBoth, IntervalSeparate, TableDriven]


def validate_table(table: CacheTable) -> None:
    """Check the generated-table invariants; raises InvalidTableError.

    Steps T and T-1 must be fresh (the generator computes them before its
    loop), and a component may only be reused after some earlier step
    computed it.
    """
    if table.T >= 1 and table.tags[0] is not CacheTag.NONE:
        raise InvalidTableError(f"step {table.T} must be tagged none", step=table.T)
    if table.T >= 2 and table.tags[1] is not CacheTag.NONE:
        raise InvalidTableError(f"step {table.T - 1} must be tagged none", step=table.T - 1)
    attn_ready = False
    mlp_ready = False
    for i, tag in enumerate(table.tags):
        t = table.T - i
        if tag.reuses_attn and not attn_ready:
            raise InvalidTableError(f"step {t} reuses attn before it was computed", step=t)
        if tag.reuses_mlp and not mlp_ready:
            raise InvalidTableError(f"step {t} reuses mlp before it was computed", step=t)
        if not tag.reuses_attn:
            attn_ready = True
        if not tag.reuses_mlp:
            mlp_ready = True


def resolve_plan(policy: CachePolicy, T: int) -> CacheTable:
    """Expand a policy into a per-step tag table for T executed steps."""
    if T < 2:
        raise ValueError(f"resolve_plan needs T >= 2, got {T}")
    if isinstance(policy, NoCache):
        tags = (CacheTag.NONE,) * T
    elif isinstance(policy, IntervalBoth):
        tags = tuple(
            CacheTag.NONE if (T - t) % policy.n == 0 else CacheTag.BOTH
            for t in range(T, 0, -1)
        )
    elif isinstance(policy, IntervalSeparate):
        out = []
        for t in range(T, 0, -1):
            fresh_attn = (T - t) % policy.n_attn == 0
            fresh_mlp = (T - t) % policy.n_mlp == 0
            if fresh_attn and fresh_mlp:
                out.append(CacheTag.NONE)
            elif fresh_attn:
                out.append(CacheTag.MLP)
            elif fresh_mlp:
                out.append(CacheTag.ATTN)
            else:
                out.append(CacheTag.BOTH)
        tags = tuple(out)
    elif isinstance(policy, TableDriven):
        if policy.table.T != T:
            raise InvalidTableError(
                f"table is for T={policy.table.T}, run executes {T} steps", step=T
            )
        validate_table(policy.table)
        return policy.table
    else:
        raise ValueError(f"unknown cache policy: {policy!r}")
    return CacheTable(T=T, tags=tags)
