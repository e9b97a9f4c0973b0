"""Band-energy splits against the DFT oracle, SNR curves against the
closed-form trajectory theory, paired errors, compute accounting."""
import math

import numpy as np
import pytest

from sepcache.analysis import (
    band_energy,
    band_energy_curve,
    paired_feature_error,
    snr_curve,
    speedup_report,
)
from sepcache.cache import CacheTable, CacheTag, IntervalBoth, NoCache, TableDriven
from sepcache.model import (
    AnalyticDenoiser,
    GaussianMixturePrior,
    ToyDiT,
    ToyDiTConfig,
    compute_cost,
)
from sepcache.numerics import SeededRng, l2
from sepcache.sampler import run_trajectory
from sepcache.schedule import build_linear_schedule

from test_numerics import naive_dft2d


@pytest.fixture(scope="module")
def s50():
    return build_linear_schedule(50, 1e-4, 0.02)


class TestBandEnergy:
    def test_constant_field_all_low(self):
        low, high = band_energy(np.full((8, 8, 1), 2.0), 0.25)
        assert low == pytest.approx(16.0, abs=1e-12)
        assert high == pytest.approx(0.0, abs=1e-12)

    def test_checkerboard_all_high(self):
        idx = np.indices((8, 8)).sum(axis=0)
        cb = np.where(idx % 2 == 0, 1.0, -1.0).reshape(8, 8, 1)
        low, high = band_energy(cb, 0.5)
        assert low == pytest.approx(0.0, abs=1e-12)
        assert high == pytest.approx(8.0, abs=1e-10)

    def test_parseval_partition_vs_naive_dft(self):
        rng = SeededRng(70)
        f = rng.normal((8, 8, 1))
        low, high = band_energy(f, 0.25)
        total2 = float(np.sum(f**2))
        assert (low**2 + high**2 - total2) / total2 < 1e-9
        # brute-force the same split from the naive DFT spectrum
        spec = naive_dft2d(f.astype(np.complex128))
        ky = np.fft.fftfreq(8) * 2
        kx = np.fft.fftfreq(8) * 2
        mask = np.sqrt(ky[:, None] ** 2 + kx[None, :] ** 2) <= 0.25
        low_o = math.sqrt(np.sum(np.abs(spec[mask, :]) ** 2) / 64)
        high_o = math.sqrt(np.sum(np.abs(spec[~mask, :]) ** 2) / 64)
        assert low == pytest.approx(low_o, abs=1e-10)
        assert high == pytest.approx(high_o, abs=1e-10)

    def test_every_bin_in_exactly_one_band(self):
        from sepcache.analysis import _radial_mask

        for cutoff in (0.1, 0.25, 0.5, 0.9):
            m = _radial_mask(16, 8, cutoff)
            assert m.shape == (16, 8)
            assert np.all(m | ~m)
            assert m[0, 0]  # DC is always low

    def test_bad_cutoff(self):
        with pytest.raises(ValueError):
            band_energy(np.zeros((8, 8, 1)), 0.0)
        with pytest.raises(ValueError):
            band_energy(np.zeros((8, 8, 1)), 1.0)


class TestSnrCurve:
    def test_zero_eps_capped_and_zero_signal_zero(self, s50):
        den = AnalyticDenoiser(GaussianMixturePrior.standard_normal((4, 4, 1)), s50)
        tr = run_trajectory(den, NoCache(), None, 50, 2, s50)
        t = 30
        x, eps = tr.snapshots[t]
        tr.snapshots[t] = (x, np.zeros_like(eps))
        curve = dict(snr_curve(tr, s50))
        assert curve[t] == 1e6
        # x0_hat == 0 exactly when x_t == sqrt(1-abar)*b*eps
        abar = s50.alpha_bar_at(t)
        b = next(r.b for r in tr.steps if r.t == t)
        eps2 = SeededRng(71).normal((4, 4, 1))
        tr.snapshots[t] = (math.sqrt(1 - abar) * b * eps2, eps2)
        assert dict(snr_curve(tr, s50))[t] == 0.0

    def test_sign_flip_invariance(self, s50):
        den = AnalyticDenoiser(GaussianMixturePrior.standard_normal((4, 4, 1)), s50)
        tr = run_trajectory(den, NoCache(), None, 50, 3, s50)
        flipped = dict(snr_curve(tr, s50))
        for t in list(tr.snapshots):
            x, eps = tr.snapshots[t]
            tr.snapshots[t] = (-x, -eps)
        assert dict(snr_curve(tr, s50)) == flipped

    def test_point_mass_matches_theory(self):
        # q-marginal states: SNR ~ (abar |mu0|^2) / ((1-abar) D)
        T = 500
        s = build_linear_schedule(T, 1e-4, 0.02)
        mu0 = np.full((8, 8, 1), 0.5)
        den = AnalyticDenoiser(GaussianMixturePrior.point_mass(mu0), s)
        acc: dict[int, list[float]] = {}
        for seed in range(100):
            tr = run_trajectory(den, NoCache(), None, T, seed, s, snapshot_stride=25)
            for t, v in snr_curve(tr, s):
                acc.setdefault(t, []).append(v)
        D = 64
        n2 = l2(mu0) ** 2
        for t, vals in acc.items():
            theory = s.alpha_bar_at(t) * n2 / ((1 - s.alpha_bar_at(t)) * D)
            assert np.mean(vals) == pytest.approx(theory, rel=0.10)


@pytest.mark.xfail(
    strict=True,
    reason=(
        "structural: for the N(0,1)-prior oracle the reconstructed-SNR ratio is "
        "state-independent at fresh steps (the state norm cancels), and at reused "
        "steps the replayed noise was drawn at a higher noise level, so its larger "
        "norm pushes the cached SNR below no-cache rather than above"
    ),
)
def test_snr_dominance_of_interval_caching_final_fifth():
    # stated desk-scale analogue of the trained-model observation that
    # caching raises image SNR: mean SNR of interval(4) >= no-cache over
    # the final 20% of steps, 1e3 seeds, one-sided tolerance 0
    T = 50
    s = build_linear_schedule(T, 1e-4, 0.02)
    den = AnalyticDenoiser(GaussianMixturePrior.standard_normal((8, 8, 1)), s)
    sums: dict[str, dict[int, float]] = {"none": {}, "cached": {}}
    n_seeds = 1000
    for seed in range(n_seeds):
        for name, pol in (("none", NoCache()), ("cached", IntervalBoth(4))):
            tr = run_trajectory(den, pol, None, T, seed, s)
            for t, v in snr_curve(tr, s):
                sums[name][t] = sums[name].get(t, 0.0) + v
    for t in range(T // 5, 0, -1):
        assert sums["cached"][t] / n_seeds >= sums["none"][t] / n_seeds, f"step {t}"


class TestPairedFeatureError:
    def test_self_comparison_is_zero(self, s50):
        den = AnalyticDenoiser(GaussianMixturePrior.standard_normal((4, 4, 1)), s50)
        tr = run_trajectory(den, NoCache(), None, 50, 5, s50)
        err, l1, l2n = paired_feature_error(tr, tr, 25)
        assert np.array_equal(err, np.zeros_like(err))
        assert l1 == 0.0 and l2n == 0.0

    def test_equivalent_plans_zero_map(self, s50):
        den = AnalyticDenoiser(GaussianMixturePrior.standard_normal((4, 4, 1)), s50)
        a = run_trajectory(den, NoCache(), None, 50, 6, s50)
        table = CacheTable(T=50, tags=(CacheTag.NONE,) * 50)
        b = run_trajectory(den, TableDriven(table), None, 50, 6, s50)
        _, l1, _ = paired_feature_error(a, b, 17)
        assert l1 == 0.0

    def test_divergence_onset(self, s50):
        den = AnalyticDenoiser(GaussianMixturePrior.standard_normal((4, 4, 1)), s50)
        a = run_trajectory(den, NoCache(), None, 50, 7, s50)
        b = run_trajectory(den, IntervalBoth(2), None, 50, 7, s50)
        _, l1_before, _ = paired_feature_error(a, b, 49)
        _, l1_after, _ = paired_feature_error(a, b, 48)
        assert l1_before == 0.0
        assert l1_after > 0.0

    def test_mismatched_seeds_rejected(self, s50):
        den = AnalyticDenoiser(GaussianMixturePrior.standard_normal((4, 4, 1)), s50)
        a = run_trajectory(den, NoCache(), None, 50, 1, s50)
        b = run_trajectory(den, NoCache(), None, 50, 2, s50)
        with pytest.raises(ValueError):
            paired_feature_error(a, b, 25)


class TestSpeedupReport:
    def test_baseline_vs_itself(self, s50):
        dit = ToyDiT(ToyDiTConfig(grid=(4, 4, 1), patch=2, d_model=16, n_heads=2, n_blocks=1))
        tr = run_trajectory(dit, NoCache(), None, 50, 1, s50, snapshot_stride=0)
        row = speedup_report([tr], tr)[0]
        assert row.speedup == 1.0
        assert row.mac_ratio == 1.0

    def test_interval_two_mac_ratio(self, s50):
        cfg = ToyDiTConfig(grid=(4, 4, 1), patch=2, d_model=16, n_heads=2, n_blocks=1)
        dit = ToyDiT(cfg)
        base = run_trajectory(dit, NoCache(), None, 50, 1, s50, snapshot_stride=0)
        cached = run_trajectory(dit, IntervalBoth(2), None, 50, 1, s50, snapshot_stride=0)
        row = speedup_report([cached], base)[0]
        full = compute_cost(cfg, CacheTag.NONE).total
        over = compute_cost(cfg, CacheTag.BOTH).total
        expect = (25 * full + 25 * over) / (50 * full)
        assert row.mac_ratio == pytest.approx(expect, rel=1e-12)
        assert abs(row.mac_ratio - 0.5) <= over / full

    def test_all_both_after_warmup_approaches_overhead_bound(self, s50):
        cfg = ToyDiTConfig(grid=(4, 4, 1), patch=2, d_model=16, n_heads=2, n_blocks=1)
        dit = ToyDiT(cfg)
        table = CacheTable(T=50, tags=(CacheTag.NONE, CacheTag.NONE) + (CacheTag.BOTH,) * 48)
        base = run_trajectory(dit, NoCache(), None, 50, 1, s50, snapshot_stride=0)
        cached = run_trajectory(dit, TableDriven(table), None, 50, 1, s50, snapshot_stride=0)
        row = speedup_report([cached], base)[0]
        full = compute_cost(cfg, CacheTag.NONE).total
        over = compute_cost(cfg, CacheTag.BOTH).total
        expect = (2 * full + 48 * over) / (50 * full)
        assert row.mac_ratio == pytest.approx(expect, rel=1e-12)
        assert row.mac_ratio < 2 / 50 + over / full

    def test_mismatched_configs_rejected(self, s50):
        dit_a = ToyDiT(ToyDiTConfig(grid=(4, 4, 1), patch=2, d_model=16, n_heads=2, n_blocks=1))
        dit_b = ToyDiT(ToyDiTConfig(grid=(8, 8, 1), patch=2, d_model=16, n_heads=2, n_blocks=1))
        a = run_trajectory(dit_a, NoCache(), None, 50, 1, s50, snapshot_stride=0)
        b = run_trajectory(dit_b, NoCache(), None, 50, 1, s50, snapshot_stride=0)
        with pytest.raises(ValueError):
            speedup_report([a], b)


class TestBandEnergyCurve:
    def test_lengths_and_order(self, s50):
        den = AnalyticDenoiser(GaussianMixturePrior.standard_normal((8, 8, 1)), s50)
        tr = run_trajectory(den, NoCache(), None, 50, 1, s50)
        curve = band_energy_curve(tr)
        assert len(curve) == 50
        assert [c[0] for c in curve] == list(range(50, 0, -1))
        for _, low, high in curve:
            assert low >= 0 and high >= 0
