import math

import numpy as np
import pytest

from softbayes.comparators import (
    SegmentSpec,
    best_fixed_mixture,
    disjoint_closed_form,
    regret_report,
    shifting_best,
    single_expert_losses,
    theoretical_bound,
)
from softbayes.core import ExpertStream
from softbayes.learners import SoftBayes, run_learner


def grid_oracle_loss(stream, step=0.01):
    """Brute-force best fixed mixture over a grid on the simplex (N <= 3)."""
    P = stream.p
    n = stream.n_experts
    ticks = np.arange(0.0, 1.0 + step / 2, step)
    if n == 2:
        mixes = np.stack([ticks, 1.0 - ticks], axis=1)
    elif n == 3:
        g1, g2 = np.meshgrid(ticks, ticks, indexing="ij")
        a1, a2 = g1.ravel(), g2.ravel()
        keep = a1 + a2 <= 1.0 + 1e-12
        mixes = np.stack([a1[keep], a2[keep], np.clip(1.0 - a1[keep] - a2[keep], 0, None)],
                         axis=1)
    else:
        raise ValueError("oracle supports N <= 3")
    A = mixes @ P.T
    with np.errstate(divide="ignore"):
        losses = -np.log(A).sum(axis=1)
    return float(np.min(losses))


class TestBestFixedMixture:
    def test_alternating_dirac(self):
        stream = ExpertStream(np.array([[1, 0], [0, 1], [1, 0], [0, 1]], float))
        sol = best_fixed_mixture(stream)
        # frozen from the 0.01-grid oracle: a* = (0.5, 0.5), loss = 4 ln 2
        np.testing.assert_allclose(sol.a, [0.5, 0.5], atol=1e-9)
        assert sol.loss == pytest.approx(4 * math.log(2), abs=1e-10)
        assert sol.loss <= grid_oracle_loss(stream) + 1e-9
        assert sol.converged

    def test_dominant_expert(self):
        rng = np.random.default_rng(1)
        base = rng.uniform(0.1, 0.8, size=(30, 3))
        base[:, 0] = base.max(axis=1) + 0.1
        stream = ExpertStream(np.clip(base, 0, 1))
        sol = best_fixed_mixture(stream)
        np.testing.assert_allclose(sol.a, [1.0, 0.0, 0.0], atol=1e-6)

    def test_single_round_picks_best_expert(self):
        stream = ExpertStream(np.array([[0.2, 0.6]]))
        sol = best_fixed_mixture(stream)
        np.testing.assert_allclose(sol.a, [0.0, 1.0], atol=1e-9)
        assert sol.loss == pytest.approx(-math.log(0.6), abs=1e-12)

    def test_matches_grid_oracle_on_random_streams(self):
        rng = np.random.default_rng(99)
        for _ in range(25):
            stream = ExpertStream(rng.uniform(0.01, 1.0, size=(50, 3)))
            sol = best_fixed_mixture(stream)
            assert sol.loss <= grid_oracle_loss(stream) + 1e-4
            assert sol.loss <= float(single_expert_losses(stream).min()) + 1e-12

    def test_never_worse_than_vertices(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            stream = ExpertStream(rng.uniform(0.0, 1.0, size=(40, 4)).clip(0.001, 1))
            sol = best_fixed_mixture(stream)
            assert sol.loss <= float(single_expert_losses(stream).min()) + 1e-12

    def test_empty_stream_rejected(self):
        with pytest.raises(ValueError):
            best_fixed_mixture(ExpertStream(np.zeros((0, 2))))

    def test_non_convergence_reports_flag(self):
        rng = np.random.default_rng(8)
        stream = ExpertStream(rng.uniform(0.01, 1.0, size=(60, 3)))
        sol = best_fixed_mixture(stream, tol=0.0, max_iter=3)
        assert not sol.converged
        assert sol.iterations == 3


class TestShiftingBest:
    def test_degenerate_segmentation_matches_global(self):
        rng = np.random.default_rng(12)
        stream = ExpertStream(rng.uniform(0.05, 1.0, size=(30, 3)))
        whole = best_fixed_mixture(stream)
        seg = shifting_best(stream, SegmentSpec((1,)))
        assert seg.total_loss == pytest.approx(whole.loss, abs=1e-12)

    def test_perfect_split(self):
        p = np.zeros((100, 2))
        p[:50, 0] = 1.0
        p[50:, 1] = 1.0
        stream = ExpertStream(p)
        seg = shifting_best(stream, SegmentSpec((1, 51)))
        assert seg.total_loss == pytest.approx(0.0, abs=1e-12)
        single = best_fixed_mixture(stream)
        np.testing.assert_allclose(single.a, [0.5, 0.5], atol=1e-9)
        assert single.loss == pytest.approx(100 * math.log(2), abs=1e-8)

    def test_boundary_validation(self):
        with pytest.raises(ValueError):
            SegmentSpec((2, 5))
        with pytest.raises(ValueError):
            SegmentSpec((1, 5, 5))
        stream = ExpertStream(np.full((4, 2), 0.5))
        with pytest.raises(ValueError):
            shifting_best(stream, SegmentSpec((1, 9)))


class TestRegretReport:
    def test_subtraction(self):
        r = regret_report(_FakeTrace(3.0), 2.5)
        assert r.regret == pytest.approx(0.5)

    def test_infinite_when_diverged(self):
        r = regret_report(_FakeTrace(math.inf, diverged=True), 2.5)
        assert math.isinf(r.regret)

    def test_bound_flag(self):
        r = regret_report(_FakeTrace(12.0), 2.0, bound=12.0)
        assert r.bound_satisfied is True
        r = regret_report(_FakeTrace(15.0), 2.0, bound=12.0)
        assert r.bound_satisfied is False

    def test_excluding_diverged_rounds(self):
        trace = _FakeTrace(math.inf, diverged=True, finite=4.0)
        r = regret_report(trace, 3.0, exclude_diverged=True)
        assert r.regret == pytest.approx(1.0)


class _FakeTrace:
    def __init__(self, total, diverged=False, finite=None):
        self.total_loss = total
        self.finite_loss = finite if finite is not None else total
        self.diverged = diverged


class TestTheoreticalBound:
    def test_anytime_value(self):
        assert theoretical_bound("thm5", T=10_000, N=2) == pytest.approx(349.3, abs=0.05)

    def test_single_expert_value(self):
        assert theoretical_bound("single-expert", eta=1.0, prior_entry=1 / 8) == pytest.approx(
            math.log(8), abs=1e-12)

    def test_offline_tuned_value(self):
        got = theoretical_bound("thm2_tuned_n", T=10_000, N=10)
        assert got == pytest.approx(962.0, abs=0.05)

    def test_offline_raw_matches_manual(self):
        eta = 0.01
        eb = eta / (1 - eta)
        manual = math.log(4) / eb + eb * 2 * 1000 + 2 * math.log(2) + math.log(4)
        assert theoretical_bound("thm2", T=1000, N=4, m=2, eta=eta) == pytest.approx(manual)

    def test_min_branches(self):
        small_c1 = theoretical_bound("thm4", T=100, N=4, eta=0.3, c1=0.5)
        assert small_c1 == pytest.approx(0.5)
        big_c1 = theoretical_bound("thm4", T=100, N=4, eta=0.3, c1=1e6)
        assert big_c1 == pytest.approx(math.log(4) / 0.3 + 0.3 * 1e6 / 2 + 0.09 * 100)

    def test_all_variants_evaluate(self):
        values = {
            "thm2": theoretical_bound("thm2", T=100, N=5, m=3, eta=0.1),
            "thm2_tuned_m": theoretical_bound("thm2_tuned_m", T=100, N=5, m=3),
            "thm3_cumulative": theoretical_bound("thm3_cumulative", N=5, eta=0.1, vmax=50.0),
            "thm3_max": theoretical_bound("thm3_max", T=100, N=5, eta=0.1, c2=4.0),
            "thm3_tuned": theoretical_bound("thm3_tuned", T=100, N=5, c2=4.0),
            "thm4_tuned": theoretical_bound("thm4_tuned", T=100, N=5, c1=30.0),
            "thm6": theoretical_bound("thm6", T=100, N=5, m=2),
            "thm7": theoretical_bound("thm7", T=100, N=5, K=3),
        }
        assert all(math.isfinite(v) and v > 0 for v in values.values())

    def test_missing_parameter(self):
        with pytest.raises(ValueError, match="missing"):
            theoretical_bound("thm5", T=100)

    def test_unexpected_parameter(self):
        with pytest.raises(ValueError, match="unexpected"):
            theoretical_bound("thm5", T=100, N=2, m=3)

    def test_unknown_variant(self):
        with pytest.raises(ValueError, match="unknown"):
            theoretical_bound("thm9", T=1, N=2)


class TestDisjointClosedForm:
    def test_laplace_style(self):
        np.testing.assert_allclose(disjoint_closed_form([2, 0, 0], 2, 3.0, 3),
                                   [0.6, 0.2, 0.2], atol=1e-15)

    def test_kt_style(self):
        np.testing.assert_allclose(disjoint_closed_form([2, 0, 0], 2, 1.5, 3),
                                   [2.5 / 3.5, 0.5 / 3.5, 0.5 / 3.5], atol=1e-15)

    def test_zero_counts_uniform(self):
        np.testing.assert_allclose(disjoint_closed_form([0, 0, 0, 0], 0, 2.0, 4),
                                   [0.25] * 4, atol=1e-15)

    def test_exactly_on_simplex(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            counts = rng.integers(0, 20, size=5)
            out = disjoint_closed_form(counts, int(counts.sum()), 2.5, 5)
            assert abs(out.sum() - 1.0) <= 1e-12

    def test_inconsistent_counts(self):
        with pytest.raises(ValueError, match="sum"):
            disjoint_closed_form([1, 1], 3, 1.0, 2)


class TestMonotoneObjectiveGuard:
    def test_long_runs_do_not_trip_the_guard(self):
        rng = np.random.default_rng(77)
        stream = ExpertStream(rng.uniform(0.001, 1.0, size=(5000, 6)))
        sol = best_fixed_mixture(stream)
        assert sol.converged


class TestDisjointEquivalenceSpot:
    def test_estimator_equivalence_spot(self):
        # two same-symbol rounds then one more: the round-3 mixture equals
        # the add-constant estimate (2 + 1) / (2 + 3) = 0.6
        from softbayes.generators import disjoint_dirac
        from softbayes.rates import InverseT

        stream = disjoint_dirac([1, 1, 1], 3)
        trace = run_learner(SoftBayes(3, InverseT(3.0)), stream)
        assert trace.predictions[2] == pytest.approx(0.6, abs=1e-14)
