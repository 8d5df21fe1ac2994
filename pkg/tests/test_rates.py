import math

import numpy as np
import pytest

from softbayes.rates import (
    AnytimeRate,
    BestSetTracker,
    FixedRate,
    InverseT,
    ScheduleConfig,
    SelfConfidentRate,
    SelfConfidentStats,
    ShiftingRate,
    SparseRate,
    parse_schedule,
    rate_anytime,
    rate_offline,
    rate_self_confident,
    rate_shifting,
    rate_sparse,
)


class TestOfflineRate:
    def test_tuned_value(self):
        eta = rate_offline(10_000, 10, m=10, variant="thm2_m")
        eta_bar = eta / (1 - eta)
        assert eta_bar == pytest.approx(4.7985e-3, rel=1e-4)
        assert eta == pytest.approx(4.7756e-3, rel=1e-4)

    def test_variants_agree_at_m_equals_n(self):
        assert rate_offline(500, 7, m=7, variant="thm2_m") == rate_offline(500, 7)

    def test_rejects_bad_m(self):
        with pytest.raises(ValueError):
            rate_offline(10, 4, m=5, variant="thm2_m")
        with pytest.raises(ValueError):
            rate_offline(10, 4, m=0, variant="thm2_m")

    def test_in_unit_interval(self):
        for T in (1, 10, 10_000):
            for n in (2, 5, 100):
                assert 0.0 < rate_offline(T, n) < 1.0


class TestAnytimeRate:
    def test_values(self):
        assert rate_anytime(1, 2) == pytest.approx(0.41628, abs=5e-6)
        assert rate_anytime(100, 2) == pytest.approx(0.041628, abs=5e-7)

    def test_ratio_identity(self):
        for t in (1, 7, 999):
            assert rate_anytime(t + 1, 5) / rate_anytime(t, 5) == pytest.approx(
                math.sqrt(t / (t + 1)), abs=1e-12)

    def test_strictly_decreasing(self):
        rates = [rate_anytime(t, 3) for t in range(1, 500)]
        assert all(b < a for a, b in zip(rates, rates[1:]))


class TestSparseRate:
    def test_values(self):
        # sqrt(ln 10 / 20) evaluated directly
        assert rate_sparse(5, 10, 2) == pytest.approx(0.3393070212, abs=1e-9)
        assert rate_sparse(1, 2, 1) == pytest.approx(0.58871, abs=5e-6)

    def test_full_set_reduces_to_anytime(self):
        for t in (1, 10, 100):
            assert rate_sparse(t, 6, 6) == rate_anytime(t, 6)

    def test_schedule_caps_inside_unit_interval(self):
        # raw formula exceeds 1 at t=1, m=1 once ln N > 2
        assert rate_sparse(1, 20, 1) > 1.0
        sched = SparseRate(20)
        assert 0.0 < sched.rate(1) < 1.0


class TestShiftingRate:
    def test_values(self):
        # sqrt(ln 2 / 4) * ln 4 evaluated directly
        assert rate_shifting(1, 2) == pytest.approx(0.5770828814, abs=1e-9)
        # sqrt(ln 2 / 400) * ln 103 evaluated directly
        assert rate_shifting(100, 2) == pytest.approx(0.1929332495, abs=1e-9)

    def test_at_most_three_fifths(self):
        for n in (2, 3, 10, 1000):
            for t in (1, 2, 3, 10, 100, 10_000):
                assert rate_shifting(t, n) <= 0.6

    def test_strictly_decreasing_exhaustive(self):
        t = np.arange(1, 1_000_001)
        r = np.sqrt(math.log(2) / (2 * 2 * t)) * np.log(t + 3)
        assert np.all(np.diff(r) < 0)


class TestSelfConfidentRate:
    def test_value(self):
        stats = SelfConfidentStats(C1=10.0, eta_prev=None)
        assert rate_self_confident(stats, 2, 1) == pytest.approx(0.37233, abs=5e-6)

    def test_zero_stat_clamps_to_cap(self):
        assert rate_self_confident(SelfConfidentStats(), 2, 1, eta_max=0.5) == 0.5

    def test_ratio_clamp(self):
        # raw next/current ratio 0.999 vs sqrt(400/401): the sqrt clamp wins
        eta_prev = 0.3
        c1 = 2 * math.log(2) / (0.999 * eta_prev) ** 2
        stats = SelfConfidentStats(C1=c1, eta_prev=eta_prev)
        got = rate_self_confident(stats, 2, 401, eta_max=0.5)
        assert got == pytest.approx(eta_prev * math.sqrt(400 / 401), rel=1e-12)
        assert got < eta_prev * 0.999

    def test_emitted_sequence_strictly_decreasing(self):
        rng = np.random.default_rng(3)
        sched = SelfConfidentRate(4)
        prev = sched.rate(1)
        for t in range(1, 300):
            p = rng.random(4)
            sched.observe(t, p, float(p.mean()))
            nxt = sched.rate(t + 1)
            assert 0.0 < nxt < prev
            prev = nxt

    def test_c1_increments_nonnegative(self):
        rng = np.random.default_rng(9)
        sched = SelfConfidentRate(5)
        last = 0.0
        for t in range(1, 200):
            p = rng.random(5)
            w = rng.dirichlet(np.ones(5))
            sched.observe(t, p, float(w @ p))
            assert sched.stats.C1 >= last - 1e-15
            last = sched.stats.C1


class TestBestSetTracker:
    def test_tie_between_uncounted_picks_lowest_index(self):
        tracker = BestSetTracker()
        tracker.update([0.3, 0.7, 0.7], 1)
        assert tracker.first_best == {1: 1}
        assert tracker.members(2) == {1}
        assert tracker.m(2) == 1

    def test_tie_prefers_already_counted(self):
        tracker = BestSetTracker()
        tracker.first_best[2] = 3
        tracker.update([0.3, 0.7, 0.7], 5)
        assert tracker.first_best == {2: 3}

    def test_m_starts_at_one(self):
        assert BestSetTracker().m(1) == 1

    def test_member_enters_strictly_after_first_best(self):
        tracker = BestSetTracker()
        tracker.update([0.1, 0.9], 4)
        assert tracker.members(4) == set()
        assert tracker.members(5) == {1}

    def test_monotone_growth(self):
        rng = np.random.default_rng(11)
        tracker = BestSetTracker()
        sizes = []
        for t in range(1, 100):
            tracker.update(rng.random(6), t)
            sizes.append(tracker.m(t + 1))
        assert all(b >= a for a, b in zip(sizes, sizes[1:]))
        assert sizes[-1] <= 6


class TestInverseT:
    def test_rate_identity(self):
        for c in (1.0, 1.5, 3.0):
            sched = InverseT(c)
            for t in range(2, 50):
                eta_t = sched.rate(t)
                assert eta_t / (1 - eta_t) == pytest.approx(sched.rate(t - 1), rel=1e-14)

    def test_no_correction(self):
        assert InverseT(2.0).applies_correction is False
        assert FixedRate(0.5).applies_correction is False


class TestEmittedRanges:
    @pytest.mark.parametrize("make", [
        lambda n: AnytimeRate(n),
        lambda n: SparseRate(n),
        lambda n: ShiftingRate(n),
        lambda n: SelfConfidentRate(n),
    ])
    @pytest.mark.parametrize("n", [2, 3, 20, 100])
    def test_online_schedules_emit_in_unit_interval_nonincreasing(self, make, n):
        rng = np.random.default_rng(n)
        sched = make(n)
        prev = sched.rate(1)
        assert 0.0 < prev < 1.0
        for t in range(1, 200):
            p = rng.random(n)
            sched.observe(t, p, float(p.mean()))
            r = sched.rate(t + 1)
            assert 0.0 < r < 1.0
            assert r <= prev + 1e-15
            prev = r


class TestParseSchedule:
    def test_round_trips(self):
        assert parse_schedule("fixed:0.5") == ScheduleConfig("fixed", 0.5)
        assert parse_schedule("fixed=0.5") == ScheduleConfig("fixed", 0.5)
        assert parse_schedule("inverse-t:3") == ScheduleConfig("inverse-t", 3.0)
        assert parse_schedule("anytime") == ScheduleConfig("anytime")
        assert parse_schedule("sparse") == ScheduleConfig("sparse")
        assert parse_schedule("shifting") == ScheduleConfig("shifting")
        assert parse_schedule("self-confident") == ScheduleConfig("self-confident")
        assert parse_schedule("self-confident:0.4") == ScheduleConfig("self-confident", 0.4)

    def test_builds(self):
        assert isinstance(parse_schedule("anytime").build(3), AnytimeRate)
        assert isinstance(parse_schedule("fixed:1.0").build(3), FixedRate)

    def test_errors(self):
        with pytest.raises(ValueError):
            parse_schedule("fixed")
        with pytest.raises(ValueError):
            parse_schedule("anytime:3")
        with pytest.raises(ValueError):
            parse_schedule("warp")
        with pytest.raises(ValueError):
            parse_schedule("fixed:1.5").build(2)
