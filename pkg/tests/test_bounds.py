import math

import numpy as np
import pytest

from lrlab.bounds import (
    corollary1_bound,
    extra_term_table,
    lemma1_bound,
    power_law_constant,
    prop1_bound,
    prop2_bound,
    sqrt_mass_ratio,
    step_decay_lower_bound,
    theorem1_bound,
)
from lrlab.errors import InfeasibleError, InvalidParameterError
from lrlab.quadsim import (
    QuadraticProblem,
    exact_expected_loss,
    exact_expected_loss_per_coordinate_schedule,
)
from lrlab.schedules import allocate_delta_sqrt, build_eigencurve, build_inverse_time
from lrlab.spectrum import DyadicBuckets, EigenSpectrum, PowerLawSpec, bucketize, power_law_buckets


class TestLemma1:
    def test_single_bucket_variance(self):
        b = DyadicBuckets(mu=1.0, L=1.0, s=np.array([6.0]))
        T, sigma = 100, 0.5
        rep = lemma1_bound(b, [T], T, f0_gap=0.0, sigma=sigma)
        want = 7.5 * sigma**2 * 1.0 * 2.0 * 6.0 / (1.0 + 1.0 * T)
        assert rep.variance_bound == pytest.approx(want, rel=1e-15)
        assert rep.bias_bound == 0.0

    def test_sigma_zero(self):
        b = DyadicBuckets(mu=1.0, L=4.0, s=np.array([2.0, 2.0]))
        rep = lemma1_bound(b, [5, 5], 10, f0_gap=1.0, sigma=0.0)
        assert rep.variance_bound == 0.0
        assert rep.total_bound == rep.bias_bound > 0

    def test_all_zero(self):
        b = DyadicBuckets(mu=1.0, L=4.0, s=np.array([2.0, 2.0]))
        rep = lemma1_bound(b, [5, 5], 10, f0_gap=0.0, sigma=0.0)
        assert rep.total_bound == 0.0

    def test_empty_first_phase_is_an_error(self):
        b = DyadicBuckets(mu=1.0, L=4.0, s=np.array([2.0, 2.0]))
        with pytest.raises(InfeasibleError):
            lemma1_bound(b, [0, 10], 10, f0_gap=1.0, sigma=1.0)


class TestTheorem1:
    def test_skewed_spectrum_constant(self):
        # 99% of the mass in the first bucket, the rest uniform over 99 more
        d = 1.0
        s = np.full(100, 0.01 * d / 99.0)
        s[0] = 0.99 * d
        b = DyadicBuckets(mu=1.0, L=2.0**100, s=s)
        ratio = sqrt_mass_ratio(b)
        explicit = (math.sqrt(0.99) + 99.0 * math.sqrt(0.01 / 99.0)) ** 2
        assert ratio == pytest.approx(explicit, rel=1e-12)
        assert ratio < 4.0
        assert ratio == pytest.approx(3.96, abs=0.005)

    def test_single_bucket(self):
        b = DyadicBuckets(mu=2.0, L=2.0, s=np.array([8.0]))
        rep = theorem1_bound(b, T=100, f0_gap=0.0, sigma=1.0)
        assert rep.variance_bound == pytest.approx(15.0 * 8.0 / 100.0, rel=1e-15)
        assert rep.extra_term == pytest.approx(15.0, rel=1e-15)

    def test_uniform_masses_match_log_kappa_form(self):
        # s_i = d / log2(kappa) maximizes the variance term
        log_kappa = 8
        d = 64.0
        s = np.full(log_kappa, d / log_kappa)
        b = DyadicBuckets(mu=1.0, L=2.0**log_kappa, s=s)
        rep = theorem1_bound(b, T=1000, f0_gap=0.0, sigma=2.0)
        want = 15.0 * d * log_kappa * 4.0 / 1000.0
        assert rep.variance_bound == pytest.approx(want, rel=1e-12)

    def test_empty_first_bucket_rejected(self):
        b = DyadicBuckets(mu=1.0, L=4.0, s=np.array([0.0, 4.0]))
        with pytest.raises(InvalidParameterError):
            theorem1_bound(b, 10, 1.0, 1.0)

    def test_extra_term_range(self, rng):
        # d <= (sum sqrt s)^2 <= i_max * d
        for _ in range(100):
            i_max = int(rng.integers(1, 20))
            s = rng.uniform(0.0, 10.0, i_max)
            s[0] += 0.5
            b = DyadicBuckets(mu=1.0, L=2.0**i_max, s=s)
            val = sqrt_mass_ratio(b) * b.d
            assert b.d * (1 - 1e-12) <= val <= i_max * b.d * (1 + 1e-12)


class TestPowerLawConstant:
    def test_alpha3_exact(self):
        assert power_law_constant(3.0) == 60.0

    def test_alpha2(self):
        assert power_law_constant(2.0) == pytest.approx(174.8528137423857, rel=1e-12)

    def test_limit_is_15(self):
        assert power_law_constant(50.0) == pytest.approx(15.0, rel=0.01)

    def test_strictly_decreasing(self):
        grid = [1.1, 1.5, 2.0, 3.0, 5.0, 10.0, 50.0]
        vals = [power_law_constant(a) for a in grid]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_domain(self):
        with pytest.raises(InvalidParameterError):
            power_law_constant(1.0)


class TestCorollary1:
    def test_zero_inputs(self):
        pl = PowerLawSpec(alpha=2.0, mu=1.0, L=16.0)
        rep = corollary1_bound(pl, d=10, T=100, f0_gap=0.0, sigma=0.0)
        assert rep.total_bound == 0.0

    def test_plug_in_value(self):
        pl = PowerLawSpec(alpha=3.0, mu=1.0, L=64.0)
        rep = corollary1_bound(pl, d=100, T=10**4, f0_gap=0.0, sigma=1.0)
        assert rep.total_bound == pytest.approx(60.0 * 100.0 / 10**4, rel=1e-12)

    def test_dominates_theorem1_on_power_law_buckets(self):
        for alpha in (1.5, 2.0, 3.0):
            for kappa in (4.0, 64.0, 1024.0):
                pl = PowerLawSpec(alpha=alpha, mu=1.0, L=kappa)
                d = 200.0
                buckets = power_law_buckets(pl, d)
                for f0, sigma in ((1.0, 1.0), (0.0, 2.0), (3.0, 0.0)):
                    t1 = theorem1_bound(buckets, 5000, f0, sigma)
                    c1 = corollary1_bound(pl, d, 5000, f0, sigma)
                    assert c1.total_bound >= t1.total_bound * (1 - 1e-12)

    def test_small_kappa_uses_15(self):
        pl = PowerLawSpec(alpha=2.0, mu=1.0, L=1.5)
        rep = corollary1_bound(pl, d=10, T=100, f0_gap=0.0, sigma=1.0)
        assert rep.extra_term == 15.0


class TestPropositionBounds:
    def test_exact_per_coordinate_below_bound(self, rng):
        for _ in range(50):
            d = int(rng.integers(1, 10))
            lam = rng.uniform(0.1, 30.0, d)
            off = rng.normal(0, 1.5, d)
            sigma = float(rng.uniform(0, 2))
            T = int(rng.integers(1, 2000))
            prob = QuadraticProblem(lam, off, sigma)
            got = exact_expected_loss_per_coordinate_schedule(prob, T).total
            assert got <= prop1_bound(prob, T) * (1 + 1e-9)

    def test_exact_inverse_time_below_bound(self, rng):
        for _ in range(50):
            d = int(rng.integers(1, 10))
            lam = rng.uniform(0.1, 30.0, d)
            off = rng.normal(0, 1.5, d)
            sigma = float(rng.uniform(0, 2))
            T = int(rng.integers(1, 2000))
            prob = QuadraticProblem(lam, off, sigma)
            sched = build_inverse_time(T, lam.max(), lam.min())
            got = exact_expected_loss(prob, sched).total
            assert got <= prop2_bound(prob, T)

    def test_bounds_vanish_noiseless_large_t(self):
        prob = QuadraticProblem(np.array([1.0, 3.0]), np.array([1.0, 1.0]), 0.0)
        assert prop1_bound(prob, 10**6) < 1e-10
        assert prop2_bound(prob, 10**6) < 1e-10

    def test_per_coordinate_beats_inverse_time_on_skewed_spectra(self, rng):
        # the coordinate-wise rates win once the spectrum is spread out
        wins = 0
        for _ in range(50):
            d = int(rng.integers(2, 10))
            mu = float(rng.uniform(0.05, 1.0))
            kappa = float(rng.uniform(10.0, 1000.0))
            lam = np.concatenate([[mu, mu * kappa], mu * kappa ** rng.uniform(0, 1, d - 2)])
            off = rng.normal(0, 1.0, d)
            sigma = float(rng.uniform(0.1, 1.0))
            T = int(rng.integers(100, 2000))
            prob = QuadraticProblem(lam, off, sigma)
            pc = exact_expected_loss_per_coordinate_schedule(prob, T).total
            inv = exact_expected_loss(prob, build_inverse_time(T, lam.max(), lam.min())).total
            wins += pc <= inv
        assert wins == 50


class TestStepDecayLowerBound:
    def test_big_horizon_value(self):
        lam = np.array([1.0, 2.0, 4.0, 8.0])
        off = np.ones(4)
        ok, val = step_decay_lower_bound(4, 1.0, 2**21, 1.0 / 8.0, lam, off)
        assert ok
        assert val == pytest.approx(4 * 21 / (1024 * 2**21), rel=1e-12)

    def test_short_horizon_not_ok(self):
        lam = np.array([1.0, 2.0])
        off = np.array([1e-8, 1e-8])  # tiny mass, huge sigma: both routes fail
        ok, _ = step_decay_lower_bound(2, 1e3, 100, 1e-6, lam, off)
        assert not ok

    def test_alternative_route(self):
        # zero offsets kill the min-mass route; the 1/(8 eta1 mu) route still passes
        lam = np.array([1.0, 2.0])
        off = np.zeros(2)
        ok, _ = step_decay_lower_bound(2, 1.0, 2**21, 0.5, lam, off)
        assert ok

    def test_eta1_domain(self):
        lam = np.array([1.0, 2.0])
        with pytest.raises(InvalidParameterError):
            step_decay_lower_bound(2, 1.0, 1000, 1.0, lam, np.ones(2))


class TestExtraTermTable:
    def test_single_point_spectrum(self):
        b = bucketize(EigenSpectrum.from_values([2.0, 2.0, 2.0]))
        rows = extra_term_table([("flat", b)], T=1000)
        assert rows[0]["eigencurve"] == pytest.approx(1.0, rel=1e-15)
        assert rows[0]["inverse_time"] == 1.0
        assert rows[0]["minimax"] == 1.0
        assert rows[0]["step_decay"] == pytest.approx(math.log(1000), rel=1e-15)

    def test_two_even_buckets(self):
        b = DyadicBuckets(mu=1.0, L=4.0, s=np.array([5.0, 5.0]))
        rows = extra_term_table([("even", b)], T=100)
        assert rows[0]["eigencurve"] == pytest.approx(2.0, rel=1e-14)

    def test_power_law_stays_small(self):
        pl = PowerLawSpec(alpha=2.0, mu=1.0, L=1024.0)
        b = power_law_buckets(pl, 500.0)
        rows = extra_term_table([("pl", b)], T=10**4)
        assert rows[0]["eigencurve"] < rows[0]["inverse_time"] / 50.0


class TestSoundnessFuzz:
    def test_exact_below_both_bounds(self, rng):
        # random spectra, horizons and noise levels against the schedule
        # actually built from the square-root allocation
        for _ in range(200):
            d = int(rng.integers(1, 33))
            kappa = 10.0 ** rng.uniform(0, 4)
            mu = 10.0 ** rng.uniform(-2, 1)
            if d >= 2:
                lam = np.concatenate([[mu, mu * kappa], mu * kappa ** rng.uniform(0, 1, d - 2)])
            else:
                lam = np.array([mu])
            off = rng.normal(0, 2, lam.size)
            sigma = float(rng.uniform(0, 2))
            buckets = bucketize(EigenSpectrum.from_values(lam))
            nonempty = int(np.count_nonzero(buckets.s > 0))
            T = int(rng.integers(max(nonempty, 10), 5001))
            delta = allocate_delta_sqrt(buckets, T)
            sched = build_eigencurve(buckets, T, delta)
            prob = QuadraticProblem(lam, off, sigma)
            got = exact_expected_loss(prob, sched).total
            f0 = prob.f0_gap
            assert got <= lemma1_bound(buckets, delta, T, f0, sigma).total_bound * (1 + 1e-12)
            assert got <= theorem1_bound(buckets, T, f0, sigma).total_bound * (1 + 1e-12)
