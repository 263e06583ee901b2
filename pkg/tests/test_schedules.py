import math

import numpy as np
import pytest

from lrlab.errors import InfeasibleError, InvalidParameterError, ParseError
from lrlab.schedules import (
    allocate_delta_numeric,
    allocate_delta_sqrt,
    build_constant,
    build_cosine,
    build_cosine_power,
    build_eigencurve,
    build_elastic_step_decay,
    build_exponential,
    build_general_step_decay,
    build_inverse_time,
    build_inverse_time_practical,
    build_per_coordinate,
    build_step_decay_ge,
    read_schedule_csv,
    sqrt_allocation_real,
    variance_surrogate,
    write_schedule_csv,
)
from lrlab.spectrum import DyadicBuckets, EigenSpectrum, bucketize


def buckets_of(values):
    return bucketize(EigenSpectrum.from_values(values))


def random_buckets(rng):
    i_max = int(rng.integers(1, 12))
    s = rng.uniform(0.0, 30.0, i_max)
    s[int(rng.integers(0, i_max))] += 1.0  # at least one nonempty
    mu = float(rng.uniform(0.01, 5.0))
    return DyadicBuckets(mu=mu, L=mu * 2.0**i_max, s=s)


class TestAllocateSqrt:
    def test_example_allocation(self):
        b = DyadicBuckets(mu=1.0, L=8.0, s=np.array([4.0, 1.0, 1.0]))
        assert allocate_delta_sqrt(b, 60).tolist() == [30, 15, 15]

    def test_single_bucket_gets_everything(self):
        b = DyadicBuckets(mu=1.0, L=1.0, s=np.array([7.0]))
        assert allocate_delta_sqrt(b, 123).tolist() == [123]

    def test_zero_weight_bucket_gets_zero(self):
        b = DyadicBuckets(mu=1.0, L=8.0, s=np.array([1.0, 0.0, 1.0]))
        assert allocate_delta_sqrt(b, 10).tolist() == [5, 0, 5]

    def test_sum_is_exact_and_nonempty_floor(self, rng):
        for _ in range(200):
            b = random_buckets(rng)
            nonempty = int(np.count_nonzero(b.s > 0))
            T = int(rng.integers(nonempty, 2000))
            delta = allocate_delta_sqrt(b, T)
            assert int(delta.sum()) == T
            assert np.all(delta[b.s > 0] >= 1)
            assert np.all(delta[b.s == 0] == 0)

    def test_equal_masses_get_equal_real_shares(self):
        b = DyadicBuckets(mu=1.0, L=16.0, s=np.array([3.0, 5.0, 3.0, 5.0]))
        real = sqrt_allocation_real(b, 97)
        assert real[0] == real[2]
        assert real[1] == real[3]

    def test_infeasible_horizon(self):
        b = DyadicBuckets(mu=1.0, L=8.0, s=np.array([1.0, 1.0, 1.0]))
        with pytest.raises(InfeasibleError):
            allocate_delta_sqrt(b, 2)


class TestAllocateNumeric:
    def test_single_bucket_matches_sqrt(self):
        b = DyadicBuckets(mu=1.0, L=1.0, s=np.array([5.0]))
        assert allocate_delta_numeric(b, 50).tolist() == [50]

    def test_never_worse_than_sqrt(self, rng):
        for _ in range(25):
            b = random_buckets(rng)
            nonempty = int(np.count_nonzero(b.s > 0))
            T = int(rng.integers(max(nonempty, 5), 500))
            vn = variance_surrogate(b, allocate_delta_numeric(b, T))
            vs = variance_surrogate(b, allocate_delta_sqrt(b, T))
            assert vn <= vs + 1e-12

    def test_skewed_worked_example(self):
        # 99% of the mass in the first of 100 buckets, the rest uniform
        d = 1000.0
        s = np.full(100, 0.01 * d / 99.0)
        s[0] = 0.99 * d
        b = DyadicBuckets(mu=1.0, L=2.0**100, s=s)
        T = 5000
        vn = variance_surrogate(b, allocate_delta_numeric(b, T))
        vs = variance_surrogate(b, allocate_delta_sqrt(b, T))
        assert vn <= vs + 1e-12


class TestEigencurve:
    def test_hand_worked_curve(self):
        b = buckets_of([1.0, 1.0, 4.0, 4.0])
        sched = build_eigencurve(b, 4, [2, 2])
        assert sched.materialize().tolist() == [0.25, 0.2, 1.0 / 6.0, 0.125]

    def test_single_bucket_equals_inverse_time(self):
        b = buckets_of([2.0, 2.0, 2.0])
        sched = build_eigencurve(b, 50, [50])
        inv = build_inverse_time(50, 2.0, 2.0)
        assert sched.materialize().tolist() == inv.materialize().tolist()

    def test_strictly_decreasing(self, rng):
        for _ in range(50):
            b = random_buckets(rng)
            nonempty = int(np.count_nonzero(b.s > 0))
            T = int(rng.integers(max(nonempty, 4), 800))
            sched = build_eigencurve(b, T, allocate_delta_sqrt(b, T))
            vals = sched.materialize()
            assert np.all(np.diff(vals) < 0) or T == 1

    def test_boundary_rates_hit_alpha_bar(self, rng):
        for _ in range(50):
            b = random_buckets(rng)
            nonempty = int(np.count_nonzero(b.s > 0))
            T = int(rng.integers(max(nonempty, 4), 800))
            sched = build_eigencurve(b, T, allocate_delta_sqrt(b, T))
            pars = sched.params
            for i, t_i in enumerate(pars.t_boundaries[:-1]):
                assert sched.rate(t_i) == 1.0 / pars.alpha_bar[i]

    def test_dominated_by_inverse_time_rate(self, rng):
        # unscaled curve never exceeds 1/(L + mu t)
        for _ in range(120):
            b = random_buckets(rng)
            nonempty = int(np.count_nonzero(b.s > 0))
            T = int(rng.integers(max(nonempty, 4), 600))
            vals = build_eigencurve(b, T, allocate_delta_sqrt(b, T)).materialize()
            ref = 1.0 / (b.L + b.mu * np.arange(T))
            assert np.all(vals <= ref * (1.0 + 1e-12))

    def test_practical_form_matches_theoretical_at_defaults(self):
        b = buckets_of([1.0, 3.0, 9.0, 27.0])
        T = 100
        delta = allocate_delta_sqrt(b, T)
        theo = build_eigencurve(b, T, delta).materialize()
        prac = build_eigencurve(b, T, delta, eta0=1.0 / b.L, beta=2.0).materialize()
        assert prac == pytest.approx(theo, rel=1e-12)

    def test_eta_min_rescale_endpoints(self):
        b = buckets_of([1.0, 3.0, 9.0, 27.0])
        T = 64
        sched = build_eigencurve(b, T, allocate_delta_sqrt(b, T), eta0=0.1, beta=2.0, eta_min=0.001)
        vals = sched.materialize()
        assert vals[0] == 0.1
        assert vals[-1] == 0.001
        assert np.all(np.diff(vals) < 0)

    def test_rejects_bad_inputs(self):
        b = buckets_of([1.0, 4.0])
        with pytest.raises(InvalidParameterError):
            build_eigencurve(b, 10, [4, 4])  # sums to 8
        with pytest.raises(InvalidParameterError):
            build_eigencurve(b, 10, [5, 5], eta0=0.1, eta_min=0.2)
        with pytest.raises(InvalidParameterError):
            build_eigencurve(b, 10, [5, 5], eta0=0.1, beta=1.0)


class TestInverseTime:
    def test_rate_values(self):
        sched = build_inverse_time(3, 2.0, 1.0)
        assert sched.rate(0) == 0.5
        assert sched.rate(2) == 0.25

    def test_kappa_one(self):
        sched = build_inverse_time(4, 3.0, 3.0)
        assert sched.materialize().tolist() == [1 / 3, 1 / 6, 1 / 9, 1 / 12]

    def test_practical_gamma(self):
        sched = build_inverse_time_practical(101, 0.1, 0.001)
        assert sched.params["gamma"] == pytest.approx(9.9, rel=1e-15)
        assert sched.rate(100) == pytest.approx(0.001, rel=1e-12)
        assert sched.rate(0) == 0.1

    def test_practical_t1_rejected(self):
        with pytest.raises(InvalidParameterError):
            build_inverse_time_practical(1, 0.1, 0.001)


class TestStepDecayGe:
    def test_t16(self):
        sched = build_step_decay_ge(16, 0.1)
        vals = sched.materialize()
        assert vals[0] == 0.0
        assert vals[1:5].tolist() == [0.1] * 4
        assert vals[5:9].tolist() == [0.05] * 4
        assert vals[9:13].tolist() == [0.025] * 4
        assert vals[13:].tolist() == [0.0125] * 3

    def test_t2_minimal(self):
        vals = build_step_decay_ge(2, 0.3).materialize()
        assert vals.tolist() == [0.0, 0.3]

    def test_t12_three_phases(self):
        vals = build_step_decay_ge(12, 1.0).materialize()
        assert vals[0] == 0.0
        assert sorted(set(vals[1:].tolist()), reverse=True) == [1.0, 0.5, 0.25]
        assert vals[1:5].tolist() == [1.0] * 4
        assert vals[5:9].tolist() == [0.5] * 4
        assert vals[9:].tolist() == [0.25] * 3

    def test_halving_is_exact(self):
        vals = build_step_decay_ge(10_000, 0.37).materialize()
        uniq = sorted(set(vals[1:].tolist()), reverse=True)
        for a, b in zip(uniq, uniq[1:]):
            assert b == a / 2.0


class TestGeneralStepDecay:
    def test_example(self):
        vals = build_general_step_decay(9, 1.0, 3, 10.0).materialize()
        assert vals.tolist() == [1.0] * 3 + [0.1] * 3 + [0.01] * 3

    def test_single_interval_constant(self):
        vals = build_general_step_decay(7, 0.5, 1, 10.0).materialize()
        assert vals.tolist() == [0.5] * 7

    def test_largest_remainder_lengths(self):
        vals = build_general_step_decay(10, 1.0, 3, 2.0).materialize()
        lengths = [int(np.sum(vals == v)) for v in (1.0, 0.5, 0.25)]
        assert lengths == [4, 3, 3]

    def test_too_many_intervals(self):
        with pytest.raises(InvalidParameterError):
            build_general_step_decay(3, 1.0, 4, 2.0)


class TestCosineFamilies:
    def test_endpoints(self):
        sched = build_cosine(11, 1.0, 0.0)
        assert sched.rate(0) == 1.0
        assert sched.rate(10) == 0.0 + 0.0  # eta_min exactly
        assert sched.rate(5) == 0.5

    def test_t1_constant(self):
        assert build_cosine(1, 0.7, 0.0).materialize().tolist() == [0.7]

    def test_power_reduces_to_cosine_bitwise(self):
        a = build_cosine(57, 0.3, 0.0001).materialize()
        b = build_cosine_power(57, 0.3, 0.0001, 1.0).materialize()
        assert a.tolist() == b.tolist()

    def test_power_two_midpoint(self):
        sched = build_cosine_power(11, 1.0, 0.0, 2.0)
        assert sched.rate(5) == 0.25
        assert sched.rate(0) == 1.0
        assert sched.rate(10) == 0.0 + 0.0

    def test_cosine_positive_body(self):
        vals = build_cosine(100, 0.5, 1e-5).materialize()
        assert np.all(vals > 0)


class TestElasticStepDecay:
    def test_worked_example(self):
        vals = build_elastic_step_decay(8, 1.0, 0.5).materialize()
        assert vals.tolist() == [1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.25, 0.125]

    def test_first_interval_covers_everything(self):
        # (1 - r) T > T - 1 keeps every iteration in the first interval
        vals = build_elastic_step_decay(5, 0.2, 0.1).materialize()
        assert vals.tolist() == [0.2] * 5

    def test_nonincreasing(self, rng):
        for _ in range(60):
            T = int(rng.integers(1, 500))
            r = float(rng.uniform(0.05, 0.95))
            vals = build_elastic_step_decay(T, 1.0, r).materialize()
            assert np.all(np.diff(vals) <= 0)
            assert np.all(vals > 0)


class TestExponentialConstant:
    def test_exponential_example(self):
        vals = build_exponential(3, 1.0, 0.01).materialize()
        assert vals == pytest.approx([1.0, 0.1, 0.01], rel=1e-12)

    def test_exponential_equal_bounds_constant(self):
        vals = build_exponential(5, 0.2, 0.2).materialize()
        assert vals.tolist() == [0.2] * 5

    def test_exponential_t1_rejected(self):
        with pytest.raises(InvalidParameterError):
            build_exponential(1, 1.0, 0.1)

    def test_constant(self):
        vals = build_constant(4, 0.05).materialize()
        assert vals.tolist() == [0.05] * 4


class TestPerCoordinate:
    def test_rates(self):
        pc = build_per_coordinate([2.0, 1.0], 10)
        assert pc.rate(0, 0) == 0.5
        assert pc.rate(3, 1) == 0.25

    def test_materialize_matches_rate(self):
        pc = build_per_coordinate([2.0, 0.5], 6)
        mat = pc.materialize()
        for t in range(6):
            for j in range(2):
                assert mat[t, j] == pc.rate(t, j)


class TestScheduleContract:
    def test_materialize_matches_rate_bitwise(self, rng):
        b = buckets_of(rng.uniform(0.5, 50.0, 12))
        T = 37
        for sched in [
            build_eigencurve(b, T, allocate_delta_sqrt(b, T)),
            build_cosine(T, 0.1, 0.001),
            build_step_decay_ge(T, 0.1),
            build_elastic_step_decay(T, 0.1, 0.4),
        ]:
            vals = sched.materialize()
            assert len(vals) == T
            for t in range(T):
                assert vals[t] == sched.rate(t)

    def test_out_of_range_rejected(self):
        sched = build_constant(3, 0.1)
        with pytest.raises(InvalidParameterError):
            sched.rate(3)

    def test_positivity_except_ge_zero_head(self, rng):
        T = 41
        b = buckets_of(rng.uniform(0.5, 50.0, 8))
        for sched in [
            build_constant(T, 0.2),
            build_inverse_time(T, 4.0, 1.0),
            build_eigencurve(b, T, allocate_delta_sqrt(b, T)),
            build_exponential(T, 1.0, 1e-6),
        ]:
            assert np.all(sched.materialize() > 0)
        ge = build_step_decay_ge(T, 0.1).materialize()
        assert ge[0] == 0.0 and np.all(ge[1:] > 0)


class TestCsvRoundtrip:
    def test_export_import_bit_exact(self, tmp_path, rng):
        b = buckets_of(rng.uniform(0.5, 50.0, 10))
        sched = build_eigencurve(b, 64, allocate_delta_sqrt(b, 64))
        path = tmp_path / "curve.csv"
        write_schedule_csv(sched, path, header_lines=["test header"])
        back = read_schedule_csv(path)
        assert back.materialize().tolist() == sched.materialize().tolist()

    def test_ge_zero_head_roundtrips(self, tmp_path):
        sched = build_step_decay_ge(16, 0.1)
        path = tmp_path / "ge.csv"
        write_schedule_csv(sched, path)
        back = read_schedule_csv(path)
        assert back.materialize().tolist() == sched.materialize().tolist()

    def test_malformed_rows(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,lr\n0,0.1\n2,0.2\n")
        with pytest.raises(ParseError):
            read_schedule_csv(path)
        path.write_text("lr only\n")
        with pytest.raises(ParseError):
            read_schedule_csv(path)
