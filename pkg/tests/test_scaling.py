import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from polarlab.polarization import DualLogValue, binomial_tail, enumerate_bec_spectrum
from polarlab.scaling import (
    DEFAULT_T_GRID,
    CapacityError,
    ScalingThreshold,
    converse_dominance_bound,
    empirical_scaling_curve,
    estimate_zero_mass,
    fraction_below,
    info_size,
    kolmogorov_distance,
    loglog_statistic,
    parse_f,
    q_function,
    q_inverse,
    rate_to_t,
    sampled_final_values,
    sampled_scaling_curve,
    union_bound_pe,
)


def q_quad(t) -> float:
    with mpmath.workdps(40):
        f = lambda x: mpmath.exp(-x * x / 2) / mpmath.sqrt(2 * mpmath.pi)
        return float(mpmath.quad(f, [t, t + 10, mpmath.inf]))


def rational_fraction(n: int, exponent: int) -> Fraction:
    """Share of BEC(1/2) leaves with v <= 2^-(2^exponent), in exact arithmetic."""
    leaves = [Fraction(1, 2)]
    for _ in range(n):
        leaves = [z for v in leaves for z in (2 * v - v * v, v * v)]
    bound = Fraction(1, 2 ** (2**exponent))
    return Fraction(sum(v <= bound for v in leaves), len(leaves))


class TestQ:
    def test_zero(self):
        assert q_function(0.0) == 0.5

    def test_one_against_quadrature(self):
        assert q_function(1.0) == pytest.approx(q_quad(1.0), abs=1e-15)
        assert q_function(1.0) == pytest.approx(0.15865525393145707, abs=1e-16)

    @pytest.mark.parametrize("t", [0.5, 1.7, 3.2])
    def test_symmetry(self, t):
        assert q_function(t) + q_function(-t) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("t", [-8.0, -3.3, 2.5, 6.0, 8.0])
    def test_grid_points(self, t):
        assert abs(q_function(t) - q_quad(t)) <= 1e-12

    def test_decreasing(self):
        vals = [q_function(t) for t in np.linspace(-6, 6, 241)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_inverse_half(self):
        assert q_inverse(0.5) == 0.0

    def test_inverse_quarter(self):
        with mpmath.workdps(30):
            ref = mpmath.findroot(lambda t: mpmath.erfc(t / mpmath.sqrt(2)) / 2 - mpmath.mpf(1) / 4, 0.7)
        assert q_inverse(0.25) == pytest.approx(float(ref), abs=1e-12)
        assert q_inverse(0.25) == pytest.approx(0.6744897501960817, abs=1e-12)

    @given(st.floats(-5.5, 6))
    def test_roundtrip(self, t):
        assert q_inverse(q_function(t)) == pytest.approx(t, abs=1e-9)

    @given(st.floats(-8, -5.5))
    def test_roundtrip_at_resolution_floor(self, t):
        # Q(t) is within 1e-8 of 1 here; one ulp of it spans ulp / phi(t) in t
        phi = math.exp(-t * t / 2) / math.sqrt(2 * math.pi)
        assert abs(q_inverse(q_function(t)) - t) <= math.ulp(q_function(t)) / phi

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.2, 1.5])
    def test_inverse_rejects(self, p):
        with pytest.raises(ValueError):
            q_inverse(p)


class TestLoglog:
    @pytest.mark.parametrize("log2_v,expected", [(-(2.0**8), 8.0), (-1.0, 0.0), (-2.0, 1.0)])
    def test_values(self, log2_v, expected):
        assert loglog_statistic(DualLogValue.from_log2(log2_v)) == expected

    @pytest.mark.parametrize("v", [0.0, 1.0])
    def test_undefined(self, v):
        assert loglog_statistic(DualLogValue.from_value(v)) is None


class TestF:
    def test_zero(self):
        assert parse_f("0")(100) == 0.0 and parse_f(None)(5) == 0.0

    def test_log(self):
        assert parse_f("log:1.5")(16) == 6.0

    def test_pow(self):
        assert parse_f("pow:2:0.25")(16) == 4.0

    @pytest.mark.parametrize("spec", ["pow:1:0.5", "log", "exp:1", "pow:x:0.1"])
    def test_rejects(self, spec):
        with pytest.raises(ValueError):
            parse_f(spec)


class TestCurve:
    def test_threshold(self):
        thr = ScalingThreshold(16, 1.0, 0.5)
        assert thr.exponent == 10.5
        assert thr.log_threshold == -(2.0**10.5) * math.log(2)

    def test_level_one(self):
        spec = enumerate_bec_spectrum(0.5, 1)
        curve = empirical_scaling_curve(spec, [1.0])
        assert curve.points == ((1.0, 0.5, q_function(1.0) * 0.5),)

    def test_negative_exponent_counts_below_half(self):
        spec = enumerate_bec_spectrum(0.5, 8)
        curve = empirical_scaling_curve(spec, [-3 * math.sqrt(8)])
        assert curve.points[0][1] == np.mean(spec.values <= 0.5)

    @pytest.mark.parametrize("n,t", [(6, 0.0), (8, 0.0), (10, 0.0), (8, -1.5), (10, 1.2)])
    def test_against_rational_oracle(self, n, t):
        e = ScalingThreshold(n, t).exponent
        spec = enumerate_bec_spectrum(0.5, n)
        if e == int(e):
            assert fraction_below(spec.log_v, e) == float(rational_fraction(n, int(e)))
        lo, hi = float(rational_fraction(n, math.ceil(e))), float(rational_fraction(n, math.floor(e)))
        assert lo <= fraction_below(spec.log_v, e) <= hi

    def test_frozen_fractions(self):
        # from the rational oracle above
        spec = enumerate_bec_spectrum(0.5, 10)
        assert fraction_below(spec.log_v, 5) == 203 / 1024

    def test_monotone_in_t(self):
        spec = enumerate_bec_spectrum(0.5, 14)
        fracs = [p[1] for p in empirical_scaling_curve(spec, np.linspace(-3, 3, 61)).points]
        assert all(a >= b for a, b in zip(fracs, fracs[1:]))

    def test_default_grid(self):
        assert DEFAULT_T_GRID == (-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0)

    def test_targets_use_capacity(self):
        curve = empirical_scaling_curve(enumerate_bec_spectrum(0.2, 6), [0.0])
        assert curve.points[0][2] == pytest.approx(0.4)
        assert curve.deviations == [curve.points[0][1] - curve.points[0][2]]

    def test_kolmogorov_trend(self):
        d10 = kolmogorov_distance(enumerate_bec_spectrum(0.5, 10))
        d20 = kolmogorov_distance(enumerate_bec_spectrum(0.5, 20))
        assert d20 < d10


class TestConverse:
    def test_offset_vanishes(self):
        for e in range(9):
            assert converse_dominance_bound(0.5, 8, e) == binomial_tail(8, e)

    def test_nonpositive_exponent(self):
        assert converse_dominance_bound(0.5, 10, 0) == 1.0
        assert converse_dominance_bound(0.3, 10, -2.0) == 1.0

    @pytest.mark.parametrize("eps0", [0.0, 1.0])
    def test_rejects(self, eps0):
        with pytest.raises(ValueError):
            converse_dominance_bound(eps0, 4, 1)

    @pytest.mark.parametrize("eps", [0.5, 0.2, 0.8])
    @pytest.mark.parametrize("n", [6, 14, 20])
    def test_dominance(self, eps, n):
        spec = enumerate_bec_spectrum(eps, n)
        for e in np.arange(0, n + 0.01, 0.5):
            assert fraction_below(spec.log_v, e) <= converse_dominance_bound(eps, n, e)


class TestRate:
    def test_half_capacity(self):
        assert rate_to_t(0.25, 0.5) == 0.0

    def test_quarter(self):
        assert rate_to_t(0.125, 0.5) == pytest.approx(0.6744897501960817, abs=1e-12)

    def test_monotone(self):
        ts = [rate_to_t(r, 0.5) for r in np.linspace(0.01, 0.499, 30)]
        assert all(a > b for a, b in zip(ts, ts[1:]))
        assert ts[-1] < -2

    @pytest.mark.parametrize("rate", [0.5, 0.7, 0.0, -0.1])
    def test_capacity_violation(self, rate):
        with pytest.raises(CapacityError, match="I\\(W\\)"):
            rate_to_t(rate, 0.5)


class TestUnionBound:
    def test_info_size(self):
        assert info_size(10, 0.25) == 256
        assert info_size(3, 0.3) == 3
        assert info_size(4, 1e-9) == 1
        assert info_size(2, 1.0) == 4

    def test_single(self):
        spec = enumerate_bec_spectrum(0.5, 6)
        ub = union_bound_pe(spec, 1 / 64)
        assert ub.k == 1
        assert ub.log_sum == spec.log_v.min() == ub.log_nr_gamma

    @given(st.floats(0.3, 0.7), st.floats(0.01, 1.0))
    def test_sum_below_nr_gamma(self, eps, rate):
        ub = union_bound_pe(enumerate_bec_spectrum(eps, 8), rate)
        assert ub.log_sum <= ub.log_nr_gamma + 1e-12

    def test_matches_direct_sum(self):
        spec = enumerate_bec_spectrum(0.5, 10)
        ub = union_bound_pe(spec, 0.25)
        direct = math.fsum(sorted(spec.values)[:256])
        assert ub.log_sum == pytest.approx(math.log(direct), rel=1e-12)
        assert ub.log2_sum == pytest.approx(math.log2(direct), rel=1e-12)


class TestSampling:
    def test_worker_independent(self):
        a = sampled_final_values(0.5, 16, 20_000, seed=1, workers=1)
        b = sampled_final_values(0.5, 16, 20_000, seed=1, workers=3)
        np.testing.assert_array_equal(a, b)

    def test_agrees_with_exhaustive(self):
        n, paths = 14, 40_000
        final = sampled_final_values(0.5, n, paths, seed=2)
        exact = fraction_below(enumerate_bec_spectrum(0.5, n).log_v, n / 2)
        got = fraction_below(final, n / 2)
        assert abs(got - exact) < 4 * math.sqrt(exact * (1 - exact) / paths)

    def test_zero_mass_estimate(self):
        final = sampled_final_values(0.5, 30, 20_000, seed=3)
        assert abs(estimate_zero_mass(final) - 0.5) < 0.06

    def test_sampled_curve(self):
        c = sampled_scaling_curve(0.5, 12, [0.0], 8192, seed=4)
        assert c.n == 12 and 0.1 < c.points[0][1] < 0.3
