"""Frechet limit machinery: ECDFs, the exact enumeration oracle, the rate
probe, and the mixing-decay estimator."""

import math
from fractions import Fraction

import mpmath
import pytest

from thetaexp.expansion import DigitSeq, TRUNCATED, ThetaParams
from thetaexp.measure import mixing_rate, tail_p
from thetaexp.evt import (
    EmpiricalCDF,
    digit_eq,
    digit_ge,
    envelope_constant,
    exact_max_law,
    fit_log_slope,
    frechet_cdf,
    mixing_probe,
    rate_probe,
    scaled_max_law,
    scaled_maxima,
)
from thetaexp.simulate import SimConfig, Trajectory, ensemble_map

P1 = ThetaParams(1)


def _trajectories(maxima, n_digits, m=1):
    params = ThetaParams(m)
    out = []
    for L in maxima:
        digits = (m,) * (n_digits - 1) + (L,)
        seq = DigitSeq(params, digits, TRUNCATED)
        acc, series = 0, []
        for a in digits:
            acc = max(acc, a)
            series.append(acc)
        out.append(Trajectory(seq, tuple(series), 0))
    return out


class TestFrechetCdf:
    def test_values(self):
        assert frechet_cdf(1.0) == pytest.approx(math.exp(-1), rel=1e-15)
        assert frechet_cdf(0.0) == 0.0
        assert frechet_cdf(-3.0) == 0.0
        assert frechet_cdf(1e9) == pytest.approx(1.0, abs=1e-8)

    def test_monotone(self):
        ys = [0.01 * k for k in range(1, 1000)]
        vals = [frechet_cdf(y) for y in ys]
        assert vals == sorted(vals)


class TestEmpiricalCDF:
    def test_step_function(self):
        ecdf = EmpiricalCDF([1.0, 2.0, 2.0, 5.0])
        assert ecdf(0.5) == 0.0
        assert ecdf(1.0) == 0.25  # right-continuous: includes the atom
        assert ecdf(2.0) == 0.75
        assert ecdf(4.9) == 0.75
        assert ecdf(5.0) == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            EmpiricalCDF([])


class TestScaledMaxLaw:
    def test_unit_step_when_all_maxima_equal(self):
        trajs = _trajectories([7] * 150, n_digits=50)
        ecdf = scaled_max_law(trajs, P1)
        jump = 7 * math.log(2) / 50
        assert ecdf(jump * 0.999) == 0.0
        assert ecdf(jump) == 1.0

    def test_permutation_invariance(self):
        maxima = [3, 9, 4, 7, 2] * 30
        a = scaled_max_law(_trajectories(maxima, 20), P1)
        b = scaled_max_law(_trajectories(list(reversed(maxima)), 20), P1)
        grid = [0.01 * k for k in range(200)]
        assert [a(y) for y in grid] == [b(y) for y in grid]

    def test_needs_enough_trajectories(self):
        with pytest.raises(ValueError):
            scaled_max_law(_trajectories([3] * 99, 10), P1)

    def test_mixed_lengths_rejected(self):
        trajs = _trajectories([3] * 60, 10) + _trajectories([3] * 60, 11)
        with pytest.raises(ValueError):
            scaled_max_law(trajs, P1)


class TestExactMaxLaw:
    def test_empty_when_w_is_floor(self):
        for m in (1, 2, 4):
            assert float(exact_max_law(3, m, ThetaParams(m)).value) == 0.0

    def test_rank_one_is_tail_complement(self):
        for m in (1, 2, 4):
            params = ThetaParams(m)
            for w in range(m + 1, m + 7):
                with mpmath.workdps(60):
                    got = exact_max_law(1, w, params).value
                    want = 1 - tail_p(w, params).value
                    assert abs(got + tail_p(w, params).value - 1) < 1e-12
                    assert abs(got - want) < 1e-30

    def test_m1_w2_value(self):
        got = float(exact_max_law(1, 2, P1).value)
        assert got == pytest.approx(1 - math.log(1.5) / math.log(2), rel=1e-12)

    def test_monotone_in_w_and_n(self):
        vals = {
            (n, w): exact_max_law(n, w, P1).value
            for n in (1, 2, 3)
            for w in (2, 3, 4, 5, 6)
        }
        for n in (1, 2, 3):
            for w in (2, 3, 4, 5):
                assert vals[(n, w)] <= vals[(n, w + 1)]
        for w in (2, 3, 4, 5, 6):
            assert vals[(3, w)] <= vals[(2, w)] <= vals[(1, w)]

    def test_budget_guard(self):
        with pytest.raises(ValueError):
            exact_max_law(20, 100, P1)

    def test_validation(self):
        with pytest.raises(ValueError):
            exact_max_law(2, 0, P1)
        with pytest.raises(ValueError):
            exact_max_law(0, 3, P1)

    def test_against_monte_carlo(self):
        m, n, w, M = 1, 2, 3, 20000
        exact = float(exact_max_law(n, w, P1).value)
        config = SimConfig(m=m, n_digits=n, n_trajectories=M, seed=55, bits_per_digit=32)
        maxima = ensemble_map(config, max, workers=2)
        emp = sum(1 for v in maxima if v < w) / M
        sigma = math.sqrt(exact * (1 - exact) / M)
        assert abs(emp - exact) <= 3 * sigma

    def test_desk_scale_frechet_echo(self):
        """gamma(L_3 < 3y/log2) sits within 0.15 of exp(-1/y) already at N=3."""
        for y in (1.0, 2.0):
            w = math.floor(3 * y / math.log(2))
            got = float(exact_max_law(3, w, P1).value)
            assert abs(got - math.exp(-1 / y)) <= 0.15


class TestRateProbe:
    def test_deterministic_and_bounded(self):
        rows = rate_probe(P1, y=1.0, n_grid=[20, 60], n_trajectories=1000,
                          seed=99, bits_per_digit=16, workers=2)
        again = rate_probe(P1, y=1.0, n_grid=[20, 60], n_trajectories=1000,
                           seed=99, bits_per_digit=16, workers=1)
        assert rows == again
        for row in rows:
            assert 0.0 <= row.deviation <= 1.0
            assert row.std_err > 0

    def test_validation(self):
        with pytest.raises(ValueError):
            rate_probe(P1, y=1.0, n_grid=[30, 20], n_trajectories=1000, seed=1)
        with pytest.raises(ValueError):
            rate_probe(P1, y=1.0, n_grid=[10], n_trajectories=10, seed=1)
        with pytest.raises(ValueError):
            rate_probe(P1, y=-1.0, n_grid=[10], n_trajectories=1000, seed=1)


class TestMixingProbe:
    def test_sure_events_have_zero_psi(self):
        estimates = mixing_probe(
            500, [1, 2, 3], digit_ge(1), digit_ge(1), P1, seed=8, bits_per_digit=16
        )
        assert all(e.psi_hat == 0.0 for e in estimates)

    def test_degenerate_event_raises(self):
        # digits never equal 0
        with pytest.raises(ValueError):
            mixing_probe(200, [1], digit_eq(0), digit_eq(1), P1, seed=8,
                         bits_per_digit=16)

    def test_decay_at_moderate_scale(self):
        estimates = mixing_probe(
            30000, [1, 2, 6], digit_eq(1), digit_eq(1), P1, seed=717,
            bits_per_digit=16, workers=2,
        )
        assert estimates[0].psi_hat > estimates[2].psi_hat
        assert fit_log_slope(estimates) < 0
        q = mixing_rate(1).q_theta
        k = envelope_constant(estimates, q)
        assert all(e.psi_hat <= k * q**e.gap + 1e-12 for e in estimates)
        assert k >= estimates[0].psi_hat

    def test_validation(self):
        with pytest.raises(ValueError):
            mixing_probe(500, [], digit_eq(1), digit_eq(1), P1, seed=1)
        with pytest.raises(ValueError):
            mixing_probe(500, [0], digit_eq(1), digit_eq(1), P1, seed=1)
        with pytest.raises(ValueError):
            mixing_probe(50, [1], digit_eq(1), digit_eq(1), P1, seed=1)
        with pytest.raises(ValueError):
            digit_ge(3).__class__("bogus", 3)
