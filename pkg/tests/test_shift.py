from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from opcalc import circlefn, shift
from opcalc.calculus import calc_fourier
from opcalc.circlefn import CircleFunction, combine, monomial
from opcalc.shift import (ShiftFunction, arc_jump_coeffs, eta_recover, moment, trace_formula_check,
                          uniqueness_check)

from conftest import rand_complex, rand_contraction

TWO_PI = 2 * math.pi
POLY32 = circlefn.trig_zoo(max_degree=32, jackson_degree=32)


def arc_integral(n, theta):
    re = quad(lambda t: 1.0, 0, theta, weight="cos", wvar=n, epsabs=1e-14)[0]
    im = quad(lambda t: 1.0, 0, theta, weight="sin", wvar=n, epsabs=1e-14)[0]
    return complex(re, im)


def instance(rng, n=4):
    return rand_contraction(rng, n, rng.uniform(0, 1)), rand_contraction(rng, n, rng.uniform(0, 1)), \
        rand_complex(rng, n)


class TestMoment:
    def test_equal_pair(self, rng):
        T, _, X = instance(rng)
        for n in (-3, -1, 1, 4):
            assert moment(T, T, X, n) == 0

    def test_first_moment(self, rng):
        T0, T1, _ = instance(rng)
        assert moment(T0, T1, np.eye(4), 1) == pytest.approx(np.trace(T1 - T0), abs=1e-14)

    def test_scalar_powers(self):
        a, b, x = 0.3 + 0.2j, -0.5j, 1.5 - 1j
        for n in (1, 2, 5):
            assert moment([[a]], [[b]], [[x]], n) == pytest.approx((b ** n - a ** n) * x, abs=1e-15)
        assert moment([[a]], [[b]], [[x]], -2) == pytest.approx((np.conj(b) ** 2 - np.conj(a) ** 2) * x)

    def test_zero_rejected(self, rng):
        T0, T1, X = instance(rng)
        with pytest.raises(ValueError):
            moment(T0, T1, X, 0)

    def test_routes_agree(self, rng):
        T0, T1, X = instance(rng, 3)
        for n in (-4, -1, 2, 5):
            assert abs(moment(T0, T1, X, n) - moment(T0, T1, X, n, route="dilation", N=6)) <= 1e-12


class TestRecovery:
    def test_equal_pair(self, rng):
        T, _, X = instance(rng)
        eta = eta_recover(T, T, X, 8)
        assert all(c == 0 for c in eta.coeffs.values())
        assert np.all(eta(np.linspace(0, TWO_PI, 9)) == 0)

    @pytest.mark.parametrize("theta", [0.3, 1.0, 2.5, 5.9])
    def test_arc_jump_closed_form(self, theta):
        eta = eta_recover(np.eye(1), [[np.exp(1j * theta)]], np.eye(1), 32)
        closed = arc_jump_coeffs(theta, 32)
        assert set(eta.coeffs) == set(closed) == {n for n in range(-32, 33) if n}
        for n, c in eta.coeffs.items():
            assert abs(c - closed[n]) <= 1e-12
            assert abs(c - arc_integral(n, theta)) <= 1e-12

    def test_arc_jump_converges_away_from_jumps(self):
        theta = 2.0
        t = np.linspace(0, TWO_PI, 4001)
        away = (np.abs(t - theta) > 0.3) & (t > 0.3) & (t < TWO_PI - 0.3)
        target = np.where((t > 0) & (t < theta), 1.0, 0.0) - theta / TWO_PI
        errs = []
        for N in (8, 16, 32, 64):
            eta = eta_recover(np.eye(1), [[np.exp(1j * theta)]], np.eye(1), N)
            errs.append(np.max(np.abs(eta(t[away]) - target[away])))
        assert all(b < a for a, b in zip(errs, errs[1:]))

    def test_reintegration(self, rng):
        T0, T1, X = instance(rng)
        eta = eta_recover(T0, T1, X, 12)
        M = 256
        t = np.arange(M) * (TWO_PI / M)
        vals = eta(t)
        for m in range(-12, 13):
            got = np.mean(np.exp(1j * m * t) * vals) * TWO_PI
            assert abs(got - eta.coeffs.get(m, 0)) <= 1e-10

    def test_l1_bounded(self, rng):
        T0, T1, X = instance(rng)
        norms = [eta_recover(T0, T1, X, N).l1_norm() for N in (8, 16, 32, 64)]
        assert max(norms) <= 2 * min(norms)

    def test_bad_degree(self, rng):
        T0, T1, X = instance(rng)
        with pytest.raises(ValueError):
            eta_recover(T0, T1, X, 0)


class TestTraceFormula:
    def test_constant(self, rng):
        T0, T1, X = instance(rng)
        eta = eta_recover(T0, T1, X, 4)
        assert trace_formula_check(CircleFunction({0: 2.0}), T0, T1, X, eta) == 0

    def test_identity_function(self, rng):
        T0, T1, X = instance(rng)
        eta = eta_recover(T0, T1, X, 4)
        assert trace_formula_check(monomial(1), T0, T1, X, eta) <= 1e-12

    def test_zoo_round_trip(self, rng):
        for _ in range(10):
            T0, T1, X = instance(rng)
            eta = eta_recover(T0, T1, X, 32)
            bound = 1e-9 * (1 + np.linalg.norm(X, "fro"))
            for f in POLY32.values():
                assert trace_formula_check(f, T0, T1, X, eta) <= bound

    def test_degree_overflow(self, rng):
        T0, T1, X = instance(rng)
        with pytest.raises(ValueError):
            trace_formula_check(monomial(5), T0, T1, X, eta_recover(T0, T1, X, 4))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 100_000), st.complex_numbers(max_magnitude=4), st.complex_numbers(max_magnitude=4))
    def test_pairing_linear(self, seed, alpha, beta):
        rng = np.random.default_rng(seed)
        T0, T1, X = instance(rng, 3)
        eta = eta_recover(T0, T1, X, 8)
        f, g = POLY32["rand_trig_6"], POLY32["z^-5"]
        lhs = eta.pairing(combine(alpha, f, beta, g))
        assert abs(lhs - (alpha * eta.pairing(f) + beta * eta.pairing(g))) <= 1e-10 * (1 + abs(alpha) + abs(beta))

    def test_smooth_function_with_truncation(self, rng):
        # a Jackson approximant stands in for a C^1 function; the certificate propagates
        T0, T1, X = instance(rng, 3)
        fine, err_fine = circlefn.jackson_truncate(np.cos, 64, 1.0)
        coarse, err_coarse = circlefn.jackson_truncate(np.cos, 16, 1.0)
        eta = eta_recover(T0, T1, X, 64)
        lhs = np.trace((calc_fourier(fine, T1)[0] - calc_fourier(fine, T0)[0]) @ X)
        x1 = np.linalg.norm(X, "nuc")
        assert abs(lhs - eta.pairing(coarse)) <= 1e-9 + 2 * (err_fine + err_coarse) * x1


class TestUniqueness:
    def test_same_inputs(self, rng):
        T0, T1, X = instance(rng)
        assert uniqueness_check(eta_recover(T0, T1, X, 16), eta_recover(T0, T1, X, 16)) == 0

    def test_routes(self, rng):
        T0, T1, X = instance(rng, 3)
        a = eta_recover(T0, T1, X, 10)
        b = eta_recover(T0, T1, X, 10, route="dilation")
        assert uniqueness_check(a, b) <= 1e-10

    def test_coefficients_independent_of_degree(self, rng):
        T0, T1, X = instance(rng)
        a, b = eta_recover(T0, T1, X, 16), eta_recover(T0, T1, X, 40)
        assert max(abs(a.coeffs[n] - b.coeffs[n]) for n in a.coeffs) <= 1e-12

    def test_mismatched_degree(self, rng):
        T0, T1, X = instance(rng)
        with pytest.raises(ValueError):
            uniqueness_check(eta_recover(T0, T1, X, 4), eta_recover(T0, T1, X, 5))


class TestFiles:
    def test_round_trip(self, tmp_path, rng):
        T0, T1, X = instance(rng)
        eta = eta_recover(T0, T1, X, 6)
        shift.save(tmp_path / "eta.json", eta)
        back = shift.load(tmp_path / "eta.json")
        assert back.N == 6 and back.coeffs == eta.coeffs

    def test_rejects_constant_term(self):
        with pytest.raises(ValueError):
            shift.from_json({"N": 2, "coeffs": {"0": [1, 0]}})

    def test_plot_data(self):
        eta = ShiftFunction(2, {1: 1 + 0j, -1: 1 + 0j})
        re, im = shift.plot_data(eta)
        lines = re.splitlines()
        assert len(lines) == 1024 and len(im.splitlines()) == 1024
        t, v = map(float, lines[256].split())
        assert t == pytest.approx(math.pi / 2)
        assert v == pytest.approx(2 * math.cos(t) / TWO_PI, abs=1e-15)
