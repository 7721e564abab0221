"""Truncated Taylor arithmetic against independent oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emfront import jets
from emfront.jets import Jet

from conftest import fd_partial, poly_derivative, poly_eval, poly_random


def jet_of_poly(poly, x, m, order=4):
    vars_ = [Jet.variable(a, float(x[a]), m, order) for a in range(m)]
    out = Jet.constant(0.0, m, order)
    for exps, c in poly.items():
        term = Jet.constant(float(c), m, order)
        for a, e in enumerate(exps):
            for _ in range(e):
                term = term * vars_[a]
        out = out + term
    return out


class TestConstruction:
    def test_variable_jet_coefficients(self):
        j = Jet.variable(0, 1.0, 1, 2)
        assert j.coefficient((0,)) == 1.0
        assert j.coefficient((1,)) == 1.0
        assert j.coefficient((2,)) == 0.0

    def test_variable_jet_two_vars(self):
        j = Jet.variable(1, 0.0, 2, 1)
        assert j.coefficient((0, 0)) == 0.0
        assert j.coefficient((1, 0)) == 0.0
        assert j.coefficient((0, 1)) == 1.0

    def test_variable_out_of_range(self):
        with pytest.raises(jets.JetError):
            Jet.variable(2, 0.0, 2, 1)

    def test_order_cap(self):
        with pytest.raises(jets.JetError):
            Jet.constant(0.0, 1, 5)

    def test_table_sizes(self):
        for m in (1, 2, 3, 4, 6, 8):
            for order in range(5):
                j = Jet.constant(0.0, m, order)
                assert len(j.c) == math.comb(m + order, order)


class TestArithmetic:
    def test_square_of_coordinate(self):
        x = Jet.variable(0, 1.0, 1, 2)
        sq = x * x
        assert sq.value == 1.0
        assert sq.derivative((1,)) == 2.0
        assert sq.derivative((2,)) == 2.0

    def test_cross_product_term(self):
        x = Jet.variable(0, 0.0, 2, 2)
        y = Jet.variable(1, 0.0, 2, 2)
        xy = x * y
        nonzero = {tuple(a): v for a, v in
                   zip(jets._tables(2, 2)[0], xy.c) if v != 0.0}
        assert nonzero == {(1, 1): 1.0}

    def test_additive_inverse(self):
        f = Jet.variable(0, 0.3, 2, 3) * Jet.variable(1, -0.2, 2, 3) + 1.5
        assert np.all((f + (-f)).c == 0.0)

    def test_mismatched_operands(self):
        with pytest.raises(jets.JetError):
            Jet.constant(0.0, 1, 2) + Jet.constant(0.0, 2, 2)
        with pytest.raises(jets.JetError):
            Jet.constant(0.0, 2, 2) * Jet.constant(0.0, 2, 3)

    def test_integer_power_matches_repeated_mul(self):
        x = Jet.variable(0, 0.7, 1, 4) + 0.5
        assert np.allclose((x**3).c, (x * x * x).c, rtol=0, atol=1e-15)
        assert np.allclose((x**-2).c, jets.reciprocal(x * x).c)

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.floats(-2, 2), min_size=15, max_size=15),
           st.lists(st.floats(-2, 2), min_size=15, max_size=15),
           st.lists(st.floats(-2, 2), min_size=15, max_size=15))
    def test_ring_laws(self, ca, cb, cc):
        a = Jet(2, 4, np.array(ca))
        b = Jet(2, 4, np.array(cb))
        c = Jet(2, 4, np.array(cc))
        scale = max(1.0, *(np.max(np.abs(j.c)) for j in (a, b, c))) ** 3
        assert np.allclose((a * b).c, (b * a).c, rtol=0, atol=1e-12 * scale)
        assert np.allclose(((a * b) * c).c, (a * (b * c)).c,
                           rtol=0, atol=1e-12 * scale)
        assert np.allclose((a * (b + c)).c, (a * b + a * c).c,
                           rtol=0, atol=1e-12 * scale)


class TestElementary:
    def test_exp_series(self):
        e = jets.exp(Jet.variable(0, 0.0, 1, 4))
        assert np.allclose(e.c, [1, 1, 0.5, 1 / 6, 1 / 24], rtol=0, atol=1e-15)

    def test_sqrt_binomial(self):
        s = jets.sqrt(1.0 + Jet.variable(0, 0.0, 1, 2))
        assert np.allclose(s.c, [1.0, 0.5, -0.125], rtol=0, atol=1e-15)

    def test_log_domain_error(self):
        with pytest.raises(jets.JetDomainError):
            jets.log(Jet.variable(0, 0.0, 1, 2))

    def test_sqrt_domain_error(self):
        with pytest.raises(jets.JetDomainError):
            jets.sqrt(Jet.variable(0, -1.0, 1, 2))

    def test_reciprocal_domain_error(self):
        with pytest.raises(jets.JetDomainError):
            jets.reciprocal(Jet.variable(0, 0.0, 1, 2))

    def test_pow_real_requires_positive_base(self):
        with pytest.raises(jets.JetDomainError):
            jets.pow_real(Jet.variable(0, -2.0, 1, 2), 0.5)

    def test_elementary_dispatch(self):
        x = Jet.variable(0, 0.3, 1, 4)
        assert np.allclose(jets.elementary("pow_real", x + 1.0, 1.5).c,
                           jets.pow_real(x + 1.0, 1.5).c)
        with pytest.raises(jets.JetError):
            jets.elementary("tan", x)

    @pytest.mark.parametrize("kind,fn,x0", [
        ("exp", math.exp, 0.4), ("log", math.log, 1.7), ("sin", math.sin, 0.9),
        ("cos", math.cos, -0.6), ("sqrt", math.sqrt, 2.3),
    ])
    def test_univariate_against_finite_differences(self, kind, fn, x0):
        j = jets.ELEMENTARY[kind](Jet.variable(0, x0, 1, 3))
        for k in (1, 2, 3):
            fd = fd_partial(lambda y: fn(y[0]), np.array([x0]), [k])
            assert abs(j.derivative((k,)) - fd) <= 1e-5 * max(1.0, abs(fd))


class TestDerivativeExtraction:
    def test_cubic_over_three(self):
        x = Jet.variable(0, 0.0, 1, 4)
        f = x * x * x / 3.0
        assert f.derivative((3,)) == pytest.approx(2.0, abs=1e-15)

    def test_quartic_over_four(self):
        x = Jet.variable(0, 0.0, 1, 4)
        f = x * x * x * x / 4.0
        assert f.derivative((4,)) == pytest.approx(6.0, abs=1e-15)

    def test_zero_index_is_value(self):
        f = jets.sin(Jet.variable(0, 0.5, 2, 3) * Jet.variable(1, 1.2, 2, 3))
        assert f.derivative((0, 0)) == f.value

    def test_order_overflow(self):
        with pytest.raises(jets.JetError):
            Jet.constant(1.0, 1, 2).coefficient((3,))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**9), st.integers(2, 3))
    def test_polynomial_derivatives_exact(self, seed, m):
        rng = np.random.default_rng(seed)
        poly = poly_random(rng, m)
        x = rng.uniform(-1.5, 1.5, m)
        jet = jet_of_poly(poly, x, m)
        exps, _, _ = jets._tables(m, 4)
        for alpha in exps:
            want = poly_eval(poly_derivative(poly, tuple(alpha)), x)
            got = jet.derivative(tuple(alpha))
            assert abs(got - want) <= 1e-10 * max(1.0, abs(want))


class TestChainRule:
    def test_compose_matches_direct_evaluation(self):
        # f(u, v) = exp(u) * v at (g1, g2)(x, y) = (x*y, x + y^2)
        rng = np.random.default_rng(5)
        for _ in range(20):
            x0, y0 = rng.uniform(-0.8, 0.8, 2)
            X = Jet.variable(0, x0, 2, 4)
            Y = Jet.variable(1, y0, 2, 4)
            g1, g2 = X * Y, X + Y * Y
            direct = jets.exp(g1) * g2
            U = Jet.variable(0, g1.value, 2, 4)
            V = Jet.variable(1, g2.value, 2, 4)
            f = jets.exp(U) * V
            composed = jets.compose(f, [g1, g2])
            assert np.allclose(composed.c, direct.c, rtol=1e-12, atol=1e-12)

    def test_inverse_map_round_trip(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            pt = rng.uniform(-0.5, 0.5, 2)
            X = Jet.variable(0, pt[0], 2, 4)
            Y = Jet.variable(1, pt[1], 2, 4)
            F = [X + 0.3 * Y * Y + 0.1 * X * Y, Y - 0.2 * X * X]
            G = jets.inverse_map(F, pt)
            for i in range(2):
                comp = jets.compose(F[i], G)
                ident = Jet.variable(i, F[i].value, 2, 4)
                assert np.allclose(comp.c, ident.c, rtol=0, atol=1e-12)

    def test_integrate_recovers_product(self):
        x0 = np.array([0.4, -0.7])
        X = Jet.variable(0, x0[0], 2, 4)
        Y = Jet.variable(1, x0[1], 2, 4)
        f = jets.sin(X) * jets.exp(Y) + X * Y
        grads = [f.derivative_jet(0).truncated(3), f.derivative_jet(1).truncated(3)]
        rebuilt = jets.integrate(grads, f.value)
        assert np.allclose(rebuilt.c, f.c, rtol=0, atol=1e-13)


class TestSmoothFiniteDifferenceOracle:
    def test_transcendental_against_cascaded_differences(self):
        rng = np.random.default_rng(17)

        def f(y):
            return math.exp(0.4 * y[0]) * math.sin(y[1]) + math.cos(y[0] * y[1])

        def jet_at(x):
            X = Jet.variable(0, x[0], 2, 3)
            Y = Jet.variable(1, x[1], 2, 3)
            return jets.exp(0.4 * X) * jets.sin(Y) + jets.cos(X * Y)

        for _ in range(40):
            x = rng.uniform(-0.9, 0.9, 2)
            k = int(rng.integers(1, 4))
            alpha = [0, 0]
            for _ in range(k):
                alpha[rng.integers(0, 2)] += 1
            got = jet_at(x).derivative(tuple(alpha))
            fd = fd_partial(f, x, alpha)
            assert abs(got - fd) <= 1e-5 * max(abs(got), abs(fd)) + 1e-6
