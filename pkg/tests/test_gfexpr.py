"""DSL parser and evaluators."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emfront import gfexpr
from emfront.gfexpr import (BinOp, Call, DslError, EvalDomainError, LexError,
                            Neg, Num, ParseError, PartitionError, Var,
                            eval_jet, eval_real, is_polynomial, parse,
                            to_source)

from conftest import poly_derivative, poly_eval, poly_random, poly_to_source


class TestParse:
    def test_fold_edge_example(self):
        g = parse("x1^3/3 - p2^2/2", n=2, I={1})
        assert g.chart_names == ("x1", "p2")
        names = set()

        def walk(e):
            if isinstance(e, Var):
                names.add(e.name)
            elif isinstance(e, Neg):
                walk(e.arg)
            elif isinstance(e, BinOp):
                walk(e.left)
                walk(e.right)
            elif isinstance(e, Call):
                walk(e.arg)

        walk(g.expr)
        assert names == {"x1", "p2"}

    def test_constant_zero(self):
        g = parse("0", n=2, I={1})
        assert eval_real(g, [0.4, -0.9]) == 0.0

    def test_partition_violation(self):
        with pytest.raises(PartitionError, match="p1"):
            parse("p1^2", n=2, I={1})
        with pytest.raises(PartitionError, match="x2"):
            parse("x1 + x2", n=2, I={1})
        with pytest.raises(PartitionError, match="x3"):
            parse("x3", n=2, I={1})

    def test_lex_error_position(self):
        with pytest.raises(LexError) as err:
            parse("x1 + $", n=1, I={1})
        assert err.value.pos == 5

    def test_parse_error_position(self):
        with pytest.raises(ParseError):
            parse("x1 + ", n=1, I={1})
        with pytest.raises(ParseError):
            parse("(x1", n=1, I={1})
        with pytest.raises(ParseError):
            parse("x1 x1", n=1, I={1})
        with pytest.raises(ParseError):
            parse("foo(x1)", n=1, I={1})

    def test_bad_partition_argument(self):
        with pytest.raises(DslError):
            parse("x1", n=1, I={2})
        with pytest.raises(DslError):
            parse("x1", n=0, I=set())

    def test_precedence(self):
        g = parse("-x1^2", n=1, I={1})
        assert eval_real(g, [2.0]) == -4.0
        g = parse("2^3^2", n=1, I={1})
        assert eval_real(g, [0.0]) == 512.0
        g = parse("1 - 2 - 3", n=1, I={1})
        assert eval_real(g, [0.0]) == -4.0
        g = parse("2*x1 + 3", n=1, I={1})
        assert eval_real(g, [2.0]) == 7.0
        g = parse("x1^-2", n=1, I={1})
        assert eval_real(g, [2.0]) == 0.25

    def test_scientific_literals(self):
        g = parse("1e-3*x1 + 2.5E2", n=1, I={1})
        assert eval_real(g, [1.0]) == pytest.approx(250.001)


def _expr_strategy():
    leaves = st.one_of(
        st.floats(0.0, 4.0, allow_nan=False).map(lambda v: Num(round(v, 3))),
        st.sampled_from([Var("x", 1), Var("p", 2)]),
    )

    def extend(children):
        return st.one_of(
            children.map(lambda e: Neg(e)),
            st.tuples(st.sampled_from("+-*/^"), children, children).map(
                lambda t: BinOp(t[0], t[1], t[2])),
            st.tuples(st.sampled_from(gfexpr.FUNCTIONS), children).map(
                lambda t: Call(t[0], t[1])),
        )

    return st.recursive(leaves, extend, max_leaves=12)


class TestPrinter:
    @settings(max_examples=120, deadline=None)
    @given(_expr_strategy())
    def test_round_trip(self, expr):
        src = to_source(expr)
        again = parse(src, n=2, I={1})
        assert again.expr == expr

    def test_round_trip_paper_source(self):
        g = parse("x1^3/3 - p2^2/2", n=2, I={1})
        assert parse(to_source(g.expr), n=2, I={1}).expr == g.expr


class TestEvalReal:
    def test_fold_edge_value(self):
        g = parse("x1^3/3 - p2^2/2", n=2, I={1})
        assert eval_real(g, [1.0, 2.0]) == pytest.approx(1 / 3 - 2)

    def test_log_domain_error(self):
        g = parse("log(x1)", n=1, I={1})
        with pytest.raises(EvalDomainError):
            eval_real(g, [0.0])

    def test_division_by_zero(self):
        g = parse("1/x1", n=1, I={1})
        with pytest.raises(EvalDomainError):
            eval_real(g, [0.0])

    def test_real_power_needs_positive_base(self):
        g = parse("x1^0.5", n=1, I={1})
        assert eval_real(g, [4.0]) == pytest.approx(2.0)
        with pytest.raises(EvalDomainError):
            eval_real(g, [-4.0])

    def test_variable_exponent_rejected(self):
        g = parse("2^x1", n=1, I={1})
        with pytest.raises(EvalDomainError, match="constant"):
            eval_real(g, [1.0])


class TestEvalJet:
    def test_fold_edge_derivatives(self):
        g = parse("x1^3/3 - p2^2/2", n=2, I={1})
        j = eval_jet(g, [0.0, 0.0], 4)
        assert j.derivative((3, 0)) == pytest.approx(2.0, abs=1e-14)
        assert j.derivative((0, 2)) == pytest.approx(-1.0, abs=1e-14)

    def test_swallowtail_mixed_derivative(self):
        g = parse("x1^4/4 + p2*x1^2/2", n=2, I={1})
        j = eval_jet(g, [0.0, 0.0], 4)
        assert j.derivative((2, 1)) == pytest.approx(1.0, abs=1e-14)

    def test_constant_function(self):
        g = parse("3.5", n=2, I={1})
        j = eval_jet(g, [0.2, 0.4], 3)
        assert j.value == 3.5
        assert np.all(j.c[1:] == 0.0)

    def test_order_zero_equals_eval_real(self):
        g = parse("exp(x1)*sin(p2) + sqrt(2 + x1^2)", n=2, I={1})
        q = [0.37, -0.81]
        j = eval_jet(g, q, 0)
        assert j.value == eval_real(g, q)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**9))
    def test_polynomial_jets_match_symbolic(self, seed):
        rng = np.random.default_rng(seed)
        poly = poly_random(rng, 2, terms=6)
        g = parse(poly_to_source(poly, ("x1", "p2")), n=2, I={1})
        q = rng.uniform(-1.2, 1.2, 2)
        j = eval_jet(g, q, 4)
        for alpha in [(1, 0), (0, 1), (2, 0), (1, 1), (2, 2), (4, 0), (3, 1)]:
            want = poly_eval(poly_derivative(poly, alpha), q)
            assert abs(j.derivative(alpha) - want) <= 1e-10 * max(1.0, abs(want))


class TestStructure:
    def test_is_polynomial(self):
        assert is_polynomial(parse("x1^3/3 - p2^2/2", 2, {1}).expr)
        assert is_polynomial(parse("x1*p2/7 + 2", 2, {1}).expr)
        assert not is_polynomial(parse("exp(x1)", 1, {1}).expr)
        assert not is_polynomial(parse("1/x1", 1, {1}).expr)
        assert not is_polynomial(parse("x1^0.5", 1, {1}).expr)
        assert is_polynomial(parse("x1^2 / (3/4)", 1, {1}).expr)

    def test_swap_variables(self):
        g = parse("x1^3/3 - p2^2/2", n=2, I={1})
        swapped = gfexpr.swap_variables(g.expr)
        assert to_source(swapped) == to_source(
            parse("p1^3/3 - x2^2/2", n=2, I={2}).expr)

    def test_chart_positions(self):
        g = parse("x2^2 + p1*p3", n=3, I={2})
        assert g.chart_names == ("x2", "p1", "p3")
        assert g.chart_position("p", 3) == 2
        assert g.num_I == 1
