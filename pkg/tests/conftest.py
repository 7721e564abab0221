"""Shared fixtures and independent oracles for the test suite."""

import math

import numpy as np
import pytest

from emfront import gfexpr


# -- example models -----------------------------------------------------------

FOLD_EDGE_SRC = "x1^3/3 - p2^2/2"          # bi-valued dual potential, fold at p1=0
SWALLOWTAIL_SRC = "x1^4/4 + p2*x1^2/2"     # swallowtail point at the origin
DEGENERATE_SRC = "x1^4/4 - p2^2/2"         # caustic branch with semidefinite metric


@pytest.fixture
def fold_edge():
    return gfexpr.parse(FOLD_EDGE_SRC, n=2, I={1})


@pytest.fixture
def swallowtail():
    return gfexpr.parse(SWALLOWTAIL_SRC, n=2, I={1})


@pytest.fixture
def degenerate_branch():
    return gfexpr.parse(DEGENERATE_SRC, n=2, I={1})


# -- independent oracles --------------------------------------------------------


def fd_partial(f, x, alpha, h=1e-3):
    """Nested (cascaded) central differences for a mixed partial derivative."""

    def diff(fun, axis):
        def out(y):
            yp = y.copy()
            yp[axis] += h
            ym = y.copy()
            ym[axis] -= h
            return (fun(yp) - fun(ym)) / (2.0 * h)

        return out

    fun = f
    for axis, k in enumerate(alpha):
        for _ in range(int(k)):
            fun = diff(fun, axis)
    return fun(np.asarray(x, dtype=float))


def poly_random(rng, n, max_degree=4, terms=8):
    """Random polynomial as an exponent-tuple -> coefficient dict."""
    poly = {}
    for _ in range(terms):
        while True:
            exps = tuple(int(e) for e in rng.integers(0, max_degree + 1, n))
            if sum(exps) <= max_degree:
                break
        poly[exps] = poly.get(exps, 0.0) + float(rng.uniform(-2.0, 2.0))
    return poly


def poly_eval(poly, x):
    return sum(c * math.prod(xi**e for xi, e in zip(x, exps))
               for exps, c in poly.items())


def poly_derivative(poly, alpha):
    """Exact symbolic derivative of a coefficient-dict polynomial."""
    out = {}
    for exps, c in poly.items():
        coeff = c
        new = []
        for e, a in zip(exps, alpha):
            if e < a:
                coeff = 0.0
                break
            for j in range(a):
                coeff *= e - j
            new.append(e - a)
        if coeff != 0.0:
            key = tuple(new)
            out[key] = out.get(key, 0.0) + coeff
    return out


def poly_to_source(poly, names):
    """Render a coefficient dict as DSL source text."""
    terms = []
    for exps, c in sorted(poly.items()):
        factors = [f"({float(c)!r})"]
        for name, e in zip(names, exps):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        terms.append("*".join(factors))
    return " + ".join(terms) if terms else "0"
