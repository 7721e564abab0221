"""Pointwise geometry of the local model carried by a generating function.

Chart coordinates on the model L are (x_I, p_J); the remaining ambient
coordinates follow from the generating relations

    p_I = dg/dx_I,   x_J = -dg/dp_J,   z = p_J^T x_J + g.

This module computes lifts and the two wavefront projections, the block
metric and cubic tensor, the discriminant of the dual-side Lagrange map,
kernel directions at fold points, the third/fourth-order criterion pairings,
and the canonical divergence with its mixed derivative functionals.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import gfexpr, jets
from .gfexpr import GeneratingFunction
from .jets import Jet


class NotCorankOneError(ValueError):
    """The dual-side Lagrange map does not drop rank by exactly one."""


@dataclass(frozen=True)
class LiftedPoint:
    """Full ambient coordinates (x, p, z) of a chart point."""

    x: np.ndarray
    p: np.ndarray
    z: float


# -- lifts and projections ---------------------------------------------------


def _first_jet(g: GeneratingFunction, q) -> Jet:
    return gfexpr.eval_jet(g, q, 1)


def lift(g: GeneratingFunction, q) -> LiftedPoint:
    """Ambient point of L over the chart point q."""
    q = np.asarray(q, dtype=float)
    jet = _first_jet(g, q)
    grad = jet.gradient()
    x = np.empty(g.n)
    p = np.empty(g.n)
    for a, (kind, idx) in enumerate(g.chart_vars):
        if kind == "x":
            x[idx - 1] = q[a]
            p[idx - 1] = grad[a]
        else:
            p[idx - 1] = q[a]
            x[idx - 1] = -grad[a]
    pj = np.array([p[j - 1] for j in sorted(g.J)])
    xj = np.array([x[j - 1] for j in sorted(g.J)])
    z = float(pj @ xj + jet.value)
    return LiftedPoint(x=x, p=p, z=z)


def project_m(pt: LiftedPoint) -> tuple[np.ndarray, float]:
    """Dual-side projection (p, p^T x - z); a point of the m-wavefront."""
    return pt.p.copy(), float(pt.p @ pt.x - pt.z)


def project_e(pt: LiftedPoint) -> tuple[np.ndarray, float]:
    """Primal-side projection (x, z); a point of the e-wavefront."""
    return pt.x.copy(), pt.z


# -- duality -------------------------------------------------------------------


def dualize(g: GeneratingFunction) -> GeneratingFunction:
    """Generating function of the image of L under (x,p,z) -> (p,x,p^Tx-z).

    The partition swaps (new I = old J) and every variable is renamed to its
    partner, with the expression negated; the m-wavefront of the result is
    the e-wavefront of the input after the same relabeling.
    """
    return GeneratingFunction(n=g.n, I=g.J, expr=gfexpr.Neg(gfexpr.swap_variables(g.expr)))


def dual_chart(g: GeneratingFunction, q) -> np.ndarray:
    """Chart point of dualize(g) matching the chart point q of g."""
    q = np.asarray(q, dtype=float)
    k = g.num_I
    return np.concatenate([q[k:], q[:k]])


# -- second/third/fourth order tensors in chart coordinates --------------------


def chart_hessian(g: GeneratingFunction, q) -> np.ndarray:
    """Hessian of g with respect to the chart coordinates."""
    jet = gfexpr.eval_jet(g, q, 2)
    n = g.n
    H = np.empty((n, n))
    for a in range(n):
        for b in range(a, n):
            alpha = [0] * n
            alpha[a] += 1
            alpha[b] += 1
            H[a, b] = H[b, a] = jet.derivative(alpha)
    return H


def _chart_tensor(jet: Jet, n: int, rank: int) -> np.ndarray:
    T = np.empty((n,) * rank)
    for combo in itertools.combinations_with_replacement(range(n), rank):
        alpha = [0] * n
        for a in combo:
            alpha[a] += 1
        val = jet.derivative(alpha)
        for perm in set(itertools.permutations(combo)):
            T[perm] = val
    return T


def chart_third_tensor(g: GeneratingFunction, q) -> np.ndarray:
    jet = gfexpr.eval_jet(g, q, 3)
    return _chart_tensor(jet, g.n, 3)


def chart_fourth_tensor(g: GeneratingFunction, q) -> np.ndarray:
    jet = gfexpr.eval_jet(g, q, 4)
    return _chart_tensor(jet, g.n, 4)


def quasi_hessian(g: GeneratingFunction, q) -> np.ndarray:
    """Possibly degenerate block metric in chart coordinates.

    The x_I block is the x-Hessian of g, the p_J block is minus the
    p-Hessian, and the mixed blocks vanish.
    """
    H = chart_hessian(g, q)
    k = g.num_I
    h = np.zeros_like(H)
    h[:k, :k] = H[:k, :k]
    h[k:, k:] = -H[k:, k:]
    return h


def cubic_tensor(g: GeneratingFunction, q) -> np.ndarray:
    """Totally symmetric third-derivative tensor, indexed by natural index.

    Entry [k, l, m] (0-based) is the derivative of g along the chart fields
    carrying natural indices k+1, l+1, m+1.
    """
    T = chart_third_tensor(g, q)
    pos = [g.chart_position(*kv) for kv in
           (("x", i) if i in g.I else ("p", i) for i in range(1, g.n + 1))]
    return T[np.ix_(pos, pos, pos)]


# -- discriminant of the dual-side Lagrange map --------------------------------


def _lagrange_jacobian_from_hessian(g: GeneratingFunction, H: np.ndarray) -> np.ndarray:
    """Jacobian of q -> p(q): rows ordered p_1..p_n, columns in chart order."""
    n = g.n
    Jm = np.zeros((n, n))
    for i in range(1, n + 1):
        if i in g.I:
            Jm[i - 1, :] = H[g.chart_position("x", i), :]
        else:
            Jm[i - 1, g.chart_position("p", i)] = 1.0
    return Jm


def lagrange_jacobian(g: GeneratingFunction, q) -> np.ndarray:
    return _lagrange_jacobian_from_hessian(g, chart_hessian(g, q))


def discriminant(g: GeneratingFunction, q) -> float:
    """Determinant of the dual-side Lagrange map's Jacobian at q."""
    return float(np.linalg.det(lagrange_jacobian(g, q)))


def discriminant_gradient(g: GeneratingFunction, q) -> np.ndarray:
    """Chart gradient of the discriminant, by row-wise determinant expansion."""
    n = g.n
    H = chart_hessian(g, q)
    T = chart_third_tensor(g, q)
    base = _lagrange_jacobian_from_hessian(g, H)
    grad = np.zeros(n)
    for a in range(n):
        total = 0.0
        for i in sorted(g.I):
            mod = base.copy()
            mod[i - 1, :] = T[g.chart_position("x", i), :, a]
            total += np.linalg.det(mod)
        grad[a] = total
    return grad


def kernel_vector(g: GeneratingFunction, q, tol: float = 1e-8) -> np.ndarray:
    """Unit kernel direction of the Lagrange map at a corank-one point.

    Corank is decided from the singular values of the Jacobian with the
    scale-invariant threshold tol * max(sigma); raises NotCorankOneError
    unless exactly one singular value falls below it.  The returned chart
    vector has unit norm, zero p_J components, and its first non-negligible
    entry positive.
    """
    Jm = lagrange_jacobian(g, q)
    U, s, Vt = np.linalg.svd(Jm)
    scale = s[0] if s[0] > 0 else 1.0
    thresh = tol * scale
    small = int(np.sum(s < thresh))
    if small != 1:
        raise NotCorankOneError(
            f"corank is {small} at {np.asarray(q).tolist()} "
            f"(singular values {s.tolist()}, threshold {thresh:g})")
    c = Vt[-1, :].copy()
    k = g.num_I
    c[k:] = 0.0  # structurally zero; discard numerical dust
    norm = np.linalg.norm(c)
    if norm == 0.0:
        raise NotCorankOneError("kernel collapsed onto the p_J block")
    c /= norm
    for entry in c:
        if abs(entry) > 1e-12:
            if entry < 0:
                c = -c
            break
    return c


# -- criterion pairings ---------------------------------------------------------


def _as_chart_vector(g: GeneratingFunction, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape != (g.n,):
        raise ValueError(f"direction must have length {g.n}")
    return X


def criterion_T3(g: GeneratingFunction, q, X) -> float:
    """Third-order pairing driving the fold-edge test.

    Half the contraction of the chart third-derivative tensor with X in all
    slots, the middle sum restricted to the x_I chart positions.  For kernel
    vectors (zero p_J part) this is half the full cubic contraction.
    """
    X = _as_chart_vector(g, X)
    T = chart_third_tensor(g, q)
    k = g.num_I
    return 0.5 * float(np.einsum("t,u,v,tuv->", X, X[:k], X, T[:, :k, :]))


def criterion_T4(g: GeneratingFunction, q, X) -> float:
    """Fourth-order pairing driving the swallowtail / degenerate-fold tests."""
    X = _as_chart_vector(g, X)
    F = chart_fourth_tensor(g, q)
    k = g.num_I
    return 0.5 * float(np.einsum("s,t,u,v,stuv->", X, X, X[:k], X, F[:, :, :k, :]))


def metric_cubic_pairing(g: GeneratingFunction, q, X) -> float:
    """Quarter of (full cubic contraction + derivative of h(X,X) along X).

    Matches criterion_T3 for every constant chart direction X; used as an
    independent route in the identity suite.
    """
    X = _as_chart_vector(g, X)
    T = chart_third_tensor(g, q)
    k = g.num_I
    cxxx = float(np.einsum("t,u,v,tuv->", X, X, X, T))
    sigma = np.zeros((g.n, g.n))
    sigma[:k, :k] = 1.0
    sigma[k:, k:] = -1.0
    xh = float(np.einsum("s,i,j,ij,sij->", X, X, X, sigma, T))
    return 0.25 * (cxxx + xh)


# -- canonical divergence --------------------------------------------------------


def canonical_divergence(g: GeneratingFunction, qp, qq) -> float:
    """Divergence D(p, q) between two chart points, by the chart formula."""
    qp = np.asarray(qp, dtype=float)
    qq = np.asarray(qq, dtype=float)
    jp = _first_jet(g, qp)
    jq = _first_jet(g, qq)
    gp_grad, gq_grad = jp.gradient(), jq.gradient()
    k = g.num_I
    xJ_p = -gp_grad[k:]
    pI_q = gq_grad[:k]
    pJ_p, pJ_q = qp[k:], qq[k:]
    xI_p, xI_q = qp[:k], qq[:k]
    return float(jp.value - jq.value + xJ_p @ (pJ_p - pJ_q) + pI_q @ (xI_q - xI_p))


def canonical_divergence_lifted(g: GeneratingFunction, qp, qq) -> float:
    """Same divergence from the ambient definition z(p) + z'(q) - x(p)^T p(q)."""
    P = lift(g, qp)
    Q = lift(g, qq)
    z_prime_q = float(Q.p @ Q.x - Q.z)
    return float(P.z + z_prime_q - P.x @ Q.p)


def divergence_jet(g: GeneratingFunction, q, order: int) -> Jet:
    """Jet of D(p, q) in the 2n doubled chart variables at the diagonal (q, q).

    Variables 0..n-1 move the first slot, n..2n-1 the second.  The jet is
    complete through `order` <= 4: the only first-derivative factors of g in
    the chart formula multiply differences that vanish on the diagonal, so no
    fifth derivative of g can reach the stored coefficients.
    """
    if not 0 <= order <= jets.MAX_ORDER:
        raise ValueError(f"order must be in 0..{jets.MAX_ORDER}")
    q = np.asarray(q, dtype=float)
    n = g.n
    k = g.num_I
    m2 = 2 * n
    G = gfexpr.eval_jet(g, q, min(jets.MAX_ORDER, order + 1))
    slot0 = list(range(n))
    slot1 = list(range(n, 2 * n))
    gp = G.truncated(order).embed(m2, slot0)
    gq = G.truncated(order).embed(m2, slot1)
    D = gp - gq
    for a in range(k, n):  # p_J chart positions: +x_J(p) (p_J(p) - p_J(q))
        w = G.derivative_jet(a).truncated(min(order, G.order - 1))
        w = w.embed(m2, slot0).padded(order)
        diff = (Jet.variable(a, q[a], m2, order)
                - Jet.variable(n + a, q[a], m2, order))
        D = D + (-w) * diff
    for a in range(0, k):  # x_I chart positions: +p_I(q) (x_I(q) - x_I(p))
        v = G.derivative_jet(a).truncated(min(order, G.order - 1))
        v = v.embed(m2, slot1).padded(order)
        diff = (Jet.variable(n + a, q[a], m2, order)
                - Jet.variable(a, q[a], m2, order))
        D = D + v * diff
    return D


def divergence_functional(g: GeneratingFunction, q, left, right,
                          jet: Jet | None = None) -> float:
    """Mixed derivative of D at the diagonal: left slots first, right second.

    `left` and `right` are lists of constant chart direction vectors; their
    total count is the derivative order (<= 4).  A precomputed divergence
    jet of sufficient order may be passed to amortize repeated extractions.
    """
    left = [_as_chart_vector(g, X) for X in left]
    right = [_as_chart_vector(g, Y) for Y in right]
    order = len(left) + len(right)
    if order > jets.MAX_ORDER:
        raise ValueError(f"functional order {order} exceeds {jets.MAX_ORDER}")
    if jet is None:
        jet = divergence_jet(g, q, order)
    elif jet.order < order:
        raise ValueError("supplied divergence jet has insufficient order")
    n = g.n
    total = 0.0
    dirs = [(vec, 0) for vec in left] + [(vec, n) for vec in right]
    for combo in itertools.product(range(n), repeat=order):
        coeff = 1.0
        for (vec, _), axis in zip(dirs, combo):
            coeff *= vec[axis]
            if coeff == 0.0:
                break
        if coeff == 0.0:
            continue
        alpha = [0] * (2 * n)
        for (_, offset), axis in zip(dirs, combo):
            alpha[offset + axis] += 1
        total += coeff * jet.derivative(alpha)
    return float(total)
