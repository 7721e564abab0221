"""Adapted charts and branched normal forms of the dual potential.

At a corank-one fold point an affine change of the x-coordinates aligns the
kernel direction with the first axis, after which (x1, p_2..p_n) is a chart
of the model.  In that chart the fold locus is a graph x1 = f(p_J), the dual
coordinate functions divide as

    p1 = (x1 - f)^d phi1 + k1,      z' = (x1 - f)^d phi2 + k2,

with d = 2 on a fold edge and d = 3 on a degenerate (caustic) branch, and the
change y1 = (x1 - f) * phi1^(1/d) turns the dual potential into

    z' = k2 + (p1 - k1) * phi(sgn * (p1 - k1)^(1/d), p_J)

with two branches for d = 2 and a single branch through the real cube root
for d = 3.  This module extracts sampled (f, k1, k2, phi) numerically and
reconstructs z' from them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as _cartesian

import numpy as np

from . import geometry as geo, gfexpr, jets
from .classify import (A3_TYPE, CUSPIDAL_EDGE, ChartWindow, SingularityReport,
                       Tolerances, probe_directions)
from .gfexpr import GeneratingFunction
from .geometry import NotCorankOneError
from .jets import Jet


class ChartDegenerateError(RuntimeError):
    """(x1, p_J) failed to be a chart where it was needed."""


class Phi1VanishesError(RuntimeError):
    """Leading division coefficient vanished at the base point."""


class OutsideSheetError(ValueError):
    """Reconstruction requested below the fold sheet (p1 < k1)."""


class NewtonDivergedError(RuntimeError):
    pass


# -- affine Legendre equivalences ----------------------------------------------


@dataclass(frozen=True)
class AffineEquivalence:
    """x -> Ax + b, p -> inv(A^T) p + inv(A^T) c, z -> z + c^T x + d."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float = 0.0

    @staticmethod
    def identity(n: int) -> "AffineEquivalence":
        return AffineEquivalence(np.eye(n), np.zeros(n), np.zeros(n), 0.0)

    @staticmethod
    def create(A, b=None, c=None, d: float = 0.0) -> "AffineEquivalence":
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("A must be square")
        if abs(np.linalg.det(A)) < 1e-12:
            raise ValueError("A must be invertible")
        b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
        c = np.zeros(n) if c is None else np.asarray(c, dtype=float)
        return AffineEquivalence(A, b, c, float(d))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def A_dual(self) -> np.ndarray:
        return np.linalg.inv(self.A.T)

    @property
    def b_dual(self) -> np.ndarray:
        return self.A_dual @ self.c

    def compose_after(self, other: "AffineEquivalence") -> "AffineEquivalence":
        """Equivalence equal to applying `other` first, then self."""
        return AffineEquivalence(self.A @ other.A,
                                 self.A @ other.b + self.b,
                                 other.c + other.A.T @ self.c,
                                 other.d + self.d + float(self.c @ other.b))

    def apply(self, pt: geo.LiftedPoint) -> geo.LiftedPoint:
        return geo.LiftedPoint(x=self.A @ pt.x + self.b,
                               p=self.A_dual @ pt.p + self.b_dual,
                               z=pt.z + float(self.c @ pt.x) + self.d)

    @property
    def is_identity(self) -> bool:
        n = self.n
        return (np.array_equal(self.A, np.eye(n)) and not self.b.any()
                and not self.c.any() and self.d == 0.0)


# -- adapted model ----------------------------------------------------------------


@dataclass(frozen=True)
class Frame:
    """Jets of the adapted-chart functions at one new-chart point.

    p1 and the x_J components are complete to order 3, the dual height to
    order 3; all are jets in the new chart variables (x1, p_2..p_n).
    """

    t: np.ndarray          # new chart point
    q: np.ndarray          # matching old chart point
    p1: Jet                # dual first coordinate as a chart function
    xJ: list[Jet]          # x_2..x_n as chart functions
    zp: Jet                # dual height z'

    @property
    def lam(self) -> float:
        """First x1-derivative of p1 (the adapted discriminant)."""
        return self.p1.derivative(self._e1(1))

    @property
    def mu(self) -> float:
        return self.p1.derivative(self._e1(2))

    @property
    def nu(self) -> float:
        return self.p1.derivative(self._e1(3))

    def _e1(self, k: int):
        e = [0] * self.p1.m
        e[0] = k
        return e

    def lambda_gradient(self) -> np.ndarray:
        n = self.p1.m
        out = np.empty(n)
        for a in range(n):
            e = [0] * n
            e[0] += 1
            e[a] += 1
            out[a] = self.p1.derivative(e)
        return out

    def p1_taylor_x1(self) -> np.ndarray:
        """Coefficients of p1 in (x1 - t1)^k, k = 0..3, at fixed p_J."""
        return np.array([self.p1.coefficient(self._e1(k)) for k in range(4)])

    def zp_taylor_x1(self) -> np.ndarray:
        return np.array([self.zp.coefficient(self._e1(k)) for k in range(4)])

    def metric(self) -> np.ndarray:
        """Block metric in the adapted chart: diag(lam, [dx_j/dp_l])."""
        n = self.p1.m
        h = np.zeros((n, n))
        h[0, 0] = self.lam
        for j in range(1, n):
            for l in range(1, n):
                e = [0] * n
                e[l] = 1
                h[j, l] = self.xJ[j - 1].derivative(e)
        h[1:, 1:] = 0.5 * (h[1:, 1:] + h[1:, 1:].T)
        return h

    def lagrange_jacobian(self) -> np.ndarray:
        n = self.p1.m
        Jm = np.zeros((n, n))
        for a in range(n):
            e = [0] * n
            e[a] = 1
            Jm[0, a] = self.p1.derivative(e)
        for j in range(1, n):
            Jm[j, j] = 1.0
        return Jm


class AdaptedModel:
    """Chart (x1, p_2..p_n) view of the image of a model under an equivalence.

    The underlying model is given by a generating function; the equivalence
    carries it to a position where the first x-axis spans the kernel of the
    dual-side Lagrange map at the base point.  All chart functions are
    computed by Newton inversion of the chart transition on the model plus
    jet composition; when the equivalence is trivial and the partition is
    already I = {1}, everything reduces to direct jet evaluation.
    """

    def __init__(self, g: GeneratingFunction, eq: AffineEquivalence,
                 base_chart, newton_tol: float = 1e-12, newton_maxiter: int = 60):
        if eq.n != g.n:
            raise ValueError("equivalence dimension does not match the model")
        self.g = g
        self.eq = eq
        self.base_chart = np.asarray(base_chart, dtype=float)
        self.newton_tol = newton_tol
        self.newton_maxiter = newton_maxiter
        self.is_direct = eq.is_identity and g.I == frozenset({1})
        self._seed = self.base_chart.copy()
        self.base_new_chart = self.to_new_chart(self.base_chart)

    # ---- chart transition -----------------------------------------------------

    def _ambient(self, q: np.ndarray) -> geo.LiftedPoint:
        return self.eq.apply(geo.lift(self.g, q))

    def to_new_chart(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.is_direct:
            return q.copy()
        pt = self._ambient(q)
        return np.concatenate([[pt.x[0]], pt.p[1:]])

    def from_new_chart(self, t, seed=None) -> np.ndarray:
        """Old chart point mapping to the new chart point t (Newton)."""
        t = np.asarray(t, dtype=float)
        if self.is_direct:
            return t.copy()
        n = self.g.n
        q = np.asarray(self._seed if seed is None else seed, dtype=float).copy()
        A, Ad = self.eq.A, self.eq.A_dual
        k = self.g.num_I
        for _ in range(self.newton_maxiter):
            jet = gfexpr.eval_jet(self.g, q, 2)
            grad = jet.gradient()
            H = np.empty((n, n))
            for a in range(n):
                for bb in range(a, n):
                    alpha = [0] * n
                    alpha[a] += 1
                    alpha[bb] += 1
                    H[a, bb] = H[bb, a] = jet.derivative(alpha)
            x = np.empty(n)
            p = np.empty(n)
            dx = np.zeros((n, n))
            dp = np.zeros((n, n))
            for a, (kind, idx) in enumerate(self.g.chart_vars):
                i = idx - 1
                if kind == "x":
                    x[i] = q[a]
                    p[i] = grad[a]
                    dx[i, a] = 1.0
                    dp[i, :] = H[a, :]
                else:
                    p[i] = q[a]
                    x[i] = -grad[a]
                    dp[i, a] = 1.0
                    dx[i, :] = -H[a, :]
            Fval = np.concatenate([[(A @ x + self.eq.b)[0]],
                                   (Ad @ p + self.eq.b_dual)[1:]])
            resid = Fval - t
            if np.max(np.abs(resid)) <= self.newton_tol * (1.0 + np.max(np.abs(t))):
                self._seed = q.copy()
                return q
            dF = np.vstack([(A @ dx)[0:1, :], (Ad @ dp)[1:, :]])
            try:
                step = np.linalg.solve(dF, resid)
            except np.linalg.LinAlgError as err:
                raise ChartDegenerateError(
                    f"chart transition Jacobian singular near {q.tolist()}") from err
            q = q - step
            if not np.all(np.isfinite(q)):
                raise ChartDegenerateError("chart inversion diverged")
        raise ChartDegenerateError(
            f"chart inversion did not converge at new chart point {t.tolist()}")

    # ---- jets of the adapted chart functions -----------------------------------

    def frame(self, t, seed=None) -> Frame:
        t = np.asarray(t, dtype=float)
        n = self.g.n
        if self.is_direct:
            q = t.copy()
            G = gfexpr.eval_jet(self.g, q, 4)
            p1 = G.derivative_jet(0).truncated(3)
            xJ = [-G.derivative_jet(a).truncated(3) for a in range(1, n)]
            x1_val = q[0]
            zp_val = x1_val * p1.value - G.value
        else:
            q = self.from_new_chart(t, seed)
            G = gfexpr.eval_jet(self.g, q, 4)
            jx: list[Jet] = [None] * n
            jp: list[Jet] = [None] * n
            for a, (kind, idx) in enumerate(self.g.chart_vars):
                i = idx - 1
                coord = Jet.variable(a, q[a], n, 3)
                if kind == "x":
                    jx[i] = coord
                    jp[i] = G.derivative_jet(a).truncated(3)
                else:
                    jp[i] = coord
                    jx[i] = -G.derivative_jet(a).truncated(3)
            A, Ad = self.eq.A, self.eq.A_dual
            b, bd = self.eq.b, self.eq.b_dual
            zero = Jet.constant(0.0, n, 3)
            jxt = [sum((A[i, kk] * jx[kk] for kk in range(n)), zero) + b[i]
                   for i in range(n)]
            jpt = [sum((Ad[i, kk] * jp[kk] for kk in range(n)), zero) + bd[i]
                   for i in range(n)]
            F_jets = [jxt[0]] + jpt[1:]
            Ginv = jets.inverse_map(F_jets, q)
            p1 = jets.compose(jpt[0], Ginv)
            xJ = [jets.compose(jxt[j], Ginv) for j in range(1, n)]
            pt = self._ambient(q)
            x1_val = pt.x[0]
            zp_val = float(pt.p @ pt.x - pt.z)
        # dual height by integrating dz' = sum_i x_i dp_i in the new chart
        x1_jet = Jet.variable(0, x1_val, n, 2)
        grads = []
        for a in range(n):
            w = x1_jet * p1.derivative_jet(a).truncated(2)
            if a >= 1:
                w = w + xJ[a - 1].truncated(2)
            grads.append(w)
        zp = jets.integrate(grads, zp_val)
        return Frame(t=t, q=q, p1=p1, xJ=xJ, zp=zp)

    def wavefront_sample(self, t) -> tuple[np.ndarray, float]:
        """Dual-side wavefront point (p, z') of the adapted model over t."""
        t = np.asarray(t, dtype=float)
        if self.is_direct:
            return geo.project_m(geo.lift(self.g, t))
        pt = self._ambient(self.from_new_chart(t))
        return pt.p.copy(), float(pt.p @ pt.x - pt.z)


def _kernel_x_shadow(g: GeneratingFunction, q: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Ambient x-components of the kernel tangent vector at q."""
    H = geo.chart_hessian(g, q)
    u = np.empty(g.n)
    for a, (kind, idx) in enumerate(g.chart_vars):
        if kind == "x":
            u[idx - 1] = c[a]
        else:
            u[idx - 1] = -float(H[a, :] @ c)
    return u


def adapt(g: GeneratingFunction, q, pre: AffineEquivalence | None = None,
          kernel_tol: float = 1e-8) -> AdaptedModel:
    """Adapted model at a corank-one point, optionally after a pre-equivalence.

    Aligns the kernel's ambient x-direction (of the pre-transformed model)
    with the first axis by an orthogonal completion, then exposes the chart
    (x1, p_2..p_n).  Models already in that shape with no pre-equivalence
    adapt to themselves.
    """
    q = np.asarray(q, dtype=float)
    if pre is None and g.I == frozenset({1}):
        return AdaptedModel(g, AffineEquivalence.identity(g.n), q)
    c = geo.kernel_vector(g, q, kernel_tol)  # raises NotCorankOneError
    u = _kernel_x_shadow(g, q, c)
    if pre is not None:
        u = pre.A @ u
    nu = np.linalg.norm(u)
    if nu < 1e-12:
        raise NotCorankOneError("kernel has no x-direction to align")
    u = u / nu
    n = g.n
    cols = [u]
    for a in np.argsort(np.abs(u)):  # least-parallel axes first
        e = np.zeros(n)
        e[a] = 1.0
        v = e - sum((e @ w) * w for w in cols)
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            cols.append(v / norm)
        if len(cols) == n:
            break
    B = np.column_stack(cols)
    align = AffineEquivalence.create(B.T)  # orthogonal, maps u to e1
    eq = align if pre is None else align.compose_after(pre)
    model = AdaptedModel(g, eq, q)
    model.from_new_chart(model.base_new_chart)  # fail fast if not a chart
    return model


# -- classification through the adapted chart --------------------------------------


def classify_adapted(model: AdaptedModel, t=None,
                     tols: Tolerances | None = None) -> SingularityReport:
    """Classification of the transformed model at a new-chart point.

    Mirrors classify.classify_point with every quantity read from the
    adapted chart, where the kernel is structurally the first axis.
    """
    from . import classify as cl

    tols = tols or Tolerances()
    t = model.base_new_chart if t is None else np.asarray(t, dtype=float)
    fr = model.frame(t)
    pt = model._ambient(fr.q)
    lifted = geo.LiftedPoint(x=pt.x, p=pt.p, z=pt.z)
    lam = fr.lam
    grad = fr.lambda_gradient()
    n = model.g.n

    h_psd = True
    for d in np.vstack([np.zeros((1, n)), probe_directions(n, tols.probe_count)]):
        try:
            eig = np.linalg.eigvalsh(model.frame(t + tols.probe_radius * d).metric())
        except (ChartDegenerateError, gfexpr.EvalDomainError):
            h_psd = False
            break
        if np.min(eig) < -tols.tau_zero:
            h_psd = False
            break

    kernel = np.zeros(n)
    kernel[0] = 1.0

    def report(label, T3=None, T4=None, Xlam=None, corank=None, note=""):
        return SingularityReport(point=t, lifted=lifted, lam=lam,
                                 grad_lambda=grad, kernel=kernel, T3=T3, T4=T4,
                                 X_lambda=Xlam, h_psd=h_psd,
                                 classification=label, tolerances=tols,
                                 corank=corank, note=note)

    if abs(lam) > tols.tol_root:
        return report(cl.REGULAR, note="discriminant exceeds tol_root")
    s = np.linalg.svd(fr.lagrange_jacobian(), compute_uv=False)
    scale = s[0] if s[0] > 0 else 1.0
    corank = int(np.sum(s < tols.kernel_tol * scale))
    if corank != 1:
        return report(cl.DEGENERATE, corank=corank, note="not corank one")

    T3, T4 = 0.5 * fr.mu, 0.5 * fr.nu
    Xlam = float(grad[0])
    grad_norm = float(np.linalg.norm(grad))
    if abs(T3) >= tols.tau_nonzero:
        if abs(Xlam) < tols.tau_nonzero:
            return report(cl.DEGENERATE, T3, T4, Xlam, 1,
                          note="fold-edge routes disagree")
        return report(cl.CUSPIDAL_EDGE, T3, T4, Xlam, 1)
    if abs(T3) >= tols.tau_zero:
        return report(cl.DEGENERATE, T3, T4, Xlam, 1,
                      note="third-order pairing falls in the indeterminate band")
    if grad_norm >= tols.tau_nonzero and abs(T4) >= tols.tau_nonzero:
        return report(cl.SWALLOWTAIL, T3, T4, Xlam, 1)
    if abs(T4) >= tols.tau_nonzero and _verify_A3_adapted(model, t, tols):
        return report(cl.A3_TYPE, T3, T4, Xlam, 1,
                      note="branch check is hypothesis-consistent, not a proof")
    return report(cl.DEGENERATE, T3, T4, Xlam, 1,
                  note="no criterion applies within thresholds")


def _verify_A3_adapted(model: AdaptedModel, t: np.ndarray, tols: Tolerances) -> bool:
    n = model.g.n
    if n == 1:
        offsets = [np.zeros(1)] * tols.probe_count
    else:
        base_dirs = []
        for a in range(1, n):
            e = np.zeros(n)
            e[a] = 1.0
            base_dirs += [e, -e]
        offsets = [base_dirs[k % len(base_dirs)]
                   * tols.probe_radius / (2 ** (k // len(base_dirs)))
                   for k in range(tols.probe_count)]
    for off in offsets:
        try:
            x1 = _solve_in_x1(model, t + off, target_order=3, tols=tols)
            probe = (t + off).copy()
            probe[0] = x1
            fr = model.frame(probe)
        except (NewtonDivergedError, ChartDegenerateError, gfexpr.EvalDomainError):
            return False
        if abs(fr.lam) > tols.tol_root:
            return False
        if abs(0.5 * fr.mu) >= tols.tau_zero:
            return False
        if abs(0.5 * fr.nu) < tols.tau_nonzero:
            return False
    return True


def _solve_in_x1(model: AdaptedModel, t0: np.ndarray, target_order: int,
                 tols: Tolerances, max_iter: int = 40) -> float:
    """Newton in x1 on d^k p1 / dx1^k = 0 (k = target_order - 1 is the graph
    condition index: 1 for fold edges, 2 for degenerate branches)."""
    t = t0.astype(float).copy()
    k = target_order - 1
    for _ in range(max_iter):
        fr = model.frame(t)
        val = fr.lam if k == 1 else fr.mu
        slope = fr.mu if k == 1 else fr.nu
        if abs(val) <= 1e-13 * max(1.0, abs(slope)):
            return float(t[0])
        if abs(slope) < tols.tau_nonzero:
            raise NewtonDivergedError(
                f"graph condition has vanishing slope at {t.tolist()}")
        t[0] -= val / slope
        if not np.isfinite(t[0]):
            raise NewtonDivergedError("graph solve diverged")
    fr = model.frame(t)
    val = fr.lam if k == 1 else fr.mu
    if abs(val) <= tols.tol_root:
        return float(t[0])
    raise NewtonDivergedError(f"graph solve did not converge at {t0.tolist()}")


# -- singular graph -------------------------------------------------------------------


@dataclass
class SampledGraph:
    """x1 = f(p_J) on a rectangular p_J grid, with excluded nodes recorded."""

    kind: str
    axes: list[np.ndarray]          # p_J axes (length n-1, may be empty)
    values: np.ndarray              # shape = tuple of axis lengths (or scalar ())
    excluded: list[tuple[int, ...]]
    window: ChartWindow


def singular_graph(model: AdaptedModel, w: ChartWindow, kind: str,
                   tols: Tolerances | None = None) -> SampledGraph:
    """Solve the graph x1 = f(p_J) of the fold locus over the window's p_J grid.

    Fold edges solve the first x1-derivative of p1 to zero, degenerate
    branches the second; the next derivative must clear the nonvanishing
    threshold at every solution.  Nodes where the solve fails are excluded
    and back-filled from the sweep for interpolation continuity.
    """
    tols = tols or Tolerances()
    if kind not in (CUSPIDAL_EDGE, A3_TYPE):
        raise ValueError(f"no singular graph for kind {kind!r}")
    base = model.base_new_chart
    fr0 = model.frame(base)
    T3, T4 = 0.5 * fr0.mu, 0.5 * fr0.nu
    if kind == CUSPIDAL_EDGE and abs(T3) < tols.tau_nonzero:
        raise ValueError("base point is not a fold edge: third-order pairing "
                         f"{T3!r} below tau_nonzero")
    if kind == A3_TYPE and (abs(T3) >= tols.tau_zero or abs(T4) < tols.tau_nonzero):
        raise ValueError("base point is not a degenerate branch: pairings "
                         f"T3={T3!r}, T4={T4!r}")
    target_order = 2 if kind == CUSPIDAL_EDGE else 3
    n = model.g.n
    axes = [w.axis(a) for a in range(1, n)]
    shape = tuple(len(ax) for ax in axes)
    values = np.full(shape, np.nan)
    excluded: list[tuple[int, ...]] = []
    x1_seed = np.full(shape, np.nan)

    order_idx = sorted(np.ndindex(shape),
                       key=lambda idx: (sum(abs(axes[a][idx[a]] - base[1 + a])
                                            for a in range(len(idx))), idx))
    for idx in order_idx:
        pj = np.array([axes[a][idx[a]] for a in range(len(idx))]) if idx else np.array([])
        seed = base[0]
        best = np.inf
        for jdx in np.ndindex(shape):
            if not np.isnan(x1_seed[jdx]):
                dist = sum(abs(axes[a][jdx[a]] - (pj[a] if len(pj) else 0.0))
                           for a in range(len(jdx)))
                if dist < best:
                    best = dist
                    seed = x1_seed[jdx]
        t0 = np.concatenate([[seed], pj])
        try:
            x1 = _solve_in_x1(model, t0, target_order, tols)
            if abs(x1 - base[0]) > 4.0 * w.half_widths[0]:
                raise NewtonDivergedError("graph left the window")
            values[idx] = x1
            x1_seed[idx] = x1
        except (NewtonDivergedError, ChartDegenerateError, gfexpr.EvalDomainError):
            excluded.append(idx)
    # back-fill exclusions so downstream interpolation stays finite
    if excluded:
        fill = base[0] if np.all(np.isnan(values)) else np.nanmean(values)
        for idx in excluded:
            values[idx] = fill if np.isnan(values[idx]) else values[idx]
    return SampledGraph(kind=kind, axes=axes, values=values,
                        excluded=excluded, window=w)


# -- division and the normal form -------------------------------------------------------


def _axis_stencil(ax: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stencil start indices and Lagrange weights for one axis.

    Uses the 4 nodes around each query (fewer on short axes), clamped at the
    ends; queries outside the axis extrapolate with the edge polynomial.
    """
    width = min(4, len(ax))
    cell = np.clip(np.searchsorted(ax, x) - 1, 0, len(ax) - 2)
    start = np.clip(cell - 1, 0, len(ax) - width)
    cols = start[:, None] + np.arange(width)[None, :]
    nodes = ax[cols]
    w = np.ones((len(x), width))
    for j in range(width):
        for mter in range(width):
            if mter == j:
                continue
            w[:, j] *= (x - nodes[:, mter]) / (nodes[:, j] - nodes[:, mter])
    return cols, w


def _interp(axes: list[np.ndarray], values: np.ndarray):
    """Separable piecewise-cubic (local Lagrange) interpolator on a grid.

    Exact on polynomials of per-axis degree <= 3; deterministic; linear
    extrapolation-by-polynomial beyond the grid edges.
    """
    if not axes:
        const = float(values)
        return lambda pts: np.full(len(np.atleast_2d(np.asarray(pts, dtype=float))),
                                   const)
    axes = [np.asarray(ax, dtype=float) for ax in axes]
    values = np.asarray(values, dtype=float)

    def evaluate(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        cols, weights = zip(*[_axis_stencil(ax, pts[:, a])
                              for a, ax in enumerate(axes)])
        out = np.zeros(len(pts))
        widths = [c.shape[1] for c in cols]
        for combo in _cartesian(*[range(wd) for wd in widths]):
            idx = tuple(cols[a][:, combo[a]] for a in range(len(axes)))
            w = np.ones(len(pts))
            for a in range(len(axes)):
                w = w * weights[a][:, combo[a]]
            out += w * values[idx]
        return out

    return evaluate


@dataclass
class NormalFormModel:
    """Sampled (f, k1, k2, phi) realizing the branched dual potential."""

    kind: str
    degree: int                      # 2 for fold edges, 3 for degenerate branches
    p1_flip: bool                    # True when p1 was replaced by -p1
    pJ_axes: list[np.ndarray]
    y1_axis: np.ndarray
    f: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    phi: np.ndarray                  # shape (len(y1_axis), *pJ shape)
    dphi_dy1_at_base: float
    dphi_dy1_fd: float
    base_new_chart: np.ndarray
    delta: float
    excluded: list[tuple[int, ...]] = field(default_factory=list)
    phi1_vanished: bool = False
    interpolation: str = "cubic"
    _k1_interp: object = field(default=None, repr=False, init=False, compare=False)
    _k2_interp: object = field(default=None, repr=False, init=False, compare=False)
    _phi_interp: object = field(default=None, repr=False, init=False, compare=False)

    def __post_init__(self):
        self._k1_interp = _interp(self.pJ_axes, self.k1)
        self._k2_interp = _interp(self.pJ_axes, self.k2)
        self._phi_interp = _interp([self.y1_axis] + self.pJ_axes, self.phi)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "kind": self.kind,
            "degree": self.degree,
            "p1_flip": self.p1_flip,
            "pJ_axes": [ax.tolist() for ax in self.pJ_axes],
            "y1_axis": self.y1_axis.tolist(),
            "f": self.f.tolist(),
            "k1": self.k1.tolist(),
            "k2": self.k2.tolist(),
            "phi": self.phi.tolist(),
            "dphi_dy1_at_base": self.dphi_dy1_at_base,
            "dphi_dy1_fd": self.dphi_dy1_fd,
            "base_new_chart": self.base_new_chart.tolist(),
            "delta": self.delta,
            "excluded": [list(i) for i in self.excluded],
            "phi1_vanished": self.phi1_vanished,
            "interpolation": self.interpolation,
        }


def _phi_pair(fr: Frame, f_val: float, sigma: float, d: int, delta: float,
              k1_val: float, k2_val: float) -> tuple[float, float, float]:
    """(phi1, dphi1/dx1, phi2) at the frame's point, quotient or Taylor route.

    p1 and z' Taylor coefficients in x1 about the frame point feed the
    near-divisor branch; away from it the exact quotients are used with
    values taken from the frame.  sigma folds in the p1 sign flip.
    """
    t1 = fr.t[0] - f_val
    pc = fr.p1_taylor_x1() * sigma
    zc = fr.zp_taylor_x1()
    if abs(t1) < delta:
        # The frame expands about its own x1, a distance t1 from the divisor;
        # shifting the expansion to the divisor gives phi1 = pc2 - 2 pc3 t1
        # + O(t1^2) for d = 2 and phi1 = pc3 + O(t1) for d = 3.  The O-errors
        # are multiplied back by (p1 - k1) ~ t1^d downstream, so they cannot
        # reach the reconstruction at working precision.
        if d == 2:
            phi1 = pc[2] - 2.0 * pc[3] * t1
            dphi1 = pc[3]
            phi2 = zc[2] - 2.0 * zc[3] * t1
        else:
            phi1 = pc[3]
            dphi1 = 0.0
            phi2 = zc[3]
        return phi1, dphi1, phi2
    p1v = fr.p1.value * sigma
    zpv = fr.zp.value
    phi1 = (p1v - k1_val) / t1**d
    dphi1 = (pc[1]) / t1**d - d * (p1v - k1_val) / t1 ** (d + 1)
    phi2 = (zpv - k2_val) / t1**d
    return phi1, dphi1, phi2


def divide(model: AdaptedModel, graph: SampledGraph, kind: str | None = None,
           tols: Tolerances | None = None) -> NormalFormModel:
    """Extract (k1, k2, phi) by dividing p1 and z' along the singular graph.

    The quotient route is used at distance >= delta from the divisor and
    Taylor coefficients of the chart jets below it.  A negative leading
    coefficient on a fold edge triggers the p1 -> -p1 sign fix, recorded in
    the result.
    """
    tols = tols or Tolerances()
    kind = kind or graph.kind
    d = 2 if kind == CUSPIDAL_EDGE else 3
    n = model.g.n
    w = graph.window
    pJ_axes = graph.axes
    shape = graph.values.shape
    base = model.base_new_chart

    # values on the graph
    k1 = np.empty(shape)
    k2 = np.empty(shape)
    phi1_on_graph = np.empty(shape)
    for idx in np.ndindex(shape) if shape else [()]:
        pj = np.array([pJ_axes[a][idx[a]] for a in range(len(idx))])
        t = np.concatenate([[graph.values[idx] if shape else float(graph.values)], pj])
        fr = model.frame(t)
        k1[idx] = fr.p1.value
        k2[idx] = fr.zp.value
        phi1_on_graph[idx] = fr.p1.coefficient(fr._e1(d))

    # sign fix at the base node (nearest grid node to the base point)
    if shape:
        base_idx = tuple(int(np.argmin(np.abs(pJ_axes[a] - base[1 + a])))
                         for a in range(len(shape)))
    else:
        base_idx = ()
    phi1_base = float(phi1_on_graph[base_idx])
    sigma = 1.0
    if abs(phi1_base) < tols.tau_nonzero:
        raise Phi1VanishesError(
            f"leading division coefficient {phi1_base!r} vanishes at the base")
    if d == 2 and phi1_base < 0.0:
        sigma = -1.0
    k1 = sigma * k1
    phi1_base *= sigma

    def root(v: float) -> float:
        return np.sqrt(v) if d == 2 else np.cbrt(v)

    # scan the window for the y1 range
    x1_axis = w.axis(0)
    y_min, y_max = np.inf, -np.inf
    phi1_vanished = len(graph.excluded) > 0
    for idx in np.ndindex(shape) if shape else [()]:
        pj = np.array([pJ_axes[a][idx[a]] for a in range(len(idx))])
        fv = float(graph.values[idx]) if shape else float(graph.values)
        for x1 in x1_axis:
            t = np.concatenate([[x1], pj])
            try:
                fr = model.frame(t)
            except (ChartDegenerateError, gfexpr.EvalDomainError):
                phi1_vanished = True
                continue
            phi1, _, _ = _phi_pair(fr, fv, sigma, d, tols.delta,
                                   float(k1[idx]), float(k2[idx]))
            if d == 2 and phi1 <= tols.tau_nonzero:
                phi1_vanished = True
                continue
            if d == 3 and abs(phi1) <= tols.tau_nonzero:
                phi1_vanished = True
                continue
            y = (x1 - fv) * root(phi1) if d == 2 else (x1 - fv) * np.cbrt(phi1)
            y_min, y_max = min(y_min, y), max(y_max, y)
    if not np.isfinite(y_min) or not np.isfinite(y_max):
        raise Phi1VanishesError("division broke down on the whole window")
    pad = 0.01 * (y_max - y_min + 1e-12)
    y1_axis = np.linspace(y_min - pad, y_max + pad, w.resolution[0])

    # sample phi on the (y1, p_J) grid by inverting the coordinate change
    phi = np.empty((len(y1_axis),) + shape)
    excluded: list[tuple[int, ...]] = []
    for idx in np.ndindex(shape) if shape else [()]:
        pj = np.array([pJ_axes[a][idx[a]] for a in range(len(idx))])
        fv = float(graph.values[idx]) if shape else float(graph.values)
        k1v, k2v = float(k1[idx]), float(k2[idx])
        x1_cur = None
        order = np.argsort(np.abs(y1_axis))  # walk outward from the divisor
        col = np.empty(len(y1_axis))
        col_ok = np.zeros(len(y1_axis), dtype=bool)
        for yk in order:
            y1 = y1_axis[yk]
            x1 = fv + y1 / root(phi1_base) if x1_cur is None else x1_cur
            ok = False
            for _ in range(40):
                t = np.concatenate([[x1], pj])
                try:
                    fr = model.frame(t)
                    phi1, dphi1, phi2 = _phi_pair(fr, fv, sigma, d, tols.delta,
                                                  k1v, k2v)
                except (ChartDegenerateError, gfexpr.EvalDomainError):
                    break
                if (d == 2 and phi1 <= 0.0) or (d == 3 and phi1 == 0.0):
                    break
                r = root(phi1) if d == 2 else np.cbrt(phi1)
                psi = (x1 - fv) * r - y1
                if abs(psi) <= 1e-13 * (1.0 + abs(y1)):
                    ok = True
                    break
                dr = (dphi1 / (d * r ** (d - 1)))
                dpsi = r + (x1 - fv) * dr
                if dpsi == 0.0 or not np.isfinite(dpsi):
                    break
                x1 = x1 - psi / dpsi
            if ok:
                col[yk] = phi2 / phi1
                col_ok[yk] = True
                x1_cur = x1
            else:
                excluded.append((int(yk),) + idx)
                col[yk] = np.nan
        # back-fill failures from the nearest successful node
        if not np.all(col_ok):
            good = np.nonzero(col_ok)[0]
            if len(good) == 0:
                raise Phi1VanishesError("coordinate change inversion failed "
                                        "along an entire grid column")
            for yk in np.nonzero(~col_ok)[0]:
                col[yk] = col[good[np.argmin(np.abs(good - yk))]]
        phi[(slice(None),) + idx] = col

    # closed-form slope of phi at the base: (2/3 or 3/4) * dx1/dy1
    if d == 2:
        dphi_closed = (2.0 / 3.0) / np.sqrt(phi1_base)
    else:
        dphi_closed = (3.0 / 4.0) / np.cbrt(phi1_base)

    nf = NormalFormModel(kind=kind, degree=d, p1_flip=(sigma < 0),
                         pJ_axes=pJ_axes, y1_axis=y1_axis,
                         f=np.asarray(graph.values, dtype=float),
                         k1=k1, k2=k2, phi=phi,
                         dphi_dy1_at_base=float(dphi_closed),
                         dphi_dy1_fd=0.0,
                         base_new_chart=base.copy(),
                         delta=tols.delta,
                         excluded=excluded,
                         phi1_vanished=phi1_vanished)
    # finite-difference cross check of the phi slope at the base
    h = (y1_axis[-1] - y1_axis[0]) / 200.0
    pj_base = base[1:]
    lo = nf._phi_interp(np.concatenate([[-h], pj_base]))[0]
    hi = nf._phi_interp(np.concatenate([[h], pj_base]))[0]
    nf.dphi_dy1_fd = float((hi - lo) / (2.0 * h))
    return nf


def reconstruct_many(nf: NormalFormModel, P: np.ndarray, branch: str = "+",
                     edge_tol: float = 1e-9) -> np.ndarray:
    """Vectorized reconstruction over rows of P; below-sheet rows become NaN."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    pj = P[:, 1:]
    k1v = nf._k1_interp(pj)
    k2v = nf._k2_interp(pj)
    sigma = -1.0 if nf.p1_flip else 1.0
    s = sigma * P[:, 0] - k1v
    if nf.degree == 2:
        bad = s < -edge_tol
        s = np.maximum(s, 0.0)
        y1 = np.sqrt(s) if branch == "+" else -np.sqrt(s)
    else:
        bad = np.zeros(len(P), dtype=bool)
        y1 = np.cbrt(s)
    phi_v = nf._phi_interp(np.column_stack([y1, pj]))
    out = k2v + s * phi_v
    out[bad] = np.nan
    return out


def reconstruct(nf: NormalFormModel, p, branch: str = "+",
                edge_tol: float = 1e-9) -> float:
    """Dual potential height at the dual-space point p from the normal form.

    For fold edges `branch` picks the sheet and p1 must not sit below the
    fold by more than edge_tol; degenerate branches ignore `branch` and use
    the real cube root.
    """
    p = np.asarray(p, dtype=float)
    out = float(reconstruct_many(nf, p[None, :], branch, edge_tol)[0])
    if np.isnan(out):
        raise OutsideSheetError(
            f"p1={p[0]!r} lies below the fold sheet of the normal form")
    return out


def roundtrip_residual(model: AdaptedModel, nf: NormalFormModel,
                       w: ChartWindow, stride: int = 1) -> float:
    """Max |z' - reconstruction| over the window's chart grid samples."""
    axes = [w.axis(a)[::stride] for a in range(w.n)]
    pts, heights = [], []
    for idx in np.ndindex(tuple(len(ax) for ax in axes)):
        t = np.array([axes[a][idx[a]] for a in range(w.n)])
        try:
            p_vec, zp = model.wavefront_sample(t)
        except (ChartDegenerateError, gfexpr.EvalDomainError):
            continue
        pts.append(p_vec)
        heights.append(zp)
    if not pts:
        return 0.0
    P = np.array(pts)
    Z = np.array(heights)
    branches = ("+", "-") if nf.degree == 2 else ("+",)
    best = np.full(len(P), np.inf)
    for br in branches:
        err = np.abs(reconstruct_many(nf, P, br) - Z)
        best = np.fmin(best, np.where(np.isnan(err), np.inf, err))
    finite = best[np.isfinite(best)]
    return float(np.max(finite)) if len(finite) else 0.0
