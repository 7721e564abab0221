"""Detection and classification of fold-locus points inside a chart window.

The singular set of the dual-side Lagrange map is the zero set of the
discriminant; points on it are classified by the third/fourth-order pairings
along the kernel direction:

* fold edge (``CuspidalEdge``): third-order pairing nonzero;
* ``Swallowtail``: third-order pairing zero, discriminant gradient nonzero,
  fourth-order pairing nonzero;
* ``A3Type``: third-order pairing zero along the whole singular set nearby
  (finitely probed) with nonzero fourth-order pairing;
* everything else: ``Degenerate``.

Zero tests and nonvanishing tests use two separated thresholds; values in
the gap are never silently resolved and classify as Degenerate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, asdict

import numpy as np

from . import geometry as geo
from .gfexpr import EvalDomainError, GeneratingFunction
from .geometry import NotCorankOneError

CUSPIDAL_EDGE = "CuspidalEdge"
SWALLOWTAIL = "Swallowtail"
A3_TYPE = "A3Type"
DEGENERATE = "Degenerate"
REGULAR = "Regular"


@dataclass(frozen=True)
class Tolerances:
    """All thresholds used by detection and classification."""

    tol_root: float = 1e-8        # |discriminant| bound for accepted roots
    tau_zero: float = 1e-8        # zero test on pairings
    tau_nonzero: float = 1e-5     # nonvanishing test on pairings / gradients
    kernel_tol: float = 1e-8      # relative singular-value cut for corank
    probe_radius: float = 1e-2    # neighborhood radius for finite probes
    probe_count: int = 8          # probes per point
    delta: float = 1e-3           # divisor crossover used by normal forms
    roundtrip: float = 1e-6       # normal-form reconstruction residual bound

    def __post_init__(self):
        if not self.tau_zero < self.tau_nonzero:
            raise ValueError("tau_zero must stay strictly below tau_nonzero")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ChartWindow:
    """Axis-aligned box in chart coordinates with per-axis sampling counts."""

    center: np.ndarray
    half_widths: np.ndarray
    resolution: tuple[int, ...]

    @staticmethod
    def create(center, half_widths, resolution) -> "ChartWindow":
        center = np.asarray(center, dtype=float)
        half_widths = np.asarray(half_widths, dtype=float)
        if center.shape != half_widths.shape:
            raise ValueError("center and half_widths must have equal length")
        if np.any(half_widths <= 0):
            raise ValueError("half_widths must be positive")
        if isinstance(resolution, int):
            resolution = (resolution,) * len(center)
        resolution = tuple(int(r) for r in resolution)
        if len(resolution) != len(center):
            raise ValueError("resolution must give one count per axis")
        if any(r < 2 for r in resolution):
            raise ValueError("resolution must be at least 2 per axis")
        return ChartWindow(center, half_widths, resolution)

    @property
    def n(self) -> int:
        return len(self.center)

    def axis(self, a: int) -> np.ndarray:
        return np.linspace(self.center[a] - self.half_widths[a],
                           self.center[a] + self.half_widths[a],
                           self.resolution[a])

    def axes(self) -> list[np.ndarray]:
        return [self.axis(a) for a in range(self.n)]

    def spacing(self) -> np.ndarray:
        return np.array([2.0 * self.half_widths[a] / (self.resolution[a] - 1)
                         for a in range(self.n)])

    def contains(self, q, slack: float = 0.0) -> bool:
        q = np.asarray(q, dtype=float)
        return bool(np.all(np.abs(q - self.center)
                           <= self.half_widths * (1.0 + slack) + 1e-12))


@dataclass
class SingularityReport:
    """Per-point classification record; label re-derivable from the numbers."""

    point: np.ndarray
    lifted: geo.LiftedPoint
    lam: float
    grad_lambda: np.ndarray
    kernel: np.ndarray | None
    T3: float | None
    T4: float | None
    X_lambda: float | None
    h_psd: bool
    classification: str
    tolerances: Tolerances
    corank: int | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "point": self.point.tolist(),
            "lifted": {"x": self.lifted.x.tolist(), "p": self.lifted.p.tolist(),
                       "z": self.lifted.z},
            "lambda": self.lam,
            "grad_lambda": self.grad_lambda.tolist(),
            "kernel": None if self.kernel is None else self.kernel.tolist(),
            "T3": self.T3,
            "T4": self.T4,
            "X_lambda": self.X_lambda,
            "h_psd": self.h_psd,
            "classification": self.classification,
            "corank": self.corank,
            "note": self.note,
            "tolerances": self.tolerances.to_dict(),
        }


# -- singular set detection ------------------------------------------------------


def _newton_polish(g: GeneratingFunction, q0: np.ndarray, tol_root: float,
                   max_iter: int = 60) -> np.ndarray | None:
    """Drive the discriminant to |lambda| <= tol_root by gradient steps.

    Uses lambda * grad/|grad|^2 steps (scalar Gauss-Newton), which also
    converges linearly onto tangential zeros where the gradient vanishes
    with the function.
    """
    q = q0.astype(float).copy()
    for _ in range(max_iter):
        lam = geo.discriminant(g, q)
        if abs(lam) <= tol_root:
            return q
        grad = geo.discriminant_gradient(g, q)
        denom = float(grad @ grad)
        if denom == 0.0:
            return None
        q = q - lam * grad / denom
    lam = geo.discriminant(g, q)
    return q if abs(lam) <= tol_root else None


def _bisect_edge(g: GeneratingFunction, qa: np.ndarray, qb: np.ndarray,
                 la: float, lb: float, tol_root: float) -> np.ndarray:
    """Root of the discriminant on the segment [qa, qb] with a sign change."""
    for _ in range(200):
        qm = 0.5 * (qa + qb)
        lm = geo.discriminant(g, qm)
        if abs(lm) <= tol_root:
            return qm
        if (la < 0) != (lm < 0):
            qb, lb = qm, lm
        else:
            qa, la = qm, lm
        if np.max(np.abs(qb - qa)) < 1e-15 * (1.0 + np.max(np.abs(qm))):
            break
    qm = 0.5 * (qa + qb)
    polished = _newton_polish(g, qm, tol_root)
    return polished if polished is not None else qm


def find_singular_set(g: GeneratingFunction, w: ChartWindow,
                      tol_root: float = 1e-8) -> list[np.ndarray]:
    """Points of the window where the discriminant vanishes to tol_root.

    Sign changes along grid edges are bisected; grid-local minima of the
    absolute discriminant below sqrt(tol_root) are polished by Newton steps,
    which captures tangential zeros that never change sign.  Results are
    deduplicated at half-cell resolution and sorted lexicographically.
    """
    axes = w.axes()
    shape = tuple(w.resolution)
    lam = np.empty(shape)
    for idx in np.ndindex(shape):
        q = np.array([axes[a][idx[a]] for a in range(w.n)])
        lam[idx] = geo.discriminant(g, q)

    roots: list[np.ndarray] = []

    def point_at(idx):
        return np.array([axes[a][idx[a]] for a in range(w.n)])

    # grid nodes that are already roots
    for idx in np.ndindex(shape):
        if abs(lam[idx]) <= tol_root:
            roots.append(point_at(idx))

    # sign changes along grid edges
    for axis in range(w.n):
        for idx in np.ndindex(shape):
            if idx[axis] + 1 >= shape[axis]:
                continue
            jdx = list(idx)
            jdx[axis] += 1
            jdx = tuple(jdx)
            la, lb = lam[idx], lam[jdx]
            if la * lb < 0.0:
                roots.append(_bisect_edge(g, point_at(idx), point_at(jdx),
                                          la, lb, tol_root))

    # tangential zeros: local minima of |lambda| below sqrt(tol_root)
    trigger = np.sqrt(tol_root)
    abs_lam = np.abs(lam)
    for idx in np.ndindex(shape):
        v = abs_lam[idx]
        if v > trigger or v <= tol_root:
            continue
        is_min = True
        for axis in range(w.n):
            for step in (-1, 1):
                jdx = list(idx)
                jdx[axis] += step
                if 0 <= jdx[axis] < shape[axis] and abs_lam[tuple(jdx)] < v:
                    is_min = False
                    break
            if not is_min:
                break
        if is_min:
            polished = _newton_polish(g, point_at(idx), tol_root)
            if polished is not None and w.contains(polished, slack=0.05):
                roots.append(polished)

    # deduplicate at half-cell resolution, preferring smaller |lambda|
    half_cell = w.spacing() / 2.0
    kept: list[tuple[np.ndarray, float]] = []
    for q in sorted(roots, key=lambda r: abs(geo.discriminant(g, r))):
        if any(np.all(np.abs(q - other) <= half_cell) for other, _ in kept):
            continue
        kept.append((q, abs(geo.discriminant(g, q))))
    out = [q for q, _ in kept]
    out.sort(key=lambda r: tuple(r))
    return out


# -- probing helpers ---------------------------------------------------------------


def probe_directions(n: int, count: int) -> np.ndarray:
    """Deterministic unit directions: axes, then axis pairs, then seeded fill."""
    dirs: list[np.ndarray] = []
    for a in range(n):
        e = np.zeros(n)
        e[a] = 1.0
        dirs.append(e.copy())
        dirs.append(-e)
    for a, b in itertools.combinations(range(n), 2):
        for sb in (1.0, -1.0):
            for sa in (1.0, -1.0):
                e = np.zeros(n)
                e[a], e[b] = sa, sb
                dirs.append(e / np.sqrt(2.0))
    if len(dirs) < count:
        rng = np.random.default_rng(0)
        while len(dirs) < count:
            v = rng.standard_normal(n)
            nv = np.linalg.norm(v)
            if nv > 1e-9:
                dirs.append(v / nv)
    return np.array(dirs[:count])


def _h_psd_probes(g: GeneratingFunction, q: np.ndarray, tols: Tolerances) -> bool:
    pts = [q] + [q + tols.probe_radius * d
                 for d in probe_directions(g.n, tols.probe_count)]
    for pt in pts:
        try:
            eig = np.linalg.eigvalsh(geo.quasi_hessian(g, pt))
        except EvalDomainError:
            return False
        if np.min(eig) < -tols.tau_zero:
            return False
    return True


# -- A3 branch verification ----------------------------------------------------------


def _mu(g: GeneratingFunction, q: np.ndarray, c: np.ndarray) -> float:
    """Full cubic contraction with a frozen direction (2x the T3 pairing)."""
    T = geo.chart_third_tensor(g, q)
    return float(np.einsum("t,u,v,tuv->", c, c, c, T))


def _mu_kernel_slope(g: GeneratingFunction, q: np.ndarray, c: np.ndarray) -> float:
    F = geo.chart_fourth_tensor(g, q)
    return float(np.einsum("s,t,u,v,stuv->", c, c, c, c, F))


def verify_A3_branch(g: GeneratingFunction, q, radius: float = 1e-2,
                     samples: int = 8, tols: Tolerances | None = None) -> bool:
    """Finite check that the singular set through q is a degenerate fold branch.

    Solves the zero set of the frozen cubic contraction as a graph along the
    kernel direction (possible when its kernel-directional slope, twice the
    fourth-order pairing, is nonzero) and requires the discriminant to vanish
    and the third-order pairing to stay below the zero threshold at `samples`
    points of that graph within `radius`.  Returns False on any failure; this
    is hypothesis-consistency, not a proof.
    """
    tols = tols or Tolerances()
    q = np.asarray(q, dtype=float)
    try:
        c = geo.kernel_vector(g, q, tols.kernel_tol)
    except NotCorankOneError:
        return False
    slope = _mu_kernel_slope(g, q, c)
    if abs(slope) < tols.tau_nonzero:
        return False

    # orthonormal completion of the kernel direction
    basis = []
    for a in range(g.n):
        e = np.zeros(g.n)
        e[a] = 1.0
        v = e - (e @ c) * c
        for b in basis:
            v -= (v @ b) * b
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            basis.append(v / nv)
    if g.n == 1:
        offsets = [np.zeros(1)] * samples
    else:
        # cycle signed basis directions at shrinking radii: r, r/2, r/4, ...
        signed = [s * b for b in basis for s in (1.0, -1.0)]
        offsets = [signed[k % len(signed)] * radius / (2 ** (k // len(signed)))
                   for k in range(samples)]

    for off in offsets:
        base = q + off
        rho = 0.0
        ok = False
        for _ in range(30):
            pt = base + rho * c
            m = _mu(g, pt, c)
            if abs(m) <= 1e-11 * max(1.0, abs(slope)):
                ok = True
                break
            sl = _mu_kernel_slope(g, pt, c)
            if abs(sl) < tols.tau_nonzero:
                break
            rho -= m / sl
            if abs(rho) > 4.0 * radius:
                break
        if not ok:
            return False
        pt = base + rho * c
        if abs(geo.discriminant(g, pt)) > tols.tol_root:
            return False
        try:
            c_local = geo.kernel_vector(g, pt, tols.kernel_tol)
        except NotCorankOneError:
            return False
        if abs(geo.criterion_T3(g, pt, c_local)) >= tols.tau_zero:
            return False
    return True


# -- per-point classification ----------------------------------------------------------


def classify_point(g: GeneratingFunction, q, tols: Tolerances | None = None) -> SingularityReport:
    """Classification record for a chart point of the singular set.

    Points whose discriminant exceeds tol_root report Regular; corank >= 2
    reports Degenerate.  The label follows the decision ladder documented in
    the module docstring, with a fold-edge consistency check between the
    third-order pairing and the kernel-directional derivative of the
    discriminant: disagreement demotes to Degenerate.
    """
    tols = tols or Tolerances()
    q = np.asarray(q, dtype=float)
    lifted = geo.lift(g, q)
    lam = geo.discriminant(g, q)
    grad = geo.discriminant_gradient(g, q)
    h_psd = _h_psd_probes(g, q, tols)

    def report(label, kernel=None, T3=None, T4=None, Xlam=None, corank=None, note=""):
        return SingularityReport(point=q, lifted=lifted, lam=lam,
                                 grad_lambda=grad, kernel=kernel, T3=T3, T4=T4,
                                 X_lambda=Xlam, h_psd=h_psd,
                                 classification=label, tolerances=tols,
                                 corank=corank, note=note)

    if abs(lam) > tols.tol_root:
        return report(REGULAR, note="discriminant exceeds tol_root")
    try:
        c = geo.kernel_vector(g, q, tols.kernel_tol)
    except NotCorankOneError as err:
        return report(DEGENERATE, note=f"not corank one: {err}")

    T3 = geo.criterion_T3(g, q, c)
    T4 = geo.criterion_T4(g, q, c)
    Xlam = float(grad @ c)
    grad_norm = float(np.linalg.norm(grad))

    if abs(T3) >= tols.tau_nonzero:
        if abs(Xlam) < tols.tau_nonzero:
            return report(DEGENERATE, c, T3, T4, Xlam, 1,
                          note="fold-edge routes disagree: pairing nonzero "
                               "but kernel slope of the discriminant is not")
        return report(CUSPIDAL_EDGE, c, T3, T4, Xlam, 1)
    if abs(T3) >= tols.tau_zero:
        return report(DEGENERATE, c, T3, T4, Xlam, 1,
                      note="third-order pairing falls in the indeterminate band")
    if grad_norm >= tols.tau_nonzero and abs(T4) >= tols.tau_nonzero:
        return report(SWALLOWTAIL, c, T3, T4, Xlam, 1)
    if abs(T4) >= tols.tau_nonzero and verify_A3_branch(
            g, q, tols.probe_radius, tols.probe_count, tols):
        return report(A3_TYPE, c, T3, T4, Xlam, 1,
                      note="branch check is hypothesis-consistent, not a proof")
    return report(DEGENERATE, c, T3, T4, Xlam, 1,
                  note="no criterion applies within thresholds")


def classify_window(g: GeneratingFunction, w: ChartWindow,
                    tols: Tolerances | None = None) -> list[SingularityReport]:
    """find_singular_set + classify_point over a window, sorted by point."""
    tols = tols or Tolerances()
    points = find_singular_set(g, w, tols.tol_root)
    return [classify_point(g, q, tols) for q in points]
