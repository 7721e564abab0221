"""Randomized residual suite for the divergence/metric/cubic identities.

Each identity is evaluated along two independent computational routes; the
suite reports the worst absolute residual per identity over randomized
points and directions.  Used both by the test suite and the CLI runner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .classify import ChartWindow, Tolerances, find_singular_set
from .gfexpr import EvalDomainError, GeneratingFunction
from .geometry import NotCorankOneError


@dataclass
class IdentityResult:
    name: str
    samples: int
    max_residual: float

    def to_dict(self) -> dict:
        return {"name": self.name, "samples": self.samples,
                "max_residual": self.max_residual}


def _interior_points(w: ChartWindow, rng: np.random.Generator, count: int,
                     shrink: float = 0.9) -> np.ndarray:
    lo = w.center - shrink * w.half_widths
    hi = w.center + shrink * w.half_widths
    return rng.uniform(lo, hi, size=(count, w.n))


def run_suite(g: GeneratingFunction, w: ChartWindow, trials: int = 100,
              seed: int = 0, tols: Tolerances | None = None,
              corrupt: bool = False) -> list[IdentityResult]:
    """Worst residuals of the identity suite over `trials` random samples.

    `corrupt` deliberately biases one pairing; it exists as a negative
    control so a broken suite cannot pass silently.
    """
    tols = tols or Tolerances()
    rng = np.random.default_rng(seed)
    n = g.n
    k = g.num_I
    bias = 1e-3 if corrupt else 0.0

    res = {name: IdentityResult(name, 0, 0.0) for name in (
        "criterion_tensor", "criterion_vs_divergence",
        "third_order_cases", "fourth_order_cases",
        "metric_restored", "weak_contrast",
        "divergence_formula", "kernel_third", "kernel_fourth")}

    def bump(name, value):
        r = res[name]
        r.samples += 1
        r.max_residual = max(r.max_residual, abs(value))

    points = _interior_points(w, rng, trials)
    for q in points:
        try:
            D4 = geo.divergence_jet(g, q, 4)
            T3t = geo.chart_third_tensor(g, q)
            T4t = geo.chart_fourth_tensor(g, q)
        except EvalDomainError:
            continue
        X = rng.standard_normal(n)
        Y = rng.standard_normal(n)

        t3 = geo.criterion_T3(g, q, X) + bias
        bump("criterion_tensor", t3 - geo.metric_cubic_pairing(g, q, X))
        dxxx = geo.divergence_functional(g, q, [X], [X, X], jet=D4)
        bump("criterion_vs_divergence", t3 + 0.5 * dxxx)

        # coordinate-direction cases of the third/fourth-order identities
        e = np.eye(n)
        for u in range(n):
            for t in range(n):
                for v in range(t, n):
                    lhs = geo.divergence_functional(g, q, [e[u]], [e[t], e[v]],
                                                    jet=D4)
                    rhs = -T3t[t, u, v] if u < k else 0.0
                    bump("third_order_cases", lhs - rhs)
                    for s in range(v, n):
                        lhs4 = geo.divergence_functional(
                            g, q, [e[u]], [e[s], e[t], e[v]], jet=D4)
                        rhs4 = -T4t[s, t, u, v] if u < k else 0.0
                        bump("fourth_order_cases", lhs4 - rhs4)

        h = geo.quasi_hessian(g, q)
        bump("metric_restored",
             float(X @ h @ Y) + geo.divergence_functional(g, q, [X], [Y], jet=D4))

        bump("weak_contrast", geo.canonical_divergence(g, q, q))
        bump("weak_contrast", geo.divergence_functional(g, q, [X], [], jet=D4))
        bump("weak_contrast", geo.divergence_functional(g, q, [], [X], jet=D4))

        qq = q + 0.05 * rng.standard_normal(n) * w.half_widths
        try:
            bump("divergence_formula",
                 geo.canonical_divergence(g, q, qq)
                 - geo.canonical_divergence_lifted(g, q, qq))
        except EvalDomainError:
            pass

    # corank-one identities along the singular set, when one exists
    singular = find_singular_set(g, w, tols.tol_root)
    for q in singular[: max(1, trials // 4)]:
        try:
            c = geo.kernel_vector(g, q, tols.kernel_tol)
        except NotCorankOneError:
            continue
        try:
            D4 = geo.divergence_jet(g, q, 4)
        except EvalDomainError:
            continue
        t3 = geo.criterion_T3(g, q, c) + bias
        t4 = geo.criterion_T4(g, q, c)
        bump("kernel_third",
             t3 + 0.5 * geo.divergence_functional(g, q, [c], [c, c], jet=D4))
        bump("kernel_fourth",
             t4 + 0.5 * geo.divergence_functional(g, q, [c], [c, c, c], jet=D4))

    return list(res.values())
