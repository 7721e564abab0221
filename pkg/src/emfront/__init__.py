"""Wavefront geometry of generating-function models.

A generating function g(x_I, p_J) describes a Legendre submanifold of the
standard contact space; this package evaluates its two wavefront projections,
the block metric, cubic tensor, and canonical divergence, detects and
classifies fold singularities (cuspidal edge, swallowtail, A3-type), and
extracts the branched normal form of the dual potential.
"""

from .classify import (A3_TYPE, CUSPIDAL_EDGE, DEGENERATE, REGULAR,
                       SWALLOWTAIL, ChartWindow, SingularityReport, Tolerances,
                       classify_point, classify_window, find_singular_set,
                       verify_A3_branch)
from .geometry import (LiftedPoint, NotCorankOneError, canonical_divergence,
                       criterion_T3, criterion_T4, cubic_tensor, discriminant,
                       divergence_functional, dual_chart, dualize,
                       kernel_vector, lift, project_e, project_m,
                       quasi_hessian)
from .gfexpr import (DslError, EvalDomainError, GeneratingFunction, LexError,
                     ParseError, PartitionError, eval_jet, eval_real, parse,
                     to_source)
from .jets import Jet
from .normalform import (AdaptedModel, AffineEquivalence, ChartDegenerateError,
                         NormalFormModel, OutsideSheetError, Phi1VanishesError,
                         adapt, classify_adapted, divide, reconstruct,
                         roundtrip_residual, singular_graph)

__version__ = "0.1.0"

__all__ = [
    "A3_TYPE", "CUSPIDAL_EDGE", "DEGENERATE", "REGULAR", "SWALLOWTAIL",
    "AdaptedModel", "AffineEquivalence", "ChartDegenerateError", "ChartWindow",
    "DslError", "EvalDomainError", "GeneratingFunction", "Jet", "LexError",
    "LiftedPoint", "NormalFormModel", "NotCorankOneError", "OutsideSheetError",
    "ParseError", "PartitionError", "Phi1VanishesError", "SingularityReport",
    "Tolerances", "adapt", "canonical_divergence", "classify_adapted",
    "classify_point", "classify_window", "criterion_T3", "criterion_T4",
    "cubic_tensor", "discriminant", "divergence_functional", "divide",
    "dual_chart", "dualize", "eval_jet", "eval_real", "find_singular_set",
    "kernel_vector", "lift", "parse", "project_e", "project_m",
    "quasi_hessian", "reconstruct", "roundtrip_residual", "singular_graph",
    "to_source", "verify_A3_branch",
]
