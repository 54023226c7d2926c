"""Exact verification of dyadic martingale transform estimates against the Calderon operator."""

__version__ = "0.1.0"

from .exact_scalar import AffineSequence, LogRational, affine_dominates, lr_sign
from .dyadic_step import DyadicStep, StepFunction, TailedDyadicStep, rearrange
from .haar_martingale import EpsilonPattern, IndexSet, martingale_transform, project, transform_T
from .calderon_ops import PiecewiseCalderon, calderon_S, dual_Cstar, hardy_C

__all__ = [
    "__version__",
    "AffineSequence",
    "LogRational",
    "affine_dominates",
    "lr_sign",
    "DyadicStep",
    "StepFunction",
    "TailedDyadicStep",
    "rearrange",
    "EpsilonPattern",
    "IndexSet",
    "martingale_transform",
    "project",
    "transform_T",
    "PiecewiseCalderon",
    "calderon_S",
    "dual_Cstar",
    "hardy_C",
]
