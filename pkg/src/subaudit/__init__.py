"""Numerical audits of Riemannian submersions, Chen δ-invariants and wind-field vertical motion."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConventionUnresolvedError,
    NumericalQualityError,
    PreconditionError,
    SubauditError,
)

__all__ = [
    "__version__",
    "SubauditError",
    "PreconditionError",
    "NumericalQualityError",
    "ConventionUnresolvedError",
]
