"""Exception hierarchy.

Every error carries enough context to name the failing operation; the CLI
maps :class:`PreconditionError` to exit code 2 and
:class:`NumericalQualityError` to exit code 3.
"""


class SubauditError(Exception):
    """Base class for all package errors."""


class PreconditionError(SubauditError, ValueError):
    """Input violates an operation's precondition."""


class ExprSyntaxError(PreconditionError):
    def __init__(self, message, column):
        super().__init__(f"{message} (column {column})")
        self.column = column


class UnknownIdentifierError(PreconditionError):
    def __init__(self, name, column):
        super().__init__(f"unknown identifier {name!r} (column {column})")
        self.name = name
        self.column = column


class ExprDomainError(PreconditionError):
    def __init__(self, message, subexpression):
        super().__init__(f"{message} in '{subexpression}'")
        self.subexpression = subexpression


class DomainBoxError(PreconditionError):
    """Point outside (or too close to the edge of) a chart's domain box."""


class NotPositiveDefiniteError(PreconditionError):
    pass


class DegeneratePlaneError(PreconditionError):
    pass


class RankDeficiencyError(PreconditionError):
    pass


class FrameExtensionError(PreconditionError):
    pass


class WindGridError(PreconditionError):
    pass


class NumericalQualityError(SubauditError, ArithmeticError):
    """A computed quantity failed an internal consistency threshold."""


class ConventionUnresolvedError(NumericalQualityError):
    def __init__(self, message, residual_table=None):
        super().__init__(message)
        self.residual_table = residual_table or {}
