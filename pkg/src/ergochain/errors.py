"""Exception and warning types shared across the package."""


class ErgoChainError(ValueError):
    """Base class for all library errors."""


class NonSquare(ErgoChainError):
    pass


class NegativeEntry(ErgoChainError):
    pass


class NonFiniteEntry(ErgoChainError):
    pass


class RowSumViolation(ErgoChainError):
    pass


class TrivialCut(ErgoChainError):
    pass


class EqualIndices(ErgoChainError):
    pass


class DimensionMismatch(ErgoChainError):
    pass


class DegenerateSchedule(ErgoChainError):
    pass


class NonBinaryFailureMatrix(ErgoChainError):
    pass


class NoClosedForm(ErgoChainError):
    """Raised when an analysis needs E[W(k)] (or second moments) and the model
    only provides a sampler."""


class InvalidPartition(ErgoChainError):
    pass


class NotBlockDiagonal(ErgoChainError):
    pass


class ParseError(ErgoChainError):
    """Scenario file could not be parsed or validated.

    ``field`` is the dotted path of the offending key and ``line`` the 1-based
    line number in the source file, when known.
    """

    def __init__(self, message, field=None, line=None, source=None):
        self.field = field
        self.line = line
        self.source = source
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class AnalysisError(ErgoChainError):
    """Wraps a module error raised while running one scenario analysis."""

    def __init__(self, field, cause):
        self.field = field
        self.cause = cause
        super().__init__(f"analysis '{field}' failed: {type(cause).__name__}: {cause}")


class HypothesisWarning(UserWarning):
    """Model hypotheses (positive steady state, weak feedback) fail, so the
    flow-graph prediction is not guaranteed."""


class FlowMismatchWarning(UserWarning):
    """Expected-mode and sampled-mode infinite flow graphs disagree."""
