"""Exception hierarchy shared by every module."""


class SolitonLabError(Exception):
    """Base class for all library errors."""

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self)}


class ExprSyntaxError(SolitonLabError, SyntaxError):
    """Malformed expression text; ``offset`` is the 0-based byte offset."""

    def __init__(self, message, offset):
        SyntaxError.__init__(self, f"{message} at offset {offset}")
        self.msg = message
        self.offset = offset

    def __str__(self):
        return f"{self.msg} at offset {self.offset}"

    def to_dict(self):
        return {"error": "SyntaxError", "message": self.msg, "offset": self.offset}


class ArityError(SolitonLabError):
    pass


class DomainError(SolitonLabError, ValueError):
    """A function was evaluated outside its real domain."""


class SlotError(SolitonLabError, IndexError):
    pass


class MetricRequired(SolitonLabError):
    pass


class SingularMetric(SolitonLabError):
    pass


class ChartError(SolitonLabError, ValueError):
    """Invalid chart construction (asymmetric or indefinite metric, bad domain)."""


class DomainEdge(SolitonLabError):
    """A finite-difference stencil left the chart's sample domain."""


class DimensionError(SolitonLabError):
    pass


class FiberDataInsufficient(SolitonLabError):
    pass


class OutOfInterval(SolitonLabError):
    pass


class BlowUp(SolitonLabError):
    """Profile integration diverged; ``solution`` holds the partial result."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class StepUnderflow(SolitonLabError):
    pass


class Inconclusive(SolitonLabError):
    pass


class CriticalPoint(SolitonLabError):
    pass
