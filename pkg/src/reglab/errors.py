"""Exception hierarchy.

Everything a caller can fix by changing inputs derives from
``PreconditionError``; the CLI maps it to exit code 2.
"""


class PreconditionError(ValueError):
    pass


class NotInImageError(PreconditionError):
    """Contraction with norm too close to 1 to be a bounded transform."""


class RankAmbiguityError(PreconditionError):
    """An eigenvalue or singular value fell inside a decision window."""


class RefinePathError(PreconditionError):
    """A transport step exceeded the cap; the path needs a finer grid."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class UncoveredNodeError(PreconditionError):
    def __init__(self, message, nodes=()):
        super().__init__(message)
        self.nodes = list(nodes)


class IncompatibleChartsError(PreconditionError):
    pass


class InconclusiveError(RuntimeError):
    """Not enough information to decide; the CLI maps it to exit code 3."""


class NumericalError(RuntimeError):
    pass
