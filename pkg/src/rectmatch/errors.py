"""Exception types shared across the package."""


class RectMatchError(Exception):
    pass


class GeneralPositionViolation(RectMatchError, ValueError):
    """Two points share an x or a y coordinate."""


class IndexOutOfRange(RectMatchError, IndexError):
    pass


class InstanceParseError(RectMatchError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InstanceTooLarge(RectMatchError, ValueError):
    pass


class BudgetExceeded(RectMatchError):
    """Exact search ran out of nodes or time.

    ``incumbent`` is the best matching found so far (``optimal`` is False).
    """

    def __init__(self, incumbent, nodes_explored: int, reason: str):
        self.incumbent = incumbent
        self.nodes_explored = nodes_explored
        super().__init__(f"search budget exceeded ({reason}) after {nodes_explored} nodes")


class ChainError(RectMatchError):
    """Base for chain validation failures."""


class MalformedMatrix(ChainError, ValueError):
    pass


class NotIrreducible(ChainError):
    pass


class NotAperiodic(ChainError):
    pass


class NoConvergence(ChainError):
    pass


class CapExceeded(ChainError):
    pass


class InsufficientSamples(RectMatchError, ValueError):
    pass


class EmptyProfile(RectMatchError, ValueError):
    pass
