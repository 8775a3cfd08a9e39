"""Exception types shared across the solver modules."""


class SolverError(Exception):
    """Base class for all solver failures."""


class SingularKkt(SolverError):
    """The KKT block for an active set is rank deficient; the arc hypothesis is invalid."""


class NonFinite(SolverError):
    """A computation overflowed or produced NaN/Inf."""


class Degenerate(SolverError):
    """Switching times passed to the residual function are unsorted or out of range."""


class NoConvergence(SolverError):
    """Newton iteration failed to reach the residual tolerance."""


class TimesCollapsed(SolverError):
    """Two switching times merged; the hypothesised arc structure is likely wrong."""


class TimeEscaped(SolverError):
    """A switching time left (0, T) during the solve.

    Signals that the hypothesised structure is invalid for this initial state,
    typically because the parameter sits past a critical-region boundary.
    """

    def __init__(self, event_index: int, direction: str):
        self.event_index = event_index
        self.direction = direction  # "low" (toward 0) or "high" (toward T)
        super().__init__(f"switching time {event_index} escaped toward {direction}")


class Infeasible(SolverError):
    """No admissible control exists; carries the violated constraint row when known."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message)


class NoStructure(SolverError):
    """The structure-refinement loop hit its round cap without a validated solution."""


class TooFewSamples(SolverError):
    """Fewer retained samples than fit coefficients."""


class SameStructure(SolverError):
    """Both bracket endpoints classify to the same structure; nothing to bisect."""


class NonAffineBoundary(SolverError):
    """Boundary points do not fit a half-plane within tolerance."""

    def __init__(self, message: str, points=None):
        self.points = points
        super().__init__(message)


class Budget(SolverError):
    """Combinatorial enumeration exceeded its candidate cap."""
