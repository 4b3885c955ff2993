"""Exception hierarchy shared by all chatterlab modules."""


class ChatterlabError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(ChatterlabError):
    """Experiment configuration failed to parse or validate."""


class EquiboundViolation(ChatterlabError):
    """Candidate trajectory broke the a-priori bound t_u + sup|x| <= b."""


class NoRootBracket(ChatterlabError):
    """Switching-curve residual does not change sign on the search interval."""


class TolTooSmall(ChatterlabError):
    """Requested truncation radius would underflow arc durations."""


class Infeasible(ChatterlabError):
    """No nonnegative two-arc steering exists for the requested first sign."""


class AllStartsInfeasible(ChatterlabError):
    """Every multistart of the duration optimizer was infeasible."""


class CutTooLarge(ChatterlabError):
    """Truncation window exceeds the neighborhood where the tail steering is valid."""


class DegenerateFit(ChatterlabError):
    """Not enough usable points (or signal below arithmetic floor) for a power-law fit."""


class EventOverflow(ChatterlabError):
    """Hybrid execution exhausted max_events before the horizon (likely Zeno).

    Carries the partial trajectory so callers can hand it to detect_zeno.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class Inconclusive(ChatterlabError):
    """Geometric model of inter-event intervals did not fit within tolerance."""
