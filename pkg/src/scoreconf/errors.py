"""Exception hierarchy shared by all modules.

The CLI maps each family to a distinct exit status.
"""


class ScoreConfError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(ScoreConfError, ValueError):
    pass


class InfeasibleTargetError(InvalidInputError):
    """No common ratio above one reaches the requested overlap."""


class DivergentRegimeError(InvalidInputError):
    """Step-size parameter outside the contraction regime 0 < eps < sigma_L**2."""


class DegenerateDistributionError(InvalidInputError):
    pass


class FormatError(ScoreConfError):
    """A data file does not match its declared binary or text format."""


class ConfigError(ScoreConfError):
    pass


class DivergedChainError(ScoreConfError, RuntimeError):
    """A Langevin chain left the finite region.

    ``scale`` and ``step`` are 1-based, matching the annealing loop.
    """

    def __init__(self, message, scale=None, step=None, chains=None):
        super().__init__(message)
        self.scale = scale
        self.step = step
        self.chains = chains


class TrainingDivergedError(ScoreConfError, RuntimeError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class VerificationFailure(ScoreConfError):
    pass
