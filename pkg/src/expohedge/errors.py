"""Exception hierarchy shared by all modules.

Each class carries an ``exit_code`` used by the command line driver:
2 for configuration problems, 3 for numerical failures, 4 for I/O.
"""


class ExpoHedgeError(Exception):
    exit_code = 1


class InvalidParams(ExpoHedgeError, ValueError):
    exit_code = 2


class SingularSigma(InvalidParams):
    pass


class InvalidInput(InvalidParams):
    pass


class DimensionMismatch(ExpoHedgeError, ValueError):
    exit_code = 2


class ConfigError(ExpoHedgeError, ValueError):
    exit_code = 2


class NumericalError(ExpoHedgeError, ArithmeticError):
    exit_code = 3


class NonFiniteFeature(NumericalError):
    pass


class ObjectiveOverflow(NumericalError):
    pass


class UnboundedStep(NumericalError):
    """The empirical objective has no minimizer at a learning step.

    Almost always an in-sample arbitrage: every path's increment has the same
    sign along some allocation direction.
    """

    def __init__(self, step, message=""):
        self.step = step
        super().__init__(message or f"objective unbounded below at step {step}")


class DegenerateData(NumericalError):
    pass


class NonNegativeUtility(ExpoHedgeError, ValueError):
    exit_code = 2


class EmptySample(ExpoHedgeError, ValueError):
    exit_code = 2


class MixedProvenance(ExpoHedgeError, ValueError):
    exit_code = 2


class ArtifactIOError(ExpoHedgeError, OSError):
    exit_code = 4
