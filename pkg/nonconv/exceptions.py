"""
Error hierarchy for nonconv.

Every error carries a human readable ``detail`` and the process ``exit_code``
the CLI reports for it, the same way HTTP handlers map errors to statuses.
"""

EXIT_OK = 0
EXIT_SUITE_FAILED = 1
EXIT_CONFIG_INVALID = 2
EXIT_RUNTIME_ERROR = 3


class NonconvError(Exception):
    exit_code: int = EXIT_RUNTIME_ERROR

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def to_dict(self):
        return {"error": type(self).__name__, "detail": self.detail, "exit_code": self.exit_code}


# -------------------------------------------------------------------------
# Process construction
# -------------------------------------------------------------------------
class NotStochastic(NonconvError):
    pass


class NotIrreducible(NonconvError):
    pass


class Periodic(NonconvError):
    pass


class InvalidModel(NonconvError):
    pass


class UnsupportedModel(NonconvError):
    pass


# -------------------------------------------------------------------------
# Functions and paths
# -------------------------------------------------------------------------
class TupleSpaceTooLarge(NonconvError):
    pass


class ArityMismatch(NonconvError):
    pass


class InvalidFunction(NonconvError):
    pass


class TrajectoryTooShort(NonconvError):
    pass


class InsufficientPath(NonconvError):
    pass


class DegenerateVariance(NonconvError):
    pass


class TooFewSamples(NonconvError):
    pass


# -------------------------------------------------------------------------
# Covariance and Gaussian limit
# -------------------------------------------------------------------------
class TailNotConverged(NonconvError):
    pass


class NotPositiveSemidefinite(NonconvError):
    pass


class BadGrid(NonconvError):
    pass


# -------------------------------------------------------------------------
# Mixing and blocks
# -------------------------------------------------------------------------
class ZeroMassState(NonconvError):
    pass


class StateSpaceTooLarge(NonconvError):
    pass


class ParameterGateViolated(NonconvError):
    pass


class ScheduleTooShort(NonconvError):
    pass


# -------------------------------------------------------------------------
# Harness
# -------------------------------------------------------------------------
class ConfigInvalid(NonconvError):
    exit_code = EXIT_CONFIG_INVALID


class SuiteFailed(NonconvError):
    exit_code = EXIT_SUITE_FAILED


class UnknownEntity(NonconvError):
    exit_code = EXIT_CONFIG_INVALID
