"""Exception hierarchy.

Every error raised by the library derives from :class:`AVCQCError`.  The
three intermediate classes map onto CLI exit codes: validation problems (2),
solver non-convergence (3) and exceeded numerical budgets (4).
"""


class AVCQCError(Exception):
    """Base class; ``details`` is a JSON-serialisable dict for reports."""

    exit_code = 1

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self), **self.details}


class ValidationError(AVCQCError, ValueError):
    exit_code = 2


class ConvergenceError(AVCQCError, RuntimeError):
    exit_code = 3


class BudgetError(AVCQCError, RuntimeError):
    exit_code = 4


# operator_core
class NotHermitian(ValidationError):
    pass


class NotPSD(ValidationError):
    pass


class TraceNotOne(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NotDistribution(ValidationError):
    pass


class DimensionOverflow(BudgetError):
    pass


# channel_model
class ChannelSpecError(ValidationError):
    """Raised by the channel-file loader; ``violations`` lists every problem found."""

    def __init__(self, message="", violations=None, **details):
        self.violations = list(violations or [])
        super().__init__(message, violations=self.violations, **details)


class SchemaError(ChannelSpecError):
    pass


class NotDensity(ChannelSpecError):
    pass


class IncompleteIndex(ChannelSpecError):
    pass


class LengthMismatch(ValidationError):
    pass


class AlphabetMismatch(ValidationError):
    pass


class NotStochastic(ValidationError):
    pass


# capacity_solver
class NonConvergence(ConvergenceError):
    pass


# typicality
class EnumerationOverflow(BudgetError):
    pass


class PermutationChangesWord(ValidationError):
    pass


# code_builder
class InfeasiblePlan(ValidationError):
    pass


class ResampleBudgetExceeded(BudgetError):
    pass


class PartitionError(ValidationError):
    pass


class NumericalRankFailure(ConvergenceError):
    pass


class DomainError(ValidationError):
    pass


class PreconditionViolated(ValidationError):
    pass


# adversary / error_eval
class WordNotInCode(ValidationError):
    pass


class BudgetExceeded(BudgetError):
    pass
