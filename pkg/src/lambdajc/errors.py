"""Exception hierarchy shared by all modules."""


class LambdaJCError(Exception):
    """Base class for every error raised by the package."""


class DomainError(LambdaJCError, ValueError):
    pass


class ComplexRootsError(LambdaJCError, ArithmeticError):
    """Cubic roots failed the residual check (non-Hermitian input?)."""


class DegenerateRootsError(LambdaJCError, ArithmeticError):
    pass


class StepSizeError(LambdaJCError, ArithmeticError):
    pass


class NonHermitianError(LambdaJCError, ValueError):
    pass


class MissingFrequenciesError(LambdaJCError, ValueError):
    pass


class UnknownPresetError(LambdaJCError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConfigError(LambdaJCError, ValueError):
    pass


class ValidationFailure(LambdaJCError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
