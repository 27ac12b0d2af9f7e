"""Exception hierarchy shared by all modules."""


class MldrBeamError(Exception):
    """Base class for all package errors."""


class ConfigurationError(MldrBeamError, ValueError):
    """Invalid parameters or an inconsistent configuration."""


class EmptyInputError(MldrBeamError, ValueError):
    pass


class DomainError(MldrBeamError, ValueError):
    """A parameter lies outside its mathematical domain."""


class NumericGuardError(MldrBeamError, ArithmeticError):
    """A computation would divide by zero."""


class SingularMatrixError(MldrBeamError, ArithmeticError):
    def __init__(self, message, bin_index=None):
        super().__init__(message if bin_index is None else f"{message} (bin {bin_index})")
        self.bin_index = bin_index


class DivergedError(MldrBeamError, ArithmeticError):
    def __init__(self, message, iteration=None):
        super().__init__(message if iteration is None else f"{message} (iteration {iteration})")
        self.iteration = iteration


class GeometryError(MldrBeamError, ValueError):
    pass


class InfeasibleRT60Error(MldrBeamError, ValueError):
    pass


class UndefinedRatioError(MldrBeamError, ArithmeticError):
    pass


class MetricError(MldrBeamError, ValueError):
    pass
