"""Exception hierarchy shared by all singulode modules."""


class SingulodeError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SingulodeError, ValueError):
    """An elementary function was evaluated outside its domain."""

    def __init__(self, func, value, where=None):
        self.func = func
        self.value = value
        self.where = where
        msg = f"{func} undefined at {value!r}"
        if where is not None:
            msg += f" (in {where})"
        super().__init__(msg)


class DivisionByZero(SingulodeError, ZeroDivisionError):
    pass


class DimensionCap(SingulodeError):
    pass


class FormatError(SingulodeError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NotSingular(SingulodeError):
    """det A does not vanish (numerically) at the requested point."""


class UnsupportedDefect(SingulodeError):
    def __init__(self, defect):
        self.defect = defect
        super().__init__(f"rank defect {defect} is not analysed (only 1 and 2)")


class BlockSingular(SingulodeError):
    """The nonsingular block of A at the point is itself singular."""


class InconsistentReduction(SingulodeError):
    pass


class WrongSide(SingulodeError):
    pass


class StepUnderflow(SingulodeError):
    pass


class NonFiniteState(SingulodeError):
    pass


class InsufficientSamples(SingulodeError):
    pass
