"""Exception hierarchy shared by all shellkit modules."""


class ShellkitError(Exception):
    """Base class for library errors."""

    exit_code = 2


class ValidationError(ShellkitError, ValueError):
    """Invalid user input; carries the offending field name."""

    exit_code = 1

    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


ConfigInvalid = ValidationError


class NumericalError(ShellkitError):
    """Base class for numerical failures."""


class NonSkewInput(NumericalError):
    pass


class NotSpd(NumericalError):
    pass


class Degenerate(NumericalError):
    pass


class DegenerateParametrization(Degenerate):
    pass


class InfiniteEnergy(NumericalError):
    pass


class NonSymmetricInput(NumericalError):
    pass


class ShearNotZero(NumericalError):
    pass


class NotAdmissible(NumericalError):
    pass


class NonFiniteObjective(NumericalError):
    pass


class LineSearchFailed(NumericalError):
    pass
