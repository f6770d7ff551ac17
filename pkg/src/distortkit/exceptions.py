"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class DistortkitError(Exception):
    """Base class for all library errors."""


class InvalidInputError(DistortkitError, ValueError):
    """An argument violates an operation's precondition."""


class InfeasibleConstructionError(DistortkitError):
    """A construction cannot satisfy one of its defining inequalities.

    ``inequality`` names the violated condition and ``measured`` carries the
    offending value when there is one.
    """

    def __init__(self, message, inequality=None, measured=None):
        super().__init__(message)
        self.inequality = inequality
        self.measured = measured


class NotFoundError(DistortkitError):
    """A bounded search exhausted its budget without producing a witness."""
