"""Exception hierarchy shared by all malleasim modules."""


class MalleasimError(Exception):
    """Base class for every error raised by this package."""


class InputError(MalleasimError, ValueError):
    """Bad user input: malformed files, inconsistent parameters."""


class InvariantViolation(MalleasimError, RuntimeError):
    """An internal consistency check failed during a simulation."""


# profiles
class InsufficientData(InputError):
    pass


class UnknownConfiguration(InputError):
    pass


class InvalidProfile(InputError):
    pass


# redistribution
class OutOfBounds(InputError, IndexError):
    pass


class IncompatibleGroups(InputError):
    pass


class IndivisibleData(InputError):
    pass


class ShapeError(InputError):
    pass


# reconfig
class PolicyViolation(MalleasimError):
    pass


class Busy(MalleasimError):
    pass


# workload / simulator / metrics
class InvalidSpec(InputError):
    pass


class Unschedulable(InputError):
    pass


class IncomparableRuns(InputError):
    pass
