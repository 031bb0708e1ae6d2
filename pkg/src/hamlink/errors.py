"""Exception types raised by hamlink."""


class HamlinkError(Exception):
    """Base class for all hamlink errors."""


class ConfigurationError(HamlinkError, ValueError):
    """Invalid parameters, exponents, sample counts or problem files."""


class InputError(HamlinkError, ValueError):
    """A state or argument violates a structural precondition."""


class HyperbolicityError(HamlinkError):
    """The operator symbol has an eigenvalue too close to zero."""


class NumericalError(HamlinkError, ArithmeticError):
    """A linear-algebra routine failed."""
