"""Exception hierarchy shared by every module of the package."""


class KunaryError(Exception):
    """Base class for all errors raised by :mod:`kunary`."""


class InvalidSpec(KunaryError, ValueError):
    """The rate matrix / arity vector does not describe a k-unary network."""


class NonIrreducible(InvalidSpec):
    """The positive-rate graph on {0, ..., n} is not strongly connected."""


class BadArity(InvalidSpec):
    """Some arity k_i is smaller than one (or above the configured guard)."""


class NegativeRate(InvalidSpec):
    """A reaction rate is negative."""


class GuardExceeded(InvalidSpec):
    """Network size or arity is beyond the configured engineering guards."""


class ParseError(KunaryError, ValueError):
    """A network or experiment document could not be parsed."""


class FactorialOverflow(KunaryError, OverflowError):
    """A falling factorial does not fit in a signed 64-bit integer."""


class EventBudgetExceeded(KunaryError, RuntimeError):
    """A simulation fired more events than the configured cap."""


class EmptyWindow(KunaryError, ValueError):
    """An averaging window [eta, T] has non-positive length."""


class SingularSystem(KunaryError, ArithmeticError):
    """A linear system that irreducibility guarantees to be regular is singular."""


class NoConvergence(KunaryError, ArithmeticError):
    """An iterative scheme failed to converge within its iteration budget."""


class EmptyFastSet(KunaryError, ValueError):
    """The network has no species with arity >= 2."""


class NoSlowSpecies(KunaryError, ValueError):
    """The network has no species with arity 1."""


class CannotEliminateSource(KunaryError, ValueError):
    """Index 0 (the source/sink) cannot be eliminated."""


class VerificationFailed(KunaryError, ArithmeticError):
    """Constructed bound vectors fail their defining inequalities."""


class NonPositiveState(KunaryError, ArithmeticError):
    """An ODE path left the open positive orthant."""


class NonPositivePoint(KunaryError, ValueError):
    """An entropy function was evaluated outside the positive orthant."""


class InsufficientData(KunaryError, ValueError):
    """Not enough simulated time to compare with the stationary law."""
