"""Exception types shared across the package."""


class CspError(ValueError):
    """Malformed instance, query or parameter."""


class CapExceededError(CspError):
    """An enumeration would exceed its configured cap."""


class InfeasibleError(CspError):
    """The linear program has no feasible point."""


class UnboundedError(CspError):
    """The linear program objective is unbounded above."""


class PassCapExceeded(RuntimeError):
    """A streaming algorithm asked for more passes than allowed."""
