"""Exception types shared across the package."""


class ContractError(ValueError):
    """An argument violated a documented precondition or invariant."""
