"""Exception hierarchy shared by all modules."""


class ProsumerError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(ProsumerError, ValueError):
    pass


class InvariantViolation(ProsumerError, ValueError):
    pass


class DegenerateInputError(ProsumerError, ValueError):
    pass


class ProfileFormatError(ProsumerError, ValueError):
    """Malformed profile CSV. ``row`` is the 1-based line number, if known."""

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class CapExceededError(ProsumerError):
    """Exhaustive search refused because the action count is above the cap."""

    def __init__(self, n_actions: int, cap: int):
        super().__init__(
            f"exhaustive search over {n_actions} actions exceeds the cap of {cap} "
            f"(raise it with --cap)"
        )
        self.n_actions = n_actions
        self.cap = cap
