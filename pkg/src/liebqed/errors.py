"""Exception types shared across modules."""


class NumericalError(RuntimeError):
    """A computation failed to converge or left its validated regime."""
