"""Exception types and enumeration-cap handling shared across the package."""

import os

CAP_ENV_VAR = "PDFM_BRUTE_CAP"


class DiagramValidationError(ValueError):
    """A diagram, grouping or weight vector violates its invariants."""


class DiagramParseError(DiagramValidationError):
    """A serialized record could not be parsed."""


class CapExceededError(RuntimeError):
    """An exhaustive enumeration was refused because the input is too large."""

    def __init__(self, what, size, cap, unit="off-diagonal points"):
        self.size = size
        self.cap = cap
        super().__init__(
            f"{what}: input has {size} {unit}, exceeding the "
            f"enumeration cap of {cap} (override with {CAP_ENV_VAR})"
        )


def resolve_cap(cap, default):
    """Explicit ``cap`` wins, then the environment override, then ``default``."""
    if cap is not None:
        return int(cap)
    env = os.environ.get(CAP_ENV_VAR)
    if env:
        try:
            return int(env)
        except ValueError:
            raise DiagramValidationError(f"{CAP_ENV_VAR} must be an integer, got {env!r}")
    return default
