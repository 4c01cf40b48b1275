"""Exception types shared across the package."""


class GraphVaultError(Exception):
    """Base class for all graphvault errors."""


class MalformedGraphError(GraphVaultError):
    """A graph violates its structural invariants."""


class ContainerError(GraphVaultError):
    """Base class for GVG/GVMD container parse failures."""


class BadMagicError(ContainerError):
    pass


class TruncatedError(ContainerError):
    pass


class ChecksumError(ContainerError):
    pass


class IndexRangeError(ContainerError):
    """A stored index points outside the declared table."""


class NonFiniteError(GraphVaultError):
    """A tensor picked up NaN or Inf."""


class DivergenceError(GraphVaultError):
    """Training loss became non-finite."""


class EmptyMaskError(GraphVaultError):
    """A loss mask selects no nodes."""


class InsufficientLabelsError(GraphVaultError):
    """A class has fewer nodes than the requested labeled count."""


class BudgetExceededError(GraphVaultError):
    """Vault peak memory exceeded the configured enclave budget."""

    def __init__(self, peak_bytes: int, budget_bytes: int):
        self.peak_bytes = peak_bytes
        self.budget_bytes = budget_bytes
        super().__init__(
            f"vault peak memory {peak_bytes / 2**20:.2f} MB exceeds "
            f"budget {budget_bytes / 2**20:.2f} MB"
        )
