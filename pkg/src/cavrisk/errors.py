"""Exception types shared across the toolkit."""


class CavriskError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(CavriskError):
    """A model, table, or configuration failed validation."""


class CycleDetected(ValidationError):
    """The implied edge set of a network is not acyclic."""


class MissingCpt(ValidationError):
    """A variable has no conditional probability table."""


class RowNotNormalized(ValidationError):
    """A CPT row does not sum to one within tolerance."""

    def __init__(self, variable: str, row: int, total: float):
        self.variable = variable
        self.row = row
        self.total = total
        super().__init__(f"CPT row {row} of {variable!r} sums to {total!r}, not 1")


class ArityMismatch(ValidationError):
    """A CPT's shape disagrees with its variables' state counts."""


class UnknownVariable(CavriskError):
    """A query or evidence references a variable not in the network."""

    def __init__(self, variable: str):
        self.variable = variable
        super().__init__(f"UnknownVariable: {variable}")


class UnknownState(ValidationError):
    """An assignment references a state outside the variable's state space."""


class StateSpaceTooLarge(CavriskError):
    """Brute-force enumeration would exceed the configured joint-size cap."""


class InconsistentEvidence(CavriskError):
    """The supplied evidence has probability zero under the model."""


class DegenerateMetric(CavriskError):
    """All metric weights are zero; no distribution can be formed."""


class UnnormalizedInput(CavriskError):
    """A probability vector input does not sum to one."""


class CollisionDetected(CavriskError):
    """Two simulated vehicles came into contact; the run is invalid."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ManifestError(CavriskError):
    """A run manifest is missing, corrupt, or fails hash verification."""
