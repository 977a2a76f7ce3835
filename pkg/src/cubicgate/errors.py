"""Exception hierarchy shared by all modules."""


class CubicGateError(Exception):
    """Base class; ``category`` is the machine-parsable tag used by the CLI."""

    category = "error"


class DimensionError(CubicGateError, ValueError):
    category = "invalid-dimension"


class DomainError(CubicGateError, ValueError):
    category = "domain"


class ContractError(CubicGateError, ValueError):
    category = "contract-violation"


class TruncationError(CubicGateError):
    """Fock-space tail mass above the configured tolerance."""

    category = "truncation"

    def __init__(self, message, tail=None):
        super().__init__(message)
        self.tail = tail


class WindowError(CubicGateError):
    """Support of a grid function or homodyne distribution leaks past its window."""

    category = "window"


class AnnihilationError(CubicGateError):
    category = "annihilation"


class DecompositionError(CubicGateError):
    category = "decomposition-range"


class SolverError(CubicGateError):
    category = "solver"


class FitError(CubicGateError):
    category = "fit"
