"""Measurement-based cubic phase gate simulator with a Gaussian benchmark."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AnnihilationError,
    ContractError,
    CubicGateError,
    DecompositionError,
    DimensionError,
    DomainError,
    FitError,
    SolverError,
    TruncationError,
    WindowError,
)
from .fock import (  # noqa: E402
    DensityMatrix,
    FockVector,
    GridSpec,
    GridWavefunction,
    MomentReport,
    coherent,
    fidelity,
    moments,
    squeeze_state,
    vacuum,
)
from .resource import ResourceSpec, compose_betas, direct_resource, engineer_resource  # noqa: E402
from .gate import GateConfig, ff_decompose, run_deterministic, run_probabilistic  # noqa: E402
from .benchmark import BenchmarkConfig, estimate_chi_eff, gaussian_map, optimize_benchmark  # noqa: E402

__all__ = [
    "AnnihilationError",
    "BenchmarkConfig",
    "ContractError",
    "CubicGateError",
    "DecompositionError",
    "DensityMatrix",
    "DimensionError",
    "DomainError",
    "FitError",
    "FockVector",
    "GateConfig",
    "GridSpec",
    "GridWavefunction",
    "MomentReport",
    "ResourceSpec",
    "SolverError",
    "TruncationError",
    "WindowError",
    "coherent",
    "compose_betas",
    "direct_resource",
    "engineer_resource",
    "estimate_chi_eff",
    "ff_decompose",
    "fidelity",
    "gaussian_map",
    "moments",
    "optimize_benchmark",
    "run_deterministic",
    "run_probabilistic",
    "squeeze_state",
    "vacuum",
]
