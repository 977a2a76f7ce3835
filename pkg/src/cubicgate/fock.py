"""Single-mode Fock-space and position-grid representations.

Conventions (see ``docs/conventions.md``): hbar = 1, ``[x, p] = i``,
``a = (x + i p) / sqrt(2)``, vacuum quadrature variance 1/2. Squeezing is
parameterised by the x-variance ratio ``g`` so that the squeezed vacuum has
``<x^2> = g / 2`` and position wavefunction ``exp(-x^2 / (2 g)) / (pi g)^(1/4)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import (
    AnnihilationError,
    ContractError,
    DimensionError,
    DomainError,
    TruncationError,
    WindowError,
)

DEFAULT_DIM = 48
DEFAULT_TAIL_TOL = 1e-8
HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10


def _frozen(array, dtype=complex):
    out = np.array(array, dtype=dtype)
    out.flags.writeable = False
    return out


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FockVector:
    """Truncated photon-number amplitudes ``c_0 .. c_{dim-1}``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.ndim != 1 or amps.size < 1:
            raise DimensionError("FockVector needs a non-empty 1-d amplitude array")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm2 - 1.0) < 1e-12

    def tail_mass(self, levels: int = 5) -> float:
        """Mass in the top ``levels`` Fock levels."""
        return float(np.sum(np.abs(self.amplitudes[-levels:]) ** 2))

    def normalized(self) -> "FockVector":
        n2 = self.norm2
        if n2 == 0.0:
            raise AnnihilationError("cannot normalize the zero vector")
        return FockVector(self.amplitudes / math.sqrt(n2))

    def padded(self, dim: int) -> "FockVector":
        if dim < self.dim:
            raise DimensionError(f"cannot pad dim {self.dim} down to {dim}")
        out = np.zeros(dim, dtype=complex)
        out[: self.dim] = self.amplitudes
        return FockVector(out)


@dataclass(frozen=True)
class OperatorMatrix:
    """Square matrix in the truncated Fock basis, optionally tagged."""

    matrix: np.ndarray
    kind: str = "general"  # "general" | "hermitian" | "unitary"

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError("operator matrix must be square")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.matrix @ other.matrix)
        if isinstance(other, FockVector):
            return FockVector(self.matrix @ other.amplitudes)
        return self.matrix @ other


@dataclass(frozen=True)
class DensityMatrix:
    """Fock-basis mixed state."""

    entries: np.ndarray

    def __post_init__(self):
        m = _frozen(self.entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError("density matrix must be square")
        object.__setattr__(self, "entries", m)

    @classmethod
    def from_vector(cls, state: FockVector) -> "DensityMatrix":
        c = state.amplitudes
        return cls(np.outer(c, c.conj()))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    @property
    def purity(self) -> float:
        rho = self.entries
        # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        return float(np.sum(np.abs(rho) ** 2))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.entries + self.entries.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def normalized(self) -> "DensityMatrix":
        tr = self.trace
        if tr <= 0.0:
            raise AnnihilationError("density matrix has non-positive trace")
        return DensityMatrix(self.entries / tr)


@dataclass(frozen=True)
class XPolynomial:
    """Operator polynomial ``sum_k c_k x^k`` (coefficients in ascending order)."""

    coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coefficients)
        if not coeffs:
            raise ContractError("polynomial needs at least one coefficient")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def cubic(cls, beta: complex) -> "XPolynomial":
        """``1 + beta x^3``."""
        return cls((1.0, 0.0, 0.0, beta))

    @property
    def degree(self) -> int:
        nz = [k for k, c in enumerate(self.coefficients) if c != 0]
        return nz[-1] if nz else 0

    def __mul__(self, other: "XPolynomial") -> "XPolynomial":
        prod = np.convolve(np.array(self.coefficients), np.array(other.coefficients))
        return XPolynomial(tuple(prod))

    def __call__(self, x):
        # numpy polyval wants descending order
        return np.polyval(np.array(self.coefficients[::-1]), x)


@dataclass(frozen=True)
class MomentReport:
    mean_x: float
    mean_p: float
    mean_x2: float
    mean_p2: float
    purity: float

    @property
    def var_x(self) -> float:
        return self.mean_x2 - self.mean_x**2

    @property
    def var_p(self) -> float:
        return self.mean_p2 - self.mean_p**2

    def as_dict(self) -> dict:
        return {
            "mean_x": self.mean_x,
            "mean_p": self.mean_p,
            "mean_x2": self.mean_x2,
            "mean_p2": self.mean_p2,
            "purity": self.purity,
        }


@dataclass(frozen=True)
class GridSpec:
    """Uniform position grid, endpoints included."""

    x_min: float = -10.0
    x_max: float = 10.0
    n_points: int = 1001

    def __post_init__(self):
        if self.n_points < 3 or not self.x_max > self.x_min:
            raise DomainError(f"invalid grid {self}")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n_points, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


DEFAULT_GRID = GridSpec()


@dataclass(frozen=True)
class GridWavefunction:
    """Complex position-representation samples on a uniform grid."""

    x_min: float
    x_max: float
    n_points: int
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = _frozen(self.samples)
        if s.shape != (self.n_points,):
            raise DimensionError(
                f"expected {self.n_points} samples, got shape {s.shape}"
            )
        object.__setattr__(self, "samples", s)

    @classmethod
    def on(cls, grid: GridSpec, samples) -> "GridWavefunction":
        return cls(grid.x_min, grid.x_max, grid.n_points, samples)

    @classmethod
    def from_function(cls, func, grid: GridSpec = DEFAULT_GRID) -> "GridWavefunction":
        return cls.on(grid, func(grid.x))

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.x_min, self.x_max, self.n_points)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def norm2(self) -> float:
        return float(np.sum(self.grid.weights * np.abs(self.samples) ** 2))

    def edge_ratio(self) -> float:
        peak = np.max(np.abs(self.samples))
        if peak == 0.0:
            return 0.0
        return float(max(abs(self.samples[0]), abs(self.samples[-1])) / peak)

    def normalized(self) -> "GridWavefunction":
        n2 = self.norm2
        if n2 == 0.0:
            raise AnnihilationError("grid wavefunction vanishes")
        return GridWavefunction.on(self.grid, self.samples / math.sqrt(n2))

    def moments(self) -> MomentReport:
        """Quadrature moments evaluated directly on the grid (spectral derivative)."""
        grid = self.grid
        w = grid.weights
        psi = self.samples
        n2 = self.norm2
        dens = np.abs(psi) ** 2
        x = grid.x
        k = 2.0 * np.pi * np.fft.fftfreq(grid.n_points, d=grid.dx)
        dpsi = np.fft.ifft(1j * k * np.fft.fft(psi))
        mean_p = float(np.sum(w * (psi.conj() * (-1j) * dpsi).real) / n2)
        mean_p2 = float(np.sum(w * np.abs(dpsi) ** 2) / n2)
        return MomentReport(
            mean_x=float(np.sum(w * dens * x) / n2),
            mean_p=mean_p,
            mean_x2=float(np.sum(w * dens * x**2) / n2),
            mean_p2=mean_p2,
            purity=1.0,
        )


State = Union[FockVector, DensityMatrix]


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def _check_dim(dim):
    if int(dim) != dim or dim < 2:
        raise DimensionError(f"dim must be an integer >= 2, got {dim}")


@lru_cache(maxsize=64)
def _destroy(dim):
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)
    a.flags.writeable = False
    return a


@lru_cache(maxsize=64)
def _xp(dim):
    a = _destroy(dim)
    ad = a.conj().T
    x = (a + ad) / math.sqrt(2.0)
    p = (a - ad) / (1j * math.sqrt(2.0))
    x.flags.writeable = False
    p.flags.writeable = False
    return x, p


@lru_cache(maxsize=64)
def _moment_ops(dim):
    # x^2, p^2 restricted to dim are exact when built from dim + 1
    x1, p1 = _xp(dim + 1)
    x, p = _xp(dim)
    x2 = (x1 @ x1)[:dim, :dim]
    p2 = (p1 @ p1)[:dim, :dim]
    for m in (x2, p2):
        m.flags.writeable = False
    return x, p, x2, p2


def destroy(dim: int) -> OperatorMatrix:
    """Annihilation operator with ``<n-1|a|n> = sqrt(n)``."""
    _check_dim(dim)
    return OperatorMatrix(_destroy(dim))


def quadratures(dim: int) -> tuple[OperatorMatrix, OperatorMatrix]:
    """``x = (a + a^dag)/sqrt 2`` and ``p = (a - a^dag)/(i sqrt 2)``."""
    _check_dim(dim)
    x, p = _xp(dim)
    return OperatorMatrix(x, "hermitian"), OperatorMatrix(p, "hermitian")


def number_operator(dim: int) -> OperatorMatrix:
    _check_dim(dim)
    return OperatorMatrix(np.diag(np.arange(dim, dtype=complex)), "hermitian")


def is_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    m = m.matrix if isinstance(m, OperatorMatrix) else np.asarray(m)
    scale = max(1.0, float(np.max(np.abs(m))))
    return bool(np.max(np.abs(m - m.conj().T)) <= tol * scale)


def unitary_from_hermitian(h) -> OperatorMatrix:
    """Return ``exp(i H)`` through the Hermitian eigendecomposition of ``H``."""
    mat = h.matrix if isinstance(h, OperatorMatrix) else np.asarray(h, dtype=complex)
    if not is_hermitian(mat):
        raise ContractError("unitary_from_hermitian requires a Hermitian generator")
    herm = 0.5 * (mat + mat.conj().T)
    w, v = np.linalg.eigh(herm)
    return OperatorMatrix((v * np.exp(1j * w)) @ v.conj().T, "unitary")


def unitarity_error(u) -> float:
    m = u.matrix if isinstance(u, OperatorMatrix) else np.asarray(u)
    return float(np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))))


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------


def basis(n: int, dim: int) -> FockVector:
    if not 0 <= n < dim:
        raise DimensionError(f"level {n} outside truncation {dim}")
    c = np.zeros(dim, dtype=complex)
    c[n] = 1.0
    return FockVector(c)


def vacuum(dim: int = DEFAULT_DIM) -> FockVector:
    return basis(0, dim)


def _finalize(c, missing, what, tol):
    tail = max(missing, float(np.sum(np.abs(c[-5:]) ** 2)))
    if tail > tol:
        raise TruncationError(
            f"{what}: tail mass {tail:.3e} exceeds tolerance {tol:.1e} at dim {c.size}",
            tail=tail,
        )
    return FockVector(c / np.linalg.norm(c))


def coherent(alpha: complex, dim: int = DEFAULT_DIM, tol: float = DEFAULT_TAIL_TOL) -> FockVector:
    """Coherent state ``|alpha>``; ``<x> = sqrt(2) Re(alpha)``."""
    _check_dim(dim)
    alpha = complex(alpha)
    c = np.empty(dim, dtype=complex)
    c[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, dim):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    missing = max(0.0, 1.0 - float(np.sum(np.abs(c) ** 2)))
    return _finalize(c, missing, f"coherent({alpha})", tol)


def squeeze_state(g: float, dim: int = DEFAULT_DIM, tol: float = DEFAULT_TAIL_TOL) -> FockVector:
    """Squeezed vacuum with ``<x^2> = g/2`` and ``<p^2> = 1/(2g)``."""
    _check_dim(dim)
    if not g > 0:
        raise DomainError(f"squeezing ratio g must be positive, got {g}")
    r = 0.5 * math.log(g)
    t = math.tanh(r)
    c = np.zeros(dim, dtype=complex)
    c[0] = 1.0 / math.sqrt(math.cosh(r))
    for n in range(2, dim, 2):
        c[n] = c[n - 2] * t * math.sqrt((n - 1) / n)
    missing = max(0.0, 1.0 - float(np.sum(np.abs(c) ** 2)))
    return _finalize(c, missing, f"squeeze_state(g={g})", tol)


# ---------------------------------------------------------------------------
# position representation
# ---------------------------------------------------------------------------


def hermite_functions(nmax: int, x) -> np.ndarray:
    """Rows ``psi_0 .. psi_{nmax-1}`` evaluated at ``x`` via the normalized recurrence."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax,) + x.shape)
    out[0] = math.pi**-0.25 * np.exp(-0.5 * x**2)
    if nmax > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, nmax - 1):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def hermite_psi(n: int, q: float) -> float:
    """Fock wavefunction ``<q|n>``."""
    if n < 0:
        raise DomainError("Fock index must be non-negative")
    return float(hermite_functions(n + 1, q)[n])


@lru_cache(maxsize=16)
def _basis_on_grid(dim, grid):
    h = hermite_functions(dim, grid.x)
    h.flags.writeable = False
    return h


def to_grid(state: FockVector, grid: GridSpec = DEFAULT_GRID, edge_tol: float = 1e-6) -> GridWavefunction:
    h = _basis_on_grid(state.dim, grid)
    wf = GridWavefunction.on(grid, state.amplitudes @ h)
    if wf.edge_ratio() > edge_tol:
        raise WindowError(
            f"wavefunction edge ratio {wf.edge_ratio():.2e} exceeds {edge_tol:.0e} "
            f"on [{grid.x_min}, {grid.x_max}]"
        )
    return wf


def projection_matrix(dim: int, grid: GridSpec) -> np.ndarray:
    """Matrix ``M`` with ``c = M @ samples`` (trapezoid projection onto ``psi_n``)."""
    return _basis_on_grid(dim, grid) * grid.weights


def from_grid(wf: GridWavefunction, dim: int = DEFAULT_DIM, tol: float = DEFAULT_TAIL_TOL) -> FockVector:
    """Project grid samples onto the first ``dim`` Fock wavefunctions (unnormalized)."""
    _check_dim(dim)
    c = projection_matrix(dim, wf.grid) @ wf.samples
    n2 = wf.norm2
    if n2 == 0.0:
        raise AnnihilationError("grid wavefunction vanishes")
    missing = max(0.0, n2 - float(np.sum(np.abs(c) ** 2))) / n2
    tail = max(missing, float(np.sum(np.abs(c[-5:]) ** 2)) / n2)
    if tail > tol:
        raise TruncationError(
            f"from_grid: relative tail mass {tail:.3e} exceeds {tol:.1e} at dim {dim}",
            tail=tail,
        )
    return FockVector(c)


# ---------------------------------------------------------------------------
# analysis
# ---------------------------------------------------------------------------


def moments(state: State, tol: float = 1e-8) -> MomentReport:
    """First and second quadrature moments plus purity."""
    if isinstance(state, FockVector):
        if abs(state.norm2 - 1.0) > tol:
            raise ContractError(f"state not normalized (norm^2 = {state.norm2})")
        x, p, x2, p2 = _moment_ops(state.dim)
        c = state.amplitudes

        def ev(op):
            return float(np.vdot(c, op @ c).real)

        return MomentReport(ev(x), ev(p), ev(x2), ev(p2), 1.0)
    if isinstance(state, DensityMatrix):
        if abs(state.trace - 1.0) > tol:
            raise ContractError(f"density matrix not normalized (trace = {state.trace})")
        x, p, x2, p2 = _moment_ops(state.dim)
        rho = state.entries

        def ev(op):
            return float(np.sum(op.T * rho).real)

        return MomentReport(ev(x), ev(p), ev(x2), ev(p2), state.purity)
    raise TypeError(f"moments() expects FockVector or DensityMatrix, got {type(state)!r}")


def apply_poly_x(poly: XPolynomial, state: FockVector, tol: float = DEFAULT_TAIL_TOL) -> tuple[FockVector, float]:
    """Apply ``sum_k c_k x^k``; return the normalized result and its pre-normalization norm."""
    deg = poly.degree
    dim = state.dim
    big = dim + deg
    x, _ = _xp(max(big, 2))
    v = state.padded(big).amplitudes
    out = np.zeros(big, dtype=complex)
    for coeff in reversed(poly.coefficients[: deg + 1]):
        out = x @ out + coeff * v
    norm = float(np.linalg.norm(out))
    if norm == 0.0:
        raise AnnihilationError("polynomial annihilates the state")
    leaked = float(np.sum(np.abs(out[dim:]) ** 2)) / norm**2
    if leaked > tol:
        raise TruncationError(
            f"apply_poly_x: degree {deg} pushes mass {leaked:.3e} past dim {dim}", tail=leaked
        )
    kept = out[:dim]
    return FockVector(kept / np.linalg.norm(kept)), norm


def fidelity(a: FockVector, b: FockVector) -> float:
    """``|<a|b>|^2`` for normalized pure states."""
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch {a.dim} vs {b.dim}")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def fidelity_mixed(rho: DensityMatrix, psi: FockVector) -> float:
    """``<psi|rho|psi>``."""
    if rho.dim != psi.dim:
        raise DimensionError(f"dimension mismatch {rho.dim} vs {psi.dim}")
    c = psi.amplitudes
    return float(np.vdot(c, rho.entries @ c).real)

