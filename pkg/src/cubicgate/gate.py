"""Measurement-induced cubic gate in position representation.

The QND coupling ``exp(i lam x_2 p_1)`` maps ``|y>_R |x>_S`` to
``|y - lam x>_R |x>_S``, so conditioning the resource on homodyne outcome
``q`` leaves the signal in ``psi(x) phi_R(q + lam x)``. The feed-forward
``exp(-i chi (3 lam^2 q x^2 + 3 lam q^2 x))`` undoes the outcome-dependent part
of ``exp(i chi (lam x + q)^3)``; the branch phase ``exp(-i chi q^3)`` is dropped
since it cannot change the mixed output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import AnnihilationError, DecompositionError, DomainError, TruncationError, WindowError
from .fock import (
    DEFAULT_DIM,
    DEFAULT_GRID,
    DensityMatrix,
    FockVector,
    GridSpec,
    GridWavefunction,
    MomentReport,
    OperatorMatrix,
    from_grid,
    moments,
    number_operator,
    projection_matrix,
    quadratures,
    to_grid,
    unitary_from_hermitian,
)
from .resource import ResourceSpec, squeeze_operator

MASS_DEFICIT_TOL = 1e-4
FOCK_CAPTURE_TOL = 1e-6


@dataclass(frozen=True)
class GateConfig:
    chi: float = 0.03
    g: float = 1.0
    qnd_gain: float = 1.0
    q_min: float = -8.0
    q_max: float = 8.0
    q_nodes: int = 161
    signal_dim: int = DEFAULT_DIM
    grid: GridSpec = DEFAULT_GRID

    def __post_init__(self):
        if self.qnd_gain == 0:
            raise DomainError("QND gain lambda must be nonzero")
        if not self.g > 0:
            raise DomainError(f"g must be positive, got {self.g}")
        if self.q_min > -8.0 or self.q_max < 8.0:
            raise DomainError(f"q grid [{self.q_min}, {self.q_max}] must cover [-8, 8]")
        if self.q_nodes < 81:
            raise DomainError(f"q grid needs at least 81 nodes, got {self.q_nodes}")

    @property
    def resource(self) -> ResourceSpec:
        return ResourceSpec(self.chi, self.g, self.signal_dim, imaginary=True)


@dataclass(frozen=True)
class HomodyneRecord:
    q: float
    density: float
    weight: float


@dataclass(frozen=True)
class GateOutput:
    rho: Union[DensityMatrix, FockVector]
    records: tuple
    report: MomentReport
    mode: str
    mass: float = 1.0  # integral of P(q) over the window (success density for probabilistic)


def q_quadrature(q_min: float, q_max: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[q_min, q_max]``."""
    t, w = leggauss(n)
    half = 0.5 * (q_max - q_min)
    return q_min + half * (t + 1.0), half * w


# ---------------------------------------------------------------------------
# branches
# ---------------------------------------------------------------------------


def feedforward_phase(x, q, chi: float, qnd_gain: float = 1.0):
    """``exp(-i chi (3 lam^2 q x^2 + 3 lam q^2 x))`` (broadcasts over ``x``, ``q``)."""
    lam = qnd_gain
    return np.exp(-1j * chi * (3.0 * lam**2 * q * x**2 + 3.0 * lam * q**2 * x))


def _branch_matrix(psi, x, qs, resource_fn, qnd_gain, chi_ff):
    y = qs[:, None] + qnd_gain * x[None, :]
    b = psi[None, :] * resource_fn(y)
    if chi_ff:
        b = b * feedforward_phase(x[None, :], qs[:, None], chi_ff, qnd_gain)
    return b


def branch_wavefunction(
    signal: GridWavefunction, cfg: GateConfig, q: float
) -> tuple[GridWavefunction, float]:
    """Unnormalized conditional signal state for outcome ``q`` and its density ``P(q)``."""
    x = signal.x
    b = _branch_matrix(
        signal.samples, x, np.array([float(q)]), cfg.resource.wavefunction, cfg.qnd_gain, cfg.chi
    )[0]
    wf = GridWavefunction.on(signal.grid, b)
    return wf, wf.norm2


def assemble_mixture(
    branches: np.ndarray, q_weights: np.ndarray, grid: GridSpec, dim: int
) -> tuple[DensityMatrix, np.ndarray, float]:
    """``sum_k w_k |b_k><b_k|`` in the Fock basis.

    Returns the normalized density matrix, the per-branch ``P(q_k)`` and the
    integrated mass ``sum_k w_k P(q_k)``.
    """
    dens = np.abs(branches) ** 2 @ grid.weights
    mass = float(q_weights @ dens)
    coeffs = branches @ projection_matrix(dim, grid).T
    rho = (coeffs.T * q_weights) @ coeffs.conj()
    captured = float(np.trace(rho).real)
    if mass - captured > FOCK_CAPTURE_TOL * mass:
        raise TruncationError(
            f"Fock truncation dim={dim} captures {captured:.9f} of branch mass {mass:.9f}",
            tail=mass - captured,
        )
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho / captured), dens, mass


def mixture_grid_moments(
    branches: np.ndarray, q_weights: np.ndarray, grid: GridSpec, with_purity: bool = True
) -> tuple[MomentReport, float]:
    """Moments and purity of ``sum_k w_k |b_k><b_k|`` computed on the grid itself.

    No Fock truncation is involved; momentum uses the spectral derivative.
    Returns the report of the normalized mixture and its mass. Without
    ``with_purity`` the (quadratic-cost) purity is reported as NaN.
    """
    w = grid.weights
    x = grid.x
    dens = np.abs(branches) ** 2
    mass_k = dens @ w
    mass = float(q_weights @ mass_k)
    k = 2.0 * np.pi * np.fft.fftfreq(grid.n_points, d=grid.dx)
    deriv = np.fft.ifft(1j * k[None, :] * np.fft.fft(branches, axis=1), axis=1)
    mean_p_k = (branches.conj() * (-1j) * deriv).real @ w
    mean_p2_k = np.abs(deriv) ** 2 @ w
    purity = float("nan")
    if with_purity:
        gram = (branches * w) @ branches.conj().T
        purity = float(np.real(q_weights @ (np.abs(gram) ** 2) @ q_weights)) / mass**2
    report = MomentReport(
        mean_x=float(q_weights @ (dens @ (w * x))) / mass,
        mean_p=float(q_weights @ mean_p_k) / mass,
        mean_x2=float(q_weights @ (dens @ (w * x**2))) / mass,
        mean_p2=float(q_weights @ mean_p2_k) / mass,
        purity=purity,
    )
    return report, mass


def _check_mass(mass, where):
    if mass < 1.0 - MASS_DEFICIT_TOL:
        raise WindowError(
            f"{where}: homodyne distribution integrates to {mass:.6f} over the q window"
        )


def run_deterministic(state: FockVector, cfg: GateConfig = GateConfig()) -> GateOutput:
    """Mixed gate output ``rho' = int P(q) |psi_q><psi_q| dq`` with feed-forward."""
    wf = to_grid(state, cfg.grid)
    qs, wq = q_quadrature(cfg.q_min, cfg.q_max, cfg.q_nodes)
    b = _branch_matrix(wf.samples, wf.x, qs, cfg.resource.wavefunction, cfg.qnd_gain, cfg.chi)
    rho, dens, mass = assemble_mixture(b, wq, cfg.grid, cfg.signal_dim)
    _check_mass(mass, "run_deterministic")
    records = tuple(HomodyneRecord(float(q), float(p), float(w)) for q, p, w in zip(qs, dens, wq))
    return GateOutput(rho, records, moments(rho), "deterministic", mass)


def run_probabilistic(
    state: FockVector, spec: ResourceSpec, grid: GridSpec = DEFAULT_GRID
) -> GateOutput:
    """Post-selected ``q = 0`` output ``psi(x) (1 + beta x^3) exp(-x^2 / 2g)``, no feed-forward."""
    wf = to_grid(state, grid)
    out = wf.samples * spec.wavefunction(wf.x)
    branch = GridWavefunction.on(grid, out)
    density = branch.norm2
    if density == 0.0:
        raise AnnihilationError("post-selected branch vanishes")
    vec = from_grid(branch, state.dim).normalized()
    return GateOutput(vec, (), moments(vec), "probabilistic", density)


# ---------------------------------------------------------------------------
# feed-forward operators
# ---------------------------------------------------------------------------


def feedforward_unitary(q: float, chi: float, dim: int, qnd_gain: float = 1.0) -> OperatorMatrix:
    """``exp(-i chi (3 lam^2 q x^2 + 3 lam q^2 x))`` on the truncated Fock space."""
    x, _ = quadratures(dim)
    xm = x.matrix
    lam = qnd_gain
    h = -chi * (3.0 * lam**2 * q * (xm @ xm) + 3.0 * lam * q**2 * xm)
    return unitary_from_hermitian(0.5 * (h + h.conj().T))


def phase_shift(phi: float, dim: int) -> OperatorMatrix:
    """``exp(i phi n)``: x -> cos(phi) x - sin(phi) p in the Heisenberg picture."""
    return unitary_from_hermitian(phi * number_operator(dim).matrix)


def squeezer(gain: float, dim: int) -> OperatorMatrix:
    """Squeezer with Heisenberg action x -> x / gain, p -> gain p."""
    return squeeze_operator(gain**-2, dim)


@dataclass(frozen=True)
class FFDecomposition:
    phi1: float
    phi2: float
    g_f: float
    lambda_c: float

    def constraint_residuals(self) -> tuple[float, float, float]:
        t1, t2 = math.tan(self.phi1), math.tan(self.phi2)
        g = self.g_f
        return (
            abs(t1 * t2 + 1.0),
            abs(t1 - g),
            abs((1.0 - g**4) * math.cos(self.phi1) * math.sin(self.phi2) - 2.0 * g * self.lambda_c),
        )

    def operator(self, dim: int) -> OperatorMatrix:
        return phase_shift(self.phi2, dim) @ squeezer(self.g_f, dim) @ phase_shift(self.phi1, dim)


def ff_decompose(lambda_c: float, bracket: tuple[float, float] = (1e-8, 1e8)) -> FFDecomposition:
    """Split ``exp(i lambda_c x^2)`` into phase shift, squeezer, phase shift."""

    def angles(g):
        return math.atan(g), math.atan(-1.0 / g)

    def constraint(g):
        phi1, phi2 = angles(g)
        return (1.0 - g**4) * math.cos(phi1) * math.sin(phi2) - 2.0 * g * lambda_c

    lo, hi = bracket
    f_lo, f_hi = constraint(lo), constraint(hi)
    if f_lo == 0.0:
        g_f = lo
    elif f_hi == 0.0:
        g_f = hi
    elif f_lo * f_hi > 0.0:
        raise DecompositionError(
            f"no squeezing gain in [{lo:g}, {hi:g}] realizes lambda_c = {lambda_c}"
        )
    else:
        g_f = brentq(constraint, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    phi1, phi2 = angles(g_f)
    return FFDecomposition(phi1, phi2, g_f, float(lambda_c))


def operator_residual_up_to_phase(a: np.ndarray, b: np.ndarray) -> float:
    """``min_theta max |a e^{i theta} - b|``, with theta from the least-squares fit."""
    theta = np.angle(np.vdot(a, b))
    return float(np.max(np.abs(a * np.exp(1j * theta) - b)))


def ff_identity_residual(dec: FFDecomposition, dim: int = 32, pad: int = 96) -> float:
    """Compare the decomposition with ``exp(i lambda_c x^2)`` on the leading ``dim`` block."""
    big = dim + pad
    x, _ = quadratures(big)
    target = unitary_from_hermitian(dec.lambda_c * (x.matrix @ x.matrix)).matrix[:dim, :dim]
    built = dec.operator(big).matrix[:dim, :dim]
    return operator_residual_up_to_phase(built, target)


# ---------------------------------------------------------------------------
# two-mode picture
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoModeGrid:
    """``Psi(u, x)``: rows index the resource coordinate ``u``, columns the signal ``x``."""

    u_grid: GridSpec
    x_grid: GridSpec
    samples: np.ndarray = field(repr=False)

    def marginal_x(self) -> np.ndarray:
        return self.u_grid.weights @ (np.abs(self.samples) ** 2)

    @property
    def norm2(self) -> float:
        return float(self.marginal_x() @ self.x_grid.weights)


def apply_qnd_two_mode(
    signal: GridWavefunction,
    resource: Union[GridWavefunction, Callable],
    qnd_gain: float,
    u_grid: Optional[GridSpec] = None,
    tol: float = 1e-6,
) -> TwoModeGrid:
    """QND coupling as the coordinate shear ``Psi(u, x) = psi_S(x) phi_R(u + lam x)``."""
    if isinstance(resource, GridWavefunction):
        spline = CubicSpline(resource.x, resource.samples)
        lo, hi = resource.x_min, resource.x_max

        def phi(y):
            inside = (y >= lo) & (y <= hi)
            return np.where(inside, spline(np.clip(y, lo, hi)), 0.0)

        if u_grid is None:
            u_grid = resource.grid
    else:
        phi = resource
        if u_grid is None:
            u_grid = signal.grid
    u = u_grid.x
    psi = signal.samples
    samples = psi[None, :] * phi(u[:, None] + qnd_gain * signal.x[None, :])
    out = TwoModeGrid(u_grid, signal.grid, samples)
    # the shear keeps norm unless support is pushed off the u window
    lost = signal.norm2 * _resource_norm2(phi, u_grid) - out.norm2
    if lost > tol * signal.norm2:
        raise WindowError(f"QND shear pushes mass {lost:.2e} off the u window")
    return out


def _resource_norm2(phi, grid: GridSpec) -> float:
    # norm of phi over a window wide enough to contain its support
    wide = GridSpec(grid.x_min - 40.0, grid.x_max + 40.0, 4 * grid.n_points + 1)
    return float(wide.weights @ np.abs(phi(wide.x)) ** 2)
