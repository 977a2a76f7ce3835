"""Cubic resource states: direct construction and the photon-subtraction recipe.

The recipe applies three displaced subtractions ``(a - alpha)(a - beta)(a - gamma)``
to a squeezed vacuum produced by the generation squeezer ``S_gen`` with
``S_gen^dag a S_gen = mu a - nu a^dag`` (``mu = cosh ln sqrt(g_gen)``,
``nu = sinh ln sqrt(g_gen)``). In the x-variance convention of :mod:`cubicgate.fock`
that generation state is ``squeeze_state(1 / g_gen)``; the result is proportional to
``S_gen (1 + chi' x^3)|0>`` which equals the direct resource
``(1 + chi x^3) S(g)|0>`` with ``g = 1 / g_gen`` and ``chi' = chi g^(3/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AnnihilationError, DomainError, TruncationError
from .fock import (
    DEFAULT_DIM,
    DEFAULT_GRID,
    DEFAULT_TAIL_TOL,
    FockVector,
    GridSpec,
    GridWavefunction,
    OperatorMatrix,
    XPolynomial,
    apply_poly_x,
    destroy,
    quadratures,
    squeeze_state,
    unitary_from_hermitian,
)

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ResourceSpec:
    """Target resource ``N (1 + beta x^3) S(g)|0>``.

    ``beta = chi`` for the real resource; ``imaginary=True`` selects
    ``beta = i chi``, the weak cubic-phase expansion used by the gate.
    """

    chi: float
    g: float = 1.0
    dim: int = DEFAULT_DIM
    imaginary: bool = False

    def __post_init__(self):
        if not isinstance(self.chi, (int, float)) or isinstance(self.chi, bool):
            raise DomainError(f"chi must be real, got {self.chi!r}")
        if not self.g > 0:
            raise DomainError(f"g must be positive, got {self.g}")

    @property
    def beta(self) -> complex:
        return 1j * self.chi if self.imaginary else complex(self.chi)

    @property
    def chi_prime(self) -> float:
        """Cubic coefficient left after factoring the squeezer to the left."""
        return self.chi * self.g**1.5

    @property
    def norm(self) -> float:
        """Closed-form norm ``N_R`` of ``(1 + beta x^3) S(g)|0>``."""
        # Gaussian moments with variance g/2: <x^3> = 0, <x^6> = 15 g^3 / 8
        b = self.beta
        return math.sqrt(1.0 + abs(b) ** 2 * 15.0 * self.g**3 / 8.0)

    def wavefunction(self, x):
        """Normalized resource wavefunction evaluated at ``x``."""
        x = np.asarray(x, dtype=float)
        g = self.g
        env = np.exp(-(x**2) / (2.0 * g)) / (math.pi * g) ** 0.25
        return (1.0 + self.beta * x**3) * env / self.norm


@dataclass(frozen=True)
class DirectResource:
    state: FockVector
    wavefunction: GridWavefunction
    norm: float

    @property
    def unnormalized(self) -> np.ndarray:
        """Amplitudes of ``(1 + beta x^3) S(g)|0>`` before normalization."""
        return self.state.amplitudes * self.norm


def direct_resource(spec: ResourceSpec, grid: GridSpec = DEFAULT_GRID) -> DirectResource:
    base = squeeze_state(spec.g, spec.dim)
    state, norm = apply_poly_x(XPolynomial.cubic(spec.beta), base)
    wf = GridWavefunction.from_function(spec.wavefunction, grid)
    return DirectResource(state, wf, norm)


# ---------------------------------------------------------------------------
# recipe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CubicCoefficients:
    mu: float
    nu: float
    C1: float
    C2: float
    A: float
    chi_prime: float


def cubic_coefficients(chi_prime: float, g_gen: float) -> CubicCoefficients:
    if not g_gen > 1.0:
        raise DomainError(
            f"generation squeezing g_gen must exceed 1 (nu = 0 collapses the recipe), got {g_gen}"
        )
    if chi_prime == 0:
        raise DomainError("chi_prime = 0 makes C1 = 2 sqrt(2) nu^3 / chi_prime undefined")
    s = math.log(math.sqrt(g_gen))
    mu, nu = math.cosh(s), math.sinh(s)
    c1 = 2.0 * SQRT2 * nu**3 / chi_prime
    c2 = 3.0 * nu**2 + 3.0 * mu * nu
    # A chi' = 2 sqrt(2) nu^3 fixes A; numerically A coincides with C1
    a_norm = 2.0 * SQRT2 * nu**3 / chi_prime
    return CubicCoefficients(mu, nu, c1, c2, a_norm, chi_prime)


def depressed_cubic_real_root(p: float, q: float) -> float:
    """A real root of ``t^3 + p t + q = 0``.

    Closed-form Cardano in hyperbolic/trigonometric form. With three real
    roots the one of smallest magnitude is returned (ties go to the root of
    sign opposite to ``q``). One Newton step polishes the result.
    """
    if q == 0.0:
        t = 0.0
    elif abs(p) ** 3 <= 1e-30 * q * q:
        # p negligible: the hyperbolic forms would divide by an underflowed p k
        t = -float(np.cbrt(q))
    elif p > 0.0:
        k = 2.0 * math.sqrt(p / 3.0)
        t = -k * math.sinh(math.asinh(3.0 * q / (p * k)) / 3.0)
    else:
        k = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * k)  # = (3q / 2p) sqrt(-3/p)
        if abs(arg) > 1.0:
            t = -math.copysign(1.0, q) * k * math.cosh(math.acosh(abs(arg)) / 3.0)
        else:
            theta = math.acos(arg) / 3.0
            roots = [k * math.cos(theta - 2.0 * math.pi * j / 3.0) for j in range(3)]
            sgn = -math.copysign(1.0, q) if q != 0 else 1.0
            t = min(roots, key=lambda r: (round(abs(r), 12), -sgn * r))
    deriv = 3.0 * t * t + p
    if deriv != 0.0:
        t -= (t**3 + p * t + q) / deriv
    return t


@dataclass(frozen=True)
class DisplacementTriple:
    alpha: complex
    beta: complex
    gamma: complex
    xi: float
    zeta: float

    def residuals(self, c: CubicCoefficients) -> dict:
        """Absolute residuals of the defining relations."""
        a, b, g = self.alpha, self.beta, self.gamma
        e2 = a * b + a * g + b * g
        nu, mu = c.nu, c.mu
        return {
            "sum": abs(a + b + g),
            "product": abs(c.A - a * b * g),
            "normalization": abs(2.0 * SQRT2 * nu**3 - c.A * c.chi_prime),
            "pair_sum": abs(3.0 * nu**2 + 3.0 * mu * nu - e2),
            "xy_plus_c1": abs(self.xi * self.zeta + c.C1),
            "y_minus_x2_minus_c2": abs(self.zeta - self.xi**2 - c.C2),
        }


def solve_triple(c: CubicCoefficients) -> DisplacementTriple:
    # y = x^2 + C2 substituted into x y + C1 = 0
    xi = depressed_cubic_real_root(c.C2, c.C1)
    zeta = xi * xi + c.C2
    root = np.sqrt(complex(xi * xi - 4.0 * zeta))
    alpha = (xi + root) / 2.0
    beta = (xi - root) / 2.0
    gamma = -(alpha + beta)
    return DisplacementTriple(complex(alpha), complex(beta), complex(gamma), xi, zeta)


def generation_state(g_gen: float, dim: int = DEFAULT_DIM) -> FockVector:
    """``S_gen|0>``: x-squeezed vacuum with ``<x^2> = 1 / (2 g_gen)``."""
    return squeeze_state(1.0 / g_gen, dim)


@dataclass(frozen=True)
class RecipeResult:
    state: FockVector
    norm2: float  # heralding-probability proxy


def recipe_state(t: DisplacementTriple, g_gen: float, dim: int = DEFAULT_DIM) -> RecipeResult:
    a = destroy(dim).matrix
    eye = np.eye(dim)
    v = generation_state(g_gen, dim).amplitudes
    for d in (t.gamma, t.beta, t.alpha):
        v = (a - d * eye) @ v
    n2 = float(np.vdot(v, v).real)
    if not n2 > 1e-300:
        raise AnnihilationError("photon subtraction annihilated the state")
    return RecipeResult(FockVector(v / math.sqrt(n2)), n2)


def recipe_target(chi_prime: float, g_gen: float, dim: int = DEFAULT_DIM) -> ResourceSpec:
    """Direct resource produced by the recipe with parameters ``(chi_prime, g_gen)``."""
    return ResourceSpec(chi=chi_prime * g_gen**1.5, g=1.0 / g_gen, dim=dim)


def squeeze_operator(g: float, dim: int) -> OperatorMatrix:
    """Truncated ``S(g)`` with ``S^dag x S = sqrt(g) x``; accurate well below ``dim``."""
    if not g > 0:
        raise DomainError(f"g must be positive, got {g}")
    x, p = quadratures(dim)
    gen = 0.5 * (x.matrix @ p.matrix + p.matrix @ x.matrix)
    gen = 0.5 * (gen + gen.conj().T)
    return unitary_from_hermitian(-0.5 * math.log(g) * gen)


def apply_squeeze(state: FockVector, g: float, pad: int = 96, tol: float = DEFAULT_TAIL_TOL) -> FockVector:
    """Squeeze ``state`` by ratio ``g`` (x-variance multiplied by ``g``)."""
    big = state.dim + pad
    out = squeeze_operator(g, big).matrix @ state.padded(big).amplitudes
    leaked = float(np.sum(np.abs(out[state.dim :]) ** 2))
    if leaked > tol:
        raise TruncationError(
            f"squeezing by {g} pushes mass {leaked:.3e} past dim {state.dim}", tail=leaked
        )
    kept = out[: state.dim]
    return FockVector(kept / np.linalg.norm(kept))


@dataclass(frozen=True)
class EngineeredResource:
    coefficients: CubicCoefficients
    triple: DisplacementTriple
    generated: RecipeResult
    state: FockVector  # after re-squeezing to the target g


def engineer_resource(spec: ResourceSpec, g_gen: float = 4.0) -> EngineeredResource:
    """Build ``spec`` by the subtraction recipe, then re-squeeze to ``spec.g``."""
    if spec.imaginary:
        raise DomainError("the subtraction recipe is implemented for real chi only")
    if spec.chi <= 0:
        raise DomainError("the subtraction recipe requires chi > 0")
    coeffs = cubic_coefficients(spec.chi_prime, g_gen)
    triple = solve_triple(coeffs)
    gen = recipe_state(triple, g_gen, spec.dim)
    ratio = spec.g * g_gen
    state = gen.state if ratio == 1.0 else apply_squeeze(gen.state, ratio)
    return EngineeredResource(coeffs, triple, gen, state)


# ---------------------------------------------------------------------------
# O6 factorization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComposeBetas:
    beta1: complex
    beta2: complex

    def factors(self) -> tuple[XPolynomial, XPolynomial]:
        return XPolynomial.cubic(self.beta1), XPolynomial.cubic(self.beta2)


def o6_polynomial(chi: float) -> XPolynomial:
    """``1 + i chi x^3 - chi^2 x^6 / 2``."""
    return XPolynomial((1.0, 0, 0, 1j * chi, 0, 0, -0.5 * chi**2))


def compose_betas(chi: float) -> ComposeBetas:
    """Roots of ``t^2 - i chi t - chi^2/2``, so ``(1+b1 x^3)(1+b2 x^3) = O6``."""
    if not chi > 0:
        raise DomainError(f"compose_betas expects chi > 0, got {chi}")
    disc = np.sqrt(complex((1j * chi) ** 2 + 2.0 * chi**2))
    b1 = (1j * chi + disc) / 2.0
    b2 = (1j * chi - disc) / 2.0
    return ComposeBetas(complex(b1), complex(b2))
