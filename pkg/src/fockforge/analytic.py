"""Closed-form steady states of the three-tone optomechanical model.

The mechanical steady state |phi_n> is the state annihilated by the dark
operator ``G- b + G+ b† + G0 {b, b†}``. When G0 sits at the resonant value
for integer ``n`` this state is a displaced finite superposition of Fock
states ``|0>..|n>``, and its position wavefunction is a shifted Gaussian
times a Hermite polynomial of order ``n``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_hermite, gammaln

from . import fockspace as fs
from .errors import ConfigurationError, StabilityError, TruncationWarning
from .fockspace import QuantumOperator, StateVector

TAIL_TOLERANCE = 1e-8
SEPARATION_THRESHOLD = 100.0


@dataclass(frozen=True)
class CouplingSet:
    """Effective couplings G-, G+, G0 and cavity decay rate kappa."""

    g_minus: float
    g_plus: float
    g_zero: float
    kappa: float = 1.0
    sign_flipped: bool = False

    def __post_init__(self):
        for name in ("g_minus", "g_plus", "g_zero", "kappa"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise ConfigurationError(f"{name} must be finite")
        if min(self.g_minus, self.g_plus, self.g_zero) < 0:
            raise ConfigurationError("couplings must be non-negative")
        if self.kappa <= 0:
            raise ConfigurationError("kappa must be positive")

    @property
    def stable(self) -> bool:
        return self.g_plus < self.g_minus

    @property
    def max_coupling(self) -> float:
        return max(self.g_minus, self.g_plus, self.g_zero)

    @classmethod
    def resonant(cls, n: int, zeta: float, g_minus: float = 1.0, kappa: float = 10.0) -> CouplingSet:
        """Couplings that stabilize |phi_n> at squeezing ``zeta`` (G+ = zeta G-)."""
        g_plus = zeta * g_minus
        return cls(g_minus, g_plus, resonant_coupling(g_plus, g_minus, n), kappa)

    def scaled(self, s: float) -> CouplingSet:
        return CouplingSet(s * self.g_minus, s * self.g_plus, s * self.g_zero, self.kappa)

    def as_dict(self) -> dict:
        return {
            "G_minus": self.g_minus,
            "G_plus": self.g_plus,
            "G_0": self.g_zero,
            "kappa": self.kappa,
        }


@dataclass(frozen=True)
class TargetSpec:
    """Target Fock index ``n`` and squeezing parameter ``zeta = tanh r``."""

    n: int
    zeta: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ConfigurationError(f"n must be a non-negative integer, got {self.n!r}")
        if not 0.0 <= self.zeta < 1.0:
            raise ConfigurationError(f"zeta must lie in [0, 1), got {self.zeta!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "zeta", float(self.zeta))

    @property
    def r(self) -> float:
        return math.atanh(self.zeta)


@dataclass(frozen=True)
class PhiParams:
    """Position shift ``xi_n``, superposition ratio ``c_n`` and normalization ``norm``.

    ``norm`` is the 2F1 normalization of the literal sum ``sum_k C(n,k) c_n^-k |k>``.
    At zeta = 0 the parameters collapse to the vacuum sentinel (xi = 0, c = inf).
    """

    xi_n: float
    c_n: float
    norm: float

    @property
    def vacuum(self) -> bool:
        return math.isinf(self.c_n)


def physical_to_couplings(g1, g2, alpha_minus, alpha_zero, alpha_plus, kappa) -> CouplingSet:
    """Map single-photon couplings and drive amplitudes to (G-, G+, G0)."""
    if not kappa > 0:
        raise ConfigurationError("kappa must be positive")
    raw = (g1 * alpha_minus, g1 * alpha_plus, g2 * alpha_zero)
    flipped = any(x < 0 for x in raw)
    gm, gp, g0 = (abs(x) for x in raw)
    return CouplingSet(gm, gp, g0, kappa, sign_flipped=flipped)


def resonant_coupling(g_plus: float, g_minus: float, n: int) -> float:
    """G0 = sqrt(G+ G- / (2(2n+1))); reduces to G/sqrt(2(2n+1)) when G+ = G-."""
    if int(n) != n or n < 0:
        raise ConfigurationError(f"n must be a non-negative integer, got {n!r}")
    if g_plus < 0 or g_minus < 0:
        raise ConfigurationError("couplings must be non-negative")
    return math.sqrt(g_plus * g_minus / (2 * (2 * n + 1)))


def zeta_of(couplings: CouplingSet) -> float:
    if couplings.g_minus == 0:
        raise ConfigurationError("G- must be positive to define a squeezing parameter")
    if couplings.g_plus >= couplings.g_minus:
        raise StabilityError(
            f"unstable regime: requires G+ < G- (got G+={couplings.g_plus}, G-={couplings.g_minus})"
        )
    return couplings.g_plus / couplings.g_minus


def hyp2f1_finite(n: int, x: float) -> float:
    """2F1(-n, -n; 1; x) as the terminating sum of C(n,k)^2 x^k."""
    return math.fsum(math.comb(n, k) ** 2 * x**k for k in range(n + 1))


def phi_params(spec: TargetSpec) -> PhiParams:
    if spec.zeta == 0:
        return PhiParams(0.0, math.inf, 1.0)
    z, n = spec.zeta, spec.n
    xi = -math.sqrt(z * (1 + 2 * n))
    c = -(1 - z) / (4 * z) * xi
    norm = hyp2f1_finite(n, c**-2) ** -0.5
    return PhiParams(xi, c, norm)


def literal_superposition(spec: TargetSpec) -> np.ndarray:
    """Coefficients ``norm * C(n,k) c_n^-k`` of the finite sum as printed in closed form.

    Kept for comparison only: this vector is not annihilated by the dark
    operator for n >= 1. See :func:`superposition`.
    """
    p = phi_params(spec)
    if p.vacuum:
        return np.array([1.0] + [0.0] * spec.n)
    n = spec.n
    return np.array([p.norm * math.comb(n, k) * p.c_n ** (-k) for k in range(n + 1)])


def superposition(spec: TargetSpec) -> np.ndarray:
    """Normalized undisplaced coefficients of |phi_n> on |0>..|n>.

    Expanding the shifted Hermite polynomial with the addition theorem and
    converting ``H_k(x) e^{-x^2/2}`` to Fock wavefunctions gives
    ``C(n,k) sqrt(2^k k!) (4 c_n)^-k``. Evaluated in log space: at zeta -> 1
    the ratio c_n goes to zero and the top coefficient dominates.
    """
    p = phi_params(spec)
    n = spec.n
    if p.vacuum:
        out = np.zeros(n + 1)
        out[0] = 1.0
        return out
    k = np.arange(n + 1)
    logc = (
        gammaln(n + 1)
        - gammaln(k + 1)
        - gammaln(n - k + 1)
        + 0.5 * (k * math.log(2) + gammaln(k + 1))
        - k * math.log(4 * p.c_n)
    )
    a = np.exp(logc - logc.max())
    return a / np.linalg.norm(a)


def build_phi_n(spec: TargetSpec, dim: int) -> StateVector:
    """|phi_n> = D(xi_n/sqrt2) sum_k a_k |k> on a ``dim``-level space."""
    if spec.n >= dim:
        raise ConfigurationError(f"dim={dim} cannot hold Fock level {spec.n}")
    p = phi_params(spec)
    v = np.zeros(dim, dtype=complex)
    v[: spec.n + 1] = superposition(spec)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        d = fs.displacement_op(p.xi_n / math.sqrt(2), dim)
    psi = StateVector.from_vector(d.matrix @ v, (dim,))
    if psi.tail_mass > TAIL_TOLERANCE:
        warnings.warn(
            f"phi_{spec.n} at zeta={spec.zeta} has tail mass {psi.tail_mass:.2e} at dim={dim}",
            TruncationWarning,
            stacklevel=2,
        )
    return psi


def auto_dim(spec: TargetSpec, tol: float = 1e-12, start: int = 40, cap: int = 400) -> int:
    """Smallest dimension (doubling from ``start``) at which |phi_n> has tail mass < tol."""
    dim = max(start, spec.n + 2)
    while True:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            psi = build_phi_n(spec, dim)
        if psi.tail_mass < tol or dim >= cap:
            return dim
        dim = min(2 * dim, cap)


def build_dark_operator(couplings: CouplingSet, dim: int) -> QuantumOperator:
    """G- b + G+ b† + G0 {b, b†}."""
    b = fs.annihilation_op(dim)
    bd = b.dag()
    return couplings.g_minus * b + couplings.g_plus * bd + couplings.g_zero * fs.anticommutator(b, bd)


def build_annihilator_f(
    couplings: CouplingSet, spec: TargetSpec, dim: int, variant: str = "literal"
) -> QuantumOperator:
    """Nonlinear annihilator built from the Bogoliubov mode beta = cosh r b + sinh r b†.

    ``literal``: calG beta + sqrt(cosh r sinh r / (2(2n+1))) {b†, b}, with
    calG = sqrt(G-^2 - G+^2). ``rescaled``: calG times the bracketed nonlinear
    term as well, which is exactly the dark operator. The two share a kernel
    only when calG = 1.
    """
    if not couplings.stable:
        raise StabilityError("the Bogoliubov mode requires G+ < G-")
    r = math.atanh(couplings.g_plus / couplings.g_minus)
    big_g = math.sqrt(couplings.g_minus**2 - couplings.g_plus**2)
    b = fs.annihilation_op(dim)
    bd = b.dag()
    beta = math.cosh(r) * b + math.sinh(r) * bd
    coef = math.sqrt(math.cosh(r) * math.sinh(r) / (2 * (2 * spec.n + 1)))
    nonlinear = fs.anticommutator(bd, b)
    if variant == "literal":
        return big_g * beta + coef * nonlinear
    if variant == "rescaled":
        return big_g * (beta + coef * nonlinear)
    raise ConfigurationError(f"unknown variant {variant!r}")


@dataclass(frozen=True)
class KernelResult:
    state: StateVector
    residual: float
    separation: float

    @property
    def well_separated(self) -> bool:
        return self.separation >= SEPARATION_THRESHOLD

    def __iter__(self):
        yield self.state
        yield self.residual


def kernel_state(op: QuantumOperator) -> KernelResult:
    """Right-singular vector of the smallest singular value.

    ``separation`` is the ratio of the two smallest singular values; below 100
    the kernel is not considered unique.
    """
    if len(op.dims) != 1:
        raise ConfigurationError("kernel_state expects a single-mode operator")
    _, s, vh = np.linalg.svd(op.matrix)
    v = fs.fix_phase(vh[-1].conj())
    smin = float(s[-1])
    if smin > 0:
        sep = float(s[-2] / smin)
    else:
        sep = math.inf if s[-2] > 0 else 1.0
    return KernelResult(StateVector.from_vector(v, op.dims), smin, sep)


def position_wavefunction(spec: TargetSpec, q):
    """Unnormalized e^{-(q-xi)^2/2} H_n(q - xi + (1-zeta) sqrt(zeta(1+2n)) / (2 zeta))."""
    q = np.asarray(q, dtype=float)
    if spec.zeta == 0:
        return np.exp(-0.5 * q**2)
    z, n = spec.zeta, spec.n
    s = math.sqrt(z * (1 + 2 * n))
    xi = -s
    shift = (1 - z) * s / (2 * z)
    return np.exp(-0.5 * (q - xi) ** 2) * eval_hermite(n, q - xi + shift)


def normalized_wavefunction(spec: TargetSpec, q: np.ndarray) -> np.ndarray:
    """Samples of the wavefunction scaled to unit Riemann norm on the equispaced grid ``q``."""
    q = np.asarray(q, dtype=float)
    step = q[1] - q[0]
    f = position_wavefunction(spec, q)
    # scale before squaring: Hermite values at large shifts overflow otherwise
    f = f / np.abs(f).max()
    return f / math.sqrt(np.sum(f**2) * step)
