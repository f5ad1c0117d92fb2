"""Truncated Fock-space operators and state containers.

Everything here is dense numpy. Operators carry their per-mode truncation in
``dims`` so two-mode objects (cavity first, mechanics second) can be checked
for compatibility and partially traced.

Quadrature convention used throughout the package::

    q = (b + b†)/√2,   p = (b − b†)/(i√2)

so that ``displacement_op(xi/√2)`` shifts ⟨q⟩ by ``xi``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.linalg
from scipy.special import eval_genlaguerre, gammaln

from .errors import ConfigurationError, TruncationWarning

HERMITIAN_RTOL = 1e-12
TAIL_FRACTION = 0.1


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


def _check_dim(dim: int) -> int:
    if int(dim) != dim or dim < 2:
        raise ConfigurationError(f"Fock dimension must be an integer >= 2, got {dim!r}")
    return int(dim)


@dataclass(frozen=True)
class QuantumOperator:
    """Dense operator on a (possibly composite) truncated Fock space."""

    matrix: np.ndarray
    dims: tuple[int, ...]
    hermitian: bool = False

    def __post_init__(self):
        m = _frozen(self.matrix)
        dims = tuple(int(d) for d in self.dims)
        if not 1 <= len(dims) <= 2:
            raise ConfigurationError("operators act on one or two modes")
        side = int(np.prod(dims))
        if m.shape != (side, side):
            raise ConfigurationError(f"matrix shape {m.shape} does not match dims {dims}")
        if self.hermitian:
            scale = np.abs(m).max()
            if np.abs(m - m.conj().T).max() > HERMITIAN_RTOL * max(scale, 1e-300):
                raise ConfigurationError("operator flagged Hermitian but is not")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dag(self) -> QuantumOperator:
        return QuantumOperator(self.matrix.conj().T, self.dims, self.hermitian)

    def _compatible(self, other: QuantumOperator) -> None:
        if self.dims != other.dims:
            raise ConfigurationError(f"dimension mismatch: {self.dims} vs {other.dims}")

    def __add__(self, other):
        if isinstance(other, QuantumOperator):
            self._compatible(other)
            return QuantumOperator(self.matrix + other.matrix, self.dims)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, QuantumOperator):
            self._compatible(other)
            return QuantumOperator(self.matrix - other.matrix, self.dims)
        return NotImplemented

    def __neg__(self):
        return QuantumOperator(-self.matrix, self.dims, self.hermitian)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return QuantumOperator(scalar * self.matrix, self.dims)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, QuantumOperator):
            self._compatible(other)
            return QuantumOperator(self.matrix @ other.matrix, self.dims)
        if isinstance(other, StateVector):
            if self.dims != other.dims:
                raise ConfigurationError(f"dimension mismatch: {self.dims} vs {other.dims}")
            return self.matrix @ other.amplitudes
        return NotImplemented

    def apply(self, psi: StateVector) -> np.ndarray:
        """Unnormalized vector ``M|psi>``."""
        return self @ psi

    def hermitize(self) -> QuantumOperator:
        """Exact Hermitian part, flagged as Hermitian."""
        return QuantumOperator(0.5 * (self.matrix + self.matrix.conj().T), self.dims, True)


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state. ``tail_mass`` is the truncation-health metric."""

    amplitudes: np.ndarray
    dims: tuple[int, ...]
    tail_mass: float = field(init=False)

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=complex).ravel()
        dims = tuple(int(d) for d in self.dims)
        if v.size != int(np.prod(dims)):
            raise ConfigurationError(f"vector of length {v.size} does not match dims {dims}")
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > 1e-12:
            raise ConfigurationError(f"state is not normalized (norm={norm:.15g})")
        object.__setattr__(self, "amplitudes", _frozen(v))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "tail_mass", tail_mass(np.abs(v) ** 2, dims))

    @classmethod
    def from_vector(cls, v, dims) -> StateVector:
        """Normalize ``v`` and wrap it."""
        v = np.asarray(v, dtype=complex).ravel()
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ConfigurationError("cannot normalize the zero vector")
        return cls(v / norm, tuple(dims))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def overlap(self, other: StateVector) -> complex:
        if self.dims != other.dims:
            raise ConfigurationError(f"dimension mismatch: {self.dims} vs {other.dims}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_density(self) -> DensityMatrix:
        v = self.amplitudes
        return DensityMatrix(np.outer(v, v.conj()), self.dims)

    def expect(self, op: QuantumOperator) -> complex:
        return complex(np.vdot(self.amplitudes, op @ self))


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state with validated Hermiticity, unit trace and numerical positivity."""

    matrix: np.ndarray
    dims: tuple[int, ...]
    validate: bool = True

    def __post_init__(self):
        m = _frozen(self.matrix)
        dims = tuple(int(d) for d in self.dims)
        side = int(np.prod(dims))
        if m.shape != (side, side):
            raise ConfigurationError(f"matrix shape {m.shape} does not match dims {dims}")
        if self.validate:
            if np.abs(m - m.conj().T).max() > 1e-10:
                raise ConfigurationError("density matrix is not Hermitian")
            tr = np.trace(m).real
            if abs(tr - 1.0) > 1e-10:
                raise ConfigurationError(f"density matrix trace is {tr:.12g}")
            lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
            if lo < -1e-8:
                raise ConfigurationError(f"density matrix has eigenvalue {lo:.3g}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def tail_mass(self) -> float:
        return tail_mass(np.real(np.diag(self.matrix)), self.dims)

    def purity(self) -> float:
        m = self.matrix
        return float(np.real(np.vdot(m.conj().T, m)))

    def expect(self, op: QuantumOperator) -> complex:
        if op.dims != self.dims:
            raise ConfigurationError(f"dimension mismatch: {op.dims} vs {self.dims}")
        return complex(np.trace(op.matrix @ self.matrix))

    def ptrace(self, keep: int) -> DensityMatrix:
        """Reduced state of mode ``keep`` (0 = cavity, 1 = mechanics)."""
        if len(self.dims) == 1:
            return self
        d0, d1 = self.dims
        r = self.matrix.reshape(d0, d1, d0, d1)
        red = np.einsum("ajbj->ab", r) if keep == 0 else np.einsum("ajak->jk", r)
        red = 0.5 * (red + red.conj().T)
        return DensityMatrix(red / np.trace(red).real, (self.dims[keep],), validate=False)

    def dominant_state(self) -> tuple[StateVector, float]:
        """Leading eigenvector and its weight."""
        w, v = np.linalg.eigh(0.5 * (self.matrix + self.matrix.conj().T))
        vec = fix_phase(v[:, -1])
        return StateVector.from_vector(vec, self.dims), float(w[-1])


def tail_mass(probs: np.ndarray, dims: tuple[int, ...]) -> float:
    """Largest probability held in the top 10% of levels of any single mode."""
    p = np.asarray(probs, dtype=float).reshape(dims)
    worst = 0.0
    for axis, d in enumerate(dims):
        marginal = p.sum(axis=tuple(i for i in range(len(dims)) if i != axis))
        ntop = max(1, int(np.ceil(TAIL_FRACTION * d)))
        worst = max(worst, float(marginal[-ntop:].sum()))
    return worst


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude amplitude is real positive."""
    v = np.asarray(v, dtype=complex)
    k = int(np.argmax(np.abs(v)))
    if v[k] == 0:
        return v
    return v * (abs(v[k]) / v[k])


def annihilation_op(dim: int) -> QuantumOperator:
    dim = _check_dim(dim)
    return QuantumOperator(np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1), (dim,))


def creation_op(dim: int) -> QuantumOperator:
    return annihilation_op(dim).dag()


def number_op(dim: int) -> QuantumOperator:
    dim = _check_dim(dim)
    return QuantumOperator(np.diag(np.arange(dim, dtype=float)), (dim,), hermitian=True)


def identity_op(dim: int) -> QuantumOperator:
    dim = _check_dim(dim)
    return QuantumOperator(np.eye(dim), (dim,), hermitian=True)


def position_op(dim: int) -> QuantumOperator:
    b = annihilation_op(dim).matrix
    return QuantumOperator((b + b.conj().T) / np.sqrt(2), (dim,), hermitian=True)


def momentum_op(dim: int) -> QuantumOperator:
    b = annihilation_op(dim).matrix
    return QuantumOperator((b - b.conj().T) / (1j * np.sqrt(2)), (dim,), hermitian=True)


def commutator(a: QuantumOperator, b: QuantumOperator) -> QuantumOperator:
    return a @ b - b @ a


def anticommutator(a: QuantumOperator, b: QuantumOperator) -> QuantumOperator:
    return a @ b + b @ a


def tensor(a: QuantumOperator, b: QuantumOperator) -> QuantumOperator:
    """Kronecker product, ordered (cavity, mechanics)."""
    if len(a.dims) != 1 or len(b.dims) != 1:
        raise ConfigurationError("tensor() composes two single-mode operators")
    herm = a.hermitian and b.hermitian
    return QuantumOperator(np.kron(a.matrix, b.matrix), a.dims + b.dims, herm)


def displacement_op(alpha: complex, dim: int, method: str = "expm") -> QuantumOperator:
    """D(alpha) = exp(alpha b† − alpha* b) on the truncated space.

    ``method="expm"`` exponentiates the truncated generator (exactly unitary);
    ``method="laguerre"`` fills in the untruncated matrix elements. The two
    agree on levels well below the truncation.
    """
    dim = _check_dim(dim)
    alpha = complex(alpha)
    if abs(alpha) ** 2 > dim / 4:
        warnings.warn(
            f"|alpha|^2 = {abs(alpha) ** 2:.3g} is large for dim={dim}", TruncationWarning, stacklevel=2
        )
    if alpha == 0:
        return identity_op(dim)
    if method == "expm":
        b = annihilation_op(dim).matrix
        gen = alpha * b.conj().T - np.conj(alpha) * b
        return QuantumOperator(scipy.linalg.expm(gen), (dim,))
    if method == "laguerre":
        return QuantumOperator(_displacement_laguerre(alpha, dim), (dim,))
    raise ConfigurationError(f"unknown displacement method {method!r}")


def _displacement_laguerre(alpha: complex, dim: int) -> np.ndarray:
    # <m|D|n> = sqrt(n!/m!) alpha^(m-n) e^{-|a|^2/2} L_n^(m-n)(|a|^2), m >= n
    x = abs(alpha) ** 2
    m, n = np.meshgrid(np.arange(dim), np.arange(dim), indexing="ij")
    lo, hi = np.minimum(m, n), np.maximum(m, n)
    base = np.where(m >= n, alpha, -np.conj(alpha))
    logmag = 0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) - x / 2
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.exp(logmag) * base ** (hi - lo) * eval_genlaguerre(lo, hi - lo, x)
    return np.nan_to_num(vals)


def squeeze_op(r: float, dim: int) -> QuantumOperator:
    """S(r) = exp(r (b² − b†²)/2); for real r > 0 it squeezes q."""
    b = annihilation_op(dim).matrix
    gen = 0.5 * r * (b @ b - b.conj().T @ b.conj().T)
    return QuantumOperator(scipy.linalg.expm(gen), (_check_dim(dim),))


def basis(dim: int, k: int) -> StateVector:
    dim = _check_dim(dim)
    if not 0 <= k < dim:
        raise ConfigurationError(f"level {k} outside truncation {dim}")
    v = np.zeros(dim, dtype=complex)
    v[k] = 1.0
    return StateVector(v, (dim,))


def coherent_state(alpha: complex, dim: int) -> StateVector:
    op = displacement_op(alpha, dim)
    return StateVector.from_vector(op.matrix[:, 0], (dim,))


def thermal_state(nbar: float, dim: int) -> DensityMatrix:
    """Truncated thermal state with mean occupation ``nbar`` (before truncation)."""
    dim = _check_dim(dim)
    if nbar < 0:
        raise ConfigurationError("thermal occupation must be >= 0")
    if nbar == 0:
        p = np.zeros(dim)
        p[0] = 1.0
    else:
        x = nbar / (1.0 + nbar)
        p = x ** np.arange(dim)
        p /= p.sum()
    return DensityMatrix(np.diag(p), (dim,))


def tensor_states(a, b):
    """Product state of two single-mode states (vectors or density matrices)."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector.from_vector(np.kron(a.amplitudes, b.amplitudes), a.dims + b.dims)
    ra = a.to_density() if isinstance(a, StateVector) else a
    rb = b.to_density() if isinstance(b, StateVector) else b
    return DensityMatrix(np.kron(ra.matrix, rb.matrix), ra.dims + rb.dims)


def embed(op: QuantumOperator, mode: int, dims: tuple[int, int]) -> QuantumOperator:
    """Lift a single-mode operator into the two-mode space."""
    others = [identity_op(d) for d in dims]
    others[mode] = op
    return reduce(tensor, others)
