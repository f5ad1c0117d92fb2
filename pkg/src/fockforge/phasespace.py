"""Position-space and Wigner representations of pure single-mode states.

The Wigner function is computed straight from the wavefunction,

    W(q, p) = (1/pi) * integral dy exp(2ipy) psi*(q + y) psi(q - y),

with a midpoint sum over ``y`` on the same spacing as the ``q`` grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, GridError
from .fockspace import DensityMatrix, StateVector

NEGATIVITY_CONVENTION = "integral of |min(W, 0)| dq dp (not doubled)"
BOUNDARY_MASS_LIMIT = 1e-10
UNDERFLOW_CUTOFF = 1e-300
IMAG_TOLERANCE = 1e-10


@dataclass(frozen=True)
class RealGrid1D:
    min: float
    max: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigurationError("grid step must be positive")
        if not self.max > self.min:
            raise ConfigurationError("grid max must exceed min")
        if (self.max - self.min) / self.step > 1e6:
            raise ConfigurationError("grid has more than 1e6 intervals")

    @property
    def points(self) -> np.ndarray:
        count = int(round((self.max - self.min) / self.step)) + 1
        return self.min + self.step * np.arange(count)


@dataclass(frozen=True)
class WignerGrid:
    q_grid: RealGrid1D
    p_grid: RealGrid1D
    values: np.ndarray  # shape (len(q), len(p))
    max_imag: float = 0.0
    metadata: dict = field(default_factory=dict)

    @property
    def q(self) -> np.ndarray:
        return self.q_grid.points

    @property
    def p(self) -> np.ndarray:
        return self.p_grid.points

    def normalization(self) -> float:
        return float(self.values.sum() * self.q_grid.step * self.p_grid.step)


def hermite_functions(kmax: int, x: np.ndarray) -> np.ndarray:
    """psi_k(x) = pi^(-1/4) (2^k k!)^(-1/2) H_k(x) e^(-x^2/2) for k < kmax.

    Uses the normalized three-term recurrence, which stays finite for large
    ``k`` where raw Hermite values overflow.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((kmax,) + x.shape)
    out[0] = math.pi**-0.25 * np.exp(-0.5 * x**2)
    if kmax > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(2, kmax):
        out[k] = math.sqrt(2.0 / k) * x * out[k - 1] - math.sqrt((k - 1) / k) * out[k - 2]
    return out


def position_samples(psi: StateVector, x: np.ndarray) -> np.ndarray:
    """<x|psi> at arbitrary sample points."""
    if len(psi.dims) != 1:
        raise ConfigurationError("position representation is single-mode")
    basis = hermite_functions(psi.dim, x)
    vals = np.tensordot(psi.amplitudes, basis, axes=(0, 0))
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("non-finite wavefunction samples")
    return vals


def state_to_position(psi: StateVector, grid: RealGrid1D) -> np.ndarray:
    return position_samples(psi, grid.points)


def as_pure_state(state, min_purity: float = 0.999) -> StateVector:
    """Dominant eigenvector of a nearly pure density matrix; refuses mixed input."""
    if isinstance(state, StateVector):
        return state
    if not isinstance(state, DensityMatrix):
        raise ConfigurationError("expected a StateVector or DensityMatrix")
    pur = state.purity()
    if pur < min_purity:
        raise ConfigurationError(f"state purity {pur:.4f} below {min_purity}; Wigner needs a pure state")
    return state.dominant_state()[0]


def boundary_mass(psi: StateVector, grid: RealGrid1D) -> float:
    """Probability of |psi(q)|^2 lying outside [grid.min, grid.max]."""
    width = grid.max - grid.min
    lo = np.arange(grid.min - width, grid.min, grid.step)
    hi = np.arange(grid.max + grid.step, grid.max + width, grid.step)
    outside = np.concatenate([lo, hi])
    return float(np.sum(np.abs(position_samples(psi, outside)) ** 2) * grid.step)


def wigner(psi, q_grid: RealGrid1D, p_grid: RealGrid1D) -> WignerGrid:
    psi = as_pure_state(psi)
    mass = boundary_mass(psi, q_grid)
    if mass > BOUNDARY_MASS_LIMIT:
        raise GridError(f"q grid [{q_grid.min}, {q_grid.max}] leaves boundary mass {mass:.3e}")
    q = q_grid.points
    p = p_grid.points
    h = q_grid.step
    # y runs over the full q width, so q +- y covers the whole support for every q
    ny = len(q)
    y = h * np.arange(-ny, ny + 1)
    ext = q[0] + h * np.arange(-ny - 1, 2 * ny + 2)
    vals = position_samples(psi, ext)
    vals = np.where(np.abs(vals) < UNDERFLOW_CUTOFF, 0.0, vals)
    base = ny + 1
    i = np.arange(len(q))[:, None]
    j = np.arange(-ny, ny + 1)[None, :]
    integrand = np.conj(vals[base + i + j]) * vals[base + i - j]
    phase = np.exp(2j * np.outer(y, p))
    w = (integrand @ phase) * h / math.pi
    max_imag = float(np.abs(w.imag).max())
    if max_imag > IMAG_TOLERANCE:
        raise FloatingPointError(f"Wigner imaginary residue {max_imag:.2e}")
    grid = WignerGrid(q_grid, p_grid, np.ascontiguousarray(w.real), max_imag)
    grid.metadata.update(wigner_summary(grid))
    return grid


def wigner_at(psi, q: np.ndarray, p: np.ndarray, step: float = 0.02, half_width: float = 15.0) -> np.ndarray:
    """W at scattered points (q_i, p_i), same midpoint rule with spacing ``step``."""
    psi = as_pure_state(psi)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    y = step * np.arange(-int(half_width / step), int(half_width / step) + 1)
    out = np.empty(q.shape)
    for k, (qk, pk) in enumerate(zip(q, p)):
        f = np.conj(position_samples(psi, qk + y)) * position_samples(psi, qk - y)
        out[k] = np.real(np.sum(np.exp(2j * pk * y) * f)) * step / math.pi
    return out


def negativity_volume(w: WignerGrid) -> float:
    """Integral of the negative part of W (see NEGATIVITY_CONVENTION)."""
    neg = np.clip(w.values, None, 0.0)
    return float(-neg.sum() * w.q_grid.step * w.p_grid.step)


def marginal_skewness(w: WignerGrid) -> float:
    """|third standardized moment| of the position marginal; zero for a displaced Fock state."""
    q = w.q
    marg = w.values.sum(axis=1) * w.p_grid.step
    norm = marg.sum() * w.q_grid.step
    mean = np.sum(q * marg) * w.q_grid.step / norm
    var = np.sum((q - mean) ** 2 * marg) * w.q_grid.step / norm
    third = np.sum((q - mean) ** 3 * marg) * w.q_grid.step / norm
    return float(abs(third) / var**1.5)


def negative_minima_along(values: np.ndarray, floor: float = 1e-8) -> int:
    """Number of strict local minima below ``-floor`` in a 1-D cut.

    The floor keeps round-off wiggles in the far tails from counting.
    """
    v = np.asarray(values)
    inner = (v[1:-1] < v[:-2]) & (v[1:-1] < v[2:]) & (v[1:-1] < -floor)
    return int(inner.sum())


def cut_at_p(w: WignerGrid, p0: float = 0.0) -> np.ndarray:
    k = int(np.argmin(np.abs(w.p - p0)))
    return w.values[:, k]


def wigner_summary(w: WignerGrid) -> dict:
    vals = w.values
    iq, ip = np.unravel_index(np.argmax(vals), vals.shape)
    jq, jp = np.unravel_index(np.argmin(vals), vals.shape)
    return {
        "normalization": w.normalization(),
        "negativity_volume": negativity_volume(w),
        "negativity_convention": NEGATIVITY_CONVENTION,
        "w_max": float(vals[iq, ip]),
        "w_max_at": [float(w.q[iq]), float(w.p[ip])],
        "w_min": float(vals[jq, jp]),
        "w_min_at": [float(w.q[jq]), float(w.p[jp])],
        "skewness": marginal_skewness(w),
        "negative_minima_p0": negative_minima_along(cut_at_p(w)),
        "max_imag_residue": w.max_imag,
    }
