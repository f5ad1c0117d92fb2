"""Scalar diagnostics shared by tests, reports and the CLI."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import fockspace as fs
from .errors import ConfigurationError, TruncationWarning
from .fockspace import DensityMatrix, StateVector


def _as_density(state) -> DensityMatrix:
    return state.to_density() if isinstance(state, StateVector) else state


def fidelity(a, b: StateVector) -> float:
    """|<a|b>|^2, or <b|rho|b> when ``a`` is a density matrix."""
    if a.dims != b.dims:
        raise ConfigurationError(f"dimension mismatch: {a.dims} vs {b.dims}")
    if isinstance(a, StateVector):
        f = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    else:
        v = b.amplitudes
        f = np.real(np.vdot(v, a.matrix @ v))
    return float(min(max(f, 0.0), 1.0))


def mixed_fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    if rho.dims != sigma.dims:
        raise ConfigurationError(f"dimension mismatch: {rho.dims} vs {sigma.dims}")
    w, v = np.linalg.eigh(rho.matrix)
    sq = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    inner = np.linalg.eigvalsh(sq @ sigma.matrix @ sq)
    # round-off eigenvalues near zero would each add ~1e-8 after the square root
    inner = inner[inner > 1e-14 * max(inner.max(), 1e-300)]
    return float(min(np.sum(np.sqrt(inner)) ** 2, 1.0))


def trace_distance(rho: DensityMatrix | np.ndarray, sigma: DensityMatrix | np.ndarray) -> float:
    a = rho.matrix if isinstance(rho, DensityMatrix) else rho
    b = sigma.matrix if isinstance(sigma, DensityMatrix) else sigma
    diff = a - b
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def purity(state) -> float:
    if isinstance(state, StateVector):
        return 1.0
    return state.purity()


def quadrature_moments(state) -> tuple[float, float, float, float]:
    """(mean_q, var_q, mean_p, var_p) with q = (b+b†)/sqrt2, p = (b-b†)/(i sqrt2)."""
    rho = _as_density(state)
    if len(rho.dims) != 1:
        raise ConfigurationError("quadrature moments are single-mode")
    dim = rho.dims[0]
    q = fs.position_op(dim)
    p = fs.momentum_op(dim)
    mq = rho.expect(q).real
    mp = rho.expect(p).real
    vq = rho.expect(q @ q).real - mq**2
    vp = rho.expect(p @ p).real - mp**2
    return mq, vq, mp, vp


def mean_occupation(state) -> float:
    rho = _as_density(state)
    probs = np.real(np.diag(rho.matrix)).reshape(rho.dims)
    total = 0.0
    for axis, d in enumerate(rho.dims):
        marginal = probs.sum(axis=tuple(i for i in range(len(rho.dims)) if i != axis))
        total += float(np.dot(np.arange(d), marginal))
    return total


def remove_displacement(state, alpha: complex | None = None) -> DensityMatrix:
    """Apply D(-alpha). Without ``alpha`` the mean-field value (<q> + i<p>)/sqrt2 is used."""
    rho = _as_density(state)
    if alpha is None:
        mq, _, mp, _ = quadrature_moments(rho)
        alpha = (mq + 1j * mp) / math.sqrt(2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        undo = fs.displacement_op(-alpha, rho.dims[0]).matrix
    out = undo @ rho.matrix @ undo.conj().T
    return DensityMatrix(0.5 * (out + out.conj().T), rho.dims, validate=False)


def displaced_fock_fidelity(psi, n: int, mode: str = "raw", displacement: complex | None = None) -> float:
    """Fidelity with a displaced Fock state.

    ``raw`` compares against D(-sqrt(n + 1/2))|n>. ``displacement_corrected``
    first undoes the state's own displacement and compares against |n>,
    isolating shape from position mismatch. For |phi_n> pass
    ``displacement=xi_n/sqrt2``; otherwise the mean-field estimate is used.
    """
    rho = _as_density(psi)
    dim = rho.dims[0]
    if not 0 <= n < dim:
        raise ConfigurationError(f"level {n} outside truncation {dim}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        if mode == "raw":
            d = fs.displacement_op(-math.sqrt(n + 0.5), dim)
            target = StateVector.from_vector(d.matrix[:, n], rho.dims)
            return fidelity(rho, target)
        if mode == "displacement_corrected":
            centred = remove_displacement(rho, displacement)
            return float(np.clip(np.real(centred.matrix[n, n]), 0.0, 1.0))
    raise ConfigurationError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class StateReport:
    fidelity_vs_target: float
    purity: float
    mean_q: float
    var_q: float
    var_p: float
    mean_n: float
    tail_mass: float
    fidelity_raw: float | None = None
    fidelity_corrected: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def state_report(
    state, target: StateVector | None = None, n: int | None = None, displacement: complex | None = None
) -> StateReport:
    rho = _as_density(state)
    mq, vq, _, vp = quadrature_moments(rho)
    fid = fidelity(rho, target) if target is not None else float("nan")
    raw = corrected = None
    if n is not None:
        raw = displaced_fock_fidelity(rho, n, "raw")
        corrected = displaced_fock_fidelity(rho, n, "displacement_corrected", displacement)
    return StateReport(
        fidelity_vs_target=fid,
        purity=purity(state),
        mean_q=mq,
        var_q=vq,
        var_p=vp,
        mean_n=mean_occupation(rho),
        tail_mass=rho.tail_mass,
        fidelity_raw=raw,
        fidelity_corrected=corrected,
    )
