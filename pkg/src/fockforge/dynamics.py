"""Lindblad evolution of the linearized cavity-mechanics model.

Two models are provided:

* the two-mode model, cavity fluctuation ``d`` coupled to the mechanics by
  ``H = -d†A - d A†`` with ``A = G- b + G+ b† + G0 {b, b†}`` and cavity decay
  at rate kappa;
* the effective single-mode model obtained by adiabatically eliminating the
  cavity, a single jump ``L = (2/sqrt(kappa)) A`` and no Hamiltonian.

The dark state of ``A`` (with the cavity in vacuum) is stationary in both.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from . import fockspace as fs
from ._rk4 import rk4_steps
from .analytic import CouplingSet, build_dark_operator
from .errors import ConfigurationError
from .fockspace import DensityMatrix, QuantumOperator
from .metrics import mean_occupation, trace_distance

log = logging.getLogger(__name__)

STEP_SAFETY = 2.0
MAX_STEP_RATE = 0.05
DISCRETIZATION_TOLERANCE = 1e-6
DIVERGENCE_FACTOR = 10.0
CEILING_TAIL_MASS = 1e-2


@dataclass(frozen=True)
class LindbladModel:
    hamiltonian: QuantumOperator
    jumps: tuple[tuple[QuantumOperator, float], ...]
    label: str = ""

    def __post_init__(self):
        if not self.hamiltonian.hermitian:
            raise ConfigurationError("Hamiltonian must be flagged Hermitian")
        jumps = tuple((op, float(rate)) for op, rate in self.jumps)
        for op, rate in jumps:
            if op.dims != self.hamiltonian.dims:
                raise ConfigurationError(f"jump dims {op.dims} differ from {self.hamiltonian.dims}")
            if not rate > 0:
                raise ConfigurationError("jump rates must be positive")
        object.__setattr__(self, "jumps", jumps)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.hamiltonian.dims

    def generator_bound(self) -> float:
        """Upper bound on the generator's spectral radius: H spread plus 2 sum rate ||L||^2."""
        evals = np.linalg.eigvalsh(self.hamiltonian.matrix)
        bound = float(evals[-1] - evals[0])
        for op, rate in self.jumps:
            bound += 2 * rate * np.linalg.norm(op.matrix, 2) ** 2
        return bound

    def spectral_radius(self) -> float:
        """Largest |eigenvalue| of the generator, estimated with ARPACK.

        Falls back to ``generator_bound`` if the iteration does not converge.
        The cheap bound overshoots by about 4x for jump-only models, which
        costs the same factor in step count.
        """
        side = self.hamiltonian.dim

        def matvec(v):
            return lindblad_rhs(self, v.reshape(side, side)).ravel()

        op = scipy.sparse.linalg.LinearOperator((side * side, side * side), matvec=matvec, dtype=complex)
        try:
            ev = scipy.sparse.linalg.eigs(op, k=3, which="LM", return_eigenvectors=False, tol=1e-3,
                                          v0=np.ones(side * side, dtype=complex))
        except (scipy.sparse.linalg.ArpackNoConvergence, scipy.sparse.linalg.ArpackError):
            return self.generator_bound()
        return float(np.abs(ev).max())

    def max_rate(self) -> float:
        return max([rate for _, rate in self.jumps] + [0.0])

    def _compiled(self):
        dim = self.hamiltonian.dim
        k = self.hamiltonian.matrix.astype(complex)
        for op, rate in self.jumps:
            k = k - 0.5j * rate * (op.matrix.conj().T @ op.matrix)
        kc = scipy.sparse.csr_matrix(-1j * k)
        kc.sort_indices()
        ptrs, idxs, vals, offs = [], [], [], [0]
        for op, rate in self.jumps:
            lc = scipy.sparse.csr_matrix(math.sqrt(rate) * op.matrix)
            lc.sort_indices()
            ptrs.append(lc.indptr.astype(np.int64))
            idxs.append(lc.indices.astype(np.int64))
            vals.append(lc.data.astype(complex))
            offs.append(offs[-1] + lc.nnz)
        if ptrs:
            j_ptr = np.stack(ptrs)
            j_idx = np.concatenate(idxs)
            j_val = np.concatenate(vals)
        else:
            j_ptr = np.zeros((0, dim + 1), dtype=np.int64)
            j_idx = np.zeros(0, dtype=np.int64)
            j_val = np.zeros(0, dtype=complex)
        return (
            kc.indptr.astype(np.int64),
            kc.indices.astype(np.int64),
            kc.data.astype(complex),
            j_ptr,
            j_idx,
            j_val,
            np.array(offs, dtype=np.int64),
        )


def _dark_operator_matrix(couplings: CouplingSet, d_mech: int) -> QuantumOperator:
    return build_dark_operator(couplings, d_mech)


def build_two_mode_model(couplings: CouplingSet, d_cav: int = 6, d_mech: int = 60) -> LindbladModel:
    """H = -d†A - d A† on cavity ⊗ mechanics, cavity decay at rate kappa."""
    a = _dark_operator_matrix(couplings, d_mech)
    d = fs.annihilation_op(d_cav)
    coupling = fs.tensor(d.dag(), a)
    h = -(coupling + coupling.dag())
    h = h.hermitize()
    jump = fs.embed(d, 0, (d_cav, d_mech))
    return LindbladModel(h, ((jump, couplings.kappa),), label="two-mode")


def build_effective_single_mode(couplings: CouplingSet, d_mech: int = 60) -> LindbladModel:
    """Cavity eliminated: H = 0, single jump (2/sqrt(kappa)) A at unit rate."""
    if couplings.max_coupling > couplings.kappa / 5:
        warnings.warn(
            f"couplings up to {couplings.max_coupling:g} are not small against kappa={couplings.kappa:g}; "
            "adiabatic elimination is unreliable",
            stacklevel=2,
        )
    a = _dark_operator_matrix(couplings, d_mech)
    zero = QuantumOperator(np.zeros((d_mech, d_mech)), (d_mech,), hermitian=True)
    return LindbladModel(zero, ((2 / math.sqrt(couplings.kappa) * a, 1.0),), label="effective")


def lindblad_rhs(model: LindbladModel, rho: DensityMatrix | np.ndarray) -> np.ndarray:
    """-i[H, rho] + sum rate (L rho L† - {L†L, rho}/2), dense reference implementation."""
    r = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    dims = rho.dims if isinstance(rho, DensityMatrix) else None
    if (dims is not None and dims != model.dims) or r.shape != model.hamiltonian.matrix.shape:
        raise ConfigurationError("state and model dimensions differ")
    h = model.hamiltonian.matrix
    out = -1j * (h @ r - r @ h)
    for op, rate in model.jumps:
        lm = op.matrix
        ldl = lm.conj().T @ lm
        out += rate * (lm @ r @ lm.conj().T - 0.5 * (ldl @ r + r @ ldl))
    return out


@dataclass
class EvolutionReport:
    final_state: DensityMatrix
    times: list[float]
    trace_drift: float
    convergence_metric: float
    diverged: bool
    step: float
    discretization_error: float
    occupations: list[float] = field(default_factory=list)
    distances: list[float] = field(default_factory=list)
    hermiticity_drift: float = 0.0
    divergence_reason: str = ""
    divergence_rule: str = (
        f"mean occupation > {DIVERGENCE_FACTOR:g} x max(initial, floor) "
        f"or tail mass > {CEILING_TAIL_MASS:g}"
    )

    def as_dict(self) -> dict:
        return {
            "times": self.times,
            "trace_drift": self.trace_drift,
            "convergence_metric": self.convergence_metric,
            "diverged": self.diverged,
            "divergence_reason": self.divergence_reason,
            "divergence_rule": self.divergence_rule,
            "step": self.step,
            "discretization_error": self.discretization_error,
            "hermiticity_drift": self.hermiticity_drift,
            "occupations": self.occupations,
            "checkpoint_distances": self.distances,
            "final_tail_mass": self.final_state.tail_mass,
        }


def choose_step(model: LindbladModel, interval: float) -> tuple[float, int]:
    """Largest step dividing ``interval`` that respects the RK4 stability and rate bounds.

    The ARPACK radius (padded by 10%) replaces the cheap bound only when the
    bound is what limits the step.
    """
    rate_limit = MAX_STEP_RATE / model.max_rate() if model.max_rate() > 0 else math.inf
    limit = STEP_SAFETY / max(model.generator_bound(), 1e-12)
    if limit < rate_limit:
        limit = STEP_SAFETY / max(1.1 * model.spectral_radius(), 1e-12)
    limit = min(limit, rate_limit)
    nsteps = max(1, math.ceil(interval / limit))
    return interval / nsteps, nsteps


class _Integrator:
    def __init__(self, model: LindbladModel):
        self.model = model
        self.args = model._compiled()

    def advance(self, rho: np.ndarray, h: float, nsteps: int) -> np.ndarray:
        out = np.array(rho, dtype=complex, order="C")
        rk4_steps(*self.args, out, h, nsteps)
        return out


def _guard(r: np.ndarray) -> tuple[np.ndarray, float, float]:
    herm = float(np.abs(r - r.conj().T).max())
    tr = np.trace(r).real
    r = 0.5 * (r + r.conj().T)
    return r / tr, abs(tr - 1.0), herm


def evolve(
    model: LindbladModel,
    rho0: DensityMatrix,
    t_final: float,
    checkpoints: int = 10,
    occupation_floor: float = 1.0,
    verify_step: bool = True,
    baseline_occupation: float | None = None,
) -> EvolutionReport:
    """Fixed-step RK4 from ``rho0`` to ``t_final`` with guarded checkpoints.

    The step is checked once per run by repeating the first interval at half
    the step; it is halved until the two agree to 1e-6 in trace distance.
    Divergence (runaway occupation, or population at the truncation ceiling)
    ends the run early with ``diverged=True``.
    """
    if rho0.dims != model.dims:
        raise ConfigurationError(f"initial state dims {rho0.dims} differ from model {model.dims}")
    if checkpoints < 1 or not t_final > 0:
        raise ConfigurationError("need t_final > 0 and at least one checkpoint")
    integ = _Integrator(model)
    interval = t_final / checkpoints
    h, nsteps = choose_step(model, interval)
    r = np.array(rho0.matrix, dtype=complex)

    disc = 0.0
    first = None
    if verify_step:
        for _ in range(6):
            coarse = integ.advance(r, h, nsteps)
            fine = integ.advance(r, h / 2, 2 * nsteps)
            disc = trace_distance(coarse, fine)
            if np.all(np.isfinite(coarse)) and disc < DISCRETIZATION_TOLERANCE:
                first = coarse
                break
            h, nsteps = h / 2, nsteps * 2
        else:
            log.warning("step halving did not reach %.1e (last %.2e)", DISCRETIZATION_TOLERANCE, disc)
            first = fine
            h, nsteps = h / 2, nsteps * 2

    n0 = mean_occupation(rho0)
    baseline = max(n0, occupation_floor) if baseline_occupation is None else baseline_occupation
    times, occs, dists = [0.0], [n0], []
    drift = herm_drift = 0.0
    diverged = False
    reason = ""
    prev = r
    for c in range(1, checkpoints + 1):
        r = first if (c == 1 and first is not None) else integ.advance(prev, h, nsteps)
        if not np.all(np.isfinite(r)):
            diverged, reason = True, "non-finite state"
            r = prev
            break
        r, tdrift, hdrift = _guard(r)
        drift = max(drift, tdrift)
        herm_drift = max(herm_drift, hdrift)
        state = DensityMatrix(r, model.dims, validate=False)
        occ = mean_occupation(state)
        times.append(c * interval)
        occs.append(occ)
        dists.append(trace_distance(r, prev))
        prev = r
        if occ > DIVERGENCE_FACTOR * baseline:
            diverged, reason = True, f"occupation {occ:.3g} exceeds {DIVERGENCE_FACTOR:g} x {baseline:.3g}"
            break
        if state.tail_mass > CEILING_TAIL_MASS:
            diverged, reason = True, f"tail mass {state.tail_mass:.3g} at truncation ceiling"
            break
    final = DensityMatrix(prev, model.dims, validate=False)
    return EvolutionReport(
        final_state=final,
        times=times,
        trace_drift=drift,
        convergence_metric=dists[-1] if dists else math.inf,
        diverged=diverged,
        step=h,
        discretization_error=disc,
        occupations=occs,
        distances=dists,
        hermiticity_drift=herm_drift,
        divergence_reason=reason,
    )


@dataclass
class SteadyStateResult:
    state: DensityMatrix
    converged: bool
    convergence_metric: float
    elapsed: float
    diverged: bool
    reports: list[EvolutionReport]

    def as_dict(self) -> dict:
        return {
            "converged": self.converged,
            "convergence_metric": self.convergence_metric,
            "elapsed_time": self.elapsed,
            "diverged": self.diverged,
            "trace_drift": max(r.trace_drift for r in self.reports),
            "step": self.reports[0].step,
            "discretization_error": self.reports[0].discretization_error,
            "divergence_reason": next((r.divergence_reason for r in self.reports if r.diverged), ""),
        }


def steady_state(
    model: LindbladModel,
    rho0: DensityMatrix,
    interval: float,
    t_max: float,
    tol: float = 1e-8,
    occupation_floor: float = 1.0,
) -> SteadyStateResult:
    """Evolve in windows of ``interval`` until successive states differ by < ``tol``.

    Returns the last state either way; ``converged=False`` marks an exhausted
    budget, ``diverged=True`` a runaway run.
    """
    reports = []
    state = rho0
    elapsed = 0.0
    metric = math.inf
    window = max(1, min(10, int(round(t_max / interval))))
    baseline = max(occupation_floor, mean_occupation(rho0))
    first = True
    while elapsed < t_max - 1e-12:
        span = min(window * interval, t_max - elapsed)
        n_chk = max(1, int(round(span / interval)))
        rep = evolve(model, state, span, n_chk, verify_step=first, baseline_occupation=baseline)
        first = False
        reports.append(rep)
        elapsed += rep.times[-1]
        state = rep.final_state
        metric = rep.convergence_metric
        if rep.diverged:
            return SteadyStateResult(state, False, metric, elapsed, True, reports)
        if metric < tol:
            return SteadyStateResult(state, True, metric, elapsed, False, reports)
    return SteadyStateResult(state, False, metric, elapsed, False, reports)


AGREEMENT_TOLERANCE = 1e-6


@dataclass
class StabilityProbe:
    """Steady-state runs from several starts and whether they share one attractor."""

    runs: dict[str, SteadyStateResult]
    max_distance: float
    agreement_tol: float

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.runs.values()) and self.max_distance < self.agreement_tol

    def as_dict(self) -> dict:
        return {
            "converged": self.converged,
            "max_inter_run_trace_distance": self.max_distance,
            "agreement_tol": self.agreement_tol,
            "runs": {k: r.as_dict() for k, r in self.runs.items()},
        }


def stability_probe(
    model: LindbladModel,
    starts: dict[str, DensityMatrix],
    interval: float,
    t_max: float,
    tol: float = 1e-8,
    agreement_tol: float = AGREEMENT_TOLERANCE,
    occupation_floor: float = 1.0,
) -> StabilityProbe:
    """Run :func:`steady_state` from every start and compare the end states.

    A single run can settle into a state that only depends on where it began
    (a non-unique stationary manifold). The probe reports convergence only when
    every run converges and all end states agree within ``agreement_tol`` in
    trace distance.
    """
    if len(starts) < 2:
        raise ConfigurationError("stability_probe needs at least two starts")
    runs = {
        name: steady_state(model, rho0, interval, t_max, tol, occupation_floor)
        for name, rho0 in starts.items()
    }
    states = [r.state for r in runs.values()]
    dist = max(
        trace_distance(a, b) for i, a in enumerate(states) for b in states[i + 1:]
    )
    return StabilityProbe(runs, float(dist), agreement_tol)
