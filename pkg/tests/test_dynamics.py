import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fockforge import analytic as an
from fockforge import dynamics as dy
from fockforge import fockspace as fs
from fockforge import metrics as me
from fockforge.errors import ConfigurationError


def damped_cavity(kappa=1.0, dim=8):
    zero = fs.QuantumOperator(np.zeros((dim, dim)), (dim,), hermitian=True)
    return dy.LindbladModel(zero, ((fs.annihilation_op(dim), kappa),))


def random_density(rng, dim):
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


def test_two_mode_zero_couplings():
    m = dy.build_two_mode_model(an.CouplingSet(0, 0, 0, 10.0), 3, 4)
    assert np.abs(m.hamiltonian.matrix).max() == 0
    assert len(m.jumps) == 1 and m.jumps[0][1] == 10.0


def test_two_mode_hermitian():
    m = dy.build_two_mode_model(an.CouplingSet.resonant(2, 0.6), 4, 30)
    h = m.hamiltonian.matrix
    assert np.abs(h - h.conj().T).max() < 1e-12 * np.abs(h).max()
    assert m.hamiltonian.dims == (4, 30)


@pytest.mark.parametrize("n", range(4))
@pytest.mark.parametrize("z", [0.3, 0.6, 0.9])
def test_dark_state_stationary(n, z):
    spec = an.TargetSpec(n, z)
    d_mech = an.auto_dim(spec, tol=1e-10)
    m = dy.build_two_mode_model(an.CouplingSet.resonant(n, z), 3, d_mech)
    dark = fs.tensor_states(fs.basis(3, 0), an.build_phi_n(spec, d_mech))
    hnorm = np.abs(m.hamiltonian.matrix).max()
    assert np.linalg.norm(m.hamiltonian @ dark) < 1e-7 * hnorm
    assert np.abs(dy.lindblad_rhs(m, dark.to_density())).max() < 1e-7


def test_rhs_damped_cavity_rate():
    kappa = 2.0
    m = damped_cavity(kappa, 30)
    psi = fs.coherent_state(0.7, 30)
    rho = psi.to_density().matrix
    b = fs.annihilation_op(30).matrix
    mean = np.trace(b @ rho)
    dmean = np.trace(b @ dy.lindblad_rhs(m, rho))
    assert dmean == pytest.approx(-kappa / 2 * mean, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_rhs_trace_and_hermiticity(seed):
    rng = np.random.default_rng(seed)
    m = dy.build_two_mode_model(an.CouplingSet.resonant(1, 0.5), 2, 6)
    rho = random_density(rng, 12)
    out = dy.lindblad_rhs(m, rho)
    assert abs(np.trace(out)) < 1e-12
    assert np.abs(out - out.conj().T).max() < 1e-12


def test_rhs_dim_mismatch():
    with pytest.raises(ConfigurationError):
        dy.lindblad_rhs(damped_cavity(dim=4), np.eye(5) / 5)


def test_compiled_kernel_matches_reference():
    rng = np.random.default_rng(3)
    m = dy.build_two_mode_model(an.CouplingSet.resonant(1, 0.5), 3, 8)
    rho = random_density(rng, 24)
    integ = dy._Integrator(m)
    h = 1e-3
    f = lambda x: dy.lindblad_rhs(m, x)  # noqa: E731
    k1 = f(rho)
    k2 = f(rho + h / 2 * k1)
    k3 = f(rho + h / 2 * k2)
    k4 = f(rho + h * k3)
    ref = rho + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    assert np.abs(integ.advance(rho, h, 1) - ref).max() < 1e-14


def test_cavity_decay():
    kappa = 1.0
    m = damped_cavity(kappa)
    rep = dy.evolve(m, fs.basis(8, 1).to_density(), 5.0, 5)
    assert rep.final_state.matrix[1, 1].real == pytest.approx(math.exp(-5), abs=1e-4)
    assert rep.trace_drift < 1e-6
    assert rep.discretization_error < 1e-6
    assert not rep.diverged


def test_evolve_rejects_bad_input():
    m = damped_cavity()
    with pytest.raises(ConfigurationError):
        dy.evolve(m, fs.basis(6, 0).to_density(), 1.0)
    with pytest.raises(ConfigurationError):
        dy.evolve(m, fs.basis(8, 0).to_density(), 0.0)


def test_step_rule():
    m = dy.build_two_mode_model(an.CouplingSet.resonant(1, 0.5), 6, 30)
    h, nsteps = dy.choose_step(m, 1.0)
    assert h * nsteps == pytest.approx(1.0)
    assert h <= dy.MAX_STEP_RATE / 10.0 + 1e-15
    assert h <= dy.STEP_SAFETY / m.spectral_radius()


def test_spectral_radius_below_bound():
    m = dy.build_effective_single_mode(an.CouplingSet.resonant(1, 0.5), 30)
    assert m.spectral_radius() <= m.generator_bound()


def test_divergence_flag():
    # an amplifier: jump b† pumps the mode up to the truncation
    zero = fs.QuantumOperator(np.zeros((30, 30)), (30,), hermitian=True)
    m = dy.LindbladModel(zero, ((fs.creation_op(30), 1.0),))
    rep = dy.evolve(m, fs.basis(30, 0).to_density(), 20.0, 20)
    assert rep.diverged
    assert rep.divergence_reason


def test_cooling_steady_state():
    m = dy.build_effective_single_mode(an.CouplingSet(1.0, 0, 0, 10.0), 20)
    res = dy.steady_state(m, fs.thermal_state(1.0, 20), 5.0, 400.0)
    assert res.converged and not res.diverged
    assert res.state.purity() > 1 - 1e-6
    assert me.fidelity(res.state, fs.basis(20, 0)) > 1 - 1e-6


def test_effective_model_warns_outside_elimination_regime():
    with pytest.warns(UserWarning, match="adiabatic"):
        dy.build_effective_single_mode(an.CouplingSet(5.0, 0, 0, 10.0), 10)


def test_effective_rate_scaling_exact():
    c = an.CouplingSet.resonant(1, 0.6)
    rng = np.random.default_rng(5)
    rho = random_density(rng, 20)
    base = dy.lindblad_rhs(dy.build_effective_single_mode(c, 20), rho)
    scaled = dy.lindblad_rhs(dy.build_effective_single_mode(c.scaled(1.5), 20), rho)
    assert np.abs(scaled - 1.5**2 * base).max() < 1e-12


def test_effective_rate_scaling_fixed_point():
    c = an.CouplingSet.resonant(0, 0.5)
    states = []
    for s in (1.0, 1.5):
        m = dy.build_effective_single_mode(c.scaled(s), 30)
        states.append(dy.steady_state(m, fs.basis(30, 0).to_density(), 5.0, 2000.0, tol=1e-10).state)
    target = an.build_phi_n(an.TargetSpec(0, 0.5), 30)
    assert me.fidelity(states[0], target) > 1 - 1e-8
    assert me.fidelity(states[1], states[0].dominant_state()[0]) > 1 - 1e-8


@pytest.mark.slow
def test_effective_steady_state_n1():
    spec = an.TargetSpec(1, 0.7)
    m = dy.build_effective_single_mode(an.CouplingSet.resonant(1, 0.7), 80)
    rep = dy.evolve(m, fs.basis(80, 0).to_density(), 250.0, 25)
    assert not rep.diverged
    assert rep.trace_drift < 1e-6
    assert me.fidelity(rep.final_state, an.build_phi_n(spec, 80)) > 0.999
    tail = rep.distances[-5:]
    assert all(b <= a for a, b in zip(tail, tail[1:]))


def test_stability_probe_flags_dephasing_manifold():
    # G+ = G-: the jump operator is Hermitian, so the end state remembers the start
    c = an.CouplingSet(1.0, 1.0, an.resonant_coupling(1.0, 1.0, 1), 10.0)
    m = dy.build_effective_single_mode(c, 30)
    starts = {"ground": fs.basis(30, 0).to_density(), "thermal": fs.thermal_state(2.0, 30)}
    probe = dy.stability_probe(m, starts, 5.0, 1000.0)
    assert all(r.converged for r in probe.runs.values())
    assert probe.max_distance > 0.1
    assert not probe.converged


def test_stability_probe_agrees_when_cooling():
    m = dy.build_effective_single_mode(an.CouplingSet(1.0, 0, 0, 10.0), 20)
    starts = {"ground": fs.basis(20, 0).to_density(), "thermal": fs.thermal_state(1.0, 20)}
    probe = dy.stability_probe(m, starts, 5.0, 400.0)
    assert probe.converged
    assert probe.as_dict()["max_inter_run_trace_distance"] < 1e-6


def test_stability_probe_needs_two_starts():
    with pytest.raises(ConfigurationError):
        dy.stability_probe(damped_cavity(), {"a": fs.basis(8, 0).to_density()}, 1.0, 2.0)
