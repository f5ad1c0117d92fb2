"""Command-line entry point: ``fockforge <command> [options]``."""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analytic as an
from . import dynamics as dy
from . import fockspace as fs
from . import metrics as me
from . import phasespace as ps
from .config import COMMANDS, RunConfig, build_config, read_config_file
from .errors import ConfigurationError, GridError, StabilityError, TruncationWarning

log = logging.getLogger("fockforge")

DIM_CAP = 400
TAIL_TOL = 1e-12
EVOLVE_INTERVAL = 5.0

# flag name -> config key
FLAG_KEYS = {
    "n": "target.n",
    "zeta": "target.zeta",
    "g_minus": "couplings.g_minus",
    "g_plus": "couplings.g_plus",
    "g_zero": "couplings.g_zero",
    "kappa": "couplings.kappa",
    "dim": "dims.mech",
    "d_cav": "dims.cav",
    "out": "output.path",
    "thermal_start": "run.thermal_start",
    "model": "run.model",
    "t_max": "run.t_max",
    "workers": "run.workers",
    "q_min": "grid.q_min",
    "q_max": "grid.q_max",
    "p_min": "grid.p_min",
    "p_max": "grid.p_max",
    "step": "grid.step",
    "sweep_zeta": "sweep.zeta",
    "sweep_n": "sweep.n",
}


def _clean(obj):
    """JSON-safe copy: NaN/inf become null, numpy scalars become Python numbers."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def resolve_dim(cfg: RunConfig, target: an.TargetSpec) -> tuple[int, bool]:
    """Mechanical truncation: explicit, or escalated until the tail mass is below 1e-12."""
    if cfg.dim is not None:
        return cfg.dim, False
    dim = an.auto_dim(target, tol=TAIL_TOL, cap=DIM_CAP)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        capped = an.build_phi_n(target, dim).tail_mass >= TAIL_TOL
    return dim, capped


def cmd_couplings(cfg: RunConfig) -> dict:
    c = cfg.couplings
    out = {
        "G_minus": c.g_minus,
        "G_plus": c.g_plus,
        "G_0": c.g_zero,
        "kappa": c.kappa,
        "zeta": c.g_plus / c.g_minus if c.g_minus > 0 else None,
        "stable": c.stable,
        "config": cfg.echo(),
    }
    if c.g_plus == 0:
        out["note"] = "vacuum target"
    return out


def _quiet_phi(target, dim):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        return an.build_phi_n(target, dim)


def point_report(target: an.TargetSpec, couplings: an.CouplingSet, dim: int) -> dict:
    """Analytic-vs-kernel checks for one (n, zeta); shared by verify and sweep."""
    params = an.phi_params(target)
    phi = _quiet_phi(target, dim)
    dark = an.build_dark_operator(couplings, dim)
    kern = an.kernel_state(dark)
    alpha = params.xi_n / math.sqrt(2)
    rep = me.state_report(phi, kern.state, target.n, alpha)
    return {
        "n": target.n,
        "zeta": target.zeta,
        "dim": dim,
        "xi_n": params.xi_n,
        "c_n": params.c_n,
        "norm_2f1": params.norm,
        "dark_residual": float(np.linalg.norm(dark @ phi)),
        "kernel_residual": kern.residual,
        "kernel_separation": kern.separation,
        "kernel_unique": kern.well_separated,
        "fidelity_kernel_vs_analytic": rep.fidelity_vs_target,
        "phi_tail_mass": phi.tail_mass,
        "kernel_tail_mass": kern.state.tail_mass,
        "state_report": rep.as_dict(),
    }


def cmd_state(cfg: RunConfig) -> dict:
    target = cfg.target
    dim, capped = resolve_dim(cfg, target)
    phi = _quiet_phi(target, dim)
    params = an.phi_params(target)
    rep = me.state_report(phi, None, target.n, params.xi_n / math.sqrt(2))
    return {
        "config": cfg.echo() | {"dim": dim},
        "xi_n": params.xi_n,
        "c_n": params.c_n,
        "norm_2f1": params.norm,
        "superposition": an.superposition(target).tolist(),
        "literal_superposition": an.literal_superposition(target).tolist(),
        "fock_amplitudes_real": phi.amplitudes.real.tolist(),
        "state_report": rep.as_dict(),
        "escalation_capped": capped,
    }


def cmd_verify(cfg: RunConfig) -> dict:
    report: dict = {}
    if cfg.target is not None:
        target = cfg.target
        dim, capped = resolve_dim(cfg, target)
        report.update(point_report(target, cfg.couplings, dim))
        report["escalation_capped"] = capped
        report["partial"] = capped

        kern = an.kernel_state(an.build_dark_operator(cfg.couplings, dim)).state
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            shift = fs.displacement_op(an.phi_params(target).xi_n / math.sqrt(2), dim).matrix
        literal = fs.StateVector.from_vector(shift[:, : target.n + 1] @ an.literal_superposition(target), (dim,))
        report["literal_closed_form_fidelity_vs_kernel"] = me.fidelity(literal, kern)
        if cfg.couplings.stable and target.zeta > 0:
            f_lit = an.kernel_state(an.build_annihilator_f(cfg.couplings, target, dim, "literal")).state
            f_res = an.kernel_state(an.build_annihilator_f(cfg.couplings, target, dim, "rescaled")).state
            big_g = math.sqrt(cfg.couplings.g_minus**2 - cfg.couplings.g_plus**2)
            report["annihilator_f"] = {
                "calG": big_g,
                "fidelity_literal_vs_dark_kernel": me.fidelity(f_lit, kern),
                "fidelity_rescaled_vs_dark_kernel": me.fidelity(f_res, kern),
                "note": "literal form has nonlinear weight G0/calG relative to the dark operator; "
                "kernels coincide only when calG = 1",
            }
    if cfg.allow_unstable:
        report["eigenrelation"] = eigenrelation_report(cfg.n, cfg.couplings.g_minus, cfg.dim or 120)
    report["config"] = cfg.echo() | {"dim": report.get("dim", cfg.dim)}
    return report


def eigenrelation_report(n: int, g: float, dim: int) -> dict:
    """At G+ = G- = g with the resonant G0: residual of b†b D(sqrt(n+1/2))|phi> = n D(...)|phi>."""
    couplings = an.CouplingSet(g, g, an.resonant_coupling(g, g, n))
    kern = an.kernel_state(an.build_dark_operator(couplings, dim))
    shift = fs.displacement_op(math.sqrt(n + 0.5), dim).matrix @ kern.state.amplitudes
    resid = fs.number_op(dim).matrix @ shift - n * shift
    return {
        "n": n,
        "dim": dim,
        "residual": float(np.linalg.norm(resid)),
        "kernel_residual": kern.residual,
        "kernel_separation": kern.separation,
    }


def default_grids(psi: fs.StateVector, step: float) -> tuple[ps.RealGrid1D, ps.RealGrid1D]:
    """Square window around <q>, widened until the boundary mass is negligible."""
    mq, vq, _, vp = me.quadrature_moments(psi)
    half = math.ceil(3 * math.sqrt(max(vq, vp)) + 3)
    centre = round(mq)
    while True:
        qg = ps.RealGrid1D(centre - half, centre + half, step)
        if ps.boundary_mass(psi, qg) < ps.BOUNDARY_MASS_LIMIT or half > 40:
            return qg, ps.RealGrid1D(-half, half, step)
        half += 1


def wigner_csv(w: ps.WignerGrid) -> str:
    buf = io.StringIO(newline="")
    buf.write("q,p,w\n")
    qs = [f"{v:.9g}" for v in w.q]
    pstr = [f"{v:.9g}" for v in w.p]
    for i, qv in enumerate(qs):
        row = w.values[i]
        buf.write("".join(f"{qv},{pv},{x:.9g}\n" for pv, x in zip(pstr, row)))
    return buf.getvalue()


def cmd_wigner(cfg: RunConfig) -> tuple[dict, str]:
    target = cfg.target
    dim, _ = resolve_dim(cfg, target)
    phi = _quiet_phi(target, dim)
    if cfg.q_grid is None:
        cfg.q_grid, cfg.p_grid = default_grids(phi, cfg.grid_step)
    w = ps.wigner(phi, cfg.q_grid, cfg.p_grid)
    meta = dict(w.metadata)
    meta["config"] = cfg.echo() | {"dim": dim}
    meta["rows"] = int(w.values.size)
    return meta, wigner_csv(w)


def _initial_state(model: dy.LindbladModel, cfg: RunConfig, nbar: float | None) -> fs.DensityMatrix:
    d_mech = model.dims[-1]
    mech = fs.thermal_state(nbar or 0.0, d_mech)
    if len(model.dims) == 1:
        return mech
    return fs.tensor_states(fs.basis(model.dims[0], 0).to_density(), mech)


def cmd_evolve(cfg: RunConfig) -> tuple[dict, dict[str, fs.DensityMatrix]]:
    couplings = cfg.couplings
    target = cfg.target
    if target is not None:
        dim, _ = resolve_dim(cfg, target)
        dim = max(dim, 40)
        phi = _quiet_phi(target, dim)
        floor = max(1.0, me.mean_occupation(phi))
    else:
        dim = cfg.dim or 60
        phi = None
        floor = max(1.0, 2 * cfg.n + 0.5)  # <n> of D(-sqrt(n+1/2))|n>
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if cfg.model == "two-mode":
            model = dy.build_two_mode_model(couplings, cfg.d_cav, dim)
        else:
            model = dy.build_effective_single_mode(couplings, dim)
    t_max = cfg.t_max or 400.0 / max(couplings.g_minus, 1e-12)
    starts = {"ground": 0.0}
    if cfg.thermal_start is not None:
        starts["thermal"] = cfg.thermal_start
    runs, states = {}, {}
    for name, nbar in starts.items():
        rho0 = _initial_state(model, cfg, nbar)
        res = dy.steady_state(model, rho0, EVOLVE_INTERVAL, t_max, occupation_floor=floor)
        mech = res.state.ptrace(len(model.dims) - 1)
        entry = res.as_dict()
        alpha = an.phi_params(target).xi_n / math.sqrt(2) if target is not None else None
        entry["mechanics"] = me.state_report(mech, phi, cfg.n, alpha).as_dict()
        if len(model.dims) == 2:
            entry["cavity_vacuum_fidelity"] = float(res.state.ptrace(0).matrix[0, 0].real)
        runs[name] = entry
        states[name] = res.state
    report = {"config": cfg.echo() | {"dim": dim, "t_max": t_max}, "runs": runs,
              "model": model.label, "dims": list(model.dims)}
    if "thermal" in states:
        a = states["ground"].ptrace(len(model.dims) - 1)
        b = states["thermal"].ptrace(len(model.dims) - 1)
        report["inter_run_fidelity"] = me.mixed_fidelity(a, b)
        report["inter_run_trace_distance"] = me.trace_distance(states["ground"], states["thermal"])
        # one attractor: both runs settle and land on the same state
        report["stabilized"] = bool(
            all(r["converged"] for r in runs.values())
            and report["inter_run_trace_distance"] < dy.AGREEMENT_TOLERANCE
        )
    return report, states


def _sweep_point(args) -> dict:
    zeta, n, base = args
    row = {"zeta": zeta, "n": n}
    try:
        target = an.TargetSpec(n, zeta)
        cfg = RunConfig("verify", target=target, dim=base.dim)
        couplings = an.CouplingSet.resonant(n, zeta, base.couplings.g_minus, base.couplings.kappa)
        dim, _ = resolve_dim(cfg, target)
        rep = point_report(target, couplings, dim)
        row.update({k: rep[k] for k in ("dim", "dark_residual", "kernel_separation")})
        row.update(rep["state_report"])
        row["error"] = ""
    except Exception as exc:  # recorded in-row; the sweep continues
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


SWEEP_COLUMNS = [
    "zeta", "n", "dim", "fidelity_vs_target", "fidelity_raw", "fidelity_corrected", "purity",
    "mean_q", "var_q", "var_p", "mean_n", "tail_mass", "dark_residual", "kernel_separation", "error",
]


def cmd_sweep(cfg: RunConfig) -> str:
    points = [(z, n, cfg) for z in cfg.sweep_zeta for n in cfg.sweep_n]
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        rows = list(pool.map(_sweep_point, points))
    buf = io.StringIO(newline="")
    buf.write(",".join(SWEEP_COLUMNS) + "\n")
    for row in rows:
        cells = []
        for col in SWEEP_COLUMNS:
            v = row.get(col, "")
            if isinstance(v, float):
                cells.append(f"{v:.12g}")
            elif v is None:
                cells.append("")
            else:
                cells.append(str(v).replace(",", ";"))
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fockforge", description=__doc__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="INI file with [target], [couplings], [dims], [grid], [run], [sweep], [output]")
    ap.add_argument("--n", type=int)
    ap.add_argument("--zeta", type=float)
    ap.add_argument("--g-minus", dest="g_minus", type=float)
    ap.add_argument("--g-plus", dest="g_plus", type=float, help="override G+ (default zeta * G-)")
    ap.add_argument("--g-zero", dest="g_zero", type=float, help="override G0 (default resonant value)")
    ap.add_argument("--kappa", type=float)
    ap.add_argument("--dim", type=int, help="mechanical truncation (default: auto-escalate)")
    ap.add_argument("--d-cav", dest="d_cav", type=int)
    ap.add_argument("--out", help="output path (JSON report, or CSV for wigner/sweep)")
    ap.add_argument("--allow-unstable", action="store_true")
    ap.add_argument("--thermal-start", dest="thermal_start", type=float,
                    help="also evolve from a mechanical thermal state with this occupation")
    ap.add_argument("--model", choices=("effective", "two-mode"))
    ap.add_argument("--t-max", dest="t_max", type=float)
    ap.add_argument("--dump", help="evolve: write final density matrices to this .npz file")
    ap.add_argument("--workers", type=int)
    for name in ("q-min", "q-max", "p-min", "p-max", "step"):
        ap.add_argument(f"--{name}", dest=name.replace("-", "_"), type=float)
    ap.add_argument("--sweep-zeta", dest="sweep_zeta", help="comma-separated zeta axis")
    ap.add_argument("--sweep-n", dest="sweep_n", help="comma-separated n axis")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for flag, key in FLAG_KEYS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = str(v)
    if args.allow_unstable:
        values["run.allow_unstable"] = "true"
    return build_config(args.command, values)


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        if cfg.command in ("state", "wigner") and cfg.target is None:
            raise ConfigurationError(f"{cfg.command} needs a stable target (0 <= zeta < 1)")
        if cfg.command == "couplings":
            _write(cfg.output_path, dumps(cmd_couplings(cfg)))
        elif cfg.command == "state":
            _write(cfg.output_path, dumps(cmd_state(cfg)))
        elif cfg.command == "verify":
            _write(cfg.output_path, dumps(cmd_verify(cfg)))
        elif cfg.command == "wigner":
            meta, csv_text = cmd_wigner(cfg)
            if cfg.output_path is None:
                raise ConfigurationError("wigner needs --out for the CSV file")
            _write(cfg.output_path, csv_text)
            _write(str(Path(cfg.output_path).with_suffix(".json")), dumps(meta))
        elif cfg.command == "evolve":
            report, states = cmd_evolve(cfg)
            if args.dump:
                np.savez(args.dump, **{k: v.matrix for k, v in states.items()})
            _write(cfg.output_path, dumps(report))
        elif cfg.command == "sweep":
            _write(cfg.output_path, cmd_sweep(cfg))
    except StabilityError as exc:
        print(f"fockforge: {exc}", file=sys.stderr)
        return 3
    except (ConfigurationError, GridError, OSError) as exc:
        print(f"fockforge: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
