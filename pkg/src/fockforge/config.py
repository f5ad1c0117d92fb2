"""Run configuration: INI-style file plus command-line overrides.

A config file holds flat keys under dotted sections, e.g.::

    [target]
    n = 5
    zeta = 0.9

    [couplings]
    g_minus = 1.0
    kappa = 10

    [sweep]
    zeta = 0.5, 0.7, 0.9
    n = 1, 3, 5

Keys are addressed as ``section.key``; command-line flags win over the file.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .analytic import CouplingSet, TargetSpec, resonant_coupling
from .errors import ConfigurationError, StabilityError
from .phasespace import RealGrid1D

COMMANDS = ("couplings", "state", "verify", "evolve", "wigner", "sweep")


def read_config_file(path: str | Path) -> dict[str, str]:
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config file {path}: {exc}") from exc
    flat = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            flat[f"{section}.{key}"] = value.strip()
    return flat


def _float_list(text: str) -> list[float]:
    items = [t for t in (s.strip() for s in text.split(",")) if t]
    return [float(t) for t in items]


@dataclass
class RunConfig:
    command: str
    target: TargetSpec | None = None
    couplings: CouplingSet | None = None
    dim: int | None = None
    d_cav: int = 6
    q_grid: RealGrid1D | None = None
    p_grid: RealGrid1D | None = None
    grid_step: float = 0.05
    n: int | None = None
    output_path: str | None = None
    allow_unstable: bool = False
    thermal_start: float | None = None
    model: str = "effective"
    t_max: float | None = None
    sweep_zeta: list[float] = field(default_factory=list)
    sweep_n: list[int] = field(default_factory=list)
    workers: int = 1

    def echo(self) -> dict:
        """Fully resolved configuration, embedded in every output."""
        out = {"command": self.command, "dim": self.dim, "d_cav": self.d_cav, "model": self.model,
               "allow_unstable": self.allow_unstable, "thermal_start": self.thermal_start,
               "t_max": self.t_max}
        if self.target is not None:
            out["target"] = {"n": self.target.n, "zeta": self.target.zeta}
        if self.couplings is not None:
            out["couplings"] = self.couplings.as_dict()
        for name in ("q_grid", "p_grid"):
            g = getattr(self, name)
            if g is not None:
                out[name] = {"min": g.min, "max": g.max, "step": g.step}
        if self.command == "sweep":
            out["sweep"] = {"zeta": self.sweep_zeta, "n": self.sweep_n}
        return out


def build_config(command: str, values: dict[str, str | None]) -> RunConfig:
    """Resolve flat ``section.key`` values into a checked RunConfig."""
    if command not in COMMANDS:
        raise ConfigurationError(f"unknown command {command!r}")

    def get(key, cast=str, default=None):
        v = values.get(key)
        if v is None or v == "":
            return default
        try:
            return cast(v)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad value for {key}: {v!r}") from exc

    cfg = RunConfig(command=command)
    cfg.dim = get("dims.mech", int)
    cfg.d_cav = get("dims.cav", int, 6)
    cfg.output_path = get("output.path")
    cfg.allow_unstable = str(get("run.allow_unstable", str, "false")).lower() in ("1", "true", "yes")
    cfg.thermal_start = get("run.thermal_start", float)
    cfg.model = get("run.model", str, "effective")
    if cfg.model not in ("effective", "two-mode"):
        raise ConfigurationError(f"run.model must be 'effective' or 'two-mode', got {cfg.model!r}")
    cfg.t_max = get("run.t_max", float)
    cfg.workers = get("run.workers", int, 1)

    if command == "sweep":
        cfg.sweep_zeta = _float_list(get("sweep.zeta", str, ""))
        cfg.sweep_n = [int(x) for x in _float_list(get("sweep.n", str, ""))]
        if not cfg.sweep_zeta or not cfg.sweep_n:
            raise ConfigurationError("sweep needs non-empty sweep.zeta and sweep.n axes")
        for z in cfg.sweep_zeta:
            TargetSpec(0, z)
        for n in cfg.sweep_n:
            TargetSpec(n, 0.5)

    n = get("target.n", int)
    zeta = get("target.zeta", float)
    gm = get("couplings.g_minus", float, 1.0)
    gp = get("couplings.g_plus", float)
    g0 = get("couplings.g_zero", float)
    kappa = get("couplings.kappa", float, 10.0)

    if command != "sweep":
        if n is None:
            raise ConfigurationError("target.n (--n) is required")
        if zeta is None and gp is None:
            raise ConfigurationError("target.zeta (--zeta) is required")
        if (zeta is not None and zeta >= 1) or (zeta is None and gp is not None and gp >= gm):
            if not cfg.allow_unstable:
                raise StabilityError("unstable request: stabilization requires G+ < G- (zeta < 1)")
        if zeta is not None and 0 <= zeta < 1:
            cfg.target = TargetSpec(n, zeta)
        elif zeta is not None and zeta < 0:
            raise ConfigurationError("zeta must be non-negative")
        if gp is None:
            gp = (zeta if zeta is not None else 0.0) * gm
        if g0 is None:
            g0 = resonant_coupling(gp, gm, n)
        cfg.couplings = CouplingSet(gm, gp, g0, kappa)
        if cfg.target is not None and gm > 0:
            if not math.isclose(gp / gm, cfg.target.zeta, rel_tol=0, abs_tol=1e-12):
                raise ConfigurationError(
                    f"couplings give G+/G- = {gp / gm!r}, inconsistent with zeta = {cfg.target.zeta!r}"
                )
        cfg.n = n
    else:
        cfg.couplings = CouplingSet(gm, 0.0, 0.0, kappa)

    if command == "wigner":
        keys = ("grid.q_min", "grid.q_max", "grid.p_min", "grid.p_max")
        given = [get(k, float) for k in keys]
        step = get("grid.step", float, 0.05)
        if all(v is not None for v in given):
            cfg.q_grid = RealGrid1D(given[0], given[1], step)
            cfg.p_grid = RealGrid1D(given[2], given[3], step)
        elif any(v is not None for v in given):
            raise ConfigurationError("give all of q_min, q_max, p_min, p_max or none")
        cfg.grid_step = step
    return cfg
