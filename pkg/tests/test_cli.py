import csv
import io
import json
import math
import subprocess
import sys

import pytest

from fockforge import cli
from fockforge.config import build_config, read_config_file
from fockforge.errors import ConfigurationError


def run_json(capsys, *argv):
    code = cli.run(list(argv))
    out = capsys.readouterr().out
    assert code == 0, out
    return json.loads(out)


def test_couplings_report(capsys):
    rep = run_json(capsys, "couplings", "--n", "0", "--zeta", "0.5", "--g-minus", "1")
    assert rep["G_plus"] == pytest.approx(0.5)
    assert rep["G_0"] == pytest.approx(0.5)
    assert rep["zeta"] == pytest.approx(0.5)
    assert rep["stable"] is True
    assert rep["config"]["couplings"]["G_0"] == pytest.approx(0.5)


def test_couplings_vacuum_target(capsys):
    rep = run_json(capsys, "couplings", "--n", "2", "--zeta", "0")
    assert rep["G_plus"] == 0 and rep["G_0"] == 0
    assert rep["note"] == "vacuum target"


def test_unstable_request_exits_nonzero(capsys):
    assert cli.run(["couplings", "--n", "1", "--zeta", "1"]) == 3
    assert "G+ < G-" in capsys.readouterr().err


def test_inconsistent_couplings(capsys):
    assert cli.run(["couplings", "--n", "1", "--zeta", "0.5", "--g-plus", "0.7"]) == 2
    assert "inconsistent" in capsys.readouterr().err


def test_verify_n1(capsys):
    rep = run_json(capsys, "verify", "--n", "1", "--zeta", "0.7")
    assert rep["dark_residual"] < 1e-7
    assert rep["kernel_residual"] < 1e-7
    assert rep["fidelity_kernel_vs_analytic"] > 1 - 1e-7
    assert rep["kernel_unique"]
    assert rep["phi_tail_mass"] < 1e-12
    assert 0 <= rep["annihilator_f"]["fidelity_literal_vs_dark_kernel"] <= 1
    assert rep["annihilator_f"]["fidelity_rescaled_vs_dark_kernel"] > 1 - 1e-9
    assert rep["config"]["dim"] == rep["dim"]


def test_verify_n0_coherent(capsys):
    rep = run_json(capsys, "verify", "--n", "0", "--zeta", "0.3")
    assert rep["fidelity_kernel_vs_analytic"] == pytest.approx(1.0, abs=1e-9)


def test_verify_escalates_dim(capsys):
    rep = run_json(capsys, "verify", "--n", "5", "--zeta", "0.99")
    assert rep["dim"] > 40
    assert rep["phi_tail_mass"] < 1e-12
    assert not rep["partial"]


def test_verify_partial_when_capped(capsys, monkeypatch):
    monkeypatch.setattr(cli, "DIM_CAP", 20)
    rep = run_json(capsys, "verify", "--n", "5", "--zeta", "0.99")
    assert rep["partial"] and rep["escalation_capped"]


def test_verify_eigenrelation(capsys):
    rep = run_json(capsys, "verify", "--n", "2", "--zeta", "1", "--allow-unstable", "--dim", "100")
    assert rep["eigenrelation"]["residual"] < 1e-6


def test_state_command(capsys):
    rep = run_json(capsys, "state", "--n", "1", "--zeta", "0.5")
    assert rep["c_n"] == pytest.approx(0.306186, abs=1e-6)
    assert rep["norm_2f1"] == pytest.approx(math.sqrt(3 / 35), abs=1e-12)
    assert len(rep["superposition"]) == 2


def test_wigner_export(tmp_path):
    out = tmp_path / "w.csv"
    assert cli.run(["wigner", "--n", "1", "--zeta", "0.5", "--out", str(out)]) == 0
    text = out.read_bytes()
    assert text.startswith(b"q,p,w\n") and b"\r" not in text
    rows = list(csv.reader(io.StringIO(text.decode())))
    meta = json.loads(out.with_suffix(".json").read_text())
    assert len(rows) - 1 == meta["rows"]
    assert meta["negativity_volume"] > 0
    assert abs(meta["normalization"] - 1) < 1e-3
    # q outer, p inner
    assert rows[1][0] == rows[2][0] and rows[1][1] != rows[2][1]
    assert all(len(r[2].replace("-", "").replace(".", "").split("e")[0]) <= 9 for r in rows[1:50])


def test_wigner_byte_identical(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert cli.run(["wigner", "--n", "2", "--zeta", "0.7", "--out", str(p), "--step", "0.1"]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_wigner_vacuum_peak(tmp_path):
    out = tmp_path / "v.csv"
    assert cli.run(["wigner", "--n", "0", "--zeta", "0", "--out", str(out)]) == 0
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["w_max"] == pytest.approx(1 / math.pi, abs=1e-6)
    assert meta["w_max_at"] == [0, 0]


def test_wigner_narrow_grid_error(tmp_path, capsys):
    code = cli.run(["wigner", "--n", "3", "--zeta", "0.9", "--out", str(tmp_path / "x.csv"),
                    "--q-min", "-1", "--q-max", "1", "--p-min", "-1", "--p-max", "1"])
    assert code == 2
    assert "boundary mass" in capsys.readouterr().err


def test_sweep_table(capsys):
    assert cli.run(["sweep", "--sweep-zeta", "0.5,0.7,0.9,0.99", "--sweep-n", "1,3,5", "--workers", "3"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 12
    assert [(float(r["zeta"]), int(r["n"])) for r in rows] == [
        (z, n) for z in (0.5, 0.7, 0.9, 0.99) for n in (1, 3, 5)
    ]
    for n in (1, 3, 5):
        col = [float(r["fidelity_corrected"]) for r in rows if int(r["n"]) == n]
        assert col == sorted(col)
    assert all(r["error"] == "" for r in rows)


def test_sweep_empty_axis(capsys):
    assert cli.run(["sweep", "--sweep-zeta", "", "--sweep-n", "1"]) == 2


def test_sweep_records_point_errors(capsys):
    assert cli.run(["sweep", "--sweep-zeta", "0.5", "--sweep-n", "1", "--dim", "1"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert "ConfigurationError" in rows[0]["error"]


def test_sweep_single_point_matches_verify(capsys):
    assert cli.run(["sweep", "--sweep-zeta", "0.7", "--sweep-n", "3"]) == 0
    row = next(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    rep = run_json(capsys, "verify", "--n", "3", "--zeta", "0.7")
    for key in ("fidelity_corrected", "fidelity_raw", "mean_q", "var_q", "mean_n"):
        assert float(row[key]) == pytest.approx(rep["state_report"][key], rel=1e-11, abs=1e-12)
    assert int(row["dim"]) == rep["dim"]


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[target]\nn = 1\nzeta = 0.5\n\n[couplings]\ng_minus = 2.0\nkappa = 20\n")
    rep = run_json(capsys, "couplings", "--config", str(cfg), "--zeta", "0.25")
    assert rep["G_minus"] == 2.0
    assert rep["G_plus"] == pytest.approx(0.5)
    assert rep["kappa"] == 20


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        read_config_file(tmp_path / "missing.ini")
    bad = tmp_path / "bad.ini"
    bad.write_text("no section here\n")
    with pytest.raises(ConfigurationError):
        read_config_file(bad)


def test_grid_bounds_all_or_none():
    with pytest.raises(ConfigurationError):
        build_config("wigner", {"target.n": "1", "target.zeta": "0.5", "grid.q_min": "-3"})


def test_json_is_stable(capsys):
    a = cli.run(["verify", "--n", "2", "--zeta", "0.5"])
    first = capsys.readouterr().out
    b = cli.run(["verify", "--n", "2", "--zeta", "0.5"])
    assert a == b == 0 and capsys.readouterr().out == first


def test_evolve_effective(capsys):
    rep = run_json(capsys, "evolve", "--n", "1", "--zeta", "0.5", "--dim", "40")
    run = rep["runs"]["ground"]
    assert run["converged"] and not run["diverged"]
    assert run["mechanics"]["fidelity_vs_target"] > 0.999
    assert rep["config"]["t_max"] == pytest.approx(400.0)


def test_evolve_thermal_start(capsys):
    rep = run_json(capsys, "evolve", "--n", "1", "--zeta", "0.5", "--dim", "40", "--thermal-start", "2")
    assert rep["runs"]["thermal"]["converged"]
    assert rep["inter_run_fidelity"] > 1 - 1e-6


def test_evolve_unstable_flagged(capsys):
    rep = run_json(capsys, "evolve", "--n", "1", "--zeta", "1", "--allow-unstable", "--dim", "30",
                   "--thermal-start", "2", "--t-max", "200")
    assert not rep["stabilized"]


def test_evolve_unstable_needs_flag(capsys):
    assert cli.run(["evolve", "--n", "1", "--zeta", "1"]) == 3


def test_console_script_entry():
    proc = subprocess.run(
        [sys.executable, "-m", "fockforge.cli", "couplings", "--n", "1", "--zeta", "0.5"],
        capture_output=True, text=True, check=True,
    )
    assert json.loads(proc.stdout)["stable"] is True
