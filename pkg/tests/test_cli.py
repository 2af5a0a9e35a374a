import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from arrayg2 import io
from arrayg2.cli import EXIT_INFEASIBLE, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SQUARE = {"kind": "square", "params": {"a": 0.1, "theta": 0.25 * math.pi, "detuning": 3.9}}
CHAIN = {"kind": "chain", "params": {"n_atoms": 5, "a": 0.22, "xi": 0.01, "gamma_r": 0.1, "detuning": 0.3}}


def run(tmp_path, command, config, *extra):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(config) if not isinstance(config, str) else config)
    out = tmp_path / "out"
    return main([command, "--config", str(cfg), "--out", str(out), *extra]), out


def test_spectrum_square(tmp_path):
    code, out = run(tmp_path, "spectrum", {"scenario": SQUARE})
    assert code == EXIT_OK
    prov, cols, data = io.read_csv(out / "spectrum.csv")
    assert cols == ["index", "re_E", "im_E", "decay_rate", "abs_C", "arg_C_over_pi"]
    assert data.shape == (4, 6)
    assert prov["tool"] == "arrayg2" and len(prov["config_sha256"]) == 64


def test_spectrum_chain(tmp_path):
    code, out = run(tmp_path, "spectrum", {"scenario": CHAIN})
    assert code == EXIT_OK
    _, cols, data = io.read_csv(out / "spectrum.csv")
    assert data.shape[0] == 5
    assert data[:, 3].min() == pytest.approx(0.45, abs=0.02)


def test_missing_detuning_names_field(tmp_path, capsys):
    bad = {"scenario": {"kind": "square", "params": {"a": 0.1, "theta": 0.5}}}
    code, _ = run(tmp_path, "spectrum", bad)
    assert code == EXIT_VALIDATION
    assert "scenario.params.detuning" in capsys.readouterr().err


@pytest.mark.parametrize(
    "config,needle",
    [
        ({"scenario": SQUARE, "colour": 1}, "colour"),
        ({"scenario": {**SQUARE, "params": {**SQUARE["params"], "a": -1}}}, "scenario.params.a"),
        ({"scenario": {**SQUARE, "shape": 1}}, "scenario.shape"),
        ({"scenario": SQUARE, "tau": {"max": 10, "stride": 1}}, "tau.stride"),
        ({"scenario": SQUARE, "map": {"axes": [{"name": "detuning", "start": 0, "stop": 1, "num": 3}]}}, "map.axes"),
        ({"scenario": SQUARE, "map": {"axes": [{"name": "theta", "start": 0, "stop": 4, "num": 3},
                                               {"name": "detuning", "values": [1]}]}}, "map.axes[0]"),
        ({"scenario": SQUARE, "optimize": {"objective": "min_g2_zero", "bounds": {"xi": [0, 1]}, "budget": 9}},
         "optimize.bounds.xi"),
    ],
)
def test_validation_diagnostics(tmp_path, capsys, config, needle):
    code, _ = run(tmp_path, "spectrum", config)
    assert code == EXIT_VALIDATION
    assert needle in capsys.readouterr().err


def test_malformed_json_reports_line(tmp_path, capsys):
    code, _ = run(tmp_path, "g2", '{\n  "scenario": {,\n}')
    assert code == EXIT_VALIDATION
    assert "line 2" in capsys.readouterr().err


def test_missing_section(tmp_path, capsys):
    code, _ = run(tmp_path, "map", {"scenario": SQUARE})
    assert code == EXIT_VALIDATION
    assert "map" in capsys.readouterr().err


def test_g2_square(tmp_path, capsys):
    code, out = run(tmp_path, "g2", {"scenario": SQUARE})
    assert code == EXIT_OK
    line = capsys.readouterr().out
    assert "tau_half" in line
    summary = json.loads((out / "trace_summary.json").read_text())
    assert summary["persistence"]["tau_half"] == pytest.approx(18, abs=1)
    _, cols, data = io.read_csv(out / "trace.csv")
    assert cols[:4] == ["tau", "g2", "re_term_0", "im_term_0"]
    _, ccols, consts = io.read_csv(out / "constants.csv")
    assert consts.shape == (4, 6)


def test_g2_single_atom_closed_form(tmp_path):
    cfg = {"scenario": {"kind": "single_atom", "params": {"detuning": 0.5}}, "tau": {"max": 20, "step": 0.01}}
    code, out = run(tmp_path, "g2", cfg)
    assert code == EXIT_OK
    _, _, data = io.read_csv(out / "trace.csv")
    tau = data[:, 0]
    ref = np.abs(1 - np.exp(1j * 0.5 * tau - tau / 2)) ** 2
    assert np.max(np.abs(data[:, 1] - ref)) < 1e-10


def test_g2_coarse_grid(tmp_path, capsys):
    code, _ = run(tmp_path, "g2", {"scenario": SQUARE, "tau": {"max": 10, "step": 0.1}})
    assert code == EXIT_VALIDATION
    assert "tau step" in capsys.readouterr().err
    code, _ = run(tmp_path, "g2", {"scenario": SQUARE, "tau": {"max": 10, "step": 0.1}, "persistence": {"enabled": False}})
    assert code == EXIT_OK


def test_g2_json_format(tmp_path):
    code, out = run(tmp_path, "g2", {"scenario": SQUARE, "tau": {"max": 1}}, "--format", "json")
    assert code == EXIT_OK
    data = json.loads((out / "trace.json").read_text())
    assert data["provenance"]["command"] == "g2"
    assert len(data["rows"]) == 51


def test_map_toy_grid(tmp_path):
    cfg = {"scenario": SQUARE, "map": {"axes": [
        {"name": "detuning", "start": 3.8, "stop": 4.0, "num": 3},
        {"name": "theta", "start": 0.2, "stop": 0.3, "num": 3, "unit": "pi"}]}}
    code, out = run(tmp_path, "map", cfg, "--threads", "2")
    assert code == EXIT_OK
    _, cols, data = io.read_csv(out / "map.csv")
    assert cols == ["detuning", "theta", "g2_zero", "flag"]
    assert data.shape == (9, 4)
    meta = json.loads((out / "map_meta.json").read_text())
    assert meta["n_flagged"] == 0 and meta["shape"] == [3, 3]


def test_map_flagged_cells_reported(tmp_path):
    cfg = {"scenario": {"kind": "chain", "params": {"n_atoms": 1, "a": 0.2, "xi": 0.0, "gamma_r": 0.1, "detuning": 0}},
           "map": {"axes": [{"name": "detuning", "values": [0, 1]}, {"name": "gamma_r", "values": [0.1]}]}}
    code, out = run(tmp_path, "map", cfg)
    assert code == EXIT_OK
    meta = json.loads((out / "map_meta.json").read_text())
    assert meta["n_flagged"] == 2 and len(meta["flagged_cells"]) == 2


def test_map_tau_axis(tmp_path):
    cfg = {"scenario": CHAIN, "map": {"axes": [
        {"name": "detuning", "values": [0.2, 0.3]}, {"name": "tau", "start": 0, "stop": 1, "step": 0.5}]}}
    code, out = run(tmp_path, "map", cfg)
    assert code == EXIT_OK
    _, cols, data = io.read_csv(out / "map.csv")
    assert cols[:3] == ["detuning", "tau", "g2"] and data.shape == (6, 4)


def test_optimize_degenerate_budget(tmp_path):
    cfg = {"scenario": SQUARE, "optimize": {"objective": "min_g2_zero", "bounds": {"detuning": [3.9, 3.9]},
                                            "budget": 1, "grid_points": 1}}
    code, out = run(tmp_path, "optimize", cfg)
    assert code == EXIT_OK
    best = json.loads((out / "best.json").read_text())
    assert best["n_evaluations"] == 1 and best["best_params"] == {"detuning": 3.9}


def test_optimize_infeasible_writes_audit(tmp_path):
    cfg = {"scenario": CHAIN, "optimize": {"objective": "min_g2_zero", "cap": 1e-9,
                                           "bounds": {"detuning": [5, 6]}, "budget": 10, "grid_points": 5}}
    code, out = run(tmp_path, "optimize", cfg)
    assert code == EXIT_INFEASIBLE
    text = (out / "audit.csv").read_text().splitlines()
    rows = [l for l in text if not l.startswith("#")]
    assert len(rows) == 1 + 5
    assert json.loads((out / "best.json").read_text())["status"] == "infeasible"


def test_numerical_failure_exit(tmp_path, capsys):
    cfg = {"scenario": {"kind": "chain", "params": {"n_atoms": 3, "a": 0.2, "xi": 0.0, "gamma_r": 0.1, "detuning": 0}}}
    code, _ = run(tmp_path, "spectrum", cfg)
    assert code == EXIT_NUMERICAL
    assert "NearDefectiveError" in capsys.readouterr().err


def test_provenance_digest_tracks_config(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    a = run(tmp_path / "a", "spectrum", {"scenario": SQUARE})
    b = run(tmp_path / "b", "spectrum", {"scenario": {**SQUARE, "params": {**SQUARE["params"], "detuning": 3.8}}})
    pa, _, _ = io.read_csv(a[1] / "spectrum.csv")
    pb, _, _ = io.read_csv(b[1] / "spectrum.csv")
    assert pa["config_sha256"] != pb["config_sha256"]
    c = run(tmp_path / "a", "spectrum", {"scenario": SQUARE})
    assert io.read_csv(c[1] / "spectrum.csv")[0] == pa


def test_shipped_configs_validate(tmp_path):
    from arrayg2.cli import load_config

    for path in sorted(CONFIGS.glob("*.json")):
        cmd = "map" if "map" in path.stem else "optimize" if "optimize" in path.stem else "g2"
        cfg = load_config(path, cmd)
        assert cfg.scenario.kind in ("square", "chain", "single_atom")


def test_scenario_file_reference(tmp_path):
    (tmp_path / "sc.json").write_text(json.dumps(SQUARE))
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"scenario_file": "sc.json"}))
    assert main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK


def test_console_script(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "arrayg2.cli", "spectrum", "--config", str(CONFIGS / "chain.json"),
         "--out", str(tmp_path)], capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "5 states" in proc.stdout
