import json
import subprocess
import sys

import numpy as np
import pytest

from vpqubo.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from vpqubo.hardware import chimera, read_embedding, validate_embedding
from vpqubo.qubo import read_qubo


def test_capacity(capsys):
    assert main(["capacity", "--n", "28", "--chimera-grid", "16"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["capacity"] == 9 and out["qubits_per_problem"] == 224


def test_capacity_too_large(capsys):
    assert main(["capacity", "--n", "70", "--chimera-grid", "16"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["capacity"] == 0


def test_embed_writes_valid_file(tmp_path):
    path = tmp_path / "emb.txt"
    assert main(["embed", "--n", "12", "--chimera-grid", "4", "--out", str(path)]) == EXIT_OK
    e = read_embedding(path.read_text(), m=4)
    assert e.n_logical == 12 and validate_embedding(e, chimera(4)) == []


def test_embed_capacity_error(capsys):
    assert main(["embed", "--n", "20", "--chimera-grid", "2"]) == EXIT_CONFIG
    assert "grid" in capsys.readouterr().err


def test_qubo_dump_and_solve(tmp_path, capsys):
    path = tmp_path / "inst.qubo"
    assert main(["qubo", "dump", "--nr", "2", "--mod", "16QAM", "--seed", "4", "--out", str(path)]) == EXIT_OK
    p = read_qubo(path.read_text())
    assert p.n_vars == 8
    assert main(["solve", "--qubo", str(path), "--solver", "brute"]) == EXIT_OK
    brute = json.loads(capsys.readouterr().out)
    assert main(["solve", "--qubo", str(path), "--solver", "sa", "--reads", "200", "--sweeps", "50"]) == EXIT_OK
    sa = json.loads(capsys.readouterr().out)
    assert sa["energy"] == pytest.approx(brute["energy"])
    bits = np.array([int(c) for c in brute["bits"]])
    assert p.energy(bits) == pytest.approx(brute["energy"])


def test_qubo_dump_with_preprocessing(capsys):
    assert main(["qubo", "dump", "--nr", "1", "--mod", "64QAM", "--t-high", "6", "--t-low", "-2"]) == EXIT_OK
    p = read_qubo(capsys.readouterr().out)
    assert np.abs(p.Q).max() <= 6


def test_simulate_writes_outputs(tmp_path):
    out = tmp_path / "run"
    args = ["simulate", "--nt", "2", "--nr", "2", "--mod", "QPSK", "--snr", "5,15", "--trials", "5",
            "--solver", "sa,sphere", "--reads", "20", "--sweeps", "10", "--seed", "3", "--out", str(out)]
    assert main(args) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["curve.csv", "summary.json", "trials_sa.csv", "trials_sphere.csv"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["snr_points"] == [5.0, 15.0]
    assert summary["config"]["master_seed"] == 3


def test_simulate_config_file_and_overrides(tmp_path):
    cfg = {"n_t": 2, "n_r": 2, "modulation": "16QAM", "snr_points": [10], "trials_per_point": 3,
           "solvers": ["zf"], "preprocess": {"t_high": 6, "t_low": None}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "run"
    args = ["simulate", "--config", str(path), "--trials", "4", "--t-high", "3", "--hw", "--chimera-grid", "2",
            "--jf-mult", "0.8", "--ice-sigma", "0.02", "--out", str(out)]
    assert main(args) == EXIT_OK
    echo = json.loads((out / "summary.json").read_text())["config"]
    assert echo["trials_per_point"] == 4
    assert echo["preprocess"] == {"t_high": 3.0, "t_low": None}
    assert echo["hw_model"]["enabled"] and echo["hw_model"]["jf_mult"] == 0.8
    assert echo["hw_model"]["ice_sigma_h"] == echo["hw_model"]["ice_sigma_j"] == 0.02


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["simulate", "--nr", "5", "--nt", "4", "--solver", "foo", "--out", str(tmp_path)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "n_r:" in err and "solvers[0]:" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["simulate", "--t-high", "-1", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--trials", "many", "--out", "x"])
    assert exc.value.code == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == EXIT_CONFIG


def test_runtime_error_exit_3(tmp_path, capsys):
    assert main(["solve", "--qubo", str(tmp_path / "missing.qubo")]) == EXIT_RUNTIME
    assert "error" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "vpqubo", "capacity", "--n", "4", "--chimera-grid", "1"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["capacity"] == 1
