import json

import jsonschema
import numpy as np
import pytest

from qscool.cli import RUNLOG_SCHEMA, RunConfig, load_config_file, main
from qscool.errors import DataError

from conftest import fixture_path

H2 = str(fixture_path("h2_r0.7414"))


def test_fci_command(capsys):
    assert main(["fci", "--fixture", H2]) == 0
    out = capsys.readouterr().out
    lines = {l.split("=")[0].strip(): float(l.split("=")[1].split("Ha")[0])
             for l in out.strip().splitlines()}
    assert lines["E_FCI"] < lines["E_HF"]
    assert lines["gap (E_HF - E_FCI)"] > 0


def test_validate_command_ok(capsys):
    assert main(["validate", "--fixture", H2]) == 0
    assert "valid MHX" in capsys.readouterr().out


def test_validate_corrupted_exit_2(tmp_path, capsys):
    doc = json.loads(fixture_path("h2_r0.7414").read_text())
    doc["kinetic"][0][1] += 1e-3
    bad = tmp_path / "bad.mhx"
    bad.write_text(json.dumps(doc))
    assert main(["validate", "--fixture", str(bad)]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_fixture_exit_2(capsys):
    assert main(["fci", "--fixture", "/nonexistent.mhx"]) == 2


def test_cost_command(capsys):
    code = main(["cost", "--K", "10", "--params", "32", "--eta", "2",
                 "--epsilon", "1"])
    assert code == 0
    out = capsys.readouterr().out
    assert "16" in out and "5120" in out


def test_cost_requires_inputs(capsys):
    assert main(["cost", "--K", "10"]) == 2


def test_oc_run_and_runlog_schema(tmp_path, capsys):
    out = tmp_path / "run"
    code = main([
        "oc", "--fixture", H2, "--T", "1.0", "--n-ctrl", "5",
        "--seed", "0", "--out", str(out), "--max-iter", "500",
    ])
    assert code == 0
    doc = json.loads((out / "runlog.json").read_text())
    jsonschema.validate(doc, RUNLOG_SCHEMA)
    assert doc["best"]["error_vs_fci_mha"] < 1.0
    assert (out / "iterates.csv").exists()
    assert (out / "trajectory.csv").exists()
    assert doc["qsl"]["t_qsl"] > 0
    assert doc["cost"]["circuits"] > 0
    # reproducibility: embedded config + seed rerun gives the same best energy
    out2 = tmp_path / "run2"
    main([
        "oc", "--fixture", doc["fixture"], "--T", str(doc["config"]["total_time"]),
        "--n-ctrl", str(doc["config"]["n_ctrl"]),
        "--n-steps", str(doc["config"]["n_steps"]),
        "--seed", str(doc["best"]["seed"]), "--out", str(out2),
        "--max-iter", str(doc["config"]["max_iter"]),
    ])
    doc2 = json.loads((out2 / "runlog.json").read_text())
    assert doc2["best"]["final_energy"] == doc["best"]["final_energy"]


def test_oc_no_convergence_exit_1(tmp_path, capsys):
    code = main([
        "oc", "--fixture", H2, "--T", "1.0", "--n-ctrl", "2",
        "--seed", "0", "--out", str(tmp_path / "r"), "--max-iter", "1",
    ])
    assert code == 1


def test_anneal_command(tmp_path, capsys):
    out = tmp_path / "anneal"
    assert main(["anneal", "--fixture", H2, "--T", "2.5",
                 "--out", str(out)]) == 0
    doc = json.loads((out / "runlog.json").read_text())
    jsonschema.validate(doc, RUNLOG_SCHEMA)
    rows = (out / "trajectory.csv").read_text().strip().splitlines()
    assert len(rows) == 52  # header + 51 grid points
    # the driving expectation decays from the mean-field energy toward FCI
    first = float(rows[1].split(",")[2])
    last = float(rows[-1].split(",")[2])
    assert last < first


def test_qsl_command_on_run(tmp_path, capsys):
    out = tmp_path / "run"
    main(["oc", "--fixture", H2, "--T", "1.0", "--n-ctrl", "5",
          "--seed", "0", "--out", str(out)])
    capsys.readouterr()
    assert main(["qsl", "--runlog", str(out)]) == 0
    assert "T_qsl" in capsys.readouterr().out


def test_qsl_stationary_exit_2(tmp_path, capsys):
    from qscool.dynamics import Trajectory

    run = tmp_path / "idle"
    run.mkdir()
    traj = Trajectory(
        times=np.linspace(0, 1, 5),
        e_mol=np.zeros(5),
        e_drive=np.zeros(5),
        variance=np.zeros(5),
        norm_ratio=np.ones(5),
        final_state=np.array([1.0 + 0j]),
    )
    traj.write_csv(run / "trajectory.csv")
    assert main(["qsl", "--runlog", str(run)]) == 2
    assert "stationary" in capsys.readouterr().err


def test_config_file_loading(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        '# comment\nfixture = "%s"\ntotal_time = 0.5\nn_ctrl = 2\n'
        "seeds = [0, 1]\nmax_iter = 3\ntol_mha = 1.5\n" % H2
    )
    loaded = load_config_file(cfg)
    assert loaded["total_time"] == 0.5
    assert loaded["seeds"] == [0, 1]
    rc = RunConfig.from_sources(loaded, {})
    assert rc.tol_mha == 1.5


def test_config_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(f'fixture = "{H2}"\nknots = 4\n')
    with pytest.raises(DataError, match="unknown config keys"):
        RunConfig.from_sources(load_config_file(cfg), {})


def test_cli_flag_overrides_config(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        f'fixture = "{H2}"\ntotal_time = 1.0\nn_ctrl = 5\nmax_iter = 500\n'
        "seeds = [7]\n"
    )
    out = tmp_path / "run"
    code = main(["oc", "--config", str(cfg), "--seed", "0", "--out", str(out)])
    assert code == 0
    doc = json.loads((out / "runlog.json").read_text())
    assert doc["config"]["seeds"] == [0]
    assert doc["config"]["total_time"] == 1.0
