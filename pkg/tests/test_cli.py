import json

import numpy as np
import pytest

from gpvortex.cli import main


@pytest.fixture
def pair_file(tmp_path):
    p = tmp_path / "pair.json"
    p.write_text(json.dumps({"positions": [[1, 0], [-1, 0]], "degrees": [1, 1], "eps": 0.1}))
    return p


def test_profile_writes_csv_and_echo(tmp_path):
    out = tmp_path / "profile.csv"
    assert main(["profile", "--rmax", "40", "--out", str(out)]) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data.shape[1] >= 2 and data[0, 1] == pytest.approx(0.0, abs=1e-12)
    echo = json.loads((tmp_path / "profile.csv.config.json").read_text())
    assert echo["rmax"] == 40.0


def test_kirchhoff_is_deterministic(tmp_path, pair_file):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert main(["kirchhoff", "--config", str(pair_file), "--tend", "0.5",
                     "--dt", "1e-3", "--out", str(out)]) == 0
    assert a.read_text() == b.read_text()
    traj = np.loadtxt(a, delimiter=",", skiprows=1)
    assert traj[-1, 0] == pytest.approx(0.5)


@pytest.mark.parametrize("cfg, msg", [
    ({"positions": [[1, 0], [-1, 0]], "degrees": [1, 2]}, "config.degrees"),
    ({"positions": [[1, 0]], "degrees": [1, 1]}, "config.degrees"),
    ({"positions": "here", "degrees": [1]}, "config.positions"),
    ({"degrees": [1]}, "config.positions"),
    ({"positions": [[1, 0]], "degrees": [1], "eps": -1}, "config.eps"),
])
def test_bad_config_exits_2(tmp_path, capsys, cfg, msg):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(cfg))
    assert main(["kirchhoff", "--config", str(p), "--out", str(tmp_path / "t.csv")]) == 2
    assert msg in capsys.readouterr().err


def test_usage_errors_exit_2(tmp_path):
    assert main(["bogus"]) == 2
    assert main(["kirchhoff", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["modes", "--k", "12"]) == 2


def test_modes_dump(tmp_path):
    out = tmp_path / "basis.csv"
    assert main(["modes", "--k", "2", "--dump", str(out)]) == 0
    assert np.isfinite(np.loadtxt(out, delimiter=",", skiprows=1)).all()


def test_run_experiment(tmp_path):
    exp = {"scenario": "kirchhoff", "output": str(tmp_path / "run"), "seed": 3,
           "vortices": {"positions": [[1, 0], [-1, 0]], "degrees": [1, -1], "eps": 0.1},
           "params": {"tend": 0.2, "dt": 0.01}}
    f = tmp_path / "exp.json"
    f.write_text(json.dumps(exp))
    assert main(["run", str(f)]) == 0
    run = tmp_path / "run"
    assert (run / "traj.csv").exists() and (run / "vortices.json").exists()
    assert json.loads((run / "experiment.json").read_text())["seed"] == 3


@pytest.mark.parametrize("exp, rc", [
    ({"scenario": "nope"}, 2),
    ({"scenario": "kirchhoff", "params": []}, 2),
    ({"scenario": "kirchhoff", "seed": "x"}, 2),
    ({"scenario": "modes", "params": {"dump": "x.csv"}}, 2),
])
def test_run_rejects(tmp_path, exp, rc):
    exp.setdefault("output", str(tmp_path / "o"))
    f = tmp_path / "exp.json"
    f.write_text(json.dumps(exp))
    assert main(["run", str(f)]) == rc
