import math

import numpy as np
import pytest
import yaml

from fomrac.config import builtin_config_path, parse_config
from fomrac.experiment import (
    read_csv,
    run_experiment,
    tracking_metrics,
    window_max_error,
    write_csv,
)
from fomrac.solver import Trajectory


def error_traj(e1, step=0.01, diverged_at=None):
    n = len(e1)
    return Trajectory(
        step,
        {"e1": np.asarray(e1, float), "e2": np.zeros(n), "u": np.linspace(-2.0, 1.0, n)},
        diverged_at,
    )


def short_config(**changes):
    doc = yaml.safe_load(builtin_config_path("paper_sec4").read_text())
    doc["output"]["path"] = None
    for dotted, value in changes.items():
        section, key = dotted.split(".")
        doc[section][key] = value
    return parse_config(yaml.safe_dump(doc))


def test_metrics_zero_error():
    m = tracking_metrics(error_traj(np.zeros(101)), 0.01)
    assert m.settle_time == 0.0 and m.final_window_max_error == 0.0
    assert m.max_control == 2.0 and not m.diverged and m.settled


def test_metrics_linear_decay():
    step = 0.01
    t = step * np.arange(2001)
    m = tracking_metrics(error_traj(np.maximum(0.0, 1.0 - t / 10.0), step), 0.01)
    assert m.settle_time == pytest.approx(9.9, abs=2 * step)
    assert m.final_window_max_error == 0.0


def test_metrics_never_settles():
    t = 0.01 * np.arange(1001)
    m = tracking_metrics(error_traj(np.sin(t) + 2.0), 0.01)
    assert m.settle_time is None and not m.settled
    assert m.final_window_max_error == pytest.approx(2.0 + math.sin(8.0), abs=1e-9)


def test_metrics_diverged():
    m = tracking_metrics(error_traj(np.ones(50), diverged_at=0.5), 0.01)
    assert m.diverged and m.diverged_at == 0.5
    assert m.settle_time is None and math.isinf(m.final_window_max_error)


def test_window_max_error():
    t = 0.1 * np.arange(101)
    traj = error_traj(t, 0.1)
    assert window_max_error(traj, 2.0, 3.0) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        window_max_error(traj, 20.0, 30.0)


@pytest.mark.parametrize("n, dec", [(101, 10), (100, 10), (7, 1), (5, 3)])
def test_csv_rows_and_roundtrip(tmp_path, n, dec):
    rng = np.random.default_rng(n)
    traj = Trajectory(0.1, {"a": rng.normal(size=n), "b": rng.normal(size=n) * 1e-300})
    path = tmp_path / "out.csv"
    write_csv(traj, path, decimation=dec)
    back = read_csv(path)
    assert len(back) == (n - 1) // dec + 1
    assert list(back.channels) == ["a", "b"]
    np.testing.assert_array_equal(back["a"], traj["a"][::dec])
    np.testing.assert_array_equal(back["b"], traj["b"][::dec])
    header = path.read_text().splitlines()[0]
    assert header == "t,a,b"


def test_csv_channel_selection(tmp_path):
    traj = Trajectory(0.1, {"a": np.zeros(3), "b": np.ones(3)})
    write_csv(traj, tmp_path / "x.csv", channels=("b",))
    assert list(read_csv(tmp_path / "x.csv").channels) == ["b"]
    with pytest.raises(KeyError):
        write_csv(traj, tmp_path / "y.csv", channels=("c",))


def test_frozen_matching_gains_track_exactly():
    cfg = short_config(**{"adaptation.theta_initial": "matching", "adaptation.enabled": False,
                          "solver.horizon": 30})
    traj, metrics = run_experiment(cfg)
    assert not metrics.diverged
    assert window_max_error(traj, 0.0, 30.0) <= 1e-6
    assert metrics.settle_time == 0.0


def test_open_loop_perturbation_diverges():
    cfg = short_config(**{"adaptation.enabled": False, "plant.x0": [1e-6, 0.0],
                          "solver.horizon": 20, "solver.step": 0.01})
    traj, metrics = run_experiment(cfg)
    assert metrics.diverged and 0.0 < metrics.diverged_at < 20.0
    assert len(traj) < 2001


def test_run_writes_csv(tmp_path):
    cfg = short_config(**{"solver.horizon": 2, "output.path": str(tmp_path / "r.csv")})
    traj, _ = run_experiment(cfg)
    back = read_csv(tmp_path / "r.csv")
    assert len(back) == 201
    for name in ("x1", "xm2", "theta2", "r", "e1", "u", "V"):
        assert name in back
    np.testing.assert_array_equal(back["V"], traj["V"][::10])
