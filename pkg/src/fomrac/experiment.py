"""Run configured closed-loop experiments, compute tracking metrics, read/write CSV."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .mrac import closed_loop_channels, closed_loop_system
from .solver import SimulationDiverged, Trajectory, simulate

__all__ = [
    "TrackingMetrics",
    "tracking_metrics",
    "window_max_error",
    "run_experiment",
    "write_csv",
    "read_csv",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrackingMetrics:
    """Tracking quality of one run.

    ``settle_time`` is None when the error never stays below the threshold;
    for diverged runs ``final_window_max_error`` is infinite.
    """

    settle_time: float | None
    final_window_max_error: float
    max_control: float
    diverged: bool
    diverged_at: float | None = None

    @property
    def settled(self) -> bool:
        return self.settle_time is not None


def _error_norm(traj: Trajectory) -> np.ndarray:
    try:
        e = traj.stack("e")
    except KeyError:
        raise KeyError("trajectory has no error channels e1, e2, ...") from None
    return np.max(np.abs(e), axis=1)


def window_max_error(traj: Trajectory, start: float, stop: float) -> float:
    """Max of ``|e(t)|_inf`` over ``start <= t <= stop``."""
    t = traj.times
    tol = 1e-9 * traj.step
    mask = (t >= start - tol) & (t <= stop + tol)
    if not np.any(mask):
        raise ValueError(f"no samples in [{start}, {stop}]")
    return float(_error_norm(traj)[mask].max())


def tracking_metrics(
    traj: Trajectory, threshold: float, final_fraction: float = 0.2
) -> TrackingMetrics:
    err = _error_norm(traj)
    if "u" not in traj:
        raise KeyError("trajectory has no control channel 'u'")
    u = traj["u"]
    finite_u = u[np.isfinite(u)]
    max_control = float(np.max(np.abs(finite_u))) if finite_u.size else math.inf
    if traj.diverged:
        return TrackingMetrics(None, math.inf, max_control, True, traj.diverged_at)

    t = traj.times
    above = np.nonzero(~(err < threshold))[0]
    if above.size == 0:
        settle = 0.0
    elif above[-1] + 1 < len(t):
        settle = float(t[above[-1] + 1])
    else:
        settle = None
    horizon = t[-1]
    final_start = (1.0 - final_fraction) * horizon
    final = float(err[t >= final_start - 1e-9 * traj.step].max())
    return TrackingMetrics(settle, final, max_control, False)


def write_csv(
    traj: Trajectory,
    path: str | Path,
    channels: tuple[str, ...] | str = "all",
    decimation: int = 1,
) -> None:
    """One row per retained sample, ``t`` first, values at 17 significant digits."""
    names = list(traj.channels) if channels == "all" else list(channels)
    missing = [c for c in names if c not in traj]
    if missing:
        raise KeyError(f"unknown channel(s) {missing}")
    idx = np.arange(0, len(traj), int(decimation))
    columns = [traj.times[idx]] + [traj[c][idx] for c in names]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + names)
        for row in zip(*columns):
            writer.writerow([f"{v:.17g}" for v in row])


def read_csv(path: str | Path) -> Trajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in row] for row in reader])
    if header[0] != "t":
        raise ValueError("first CSV column must be 't'")
    rows = rows.reshape(-1, len(header))
    step = float(rows[1, 0] - rows[0, 0]) if len(rows) > 1 else 1.0
    return Trajectory(step, {name: rows[:, i] for i, name in enumerate(header) if i})


def run_experiment(
    config: ExperimentConfig, *, write_output: bool = True
) -> tuple[Trajectory, TrackingMetrics]:
    """Simulate the configured closed loop.

    A diverged run is not an error here: the partial trajectory is returned
    and the metrics carry ``diverged=True``.
    """
    system = closed_loop_system(
        config.plant, config.reference, config.adaptation, config.plant_initial
    )
    try:
        raw = simulate(system, config.solver)
    except SimulationDiverged as exc:
        logger.warning("%s", exc)
        raw = exc.trajectory
    traj = closed_loop_channels(raw, config.plant, config.reference, config.adaptation)
    metrics = tracking_metrics(traj, config.settle_threshold, config.metrics.final_fraction)
    if write_output and config.output.path:
        write_csv(traj, config.output.path, config.output.channels, config.output.decimation)
    return traj, metrics
