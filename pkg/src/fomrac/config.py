"""Experiment configuration documents (YAML).

Layout::

    order: 0.7
    plant:
      A: [[0, 1], [1, 1]]
      B: [0, 1]
      basis:                      # rows and state indices are zero-based
        - {row: 1, coeff: 1, powers: [2, 0]}
        - {row: 1, coeff: 1, powers: [0, 0], trig: sin, trig_state: 1}
      x0: [0, 0]                  # optional perturbation of x(0)
    reference:
      A_m: [[0, 1], [-5, -5]]
      B_m: [0, 5]
      signal: {kind: square, period: 20, amplitude: 1}
    adaptation:
      P: [[20, 10], [10, 20]]
      gain: 1
      b_effective: B_m            # or true_B
      theta_initial: zeros        # zeros | matching | {theta1, theta2, theta3}
      enabled: true
    solver: {step: 0.001, horizon: 100, memory_window: full, scheme: explicit_gl}
    output: {path: run.csv, channels: all, decimation: 10}
    metrics: {threshold: 0.01, final_fraction: 0.2}
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .mrac import (
    AdaptationConfig,
    BasisTerm,
    ControllerState,
    MatchingError,
    NonlinearBasis,
    PlantModel,
    ReferenceModel,
    solve_matching_gains,
)
from .signals import SignalSpec
from .solver import SolverConfig

__all__ = [
    "ConfigError",
    "OutputConfig",
    "MetricsConfig",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "dump_config",
    "config_to_dict",
    "builtin_config_path",
]

BUILTIN_CONFIGS = {"paper_sec4": "paper_sec4.yaml"}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


@dataclass(frozen=True)
class OutputConfig:
    path: str | None = None
    channels: tuple[str, ...] | str = "all"
    decimation: int = 10

    def __post_init__(self):
        if int(self.decimation) != self.decimation or self.decimation < 1:
            raise ValueError(f"decimation must be an integer >= 1, got {self.decimation!r}")


@dataclass(frozen=True)
class MetricsConfig:
    # None means 1% of the reference amplitude
    threshold: float | None = None
    final_fraction: float = 0.2

    def __post_init__(self):
        if self.threshold is not None and not self.threshold > 0:
            raise ValueError(f"threshold must be positive, got {self.threshold!r}")
        if not 0.0 < self.final_fraction <= 1.0:
            raise ValueError(f"final_fraction must lie in (0, 1], got {self.final_fraction!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    plant: PlantModel
    reference: ReferenceModel
    adaptation: AdaptationConfig
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    plant_initial: tuple[float, ...] | None = None

    @property
    def order(self) -> float:
        return self.plant.order.alpha

    @property
    def settle_threshold(self) -> float:
        if self.metrics.threshold is not None:
            return self.metrics.threshold
        return 0.01 * abs(self.reference.reference.amplitude) or 0.01


def _section(doc: dict, name: str, required: bool = True) -> dict:
    value = doc.get(name)
    if value is None:
        if required:
            raise ConfigError(f"missing section '{name}'")
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    return value


def _build(where: str, factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _require(section: dict, key: str, path: str):
    if key not in section:
        raise ConfigError(f"{path}: missing field '{key}'")
    return section[key]


def _num(section: dict, key: str, default, path: str, kind=float):
    value = section.get(key, default)
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}: expected a number, got {value!r}") from None


def _check_keys(section: dict, allowed: set[str], path: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {sorted(unknown)}")


def _basis_term(raw: Any, n: int, path: str) -> BasisTerm:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: basis term must be a mapping")
    _check_keys(raw, {"row", "coeff", "powers", "trig", "trig_state"}, path)
    return _build(
        path,
        BasisTerm,
        row=_num(raw, "row", _require(raw, "row", path), path, int),
        coeff=_num(raw, "coeff", 1.0, path),
        powers=tuple(raw.get("powers", [0] * n)),
        trig=str(raw.get("trig", "none")),
        trig_state=_num(raw, "trig_state", 0, path, int),
    )


def _theta_initial(raw: Any, plant: PlantModel, ref: ReferenceModel) -> ControllerState | None:
    path = "adaptation.theta_initial"
    if raw is None or raw == "zeros":
        return None
    if raw == "matching":
        try:
            return solve_matching_gains(plant, ref).as_state()
        except MatchingError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected 'zeros', 'matching' or a mapping of gains")
    _check_keys(raw, {"theta1", "theta2", "theta3"}, path)
    n = plant.n
    state = _build(
        path,
        ControllerState,
        raw.get("theta1", [0.0] * n),
        raw.get("theta2", 0.0),
        raw.get("theta3", [0.0] * n),
    )
    if state.theta1.shape != (n,):
        raise ConfigError(f"{path}: theta1/theta3 need {n} entries")
    return state


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML experiment document.

    Raises
    ------
    ConfigError
        On malformed YAML (with line number) or any invalid field.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"malformed configuration{where}: {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping of sections")
    _check_keys(
        doc,
        {"order", "plant", "reference", "adaptation", "solver", "output", "metrics"},
        "document",
    )

    alpha = _require(doc, "order", "document")
    try:
        alpha = float(alpha)
    except (TypeError, ValueError):
        raise ConfigError(f"order: expected a number, got {alpha!r}") from None
    if not 0.0 < alpha <= 1.0:
        raise ConfigError(f"order: fractional order must lie in (0, 1], got {alpha}")

    p = _section(doc, "plant")
    _check_keys(p, {"A", "B", "basis", "x0"}, "plant")
    A = _build("plant.A", np.array, _require(p, "A", "plant"), dtype=float)
    if A.ndim != 2:
        raise ConfigError("plant.A: expected a list of matrix rows")
    n = A.shape[0]
    raw_terms = p.get("basis") or []
    if not isinstance(raw_terms, list):
        raise ConfigError("plant.basis: expected a list of terms")
    terms = [_basis_term(t, n, f"plant.basis[{i}]") for i, t in enumerate(raw_terms)]
    basis = _build("plant.basis", NonlinearBasis, n, tuple(terms))
    plant = _build("plant", PlantModel, A, _require(p, "B", "plant"), basis, alpha)
    plant_initial = None
    if p.get("x0") is not None:
        x0 = _build("plant.x0", np.asarray, p["x0"], dtype=float).reshape(-1)
        plant_initial = tuple(float(v) for v in x0)
        if len(plant_initial) != n:
            raise ConfigError(f"plant.x0: expected {n} entries")

    r = _section(doc, "reference")
    _check_keys(r, {"A_m", "B_m", "signal"}, "reference")
    sig = r.get("signal") or {}
    _check_keys(sig, {"kind", "period", "amplitude"}, "reference.signal")
    signal = _build(
        "reference.signal",
        SignalSpec,
        kind=str(sig.get("kind", "square")),
        period=_num(sig, "period", 20.0, "reference.signal"),
        amplitude=_num(sig, "amplitude", 1.0, "reference.signal"),
    )
    ref = _build(
        "reference",
        ReferenceModel,
        _require(r, "A_m", "reference"),
        _require(r, "B_m", "reference"),
        signal,
    )
    if ref.n != n:
        raise ConfigError(f"reference: A_m is {ref.n}x{ref.n} but the plant has {n} states")

    a = _section(doc, "adaptation")
    _check_keys(a, {"P", "gain", "b_effective", "theta_initial", "enabled"}, "adaptation")
    theta0 = _theta_initial(a.get("theta_initial"), plant, ref)
    adaptation = _build(
        "adaptation",
        AdaptationConfig,
        P=_build("adaptation.P", np.array, _require(a, "P", "adaptation"), dtype=float),
        b_effective=str(a.get("b_effective", "B_m")),
        gain=_num(a, "gain", 1.0, "adaptation"),
        theta_initial=theta0,
        enabled=bool(a.get("enabled", True)),
    )
    if adaptation.P.shape != (n, n):
        raise ConfigError(f"adaptation.P: expected {n}x{n}, got {adaptation.P.shape}")

    s = _section(doc, "solver", required=False)
    _check_keys(s, {"step", "horizon", "memory_window", "scheme", "divergence_bound"}, "solver")
    window = s.get("memory_window", "full")
    solver = _build(
        "solver",
        SolverConfig,
        step=_num(s, "step", 1e-3, "solver"),
        horizon=_num(s, "horizon", 100.0, "solver"),
        memory_window=window if window == "full" else _num(s, "memory_window", None, "solver"),
        scheme=str(s.get("scheme", "explicit_gl")),
        divergence_bound=_num(s, "divergence_bound", 1e10, "solver"),
    )

    o = _section(doc, "output", required=False)
    _check_keys(o, {"path", "channels", "decimation"}, "output")
    channels = o.get("channels", "all")
    if channels != "all":
        if not isinstance(channels, list):
            raise ConfigError("output.channels: expected 'all' or a list of channel names")
        channels = tuple(str(c) for c in channels)
    output = _build(
        "output",
        OutputConfig,
        path=None if o.get("path") is None else str(o["path"]),
        channels=channels,
        decimation=o.get("decimation", 10),
    )

    m = _section(doc, "metrics", required=False)
    _check_keys(m, {"threshold", "final_fraction"}, "metrics")
    metrics = _build(
        "metrics",
        MetricsConfig,
        threshold=None if m.get("threshold") is None else _num(m, "threshold", None, "metrics"),
        final_fraction=_num(m, "final_fraction", 0.2, "metrics"),
    )

    return ExperimentConfig(plant, ref, adaptation, solver, output, metrics, plant_initial)


def _rows(M) -> list:
    return np.asarray(M, dtype=float).tolist()


def config_to_dict(config: ExperimentConfig) -> dict:
    """Plain-data form of a configuration, the inverse of :func:`parse_config`."""
    plant = config.plant
    ref = config.reference
    ad = config.adaptation
    plant_doc = {
        "A": _rows(plant.A),
        "B": _rows(plant.B.reshape(-1)),
        "basis": [
            {
                "row": t.row,
                "coeff": t.coeff,
                "powers": list(t.powers),
                "trig": t.trig,
                "trig_state": t.trig_state,
            }
            for t in plant.basis.terms
        ],
    }
    if config.plant_initial is not None:
        plant_doc["x0"] = list(config.plant_initial)
    theta0 = ad.theta_initial
    return {
        "order": config.order,
        "plant": plant_doc,
        "reference": {
            "A_m": _rows(ref.A_m),
            "B_m": _rows(ref.B_m.reshape(-1)),
            "signal": {
                "kind": ref.reference.kind,
                "period": ref.reference.period,
                "amplitude": ref.reference.amplitude,
            },
        },
        "adaptation": {
            "P": _rows(ad.P),
            "gain": ad.gain,
            "b_effective": ad.b_effective,
            "theta_initial": "zeros" if theta0 is None else {
                "theta1": theta0.theta1.tolist(),
                "theta2": theta0.theta2,
                "theta3": theta0.theta3.tolist(),
            },
            "enabled": ad.enabled,
        },
        "solver": {
            "step": config.solver.step,
            "horizon": config.solver.horizon,
            "memory_window": config.solver.memory_window,
            "scheme": config.solver.scheme,
            "divergence_bound": config.solver.divergence_bound,
        },
        "output": {
            "path": config.output.path,
            "channels": config.output.channels if config.output.channels == "all"
            else list(config.output.channels),
            "decimation": config.output.decimation,
        },
        "metrics": {
            "threshold": config.metrics.threshold,
            "final_fraction": config.metrics.final_fraction,
        },
    }


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False, default_flow_style=None)


def builtin_config_path(name: str) -> Path:
    return Path(str(resources.files("fomrac") / "data" / BUILTIN_CONFIGS[name]))


def load_config(source: str | Path) -> ExperimentConfig:
    """Load a config file, or a shipped one by name (e.g. ``paper_sec4``)."""
    source = str(source)
    if source in BUILTIN_CONFIGS:
        path = builtin_config_path(source)
    else:
        path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {source!r}: {exc}") from exc
    return parse_config(text)
