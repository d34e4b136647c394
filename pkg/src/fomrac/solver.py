"""Fixed-step solvers for commensurate fractional systems ``D^alpha x = f(t, x)``.

Both schemes use the Caputo derivative with the initial state held in
``FdeSystem.initial``; they integrate ``y = x - x(0)``, which starts at zero,
so the Grünwald-Letnikov sum and the Caputo derivative agree.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .grunwald import FracOrder, as_order, gl_weights

__all__ = [
    "FdeSystem",
    "SolverConfig",
    "Trajectory",
    "SimulationDiverged",
    "simulate",
    "simulate_gl",
    "simulate_abm",
]

logger = logging.getLogger(__name__)

SCHEMES = ("explicit_gl", "predictor_corrector")

# Steps per block of the FFT-accelerated history sum.
_BLOCK = 1024

Rhs = Callable[[float, np.ndarray], np.ndarray]


@dataclass
class FdeSystem:
    """``D^alpha x = rhs(t, x)`` in ``dimension`` states with a single order."""

    dimension: int
    order: FracOrder
    rhs: Rhs
    initial: np.ndarray | None = None
    names: Sequence[str] | None = None

    def __post_init__(self):
        self.order = as_order(self.order)
        if self.dimension < 1:
            raise ValueError(f"dimension must be positive, got {self.dimension}")
        if self.initial is None:
            self.initial = np.zeros(self.dimension)
        else:
            self.initial = np.asarray(self.initial, dtype=float).reshape(-1)
            if self.initial.shape != (self.dimension,):
                raise ValueError(
                    f"initial state has {self.initial.size} entries, expected {self.dimension}"
                )
        if self.names is None:
            self.names = tuple(f"x{i + 1}" for i in range(self.dimension))
        elif len(self.names) != self.dimension:
            raise ValueError("one channel name per state is required")


@dataclass(frozen=True)
class SolverConfig:
    step: float = 1e-3
    horizon: float = 100.0
    memory_window: float | str = "full"
    scheme: str = "explicit_gl"
    divergence_bound: float = 1e10

    def __post_init__(self):
        if not self.step > 0.0:
            raise ValueError(f"step must be positive, got {self.step!r}")
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon!r}")
        if not self.step < self.horizon:
            raise ValueError("step must be smaller than the horizon")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.memory_window != "full":
            if isinstance(self.memory_window, str) or not self.memory_window >= 10 * self.step:
                raise ValueError(
                    f"memory_window must be 'full' or at least 10 steps, got {self.memory_window!r}"
                )

    @property
    def num_steps(self) -> int:
        return int(round(self.horizon / self.step))

    @property
    def memory_samples(self) -> int:
        if self.memory_window == "full":
            return self.num_steps
        return min(self.num_steps, int(round(self.memory_window / self.step)))


@dataclass
class Trajectory:
    """Named channels sampled on one uniform grid starting at ``t = 0``."""

    step: float
    channels: dict[str, np.ndarray] = field(default_factory=dict)
    diverged_at: float | None = None

    def __post_init__(self):
        lengths = {len(v) for v in self.channels.values()}
        if len(lengths) > 1:
            raise ValueError(f"channels have unequal lengths {sorted(lengths)}")

    def __len__(self) -> int:
        return len(next(iter(self.channels.values()))) if self.channels else 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    def __contains__(self, name: str) -> bool:
        return name in self.channels

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(len(self))

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None

    def stack(self, prefix: str) -> np.ndarray:
        """Channels ``prefix1, prefix2, ...`` as columns of one array."""
        cols = []
        i = 1
        while f"{prefix}{i}" in self.channels:
            cols.append(self.channels[f"{prefix}{i}"])
            i += 1
        if not cols:
            raise KeyError(f"trajectory has no channels {prefix}1, {prefix}2, ...")
        return np.column_stack(cols)


class SimulationDiverged(RuntimeError):
    """The state left the finite range; ``trajectory`` holds the samples before blow-up."""

    def __init__(self, time: float, trajectory: Trajectory):
        super().__init__(f"simulation diverged at t = {time:.6g} s")
        self.time = time
        self.trajectory = trajectory


def _trajectory(system: FdeSystem, step: float, states: np.ndarray, diverged_at=None):
    return Trajectory(
        step,
        {name: states[:, i].copy() for i, name in enumerate(system.names)},
        diverged_at,
    )


def _eval_rhs(system: FdeSystem, t: float, x: np.ndarray) -> np.ndarray:
    out = np.asarray(system.rhs(t, x), dtype=float).reshape(-1)
    if out.shape != (system.dimension,):
        raise ValueError(f"rhs returned {out.size} values, expected {system.dimension}")
    return out


def _blown_up(x: np.ndarray, bound: float) -> bool:
    return not (np.all(np.isfinite(x)) and np.max(np.abs(x)) <= bound)


def _diverge(system: FdeSystem, config: SolverConfig, states: np.ndarray, k: int):
    t = k * config.step
    logger.info("state left the finite range at t = %g s", t)
    traj = _trajectory(system, config.step, states[:k], diverged_at=t)
    raise SimulationDiverged(t, traj)


def _far_history(y, w_trunc, k0, block, memory):
    """``sum_{i < k0} w_{k-i} y_i`` for ``k = k0 .. k0 + block - 1``."""
    lo = max(0, k0 - memory)
    seg = y[lo:k0]
    m = k0 - lo
    conv = fftconvolve(seg, w_trunc[: m + block, None], axes=0)
    return conv[m : m + block]


def simulate_gl(system: FdeSystem, config: SolverConfig) -> Trajectory:
    """Explicit Grünwald-Letnikov scheme.

    ``y_k = h^alpha f(t_{k-1}, x_{k-1}) - sum_{j=1}^{min(k, L)} w_j y_{k-j}``
    with ``y = x - x(0)`` and ``L`` the memory window in samples. At
    ``alpha = 1`` this is exactly explicit Euler.

    For long memories the history sum is split per block of steps: samples
    before the block enter through one FFT convolution, samples inside it
    through a direct dot product. Short memories use the direct sum only.
    """
    alpha = system.order.alpha
    h = config.step
    n_steps = config.num_steps
    memory = config.memory_samples
    if alpha == 1.0:
        # w_j = 0 for j >= 2
        memory = 1

    w = gl_weights(system.order, n_steps).weights
    w_trunc = w.copy()
    w_trunc[memory + 1:] = 0.0
    # reversed so that the active window is one contiguous slice
    w_rev = np.ascontiguousarray(w[1:][::-1])
    h_alpha = h**alpha

    blocked = memory > 2 * _BLOCK
    block = _BLOCK if blocked else n_steps

    x0 = system.initial
    y = np.zeros((n_steps + 1, system.dimension))
    states = np.empty_like(y)
    states[0] = x0
    for k0 in range(1, n_steps + 1, block):
        k_end = min(k0 + block, n_steps + 1)
        far = _far_history(y, w_trunc, k0, k_end - k0, memory) if blocked else None
        for k in range(k0, k_end):
            f = _eval_rhs(system, (k - 1) * h, states[k - 1])
            if blocked:
                m = k - k0
                history = far[m]
                if m:
                    history = history + w_rev[n_steps - m:] @ y[k0:k]
            else:
                m = min(k, memory)
                history = w_rev[n_steps - m:] @ y[k - m:k]
            y[k] = h_alpha * f - history
            states[k] = x0 + y[k]
            if _blown_up(states[k], config.divergence_bound):
                _diverge(system, config, states, k)
    return _trajectory(system, h, states)


def simulate_abm(system: FdeSystem, config: SolverConfig) -> Trajectory:
    """Fractional Adams-Bashforth-Moulton predictor-corrector.

    Product-integration weights on the Volterra form of the Caputo problem
    (one predictor and one corrector evaluation per step). Used to
    cross-check :func:`simulate_gl`; it always uses full memory.
    """
    alpha = system.order.alpha
    h = config.step
    n = config.num_steps
    if config.memory_window != "full":
        logger.info("predictor-corrector scheme ignores memory_window")

    i = np.arange(n + 2, dtype=float)
    # predictor weights b_i, i = k - j
    b = (i[1:] ** alpha - i[:-1] ** alpha)
    b_rev = np.ascontiguousarray(b[::-1])
    # corrector weights c_i for 1 <= j <= k, i = k - j
    c = (i[:-1] + 2.0) ** (alpha + 1) + i[:-1] ** (alpha + 1) - 2.0 * (i[:-1] + 1.0) ** (alpha + 1)
    c_rev = np.ascontiguousarray(c[::-1])
    pred_scale = h**alpha / math.gamma(alpha + 1.0)
    corr_scale = h**alpha / math.gamma(alpha + 2.0)

    x0 = system.initial
    states = np.empty((n + 1, system.dimension))
    fs = np.empty_like(states)
    states[0] = x0
    fs[0] = _eval_rhs(system, 0.0, x0)
    size = len(b_rev)
    for k in range(n):
        # step from t_k to t_{k+1}, history f_0..f_k
        pred = x0 + pred_scale * (b_rev[size - (k + 1):] @ fs[: k + 1])
        if _blown_up(pred, config.divergence_bound):
            _diverge(system, config, states, k + 1)
        f_pred = _eval_rhs(system, (k + 1) * h, pred)
        a0 = k ** (alpha + 1) - (k - alpha) * (k + 1) ** alpha
        corr = a0 * fs[0] + f_pred
        if k >= 1:
            corr = corr + c_rev[len(c_rev) - k:] @ fs[1 : k + 1]
        states[k + 1] = x0 + corr_scale * corr
        if _blown_up(states[k + 1], config.divergence_bound):
            _diverge(system, config, states, k + 1)
        fs[k + 1] = _eval_rhs(system, (k + 1) * h, states[k + 1])
    return _trajectory(system, h, states)


def simulate(system: FdeSystem, config: SolverConfig) -> Trajectory:
    """Dispatch on ``config.scheme``."""
    if config.scheme == "predictor_corrector":
        return simulate_abm(system, config)
    return simulate_gl(system, config)
