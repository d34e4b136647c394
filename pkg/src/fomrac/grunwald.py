"""Grünwald-Letnikov weights and sampled-signal fractional derivatives."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

__all__ = [
    "FracOrder",
    "GLWeightTable",
    "SampledSignal",
    "gl_weights",
    "gl_derivative",
]

logger = logging.getLogger(__name__)

# Direct convolution below this many samples, FFT above.
_DIRECT_CONV_LIMIT = 4096


@dataclass(frozen=True)
class FracOrder:
    """Commensurate fractional order ``0 < alpha <= 1``."""

    alpha: float

    def __post_init__(self):
        alpha = float(self.alpha)
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"fractional order must lie in (0, 1], got {self.alpha!r}")
        object.__setattr__(self, "alpha", alpha)

    def __float__(self) -> float:
        return self.alpha


def as_order(alpha: FracOrder | float) -> FracOrder:
    return alpha if isinstance(alpha, FracOrder) else FracOrder(alpha)


@dataclass(frozen=True)
class GLWeightTable:
    """Signed binomial weights ``w_j = (-1)^j C(alpha, j)``, ``j = 0..count``."""

    alpha: FracOrder
    weights: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.weights)

    def __getitem__(self, j):
        return self.weights[j]


@dataclass(frozen=True)
class SampledSignal:
    """Samples on the uniform grid ``t_k = start_time + k * step``.

    ``samples`` has the time axis first; trailing axes hold vector or matrix
    values.
    """

    step: float
    samples: np.ndarray
    start_time: float = 0.0

    def __post_init__(self):
        if not self.step > 0.0:
            raise ValueError(f"step must be positive, got {self.step!r}")
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.start_time + self.step * np.arange(len(self))


def gl_weights(alpha: FracOrder | float, count: int) -> GLWeightTable:
    """Return ``w_0..w_count`` by the recursion ``w_j = w_{j-1} (1 - (alpha + 1) / j)``.

    >>> gl_weights(0.5, 1).weights.tolist()
    [1.0, -0.5]
    """
    order = as_order(alpha)
    count = int(count)
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    j = np.arange(1, count + 1, dtype=float)
    factors = 1.0 - (order.alpha + 1.0) / j
    w = np.empty(count + 1)
    w[0] = 1.0
    w[1:] = np.cumprod(factors)
    return GLWeightTable(order, w)


def _causal_convolve(weights: np.ndarray, samples: np.ndarray) -> np.ndarray:
    n = samples.shape[0]
    flat = samples.reshape(n, -1)
    out = np.empty_like(flat)
    for col in range(flat.shape[1]):
        if n <= _DIRECT_CONV_LIMIT:
            out[:, col] = np.convolve(weights, flat[:, col])[:n]
        else:
            out[:, col] = fftconvolve(weights, flat[:, col])[:n]
    return out.reshape(samples.shape)


def gl_derivative(
    signal: SampledSignal,
    alpha: FracOrder | float,
    *,
    subtract_initial: bool = False,
) -> SampledSignal:
    """Fixed-step Grünwald-Letnikov derivative on the signal's own grid.

    ``(D^alpha f)(t_k) ~ step^-alpha * sum_{j=0}^{k} w_j f(t_{k-j})``.

    For a signal starting at zero this approximates the Caputo derivative.
    With ``subtract_initial`` the first sample is removed first, which gives
    the Caputo derivative of a signal with a nonzero starting value.
    Otherwise a nonzero start is logged as a warning, because the result is
    then the Riemann-Liouville derivative with its ``t^-alpha`` singularity.
    """
    order = as_order(alpha)
    samples = signal.samples
    if samples.shape[0] == 0:
        raise ValueError("cannot differentiate an empty signal")
    if samples.shape[0] < 2:
        raise ValueError("need at least two samples")
    if subtract_initial:
        samples = samples - samples[0]
    elif np.any(samples[0] != 0.0):
        logger.warning(
            "signal does not start at zero (max |f(0)| = %g); GL derivative is not Caputo",
            float(np.max(np.abs(samples[0]))),
        )
    if order.alpha == 1.0:
        deriv = np.empty_like(samples)
        deriv[0] = samples[0]
        deriv[1:] = np.diff(samples, axis=0)
        deriv /= signal.step
    else:
        w = gl_weights(order, samples.shape[0] - 1).weights
        deriv = _causal_convolve(w, samples) / signal.step**order.alpha
    return SampledSignal(signal.step, deriv, signal.start_time)
