"""Sampled residuals of the fractional Lyapunov inequalities.

Each function returns ``lhs - rhs`` of an inequality of the form
``lhs <= rhs`` on the sample grid, with all fractional derivatives taken by
:func:`~fomrac.grunwald.gl_derivative`. Non-positive values confirm the
inequality; positive excursions are discretization error.
"""

from __future__ import annotations

import numpy as np

from .grunwald import FracOrder, SampledSignal, as_order, gl_derivative
from .solver import Trajectory

__all__ = [
    "lemma1_residual",
    "lemma2_residual",
    "dissipation_check",
    "positive_excursion",
    "random_zero_start_signal",
]


def lemma1_residual(e_traj: SampledSignal, P, alpha: FracOrder | float) -> SampledSignal:
    """``(1/2) D^a(e^T P e) - e^T P D^a e`` for a zero-start vector signal."""
    order = as_order(alpha)
    e = np.asarray(e_traj.samples, dtype=float)
    P = np.asarray(P, dtype=float)
    if e.ndim != 2 or P.shape != (e.shape[1], e.shape[1]):
        raise ValueError(f"signal of shape {e.shape} does not fit P of shape {P.shape}")
    quad = np.einsum("ki,ij,kj->k", e, P, e)
    d_quad = gl_derivative(SampledSignal(e_traj.step, quad, e_traj.start_time), order).samples
    d_e = gl_derivative(e_traj, order).samples
    cross = np.einsum("ki,ij,kj->k", e, P, d_e)
    return SampledSignal(e_traj.step, 0.5 * d_quad - cross, e_traj.start_time)


def lemma2_residual(m_traj: SampledSignal, alpha: FracOrder | float) -> SampledSignal:
    """``(1/2) D^a tr(A^T A) - tr(A^T D^a A)`` for a zero-start matrix signal."""
    order = as_order(alpha)
    a = np.asarray(m_traj.samples, dtype=float)
    if a.ndim != 3:
        raise ValueError(f"expected samples of shape (N, rows, cols), got {a.shape}")
    frob = np.einsum("kij,kij->k", a, a)
    d_frob = gl_derivative(SampledSignal(m_traj.step, frob, m_traj.start_time), order).samples
    d_a = gl_derivative(m_traj, order).samples
    cross = np.einsum("kij,kij->k", a, d_a)
    return SampledSignal(m_traj.step, 0.5 * d_frob - cross, m_traj.start_time)


def dissipation_check(traj: Trajectory, P, Q, alpha: FracOrder | float) -> SampledSignal:
    """``D^a V + (1/2) e^T Q e`` along a closed-loop trajectory.

    ``V`` is taken from the trajectory's ``V`` channel. Its Caputo derivative
    is computed after removing ``V(0)``, which is nonzero whenever the
    initial gains differ from the matching gains. ``P`` is accepted for
    interface symmetry with the Lyapunov pair; ``V`` already contains it.
    """
    order = as_order(alpha)
    for name in ("V", "e1"):
        if name not in traj:
            raise KeyError(f"trajectory is missing the {name!r} channel")
    e = traj.stack("e")
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (e.shape[1], e.shape[1]) or np.asarray(P).shape != Q.shape:
        raise ValueError(f"P, Q must be {e.shape[1]}x{e.shape[1]}")
    dV = gl_derivative(SampledSignal(traj.step, traj["V"]), order, subtract_initial=True).samples
    return SampledSignal(traj.step, dV + 0.5 * np.einsum("ki,ij,kj->k", e, Q, e))


def positive_excursion(residual: SampledSignal) -> float:
    """Largest positive residual value, or 0 when the inequality holds everywhere."""
    return float(max(0.0, np.max(residual.samples)))


def random_zero_start_signal(rng: np.random.Generator, step: float, horizon: float, shape=(2,)):
    """Smooth random signal with ``f(0) = 0``: polynomial-times-sine plus a sine per entry.

    The draw depends only on ``rng`` and ``shape``, not on ``step``, so the
    same generator state gives the same underlying function at any step.
    """
    size = int(np.prod(shape))
    t = step * np.arange(int(round(horizon / step)) + 1)
    out = np.empty((len(t), size))
    for c in range(size):
        poly = rng.normal(size=3)
        freq = rng.uniform(0.5, 3.0, size=2)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.normal()
        envelope = poly[0] * t + poly[1] * t**2 + poly[2] * t**3
        out[:, c] = envelope * np.sin(freq[0] * t + phase) + amp * np.sin(freq[1] * t)
    return SampledSignal(step, out.reshape((len(t),) + tuple(shape)))
