"""Model reference adaptive control of commensurate fractional-order plants.

Plant ``D^a x = A x + B u + F(x)`` and reference model
``D^a x_m = A_m x_m + B_m r`` with the control law
``u = theta1 x + theta2 r + theta3 F(x)`` and the fractional adaptation laws

    D^a theta1 = -gain * (B^T P e) x^T
    D^a theta2 = -gain * (B^T P e) r
    D^a theta3 = -gain * (B^T P e) F^T

where ``e = x - x_m``. Since the plant's ``B`` is unknown in practice, the
laws use ``B_m`` by default (valid when the two have the same sign pattern).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grunwald import FracOrder, as_order
from .signals import SignalSpec, eval_signal
from .solver import FdeSystem, Trajectory

__all__ = [
    "BasisTerm",
    "NonlinearBasis",
    "PlantModel",
    "ReferenceModel",
    "ControllerState",
    "MatchingGains",
    "ParameterError",
    "LyapunovPair",
    "AdaptationConfig",
    "HurwitzCheck",
    "MatchingError",
    "eval_basis",
    "is_hurwitz",
    "is_positive_definite",
    "lyapunov_q",
    "solve_matching_gains",
    "control_input",
    "adaptation_rhs",
    "closed_loop_system",
    "closed_loop_channels",
    "parameter_errors",
    "lyapunov_value",
]

logger = logging.getLogger(__name__)

TRIG_KINDS = ("none", "sin", "cos")
B_EFFECTIVE = ("B_m", "true_B")

PD_TOLERANCE = 1e-9
HURWITZ_TOLERANCE = 1e-9
MATCHING_TOLERANCE = 1e-9


class MatchingError(ValueError):
    """No nominal gains make the plant match the reference model."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"matching condition violated: {message} (residual {residual:.3e})")
        self.residual = residual


# -- nonlinearity basis -------------------------------------------------------


@dataclass(frozen=True)
class BasisTerm:
    """``coeff * prod_i x_i^powers[i] * trig(x[trig_state])`` added to ``F[row]``.

    Indices are zero-based.
    """

    row: int
    coeff: float
    powers: tuple[int, ...]
    trig: str = "none"
    trig_state: int = 0

    def __post_init__(self):
        object.__setattr__(self, "powers", tuple(int(p) for p in self.powers))
        object.__setattr__(self, "coeff", float(self.coeff))
        if self.trig not in TRIG_KINDS:
            raise ValueError(f"trig must be one of {TRIG_KINDS}, got {self.trig!r}")
        if any(p < 0 for p in self.powers):
            raise ValueError(f"powers must be non-negative, got {self.powers}")
        if not any(self.powers) and self.trig in ("none", "cos"):
            raise ValueError(
                "basis term is nonzero at the origin; only terms vanishing at x = 0 are allowed"
            )


@dataclass(frozen=True)
class NonlinearBasis:
    dimension: int
    terms: tuple[BasisTerm, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        n = self.dimension
        for term in self.terms:
            if not 0 <= term.row < n:
                raise ValueError(f"basis term row {term.row} out of range for n = {n}")
            if len(term.powers) != n:
                raise ValueError(f"basis term needs {n} powers, got {len(term.powers)}")
            if term.trig != "none" and not 0 <= term.trig_state < n:
                raise ValueError(f"trig_state {term.trig_state} out of range for n = {n}")

    @property
    def active_rows(self) -> tuple[int, ...]:
        return tuple(sorted({t.row for t in self.terms if t.coeff != 0.0}))


def eval_basis(basis: NonlinearBasis, x) -> np.ndarray:
    """``F(x)``; ``x`` may carry leading sample axes, states on the last axis."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    for term in basis.terms:
        value = term.coeff
        for i, p in enumerate(term.powers):
            if p:
                value = value * x[..., i] ** p
        if term.trig == "sin":
            value = value * np.sin(x[..., term.trig_state])
        elif term.trig == "cos":
            value = value * np.cos(x[..., term.trig_state])
        out[..., term.row] += value
    return out


# -- models -------------------------------------------------------------------


def _matrix(value, shape, name):
    arr = np.array(value, dtype=float)
    if arr.ndim == 1 and len(shape) == 2 and shape[1] == 1:
        arr = arr.reshape(-1, 1)
    if arr.shape != shape:
        raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class PlantModel:
    A: np.ndarray
    B: np.ndarray
    basis: NonlinearBasis
    order: FracOrder

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        object.__setattr__(self, "A", _matrix(A, (n, n), "A"))
        object.__setattr__(self, "B", _matrix(self.B, (n, 1), "B"))
        object.__setattr__(self, "order", as_order(self.order))
        if not np.any(self.B):
            raise ValueError("B must be nonzero")
        if self.basis.dimension != n:
            raise ValueError(f"basis dimension {self.basis.dimension} does not match n = {n}")
        if not self.is_controllable():
            logger.warning("plant pair (A, B) is not controllable")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def is_controllable(self) -> bool:
        cols = [self.B]
        for _ in range(self.n - 1):
            cols.append(self.A @ cols[-1])
        return np.linalg.matrix_rank(np.hstack(cols)) == self.n


@dataclass(frozen=True)
class HurwitzCheck:
    stable: bool
    eigenvalues: np.ndarray

    def __bool__(self) -> bool:
        return self.stable


def is_hurwitz(M, tol: float = HURWITZ_TOLERANCE) -> HurwitzCheck:
    """True iff every eigenvalue of ``M`` has real part below ``-tol``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    try:
        eig = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigenvalue computation failed: {exc}") from exc
    return HurwitzCheck(bool(np.all(eig.real < -tol)), eig)


@dataclass(frozen=True)
class ReferenceModel:
    A_m: np.ndarray
    B_m: np.ndarray
    reference: SignalSpec = field(default_factory=SignalSpec)

    def __post_init__(self):
        A_m = np.array(self.A_m, dtype=float)
        if A_m.ndim != 2 or A_m.shape[0] != A_m.shape[1]:
            raise ValueError(f"A_m must be square, got shape {A_m.shape}")
        n = A_m.shape[0]
        object.__setattr__(self, "A_m", _matrix(A_m, (n, n), "A_m"))
        object.__setattr__(self, "B_m", _matrix(self.B_m, (n, 1), "B_m"))
        check = is_hurwitz(self.A_m)
        if not check:
            raise ValueError(f"A_m not Hurwitz: eigenvalues {np.round(check.eigenvalues, 6)}")

    @property
    def n(self) -> int:
        return self.A_m.shape[0]


# -- gains --------------------------------------------------------------------


@dataclass(frozen=True)
class ControllerState:
    theta1: np.ndarray
    theta2: float
    theta3: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta1", np.asarray(self.theta1, dtype=float).reshape(-1))
        object.__setattr__(self, "theta2", float(self.theta2))
        object.__setattr__(self, "theta3", np.asarray(self.theta3, dtype=float).reshape(-1))
        if self.theta1.shape != self.theta3.shape:
            raise ValueError("theta1 and theta3 must have the same length")
        if not (
            np.all(np.isfinite(self.theta1))
            and math.isfinite(self.theta2)
            and np.all(np.isfinite(self.theta3))
        ):
            raise ValueError("controller gains must be finite")

    @classmethod
    def zeros(cls, n: int) -> ControllerState:
        return cls(np.zeros(n), 0.0, np.zeros(n))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.theta1, [self.theta2], self.theta3])


@dataclass(frozen=True)
class MatchingGains:
    theta1_0: np.ndarray
    theta2_0: float
    theta3_0: np.ndarray
    residual: float

    def as_state(self) -> ControllerState:
        return ControllerState(self.theta1_0, self.theta2_0, self.theta3_0)


@dataclass(frozen=True)
class ParameterError:
    J: np.ndarray
    K: float
    L: np.ndarray


def solve_matching_gains(
    plant: PlantModel, ref: ReferenceModel, tol: float = MATCHING_TOLERANCE
) -> MatchingGains:
    """Nominal gains making the controlled plant equal to the reference model.

    Solves ``B theta1_0 = A_m - A`` and ``B theta2_0 = B_m`` in the least
    squares sense and takes ``theta3_0 = -pinv(B)``; the residual is the
    largest unmatched component, where for ``theta3_0`` only the columns of
    ``B theta3_0 + I`` acted on by a nonzero basis row count.

    Raises
    ------
    MatchingError
        If the residual exceeds ``tol``.
    """
    if plant.n != ref.n:
        raise ValueError(f"plant has {plant.n} states, reference model {ref.n}")
    B = plant.B
    theta1_0 = np.linalg.lstsq(B, ref.A_m - plant.A, rcond=None)[0]
    theta2_0 = np.linalg.lstsq(B, ref.B_m, rcond=None)[0]
    theta3_0 = -np.linalg.pinv(B) + 0.0  # no negative zeros

    res1 = np.linalg.norm(B @ theta1_0 - (ref.A_m - plant.A))
    res2 = np.linalg.norm(B @ theta2_0 - ref.B_m)
    active = list(plant.basis.active_rows)
    cancel = B @ theta3_0 + np.eye(plant.n)
    res3 = np.linalg.norm(cancel[:, active]) if active else 0.0
    residual = float(max(res1, res2, res3))
    if residual > tol:
        worst = ("A_m - A", "B_m", "nonlinearity")[int(np.argmax([res1, res2, res3]))]
        raise MatchingError(f"{worst} is not in the span of B", residual)
    return MatchingGains(theta1_0.reshape(-1), float(theta2_0[0, 0]), theta3_0.reshape(-1), residual)


def parameter_errors(theta: ControllerState, gains: MatchingGains) -> ParameterError:
    return ParameterError(
        theta.theta1 - gains.theta1_0,
        theta.theta2 - gains.theta2_0,
        theta.theta3 - gains.theta3_0,
    )


def control_input(theta: ControllerState, x, r: float, Fx) -> float:
    """``u = theta1 x + theta2 r + theta3 F(x)``."""
    return float(theta.theta1 @ np.asarray(x, float) + theta.theta2 * r
                 + theta.theta3 @ np.asarray(Fx, float))


# -- Lyapunov quantities ------------------------------------------------------


def is_positive_definite(M, tol: float = PD_TOLERANCE) -> bool:
    M = np.asarray(M, dtype=float)
    return bool(np.linalg.eigvalsh(0.5 * (M + M.T)).min() > tol)


@dataclass(frozen=True)
class LyapunovPair:
    P: np.ndarray
    Q: np.ndarray
    p_positive_definite: bool
    q_positive_definite: bool


def lyapunov_q(P, A_m) -> LyapunovPair:
    """``Q = -(P A_m + A_m^T P)`` with positive-definiteness verdicts."""
    P = np.asarray(P, dtype=float)
    A_m = np.asarray(A_m, dtype=float)
    if P.ndim != 2 or P.shape != A_m.shape or P.shape[0] != P.shape[1]:
        raise ValueError(f"P {P.shape} and A_m {A_m.shape} must be square of equal size")
    if not np.array_equal(P, P.T):
        raise ValueError("P must be symmetric")
    Q = -(P @ A_m + A_m.T @ P)
    return LyapunovPair(P, Q, is_positive_definite(P), is_positive_definite(Q))


def lyapunov_value(e, P, perr: ParameterError) -> float:
    """``V = (e^T P e + |J|^2 + K^2 + |L|^2) / 2``."""
    e = np.asarray(e, dtype=float)
    return 0.5 * float(
        e @ np.asarray(P, float) @ e + perr.J @ perr.J + perr.K**2 + perr.L @ perr.L
    )


# -- adaptation and closed loop -----------------------------------------------


@dataclass(frozen=True)
class AdaptationConfig:
    """Adaptation settings.

    ``enabled=False`` freezes the gains at ``theta_initial``.
    """

    P: np.ndarray
    b_effective: str = "B_m"
    gain: float = 1.0
    theta_initial: ControllerState | None = None
    enabled: bool = True

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        object.__setattr__(self, "P", P)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or not np.array_equal(P, P.T):
            raise ValueError("P must be a symmetric square matrix")
        if not is_positive_definite(P):
            raise ValueError("P must be positive definite")
        if self.b_effective not in B_EFFECTIVE:
            raise ValueError(f"b_effective must be one of {B_EFFECTIVE}, got {self.b_effective!r}")
        if not self.gain > 0.0:
            raise ValueError(f"adaptation gain must be positive, got {self.gain!r}")

    def initial_state(self, n: int) -> ControllerState:
        theta = self.theta_initial or ControllerState.zeros(n)
        if theta.theta1.shape != (n,):
            raise ValueError(f"theta_initial has {theta.theta1.size} entries per row, expected {n}")
        return theta


def adaptation_rhs(e, x, r: float, Fx, cfg: AdaptationConfig, B_col):
    """Fractional derivatives of ``(theta1, theta2, theta3)``.

    With ``s = B_col^T P e`` these are ``-gain * s * (x, r, Fx)``.
    """
    B_col = np.asarray(B_col, dtype=float).reshape(-1)
    s = float(B_col @ cfg.P @ np.asarray(e, float))
    g = cfg.gain * s
    return -g * np.asarray(x, float), -g * r, -g * np.asarray(Fx, float)


def _effective_b(plant: PlantModel, ref: ReferenceModel, cfg: AdaptationConfig) -> np.ndarray:
    return (plant.B if cfg.b_effective == "true_B" else ref.B_m).reshape(-1)


def state_names(n: int) -> tuple[str, ...]:
    return (
        tuple(f"x{i + 1}" for i in range(n))
        + tuple(f"xm{i + 1}" for i in range(n))
        + tuple(f"theta1_{i + 1}" for i in range(n))
        + ("theta2",)
        + tuple(f"theta3_{i + 1}" for i in range(n))
    )


def closed_loop_system(
    plant: PlantModel,
    ref: ReferenceModel,
    cfg: AdaptationConfig,
    plant_initial: Sequence[float] | None = None,
) -> FdeSystem:
    """Stack plant, reference model and gains into one commensurate system.

    State layout: ``[x (n), x_m (n), theta1 (n), theta2, theta3 (n)]``.
    ``plant_initial`` perturbs ``x(0)``; it defaults to zero.
    """
    n = plant.n
    if ref.n != n:
        raise ValueError(f"plant has {n} states, reference model {ref.n}")
    P = cfg.P
    if P.shape != (n, n):
        raise ValueError(f"P has shape {P.shape}, expected {(n, n)}")
    theta0 = cfg.initial_state(n)
    try:
        solve_matching_gains(plant, ref)
    except MatchingError as exc:
        logger.warning("closed loop assembled without a matching solution: %s", exc)

    A, B, F = plant.A, plant.B.reshape(-1), plant.basis
    A_m, B_m = ref.A_m, ref.B_m.reshape(-1)
    # adaptation direction row vector: s = (B_eff^T P) e
    bp = _effective_b(plant, ref, cfg) @ P
    gain = cfg.gain
    adapt = cfg.enabled
    signal = ref.reference

    def rhs(t, z):
        x = z[:n]
        xm = z[n:2 * n]
        th1 = z[2 * n:3 * n]
        th2 = z[3 * n]
        th3 = z[3 * n + 1:]
        r = eval_signal(signal, t)
        Fx = eval_basis(F, x)
        u = th1 @ x + th2 * r + th3 @ Fx
        out = np.empty_like(z)
        out[:n] = A @ x + B * u + Fx
        out[n:2 * n] = A_m @ xm + B_m * r
        if adapt:
            g = gain * (bp @ (x - xm))
            out[2 * n:3 * n] = -g * x
            out[3 * n] = -g * r
            out[3 * n + 1:] = -g * Fx
        else:
            out[2 * n:] = 0.0
        return out

    initial = np.zeros(4 * n + 1)
    if plant_initial is not None:
        x0 = np.asarray(plant_initial, dtype=float).reshape(-1)
        if x0.shape != (n,):
            raise ValueError(f"plant_initial needs {n} entries, got {x0.size}")
        initial[:n] = x0
    initial[2 * n:] = theta0.as_vector()
    return FdeSystem(4 * n + 1, plant.order, rhs, initial=initial, names=state_names(n))


def closed_loop_channels(
    traj: Trajectory,
    plant: PlantModel,
    ref: ReferenceModel,
    cfg: AdaptationConfig,
) -> Trajectory:
    """Add ``r``, ``e1..en``, ``u`` and ``V`` channels to a closed-loop trajectory.

    ``V`` needs the matching gains; it is NaN when the plant cannot be matched.
    """
    n = plant.n
    x = traj.stack("x")[:, :n]
    xm = traj.stack("xm")
    th1 = traj.stack("theta1_")
    th2 = traj["theta2"]
    th3 = traj.stack("theta3_")
    t = traj.times
    r = np.array([eval_signal(ref.reference, ti) for ti in t])
    Fx = eval_basis(plant.basis, x)
    u = np.einsum("ki,ki->k", th1, x) + th2 * r + np.einsum("ki,ki->k", th3, Fx)
    e = x - xm

    try:
        gains = solve_matching_gains(plant, ref)
    except MatchingError:
        V = np.full(len(t), np.nan)
    else:
        J = th1 - gains.theta1_0
        K = th2 - gains.theta2_0
        L = th3 - gains.theta3_0
        V = 0.5 * (
            np.einsum("ki,ij,kj->k", e, cfg.P, e)
            + np.sum(J * J, axis=1) + K * K + np.sum(L * L, axis=1)
        )

    channels = dict(traj.channels)
    channels["r"] = r
    for i in range(n):
        channels[f"e{i + 1}"] = e[:, i]
    channels["u"] = u
    channels["V"] = V
    return Trajectory(traj.step, channels, traj.diverged_at)
