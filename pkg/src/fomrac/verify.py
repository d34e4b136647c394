"""Verification suites: oracle checks for the kernels, the solvers and the controller."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from .config import ExperimentConfig, load_config
from .diagnostics import (
    dissipation_check,
    lemma1_residual,
    lemma2_residual,
    positive_excursion,
    random_zero_start_signal,
)
from .experiment import run_experiment, window_max_error
from .grunwald import SampledSignal, gl_derivative, gl_weights
from .mrac import (
    AdaptationConfig,
    closed_loop_channels,
    closed_loop_system,
    lyapunov_q,
    solve_matching_gains,
)
from .solver import FdeSystem, SolverConfig, simulate_abm, simulate_gl
from .special import gamma, mittag_leffler

__all__ = [
    "CheckResult",
    "VerificationReport",
    "verify_suite",
    "LEVELS",
    "DISSIPATION_CONSTANT",
    "LEMMA_CONSTANT",
    "group_names",
]

LEVELS = ("kernel", "solver", "mrac", "all")

# residual bounds: lemma residuals <= LEMMA_CONSTANT * step,
# dissipation residual <= DISSIPATION_CONSTANT * step**alpha
LEMMA_CONSTANT = 1.0
DISSIPATION_CONSTANT = 2000.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"[{status}] {self.name}: {self.value:.6g} (tolerance {self.tolerance:.3g})"
        return f"{text} {self.detail}" if self.detail else text


@dataclass
class VerificationReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self) -> list[str]:
        return [c.name for c in self.checks]

    def summary(self) -> str:
        lines = [c.line() for c in self.checks]
        n_ok = sum(c.passed for c in self.checks)
        lines.append(f"{n_ok}/{len(self.checks)} checks passed")
        return "\n".join(lines)


def _upper(name, value, tol, detail=""):
    return CheckResult(name, bool(value <= tol), float(value), float(tol), detail)


# -- kernel -------------------------------------------------------------------


def check_gamma_recurrence() -> CheckResult:
    x = np.linspace(0.5, 10.0, 191)
    err = max(abs(gamma(v + 1) - v * gamma(v)) / gamma(v + 1) for v in x)
    return _upper("gamma_recurrence", err, 1e-12)


def gl_weight_gamma_quotient(alpha: float, j: int) -> float:
    """``Gamma(j - alpha) / (Gamma(-alpha) Gamma(j + 1))`` with positive gamma arguments only."""
    if j == 0:
        return 1.0
    if alpha == 1.0:
        return -1.0 if j == 1 else 0.0
    return -alpha * gamma(j - alpha) / (gamma(1.0 - alpha) * gamma(j + 1.0))


def check_gl_weights() -> CheckResult:
    err = 0.0
    for alpha in (0.1, 0.3, 0.5, 0.7, 0.9, 1.0):
        w = gl_weights(alpha, 50).weights
        for j in range(51):
            err = max(err, abs(w[j] - gl_weight_gamma_quotient(alpha, j)))
    return _upper("gl_weights_vs_gamma_quotient", err, 1e-10, "j <= 50")


def check_ml_exponential() -> CheckResult:
    z = np.linspace(-2.0, 2.0, 81)
    err = max(abs(mittag_leffler(1.0, 1.0, v) - math.exp(v)) for v in z)
    return _upper("mittag_leffler_E11_exp", err, 1e-10, "|z| <= 2")


def check_ml_e12() -> CheckResult:
    z = [v for v in np.linspace(-2.0, 2.0, 80) if v != 0.0]
    err = max(abs(mittag_leffler(1.0, 2.0, v) - math.expm1(v) / v) for v in z)
    return _upper("mittag_leffler_E12", err, 1e-10, "|z| <= 2")


def check_ml_half() -> CheckResult:
    z = np.linspace(-2.0, 2.0, 41)
    err = max(abs(mittag_leffler(0.5, 1.0, v) - math.exp(v * v) * math.erfc(-v)) for v in z)
    return _upper("mittag_leffler_E_half_erfc", err, 1e-9, "|z| <= 2")


def check_gl_power_rule() -> CheckResult:
    step = 0.01
    t = step * np.arange(101)
    d = gl_derivative(SampledSignal(step, t), 0.5).samples[-1]
    err = abs(d - 1.0 / gamma(1.5))
    return _upper("gl_derivative_power_rule", err, step, "D^0.5 t at t=1, step 0.01")


def check_gl_convergence() -> CheckResult:
    worst = 0.0
    for alpha in (0.3, 0.7):
        errs = []
        for step in (0.01, 0.005):
            t = step * np.arange(int(round(1 / step)) + 1)
            d = gl_derivative(SampledSignal(step, t**2), alpha).samples
            errs.append(np.max(np.abs(d - 2 * t ** (2 - alpha) / gamma(3 - alpha))))
        worst = max(worst, errs[1] / errs[0])
    return _upper("gl_derivative_first_order", worst, 0.55, "error ratio on halving")


# -- solver -------------------------------------------------------------------


def _const_system(alpha, value=1.0):
    return FdeSystem(1, alpha, lambda t, x: np.full(1, value))


def check_power_rule_solver() -> list[CheckResult]:
    exact = 1.0 / gamma(1.7)
    sys = _const_system(0.7)
    errs = [
        abs(simulate_gl(sys, SolverConfig(step=h, horizon=1.0))["x1"][-1] - exact) / exact
        for h in (1e-3, 5e-4)
    ]
    abm = abs(simulate_abm(sys, SolverConfig(step=1e-3, horizon=1.0))["x1"][-1] - exact) / exact
    return [
        _upper("solver_power_rule_gl", errs[0], 5e-3, "relative, step 1e-3"),
        _upper("solver_power_rule_halving", errs[1] / errs[0], 1.0 - 1e-12, "error ratio"),
        _upper("solver_power_rule_abm_vs_gl", abm, errs[0], "abm error <= gl error"),
    ]


def check_ml_oracle_solver() -> list[CheckResult]:
    sys = FdeSystem(1, 0.7, lambda t, x: 1.0 - x)
    exact = mittag_leffler(0.7, 1.7, -1.0)
    cfg = SolverConfig(step=1e-3, horizon=1.0)
    gl = simulate_gl(sys, cfg)["x1"][-1]
    abm = simulate_abm(sys, cfg)["x1"][-1]
    return [
        _upper("solver_mittag_leffler_gl", abs(gl - exact), 1e-2),
        _upper("solver_mittag_leffler_gl_vs_abm", abs(gl - abm), 1e-2),
    ]


def check_abm_integer_order() -> CheckResult:
    sys = FdeSystem(1, 1.0, lambda t, x: x + 1.0)
    x = simulate_abm(sys, SolverConfig(step=1e-3, horizon=1.0))["x1"][-1]
    return _upper("solver_abm_integer_order", abs(x - (math.e - 1.0)), 1e-3)


def _euler_test_rhs(t, x):
    return np.array([x[1], x[0] + x[1] + x[0] ** 2 + math.sin(x[1]) + math.sin(t)])


def check_euler_degeneration() -> CheckResult:
    cfg = SolverConfig(step=1e-3, horizon=2.0)
    traj = simulate_gl(FdeSystem(2, 1.0, _euler_test_rhs), cfg)
    x = np.zeros(2)
    err = 0.0
    for k in range(1, cfg.num_steps + 1):
        x = x + cfg.step * _euler_test_rhs((k - 1) * cfg.step, x)
        err = max(err, abs(traj["x1"][k] - x[0]), abs(traj["x2"][k] - x[1]))
    return _upper("solver_alpha1_is_euler", err, 1e-12, "per sample")


def check_superposition() -> CheckResult:
    A = np.array([[0.0, 1.0], [-2.0, -0.5]])
    b1 = lambda t: np.array([0.0, math.sin(t)])  # noqa: E731
    b2 = lambda t: np.array([1.0, 0.3 * t])  # noqa: E731
    cfg = SolverConfig(step=1e-3, horizon=5.0)

    def run(forcing):
        traj = simulate_gl(FdeSystem(2, 0.6, lambda t, x: A @ x + forcing(t)), cfg)
        return traj.stack("x")

    err = np.max(np.abs(run(lambda t: b1(t) + b2(t)) - run(b1) - run(b2)))
    return _upper("solver_linear_superposition", err, 1e-9)


# -- controller ---------------------------------------------------------------

EXPECTED_Q = np.array([[100.0, 130.0], [130.0, 180.0]])


def demo_config() -> ExperimentConfig:
    return load_config("paper_sec4")


def check_q_reproduction(config: ExperimentConfig) -> CheckResult:
    pair = lyapunov_q(config.adaptation.P, config.reference.A_m)
    ok = np.array_equal(pair.Q, EXPECTED_Q) and pair.p_positive_definite and pair.q_positive_definite
    return CheckResult(
        "lyapunov_q_reproduction", bool(ok), float(np.max(np.abs(pair.Q - EXPECTED_Q))), 0.0,
        f"P PD={pair.p_positive_definite}, Q PD={pair.q_positive_definite}",
    )


def check_lyapunov_exactness(config: ExperimentConfig, q_fault: float = 0.0) -> CheckResult:
    pair = lyapunov_q(config.adaptation.P, config.reference.A_m)
    Q = pair.Q + q_fault
    A_m = config.reference.A_m
    err = np.max(np.abs(-Q - (pair.P @ A_m + A_m.T @ pair.P)))
    return CheckResult("lyapunov_q_exactness", bool(err == 0.0), float(err), 0.0, "bit-level")


def check_matching_gains(config: ExperimentConfig) -> CheckResult:
    g = solve_matching_gains(config.plant, config.reference)
    err = max(
        np.max(np.abs(g.theta1_0 - [-6.0, -6.0])),
        abs(g.theta2_0 - 5.0),
        np.max(np.abs(g.theta3_0 - [0.0, -1.0])),
        g.residual,
    )
    return _upper("matching_gains", err, 1e-12)


def check_matching_identity(config: ExperimentConfig) -> CheckResult:
    gains = solve_matching_gains(config.plant, config.reference)
    adaptation = replace(config.adaptation, theta_initial=gains.as_state(), enabled=False)
    cfg = replace(config, adaptation=adaptation)
    traj, _ = run_experiment(cfg, write_output=False)
    err = float(np.max(np.abs(traj.stack("e"))))
    return _upper("matching_identity", err, 1e-6, f"over {config.solver.horizon:g} s")


def check_closed_loop(config: ExperimentConfig) -> list[CheckResult]:
    traj, metrics = run_experiment(config, write_output=False)
    horizon = config.solver.horizon
    window = horizon / 5.0
    early = window_max_error(traj, 0.0, window) if not metrics.diverged else math.inf
    late = window_max_error(traj, horizon - window, horizon) if not metrics.diverged else math.inf
    windowed = replace(config, solver=replace(config.solver, memory_window=20.0))
    _, m20 = run_experiment(windowed, write_output=False)
    drift = abs(m20.final_window_max_error - metrics.final_window_max_error)
    rel_drift = drift / metrics.final_window_max_error if metrics.final_window_max_error else math.inf
    return [
        CheckResult("closed_loop_not_diverged", not metrics.diverged,
                    float(metrics.diverged), 0.0),
        _upper("closed_loop_final_window_error", metrics.final_window_max_error, 0.05),
        CheckResult("closed_loop_error_reduction", bool(early >= 10.0 * late),
                    float(early / late) if late else math.inf, 10.0,
                    f"max|e| first window {early:.4g}, last window {late:.4g}"),
        _upper("closed_loop_memory_window_20s", rel_drift, 0.10, "relative metric change"),
    ]


def check_open_loop(config: ExperimentConfig) -> CheckResult:
    n = config.plant.n
    adaptation = replace(config.adaptation, theta_initial=None, enabled=False)
    perturbed = (1e-6,) + (0.0,) * (n - 1)
    cfg = replace(config, adaptation=adaptation, plant_initial=perturbed,
                  solver=replace(config.solver, horizon=20.0))
    _, metrics = run_experiment(cfg, write_output=False)
    t = metrics.diverged_at if metrics.diverged else math.inf
    return CheckResult("open_loop_diverges", metrics.diverged, t, 20.0,
                       "u = 0, x1(0) = 1e-6; value is blow-up time")


def lemma_suite(n_signals: int = 100, step: float = 0.01, horizon: float = 2.0, seed: int = 0):
    """Worst positive excursions of both lemma residuals at ``step`` and ``step / 2``."""
    rng = np.random.default_rng(seed)
    worst = {("lemma1", step): 0.0, ("lemma1", step / 2): 0.0,
             ("lemma2", step): 0.0, ("lemma2", step / 2): 0.0}
    for _ in range(n_signals):
        alpha = float(rng.uniform(0.05, 1.0))
        M = rng.normal(size=(2, 2))
        P = M @ M.T + 0.5 * np.eye(2)
        state = rng.bit_generator.state
        for h in (step, step / 2):
            rng.bit_generator.state = state
            e = random_zero_start_signal(rng, h, horizon, (2,))
            m = random_zero_start_signal(rng, h, horizon, (2, 2))
            worst["lemma1", h] = max(worst["lemma1", h],
                                     positive_excursion(lemma1_residual(e, P, alpha)))
            worst["lemma2", h] = max(worst["lemma2", h],
                                     positive_excursion(lemma2_residual(m, alpha)))
    return worst


def _shrinks(coarse: float, fine: float) -> bool:
    # A zero excursion at both steps means the discrete inequality holds
    # exactly; there is no discretization error left to shrink.
    return fine < coarse or (coarse == 0.0 and fine == 0.0)


def check_lemmas(step: float = 0.01) -> list[CheckResult]:
    worst = lemma_suite(step=step)
    out = []
    for lemma in ("lemma1", "lemma2"):
        coarse, fine = worst[lemma, step], worst[lemma, step / 2]
        out.append(_upper(f"{lemma}_residual_bound", coarse, LEMMA_CONSTANT * step,
                          "worst positive excursion, 100 signals"))
        out.append(CheckResult(f"{lemma}_residual_shrinks", _shrinks(coarse, fine), fine, coarse,
                               "excursion at step/2 vs step"))
    return out


def dissipation_excursions(config: ExperimentConfig, steps=(1e-3, 5e-4)) -> dict[float, float]:
    adaptation = replace(config.adaptation, b_effective="true_B")
    pair = lyapunov_q(adaptation.P, config.reference.A_m)
    system = closed_loop_system(config.plant, config.reference, adaptation)
    out = {}
    for h in steps:
        solver = replace(config.solver, step=h, memory_window="full", scheme="explicit_gl")
        traj = closed_loop_channels(simulate_gl(system, solver), config.plant,
                                    config.reference, adaptation)
        out[h] = positive_excursion(
            dissipation_check(traj, pair.P, pair.Q, config.plant.order))
    return out


def check_dissipation(config: ExperimentConfig) -> list[CheckResult]:
    exc = dissipation_excursions(config)
    (h1, e1), (h2, e2) = sorted(exc.items(), reverse=True)
    alpha = config.order
    return [
        _upper("dissipation_bound", e1, DISSIPATION_CONSTANT * h1**alpha, f"step {h1:g}"),
        _upper("dissipation_bound_half_step", e2, DISSIPATION_CONSTANT * h2**alpha, f"step {h2:g}"),
        CheckResult("dissipation_shrinks", bool(e2 < e1), e2, e1, "excursion at step/2 vs step"),
    ]


# -- suites -------------------------------------------------------------------


def _kernel_checks():
    return [
        ("gamma_recurrence", check_gamma_recurrence),
        ("gl_weights_vs_gamma_quotient", check_gl_weights),
        ("mittag_leffler_E11_exp", check_ml_exponential),
        ("mittag_leffler_E12", check_ml_e12),
        ("mittag_leffler_E_half_erfc", check_ml_half),
        ("gl_derivative_power_rule", check_gl_power_rule),
        ("gl_derivative_first_order", check_gl_convergence),
    ]


def _solver_checks():
    return [
        ("solver_power_rule", check_power_rule_solver),
        ("solver_mittag_leffler", check_ml_oracle_solver),
        ("solver_abm_integer_order", check_abm_integer_order),
        ("solver_alpha1_is_euler", check_euler_degeneration),
        ("solver_linear_superposition", check_superposition),
    ]


def _mrac_checks(config: ExperimentConfig, q_fault: float):
    return [
        ("lyapunov_q_reproduction", lambda: check_q_reproduction(config)),
        ("lyapunov_q_exactness", lambda: check_lyapunov_exactness(config, q_fault)),
        ("matching_gains", lambda: check_matching_gains(config)),
        ("matching_identity", lambda: check_matching_identity(config)),
        ("closed_loop", lambda: check_closed_loop(config)),
        ("open_loop_diverges", lambda: check_open_loop(config)),
        ("lemma_residuals", check_lemmas),
        ("dissipation", lambda: check_dissipation(config)),
    ]


def group_names(level: str = "all") -> list[str]:
    """Names accepted by ``verify_suite(select=...)`` at this level."""
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}, got {level!r}")
    names = []
    if level in ("kernel", "all"):
        names += [name for name, _ in _kernel_checks()]
    if level in ("solver", "all"):
        names += [name for name, _ in _solver_checks()]
    if level in ("mrac", "all"):
        names += [name for name, _ in _mrac_checks(None, 0.0)]
    return names


def verify_suite(
    level: str = "all",
    *,
    q_fault: float = 0.0,
    select: Iterable[str] | None = None,
    config: ExperimentConfig | None = None,
) -> VerificationReport:
    """Run the checks of one level (``kernel``, ``solver``, ``mrac`` or ``all``).

    ``select`` restricts the run to the named check groups. ``q_fault`` is
    added to the computed Q before the exactness check (fault injection).
    Controller checks use the shipped ``paper_sec4`` experiment unless
    ``config`` is given.
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}, got {level!r}")
    groups: list[tuple[str, Callable]] = []
    if level in ("kernel", "all"):
        groups += _kernel_checks()
    if level in ("solver", "all"):
        groups += _solver_checks()
    if level in ("mrac", "all"):
        groups += _mrac_checks(config or demo_config(), q_fault)
    if select is not None:
        wanted = set(select)
        unknown = wanted - {name for name, _ in groups}
        if unknown:
            raise ValueError(f"unknown check(s) for level {level!r}: {sorted(unknown)}")
        groups = [(name, fn) for name, fn in groups if name in wanted]

    report = VerificationReport()
    for _, fn in groups:
        result = fn()
        report.checks.extend(result if isinstance(result, list) else [result])
    return report
