"""Acceptance criteria for the package.

Each test prints one ``ACCEPTANCE <n> PASS|FAIL`` line (shown even under
output capture) and then asserts the same condition. Tolerances are fixed
here and must not be relaxed to make a criterion pass.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python -m tests.test_acceptance``.
"""

import math
from dataclasses import replace

import mpmath
import numpy as np
import pytest

from fomrac.experiment import run_experiment, window_max_error
from fomrac.grunwald import gl_weights
from fomrac.mrac import lyapunov_q, solve_matching_gains
from fomrac.solver import FdeSystem, SolverConfig, simulate_abm, simulate_gl
from fomrac.special import gamma, mittag_leffler
from fomrac.verify import (
    DISSIPATION_CONSTANT,
    LEMMA_CONSTANT,
    dissipation_excursions,
    gl_weight_gamma_quotient,
    lemma_suite,
)

# pinned tolerances
Q_EXPECTED = np.array([[100.0, 130.0], [130.0, 180.0]])
MATCHING_RESIDUAL = 1e-12
POWER_RULE_REL = 5e-3
ML_ABS = 1e-2
EULER_ABS = 1e-12
FINAL_WINDOW_ERROR = 0.05
ERROR_REDUCTION = 10.0
MEMORY_WINDOW_REL = 0.10
OPEN_LOOP_HORIZON = 20.0
MATCHING_IDENTITY = 1e-6
GAMMA_REL = 1e-12
GL_QUOTIENT = 1e-10
ML_KERNEL = 1e-10


def report(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'} {title}: {detail}")
    assert ok, f"criterion {number} ({title}) failed: {detail}"


@pytest.fixture(scope="module")
def closed_loop(demo_config):
    traj, metrics = run_experiment(demo_config, write_output=False)
    windowed = replace(demo_config, solver=replace(demo_config.solver, memory_window=20.0))
    _, m20 = run_experiment(windowed, write_output=False)
    return traj, metrics, m20


def test_criterion_01_q_matrix(capsys):
    pair = lyapunov_q([[20.0, 10.0], [10.0, 20.0]], [[0.0, 1.0], [-5.0, -5.0]])
    ok = np.array_equal(pair.Q, Q_EXPECTED) and pair.p_positive_definite and pair.q_positive_definite
    report(capsys, 1, "Q-matrix reproduction", ok,
           f"Q={pair.Q.tolist()} P PD={pair.p_positive_definite} Q PD={pair.q_positive_definite}")


def test_criterion_02_matching_gains(capsys, demo_config):
    g = solve_matching_gains(demo_config.plant, demo_config.reference)
    ok = (
        np.array_equal(g.theta1_0, [-6.0, -6.0])
        and g.theta2_0 == 5.0
        and np.array_equal(g.theta3_0, [0.0, -1.0])
        and g.residual <= MATCHING_RESIDUAL
    )
    report(capsys, 2, "matching gains", ok,
           f"theta1_0={g.theta1_0.tolist()} theta2_0={g.theta2_0} "
           f"theta3_0={g.theta3_0.tolist()} residual={g.residual:.2e}")


def test_criterion_03_power_rule(capsys):
    exact = 1.0 / float(mpmath.gamma(1.7))
    sys = FdeSystem(1, 0.7, lambda t, x: np.ones(1))
    errs = [
        abs(simulate_gl(sys, SolverConfig(step=h, horizon=1.0))["x1"][-1] - exact)
        for h in (1e-3, 5e-4)
    ]
    ok = errs[0] / exact <= POWER_RULE_REL and errs[1] < errs[0]
    report(capsys, 3, "solver power rule", ok,
           f"rel err {errs[0] / exact:.3e} (<= {POWER_RULE_REL}), halved step {errs[1] / exact:.3e}")


def test_criterion_04_mittag_leffler(capsys):
    with mpmath.workdps(30):
        exact = float(mpmath.nsum(lambda k: (-1) ** k / mpmath.gamma(0.7 * k + 1.7), [0, mpmath.inf]))
    sys = FdeSystem(1, 0.7, lambda t, x: 1.0 - x)
    cfg = SolverConfig(step=1e-3, horizon=1.0)
    gl = simulate_gl(sys, cfg)["x1"][-1]
    abm = simulate_abm(sys, cfg)["x1"][-1]
    ok = abs(gl - exact) <= ML_ABS and abs(gl - abm) <= ML_ABS
    report(capsys, 4, "solver Mittag-Leffler oracle", ok,
           f"|GL-exact|={abs(gl - exact):.3e} |GL-ABM|={abs(gl - abm):.3e} (<= {ML_ABS})")


def test_criterion_05_euler(capsys):
    def rhs(t, x):
        return np.array([x[1], -np.sin(x[0]) - 0.2 * x[1] + np.cos(t), x[0] * x[2] - 0.5])

    cfg = SolverConfig(step=1e-2, horizon=5.0)
    traj = simulate_gl(FdeSystem(3, 1.0, rhs, initial=[0.1, 0.0, 1.0]), cfg).stack("x")
    x = np.array([0.1, 0.0, 1.0])
    worst = 0.0
    for k in range(1, cfg.num_steps + 1):
        x = x + cfg.step * rhs((k - 1) * cfg.step, x)
        worst = max(worst, float(np.max(np.abs(traj[k] - x))))
    report(capsys, 5, "integer-order degeneration", worst <= EULER_ABS,
           f"max |GL - Euler| = {worst:.3e} (<= {EULER_ABS})")


def test_criterion_06_closed_loop(capsys, closed_loop, demo_config):
    traj, metrics, m20 = closed_loop
    horizon = demo_config.solver.horizon
    early = window_max_error(traj, 0.0, 20.0) if not metrics.diverged else math.inf
    late = window_max_error(traj, horizon - 20.0, horizon) if not metrics.diverged else math.inf
    drift = abs(m20.final_window_max_error - metrics.final_window_max_error)
    rel = drift / metrics.final_window_max_error
    ok = (
        not metrics.diverged
        and metrics.final_window_max_error < FINAL_WINDOW_ERROR
        and early >= ERROR_REDUCTION * late
        and rel <= MEMORY_WINDOW_REL
    )
    report(capsys, 6, "closed loop tracking", ok,
           f"diverged={metrics.diverged} final_window_max_error="
           f"{metrics.final_window_max_error:.4g} (< {FINAL_WINDOW_ERROR}) "
           f"max|e| [0,20]={early:.4g} [80,100]={late:.4g} ratio={early / late:.3g} "
           f"(>= {ERROR_REDUCTION}) 20 s memory drift={rel:.3g} (<= {MEMORY_WINDOW_REL})")


def test_criterion_07_open_loop(capsys, demo_config):
    adaptation = replace(demo_config.adaptation, enabled=False)
    cfg = replace(demo_config, adaptation=adaptation, plant_initial=(1e-6, 0.0),
                  solver=replace(demo_config.solver, horizon=OPEN_LOOP_HORIZON))
    _, metrics = run_experiment(cfg, write_output=False)
    at = f"{metrics.diverged_at:.3f} s" if metrics.diverged else "never"
    report(capsys, 7, "open loop diverges", metrics.diverged,
           f"u=0, x1(0)=1e-6, divergence detected at {at} (horizon {OPEN_LOOP_HORIZON:g} s)")


def test_criterion_08_matching_identity(capsys, demo_config):
    gains = solve_matching_gains(demo_config.plant, demo_config.reference)
    adaptation = replace(demo_config.adaptation, theta_initial=gains.as_state(), enabled=False)
    traj, metrics = run_experiment(replace(demo_config, adaptation=adaptation),
                                   write_output=False)
    err = float(np.max(np.abs(traj.stack("e"))))
    ok = not metrics.diverged and err <= MATCHING_IDENTITY
    report(capsys, 8, "matching identity", ok,
           f"max |e| over {traj.times[-1]:g} s = {err:.3e} (<= {MATCHING_IDENTITY})")


def test_criterion_09_lemma_suite(capsys):
    step = 0.01
    worst = lemma_suite(n_signals=100, step=step)
    parts, ok = [], True
    for lemma in ("lemma1", "lemma2"):
        coarse, fine = worst[lemma, step], worst[lemma, step / 2]
        bounded = coarse <= LEMMA_CONSTANT * step and fine <= LEMMA_CONSTANT * step / 2
        # both exactly zero counts as shrinking: nothing left to shrink
        shrinks = fine < coarse or (coarse == 0.0 and fine == 0.0)
        ok = ok and bounded and shrinks
        parts.append(f"{lemma} worst +excursion {coarse:.3g} -> {fine:.3g}")
    report(capsys, 9, "lemma residual suite", ok,
           "; ".join(parts) + f" (bound {LEMMA_CONSTANT:g}*step)")


def test_criterion_10_dissipation(capsys, demo_config):
    exc = dissipation_excursions(demo_config, steps=(1e-3, 5e-4))
    alpha = demo_config.order
    e1, e2 = exc[1e-3], exc[5e-4]
    b1, b2 = DISSIPATION_CONSTANT * 1e-3**alpha, DISSIPATION_CONSTANT * 5e-4**alpha
    ok = e1 <= b1 and e2 <= b2 and e2 < e1
    report(capsys, 10, "dissipation inequality", ok,
           f"+excursion {e1:.4g} (<= {b1:.4g}) at 1e-3, {e2:.4g} (<= {b2:.4g}) at 5e-4")


def test_criterion_11_kernel_identities(capsys):
    xs = np.linspace(0.5, 10.0, 400)
    g_err = max(abs(gamma(x + 1) - x * gamma(x)) / gamma(x + 1) for x in xs)
    w_err = 0.0
    for alpha in (0.1, 0.3, 0.5, 0.7, 0.9, 0.99):
        w = gl_weights(alpha, 50).weights
        w_err = max(w_err, max(abs(w[j] - gl_weight_gamma_quotient(alpha, j)) for j in range(51)))
    zs = np.linspace(-2.0, 2.0, 401)
    e11 = max(abs(mittag_leffler(1.0, 1.0, z) - math.exp(z)) for z in zs)
    e12 = max(abs(mittag_leffler(1.0, 2.0, z) - (math.expm1(z) / z if z else 1.0)) for z in zs)
    ok = g_err <= GAMMA_REL and w_err <= GL_QUOTIENT and e11 <= ML_KERNEL and e12 <= ML_KERNEL
    report(capsys, 11, "kernel identities", ok,
           f"gamma {g_err:.2e}, GL weights {w_err:.2e}, E11 {e11:.2e}, E12 {e12:.2e}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
