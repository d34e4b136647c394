import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fomrac.diagnostics import (
    dissipation_check,
    lemma1_residual,
    lemma2_residual,
    positive_excursion,
    random_zero_start_signal,
)
from fomrac.grunwald import SampledSignal
from fomrac.solver import Trajectory

from .conftest import DEMO_P


def ramp_signal(step, horizon, n=2):
    t = step * np.arange(int(round(horizon / step)) + 1)
    samples = np.zeros((len(t), n))
    samples[:, 0] = t
    return SampledSignal(step, samples)


def test_lemma1_ramp_negative():
    for step in (0.01, 0.005):
        r = lemma1_residual(ramp_signal(step, 2.0), DEMO_P, 0.7).samples
        assert r[0] == 0.0
        assert np.all(r[1:] < 0.0)
    # compare with the analytic gap 20 t^(2-a) (1/G(3-a) - 1/G(2-a)) at t = 2
    from math import gamma

    analytic = 20 * 2.0**1.3 * (1 / gamma(2.3) - 1 / gamma(1.3))
    r = lemma1_residual(ramp_signal(1e-3, 2.0), DEMO_P, 0.7).samples
    assert r[-1] == pytest.approx(analytic, rel=1e-2)


def test_lemma1_zero_signal():
    r = lemma1_residual(SampledSignal(0.01, np.zeros((50, 3))), np.eye(3), 0.4)
    assert np.all(r.samples == 0.0)


def test_lemma1_integer_order_is_first_order_small():
    prev = None
    for step in (0.01, 0.005, 0.0025):
        sig = random_zero_start_signal(np.random.default_rng(1), step, 2.0)
        worst = np.max(np.abs(lemma1_residual(sig, DEMO_P, 1.0).samples))
        if prev is not None:
            assert worst < 0.6 * prev
        prev = worst


def test_lemma2_scaled_identity_negative():
    step = 0.01
    t = step * np.arange(201)
    m = t[:, None, None] * np.eye(2)[None]
    r = lemma2_residual(SampledSignal(step, m), 0.6).samples
    assert np.all(r[1:] < 0.0)
    assert np.all(lemma2_residual(SampledSignal(step, np.zeros_like(m)), 0.6).samples == 0.0)
    r1 = lemma2_residual(SampledSignal(step, m), 1.0).samples
    assert np.max(np.abs(r1)) <= 2 * step


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.99))
def test_discrete_lemmas_never_positive(seed, alpha):
    # the GL form of both inequalities holds exactly, not only in the limit
    rng = np.random.default_rng(seed)
    vec = random_zero_start_signal(rng, 0.01, 3.0, (3,))
    mat = random_zero_start_signal(rng, 0.01, 3.0, (2, 2))
    r1 = lemma1_residual(vec, np.eye(3), alpha).samples
    r2 = lemma2_residual(mat, alpha).samples
    scale1 = np.max(np.abs(vec.samples)) ** 2 / 0.01**alpha
    scale2 = np.max(np.abs(mat.samples)) ** 2 / 0.01**alpha
    assert np.max(r1) <= 1e-12 * scale1
    assert np.max(r2) <= 1e-12 * scale2


def test_random_signal_independent_of_step():
    a = random_zero_start_signal(np.random.default_rng(7), 0.01, 1.0)
    b = random_zero_start_signal(np.random.default_rng(7), 0.005, 1.0)
    np.testing.assert_allclose(a.samples, b.samples[::2], rtol=1e-12, atol=1e-12)
    assert np.all(a.samples[0] == 0.0)


def test_dimension_errors():
    with pytest.raises(ValueError):
        lemma1_residual(ramp_signal(0.1, 1.0, 3), DEMO_P, 0.5)
    with pytest.raises(ValueError):
        lemma2_residual(ramp_signal(0.1, 1.0), 0.5)


def closed_loop_like(step=0.01, n_samples=200, V=None, e=None):
    channels = {"V": np.zeros(n_samples) if V is None else V}
    e = np.zeros((n_samples, 2)) if e is None else e
    channels["e1"], channels["e2"] = e[:, 0], e[:, 1]
    return Trajectory(step, channels)


def test_dissipation_zero_trajectory():
    r = dissipation_check(closed_loop_like(), DEMO_P, np.eye(2), 0.7)
    assert np.all(r.samples == 0.0)
    assert positive_excursion(r) == 0.0


def test_dissipation_with_zero_q_is_derivative_of_v():
    step = 0.01
    t = step * np.arange(300)
    V = 3.0 + np.exp(-t)
    r = dissipation_check(closed_loop_like(step, 300, V=V), DEMO_P, np.zeros((2, 2)), 0.7)
    # Caputo derivative of a decaying V is negative after the first step
    assert np.all(r.samples[1:] < 0.0)
    assert r.samples[0] == 0.0


def test_dissipation_adds_quadratic_term():
    step = 0.01
    e = np.column_stack([np.linspace(0, 1, 100), np.zeros(100)])
    r = dissipation_check(closed_loop_like(step, 100, e=e), DEMO_P, np.diag([2.0, 1.0]), 0.5)
    np.testing.assert_allclose(r.samples, e[:, 0] ** 2)


def test_dissipation_missing_channel():
    with pytest.raises(KeyError, match="V"):
        dissipation_check(Trajectory(0.1, {"e1": np.zeros(5)}), DEMO_P, np.eye(2), 0.5)


def test_positive_excursion():
    assert positive_excursion(SampledSignal(0.1, np.array([-1.0, 0.5, 0.2]))) == 0.5
    assert positive_excursion(SampledSignal(0.1, np.array([-1.0, -0.5]))) == 0.0
