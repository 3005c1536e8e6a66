import numpy as np
import pytest

from dynrms.integrators import (
    AdaptiveIntegrator,
    euler_step,
    fixed_step,
    modified_euler_step,
    rk4_step,
)

decay = lambda x: -x


def test_euler_single_step():
    x = euler_step(decay, np.array([1.0]), 0.1)
    assert x[0] == pytest.approx(0.9)


def test_modified_euler_single_step_heun():
    # hand computation: predictor 0.9, corrector 1 + 0.05*(-1 - 0.9) = 0.905
    x = modified_euler_step(decay, np.array([1.0]), 0.1, corrector_iters=1)
    assert x[0] == pytest.approx(0.905)


def test_modified_euler_extra_correctors_converge_to_trapezoid():
    # fixed point of x1 = x0 + dt/2 (f(x0) + f(x1)) is the trapezoidal rule
    x = np.array([1.0])
    for iters in (5, 60):
        out = modified_euler_step(decay, x, 0.1, corrector_iters=iters)
    trapezoid = (1 - 0.05) / (1 + 0.05)
    assert out[0] == pytest.approx(trapezoid, abs=1e-12)


def test_rk4_accuracy_and_order():
    def run(dt):
        x = np.array([1.0])
        for _ in range(round(1.0 / dt)):
            x = rk4_step(decay, x, dt)
        return abs(x[0] - np.exp(-1.0))

    err1 = run(0.1)
    err2 = run(0.05)
    assert err1 < 1e-6
    assert err1 / err2 == pytest.approx(16.0, rel=0.15)


def test_fixed_step_dispatch():
    x = np.array([1.0])
    assert fixed_step(decay, x, 0.1, "euler")[0] == pytest.approx(0.9)
    with pytest.raises(ValueError, match="unknown"):
        fixed_step(decay, x, 0.1, "leapfrog")


def test_adaptive_matches_exponential():
    integ = AdaptiveIntegrator(decay, rtol=1e-10, atol=1e-12, h_init=0.05)
    ts, xs = integ.integrate(np.array([1.0]), 0.0, 1.0)
    assert ts[-1] == pytest.approx(1.0, abs=1e-12)
    assert xs[-1, 0] == pytest.approx(np.exp(-1.0), abs=1e-9)
    assert len(ts) > 3  # actually took multiple adaptive steps


def test_adaptive_controls_error_with_tolerance():
    # oscillator keeps the controller honest (energy-neutral dynamics)
    def osc(x):
        return np.array([x[1], -x[0]])

    integ = AdaptiveIntegrator(osc, rtol=1e-8, atol=1e-10, h_init=0.1)
    ts, xs = integ.integrate(np.array([1.0, 0.0]), 0.0, 10.0)
    assert xs[-1, 0] == pytest.approx(np.cos(10.0), abs=1e-6)
    assert xs[-1, 1] == pytest.approx(-np.sin(10.0), abs=1e-6)
