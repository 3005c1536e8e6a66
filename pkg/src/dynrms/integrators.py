"""Fixed- and adaptive-step integrators for the assembled ODE.

The fixed-step methods take f(x) -> dx/dt (autonomous form; events change
f only between steps). The adaptive method is an embedded Dormand-Prince
5(4) pair with PI step-size control.
"""

from __future__ import annotations

import numpy as np

METHODS = ("euler", "modified_euler", "rk4", "adaptive")


def euler_step(f, x: np.ndarray, dt: float) -> np.ndarray:
    return x + dt * f(x)


def modified_euler_step(f, x: np.ndarray, dt: float, corrector_iters: int = 1) -> np.ndarray:
    """Explicit predictor plus trapezoidal corrector passes (Heun for one pass)."""
    k1 = f(x)
    x_p = x + dt * k1
    for _ in range(max(1, corrector_iters)):
        x_p = x + 0.5 * dt * (k1 + f(x_p))
    return x_p


def rk4_step(f, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def fixed_step(f, x: np.ndarray, dt: float, method: str, corrector_iters: int = 1) -> np.ndarray:
    if method == "euler":
        return euler_step(f, x, dt)
    if method == "modified_euler":
        return modified_euler_step(f, x, dt, corrector_iters)
    if method == "rk4":
        return rk4_step(f, x, dt)
    raise ValueError(f"unknown fixed-step method {method!r}")


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])


class AdaptiveIntegrator:
    """Dormand-Prince 5(4) with PI step control (order 5 propagation)."""

    def __init__(self, f, rtol: float = 1e-6, atol: float = 1e-8,
                 h_init: float = 1e-3, h_max: float = np.inf):
        self.f = f
        self.rtol = rtol
        self.atol = atol
        self.h = h_init
        self.h_max = h_max
        self._err_prev = 1.0

    def _attempt(self, x: np.ndarray, h: float):
        k = []
        for stage in range(7):
            xs = x.copy()
            for j, a in enumerate(_DP_A[stage]):
                xs += h * a * k[j]
            k.append(self.f(xs))
        k = np.array(k)
        x5 = x + h * (_DP_B5 @ k)
        x4 = x + h * (_DP_B4 @ k)
        scale = self.atol + self.rtol * np.maximum(np.abs(x), np.abs(x5))
        err = float(np.sqrt(np.mean(((x5 - x4) / scale) ** 2)))
        return x5, err

    def step(self, x: np.ndarray, h_cap: float = np.inf):
        """One accepted step; returns (x_new, h_taken)."""
        while True:
            h = float(min(self.h, self.h_max, h_cap))
            if h <= 0:
                raise ValueError("adaptive step size underflow")
            x_new, err = self._attempt(x, h)
            if err <= 1.0 or h <= 1e-14:
                # PI controller (Hairer): alpha = 0.7/5, beta = 0.4/5
                factor = 0.9 * (err + 1e-16) ** (-0.14) * self._err_prev ** 0.08
                self._err_prev = max(err, 1e-4)
                self.h = h * float(np.clip(factor, 0.2, 5.0))
                return x_new, h
            self.h = h * max(0.2, 0.9 * err ** (-0.2))

    def integrate(self, x0: np.ndarray, t0: float, t1: float):
        """Integrate to exactly t1; returns (ts, xs) at accepted steps."""
        t, x = t0, np.asarray(x0, dtype=float).copy()
        ts, xs = [t], [x.copy()]
        while t < t1 - 1e-12:
            x, h = self.step(x, h_cap=t1 - t)
            t += h
            ts.append(t)
            xs.append(x.copy())
        return np.array(ts), np.array(xs)
