"""Generator control blocks: SEXS exciter, TGOV1 governor, STAB1 stabilizer.

Every lead-lag (1 + s T_num)/(1 + s T_den) is realized with one state and
direct feedthrough: y = (T_num/T_den) u + (1 - T_num/T_den) x, with
dx/dt = (u - x)/T_den. Limited lag states use non-windup limiters: the
derivative is zeroed when it points outward at a bound and the block
output is hard-clamped. All blocks are vectorized over device arrays and
operate in system per-unit (power-carrying TGOV1 parameters are converted
from machine base when the parameter block is built).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InitializationError

SEXS_STATES = ("x_ll", "x_e")
TGOV1_STATES = ("x_v", "x_ll")
STAB1_STATES = ("x_w", "x_ll1", "x_ll2")


def _lead_lag(u: np.ndarray, x: np.ndarray, t_num: np.ndarray, t_den: np.ndarray):
    gain = t_num / t_den
    y = gain * u + (1.0 - gain) * x
    dx = (u - x) / t_den
    return y, dx


def _anti_windup(x: np.ndarray, dx: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    dx = np.where((x >= hi) & (dx > 0.0), 0.0, dx)
    dx = np.where((x <= lo) & (dx < 0.0), 0.0, dx)
    return dx


# --- SEXS ------------------------------------------------------------------

@dataclass
class SEXSParams:
    names: list[str]
    K: np.ndarray
    T_a: np.ndarray
    T_b: np.ndarray
    T_e: np.ndarray
    E_min: np.ndarray
    E_max: np.ndarray

    def __len__(self) -> int:
        return len(self.names)

    @classmethod
    def from_records(cls, records) -> "SEXSParams":
        arr = lambda a: np.array([getattr(r, a) for r in records], dtype=float)
        return cls([r.name for r in records], arr("K"), arr("T_a"), arr("T_b"),
                   arr("T_e"), arr("E_min"), arr("E_max"))


def sexs(states: np.ndarray, p: SEXSParams, v_ref, v_t, v_pss):
    """Voltage error through lead-lag then limited gain-lag; returns (dx, E_f)."""
    x_ll = states[:, 0]
    x_e = states[:, 1]
    u = v_ref - v_t + v_pss
    y_ll, dx_ll = _lead_lag(u, x_ll, p.T_a, p.T_b)
    dx_e = (p.K * y_ll - x_e) / p.T_e
    dx_e = _anti_windup(x_e, dx_e, p.E_min, p.E_max)
    e_f = np.clip(x_e, p.E_min, p.E_max)
    out = np.empty_like(states)
    out[:, 0] = dx_ll
    out[:, 1] = dx_e
    return out, e_f


def sexs_initialize(p: SEXSParams, e_f_required: np.ndarray, v_t: np.ndarray):
    """Steady states plus the V_ref that holds E_f at the required value."""
    bad = (e_f_required < p.E_min) | (e_f_required > p.E_max)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise InitializationError(
            f"avr {p.names[k]}: required E_f {e_f_required[k]:.4f} outside "
            f"limits [{p.E_min[k]}, {p.E_max[k]}]")
    states = np.column_stack([e_f_required / p.K, e_f_required])
    v_ref = v_t + e_f_required / p.K
    return states, v_ref


# --- TGOV1 -----------------------------------------------------------------

@dataclass
class TGOV1Params:
    names: list[str]
    R_droop: np.ndarray
    T_1: np.ndarray
    T_2: np.ndarray
    T_3: np.ndarray
    V_min: np.ndarray
    V_max: np.ndarray

    def __len__(self) -> int:
        return len(self.names)

    @classmethod
    def from_records(cls, records, s_n: np.ndarray, base_mva: float) -> "TGOV1Params":
        arr = lambda a: np.array([getattr(r, a) for r in records], dtype=float)
        to_sys = np.asarray(s_n, dtype=float) / base_mva  # machine-pu power -> system pu
        return cls([r.name for r in records], arr("R_droop") / to_sys,
                   arr("T_1"), arr("T_2"), arr("T_3"),
                   arr("V_min") * to_sys, arr("V_max") * to_sys)


def tgov1(states: np.ndarray, p: TGOV1Params, d_omega, p_ref):
    """Droop input through limited valve lag then reheat lead-lag; returns (dx, P_m)."""
    x_v = states[:, 0]
    x_ll = states[:, 1]
    u = p_ref - d_omega / p.R_droop
    dx_v = (u - x_v) / p.T_1
    dx_v = _anti_windup(x_v, dx_v, p.V_min, p.V_max)
    valve = np.clip(x_v, p.V_min, p.V_max)
    p_m, dx_ll = _lead_lag(valve, x_ll, p.T_2, p.T_3)
    out = np.empty_like(states)
    out[:, 0] = dx_v
    out[:, 1] = dx_ll
    return out, p_m


def tgov1_initialize(p: TGOV1Params, p_m_required: np.ndarray):
    """Steady states plus the load reference; P_ref = P_m at d_omega = 0."""
    bad = (p_m_required < p.V_min) | (p_m_required > p.V_max)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise InitializationError(
            f"gov {p.names[k]}: required P_m {p_m_required[k]:.4f} outside "
            f"valve limits [{p.V_min[k]}, {p.V_max[k]}]")
    states = np.column_stack([p_m_required, p_m_required])
    return states, p_m_required.copy()


# --- STAB1 -----------------------------------------------------------------

@dataclass
class STAB1Params:
    names: list[str]
    K: np.ndarray
    T_w: np.ndarray
    T_1: np.ndarray
    T_2: np.ndarray
    T_3: np.ndarray
    T_4: np.ndarray
    H_lim: np.ndarray

    def __len__(self) -> int:
        return len(self.names)

    @classmethod
    def from_records(cls, records) -> "STAB1Params":
        arr = lambda a: np.array([getattr(r, a) for r in records], dtype=float)
        return cls([r.name for r in records], arr("K"), arr("T_w"), arr("T_1"),
                   arr("T_2"), arr("T_3"), arr("T_4"), arr("H_lim"))


def stab1(states: np.ndarray, p: STAB1Params, d_omega):
    """Speed through gain-washout and two lead-lags, clamped; returns (dx, V_pss)."""
    x_w = states[:, 0]
    x_1 = states[:, 1]
    x_2 = states[:, 2]
    y_w = p.K * (d_omega - x_w)
    dx_w = (d_omega - x_w) / p.T_w
    y_1, dx_1 = _lead_lag(y_w, x_1, p.T_1, p.T_2)
    y_2, dx_2 = _lead_lag(y_1, x_2, p.T_3, p.T_4)
    v_pss = np.clip(y_2, -p.H_lim, p.H_lim)
    out = np.empty_like(states)
    out[:, 0] = dx_w
    out[:, 1] = dx_1
    out[:, 2] = dx_2
    return out, v_pss


def stab1_initialize(p: STAB1Params, d_omega0: np.ndarray):
    """Steady states for constant speed input; output settles to zero."""
    zeros = np.zeros_like(d_omega0)
    return np.column_stack([d_omega0, zeros, zeros])


def sexs_transfer(p: SEXSParams, k: int):
    """Numerator/denominator of device k's linear transfer (for test oracles)."""
    num = np.polymul([p.T_a[k], 1.0], [p.K[k]])
    den = np.polymul([p.T_b[k], 1.0], [p.T_e[k], 1.0])
    return num, den


def stab1_transfer(p: STAB1Params, k: int):
    num = np.polymul(np.polymul([p.K[k] * p.T_w[k], 0.0], [p.T_1[k], 1.0]), [p.T_3[k], 1.0])
    den = np.polymul(np.polymul([p.T_w[k], 1.0], [p.T_2[k], 1.0]), [p.T_4[k], 1.0])
    return num, den
