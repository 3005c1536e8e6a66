"""Sixth-order synchronous machine model (voltage-behind-reactance form).

States per machine: rotor angle delta (rad), speed deviation d_omega (pu),
transient voltages e_q_t / e_d_t and subtransient voltages e_q_st / e_d_st
(all pu). The machine dq frame maps to the common network frame through
u_dq = j * u_net * exp(-j*delta), which puts the q axis on the internal
voltage phasor V + (R + jX_q) I. All functions are vectorized over an
array of machines; parameters are held on system base.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import GeneratorRecord
from .errors import InitializationError

N_STATES = 6
STATE_NAMES = ("delta", "d_omega", "e_q_t", "e_d_t", "e_q_st", "e_d_st")


@dataclass
class MachineParams:
    """Machine constants on system base, one array entry per machine."""

    names: list[str]
    S_n: np.ndarray
    H: np.ndarray  # system-base inertia, s
    D: np.ndarray
    R: np.ndarray
    X_d: np.ndarray
    X_q: np.ndarray
    X_d_t: np.ndarray
    X_q_t: np.ndarray
    X_d_st: np.ndarray
    X_q_st: np.ndarray
    T_d0_t: np.ndarray
    T_q0_t: np.ndarray
    T_d0_st: np.ndarray
    T_q0_st: np.ndarray

    def __len__(self) -> int:
        return len(self.names)

    @classmethod
    def from_records(cls, records: "list[GeneratorRecord]", base_mva: float) -> "MachineParams":
        def arr(attr: str) -> np.ndarray:
            return np.array([getattr(g, attr) for g in records], dtype=float)

        s_n = arr("S_n")
        to_sys = base_mva / s_n  # impedance factor; inverse scales power/inertia
        return cls(
            names=[g.name for g in records],
            S_n=s_n,
            H=arr("H") / to_sys,
            D=arr("D") / to_sys,
            R=arr("R") * to_sys,
            X_d=arr("X_d") * to_sys,
            X_q=arr("X_q") * to_sys,
            X_d_t=arr("X_d_t") * to_sys,
            X_q_t=arr("X_q_t") * to_sys,
            X_d_st=arr("X_d_st") * to_sys,
            X_q_st=arr("X_q_st") * to_sys,
            T_d0_t=arr("T_d0_t"),
            T_q0_t=arr("T_q0_t"),
            T_d0_st=arr("T_d0_st"),
            T_q0_st=arr("T_q0_st"),
        )


def derivatives(
    states: np.ndarray,
    p: MachineParams,
    p_m: np.ndarray,
    e_f: np.ndarray,
    i_d: np.ndarray,
    i_q: np.ndarray,
    omega_s: float,
) -> np.ndarray:
    """State derivatives for all machines; states has shape (n, 6)."""
    d_omega = states[:, 1]
    e_q_t = states[:, 2]
    e_d_t = states[:, 3]
    e_q_st = states[:, 4]
    e_d_st = states[:, 5]

    p_e = e_d_st * i_d + e_q_st * i_q
    out = np.empty_like(states)
    out[:, 0] = omega_s * d_omega
    out[:, 1] = (p_m - p_e - p.D * d_omega) / (2.0 * p.H)
    out[:, 2] = (e_f - e_q_t - i_d * (p.X_d - p.X_d_t)) / p.T_d0_t
    out[:, 3] = (-e_d_t + i_q * (p.X_q - p.X_q_t)) / p.T_q0_t
    out[:, 4] = (e_q_t - e_q_st - i_d * (p.X_d_t - p.X_d_st)) / p.T_d0_st
    out[:, 5] = (e_d_t - e_d_st + i_q * (p.X_q_t - p.X_q_st)) / p.T_q0_st
    return out


def network_emf(states: np.ndarray) -> np.ndarray:
    """Subtransient emf phasor in the common network frame."""
    delta = states[:, 0]
    return (states[:, 4] - 1j * states[:, 5]) * np.exp(1j * delta)


def norton_source(states: np.ndarray, p: MachineParams) -> tuple[np.ndarray, np.ndarray]:
    """Norton pair (I_no, Z_no): current source E''/Z_no with Z_no = R + jX_st.

    The source current uses the full stator impedance rather than the bare
    reactance so that the one-port reproduces E'' = V + (R + jX_st) I
    exactly, also for R > 0.
    """
    z_no = p.R + 1j * p.X_d_st
    return network_emf(states) / z_no, z_no


def terminal_current(states: np.ndarray, v_t: np.ndarray, p: MachineParams) -> np.ndarray:
    """Machine current into the network given terminal voltage (network frame)."""
    return (network_emf(states) - v_t) / (p.R + 1j * p.X_d_st)


def to_dq(u_net: np.ndarray, delta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project network-frame phasors onto machine d and q axes."""
    u_dq = 1j * u_net * np.exp(-1j * delta)
    return u_dq.real, u_dq.imag


def electrical_power(states: np.ndarray, i_d: np.ndarray, i_q: np.ndarray) -> np.ndarray:
    return states[:, 5] * i_d + states[:, 4] * i_q


def initialize(
    v_t: np.ndarray, s_t: np.ndarray, p: MachineParams, omega_s: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Equilibrium states plus the required (P_m, E_f) inputs.

    From the terminal phasors: I = conj(S/V); the q axis is located on
    E_Q = V + (R + jX_q) I; the flux states then follow from setting each
    flux derivative to zero and the stator equation E'' = V + (R + jX'') I.
    """
    v_t = np.asarray(v_t, dtype=complex)
    s_t = np.asarray(s_t, dtype=complex)
    if np.any(np.abs(v_t) == 0.0):
        k = int(np.argmin(np.abs(v_t)))
        raise InitializationError(f"machine {p.names[k]}: zero terminal voltage")

    i_t = np.conj(s_t / v_t)
    e_locator = v_t + (p.R + 1j * p.X_q) * i_t
    delta = np.angle(e_locator)
    v_d, v_q = to_dq(v_t, delta)
    i_d, i_q = to_dq(i_t, delta)

    e_d_st = v_d + p.R * i_d - p.X_q_st * i_q
    e_q_st = v_q + p.R * i_q + p.X_d_st * i_d
    e_d_t = i_q * (p.X_q - p.X_q_t)
    e_q_t = e_q_st + i_d * (p.X_d_t - p.X_d_st)
    e_f = e_q_t + i_d * (p.X_d - p.X_d_t)
    p_m = e_d_st * i_d + e_q_st * i_q

    states = np.column_stack([
        delta, np.zeros_like(delta), e_q_t, e_d_t, e_q_st, e_d_st,
    ])
    resid = derivatives(states, p, p_m, e_f, i_d, i_q, omega_s)
    worst = float(np.max(np.abs(resid), initial=0.0))
    if worst >= 1e-9:
        k, eq = np.unravel_index(int(np.argmax(np.abs(resid))), resid.shape)
        raise InitializationError(
            f"machine {p.names[k]}: initialization residual {worst:.2e} "
            f"in d({STATE_NAMES[eq]})/dt")
    return states, p_m, e_f
