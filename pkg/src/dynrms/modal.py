"""Numerical linearization and eigenanalysis of the operating point."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from io import StringIO
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

ZERO_MODE_TOL = 1e-6


def numerical_jacobian(f, x0: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of f at x0.

    ``f`` is either a callable x -> dx/dt or an object with an ``rhs``
    method (an assembled OdeSystem). The perturbation of column j is
    eps * max(1, |x0_j|). Warns when x0 is not an equilibrium.
    """
    func = f.rhs if hasattr(f, "rhs") else f
    x0 = np.asarray(x0, dtype=float)
    f0 = func(x0)
    resid = float(np.max(np.abs(f0), initial=0.0))
    if resid >= 1e-6:
        log.warning("linearization point is not an equilibrium (|f|_inf = %.3e)", resid)
    n = x0.size
    A = np.empty((n, n))
    for j in range(n):
        h = eps * max(1.0, abs(x0[j]))
        xp = x0.copy()
        xm = x0.copy()
        xp[j] += h
        xm[j] -= h
        A[:, j] = (func(xp) - func(xm)) / (2.0 * h)
    return A


@dataclass(frozen=True)
class Mode:
    eigenvalue: complex
    freq_hz: float
    damping_ratio: float
    dominant_state: str
    participation: float
    is_zero: bool

    @property
    def oscillatory(self) -> bool:
        return abs(self.eigenvalue.imag) > 1e-9 and not self.is_zero


@dataclass
class LinearizedSystem:
    A: np.ndarray
    x0: np.ndarray | None
    eigenvalues: np.ndarray  # sorted by damping ratio ascending
    right: np.ndarray  # columns correspond to eigenvalues
    left: np.ndarray  # rows correspond to eigenvalues
    modes: list[Mode]  # conjugate pairs reported once
    state_names: tuple[str, ...]

    def least_damped_oscillatory(self, min_freq_hz: float = 0.0) -> Mode:
        osc = [m for m in self.modes if m.oscillatory and m.freq_hz >= min_freq_hz]
        if not osc:
            raise ValueError("no oscillatory modes found")
        return min(osc, key=lambda m: m.damping_ratio)


def _damping_ratio(lam: complex) -> float:
    mag = abs(lam)
    return -lam.real / mag if mag > 0 else 1.0


def eigenanalysis(A: np.ndarray, state_names=None, x0=None) -> LinearizedSystem:
    """Dense eigendecomposition with mode metrics and participation factors."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if state_names is None:
        state_names = tuple(f"x{k}" for k in range(n))
    w, vr = np.linalg.eig(A)
    try:
        vl = np.linalg.inv(vr)  # rows are left eigenvectors, bi-orthonormal to vr
    except np.linalg.LinAlgError:
        vl = np.linalg.pinv(vr)

    order = np.argsort([_damping_ratio(lam) for lam in w])
    w = w[order]
    vr = vr[:, order]
    vl = vl[order, :]

    modes: list[Mode] = []
    seen: set[int] = set()
    for i, lam in enumerate(w):
        if i in seen:
            continue
        seen.add(i)
        if abs(lam.imag) > 1e-12:
            # consume the conjugate partner; report the +Im member of the pair
            partners = [k for k in range(len(w)) if k not in seen
                        and abs(w[k] - np.conj(lam)) < 1e-9 * max(1.0, abs(lam))]
            if partners:
                k = partners[0]
                seen.add(k)
                if lam.imag < 0:
                    lam = w[k]
                    i = k
        # Dominant state by participation |right|*|left|: invariant under
        # per-state rescaling, unlike raw eigenvector magnitudes, which are
        # skewed by the mixed units of the state vector.
        part = np.abs(vr[:, i]) * np.abs(vl[i, :])
        peak = part.max()
        part_norm = part / peak if peak > 0 else part
        dom = int(np.argmax(part))
        modes.append(Mode(
            eigenvalue=complex(lam),
            freq_hz=float(abs(lam.imag) / (2.0 * np.pi)),
            damping_ratio=float(_damping_ratio(lam)) + 0.0,
            dominant_state=state_names[dom],
            participation=float(part_norm[dom]),
            is_zero=abs(lam) < ZERO_MODE_TOL,
        ))
    zero_count = sum(m.is_zero for m in modes)
    if zero_count:
        log.info("found %d near-zero eigenvalue(s) (angle-reference invariance)", zero_count)
    modes.sort(key=lambda m: (m.is_zero, m.damping_ratio))
    return LinearizedSystem(A, x0, w, vr, vl, modes, tuple(state_names))


ELECTROMECHANICAL_BAND = (0.1, 3.0)  # Hz


def electromechanical_modes(lin: LinearizedSystem,
                            band: tuple[float, float] = ELECTROMECHANICAL_BAND) -> list[Mode]:
    """Oscillatory modes in the rotor band dominated by delta/d_omega states."""
    out = []
    for m in lin.modes:
        if not m.oscillatory or not band[0] <= m.freq_hz <= band[1]:
            continue
        leaf = m.dominant_state.rsplit(".", 1)[-1]
        if leaf in ("delta", "d_omega"):
            out.append(m)
    return out


MODE_TABLE_COLUMNS = "re,im,freq_hz,damping_ratio,dominant_state,participation"


def mode_report(lin: LinearizedSystem) -> str:
    """Mode table as CSV text (conjugate pairs once, zero modes flagged last)."""
    out = StringIO()
    out.write(MODE_TABLE_COLUMNS + "\n")
    for m in lin.modes:
        out.write(
            f"{m.eigenvalue.real + 0.0!r},{m.eigenvalue.imag + 0.0!r},{m.freq_hz!r},"
            f"{m.damping_ratio!r},{m.dominant_state},{m.participation!r}\n")
    return out.getvalue()


def write_mode_report(lin: LinearizedSystem, path: str | Path) -> None:
    Path(path).write_text(mode_report(lin), encoding="utf-8")
