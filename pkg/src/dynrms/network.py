"""Admittance matrix, Newton-Raphson power flow and Kron reduction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .data import BranchRecord, SystemDescription, impedance_to_system_base
from .errors import PowerFlowError, SingularNetworkError

log = logging.getLogger(__name__)

_RESIDUAL_TOL = 1e-10


def branch_stamps(branch: BranchRecord, bus_index: dict[str, int]) -> list[tuple[int, int, complex]]:
    """Pi-model admittance stamps for one branch (tap on the from side)."""
    if branch.r == 0 and branch.x == 0:
        raise ValueError(f"branch {branch.name}: zero series impedance")
    i = bus_index[branch.from_bus]
    j = bus_index[branch.to_bus]
    y_s = 1.0 / complex(branch.r, branch.x)
    y_sh = 0.5j * branch.b
    a = branch.ratio
    return [
        (i, i, (y_s + y_sh) / a**2),
        (i, j, -y_s / a),
        (j, i, -y_s / a),
        (j, j, y_s + y_sh),
    ]


class AdmittanceMatrix:
    """Sparse complex nodal admittance with incremental modification.

    The matrix is kept as a frozen baseline plus accumulated per-entry
    deltas, so that applying a delta and later its exact negation restores
    the original entries bitwise. The sparse LU factorization is cached and
    rebuilt lazily when the ``dirty`` flag is set.
    """

    def __init__(self, base: sp.spmatrix, bus_names: list[str]):
        self.base = sp.csc_matrix(base, dtype=complex)
        self.bus_names = list(bus_names)
        self.bus_index = {name: k for k, name in enumerate(bus_names)}
        if self.base.shape != (self.dimension, self.dimension):
            raise ValueError("matrix shape does not match bus count")
        self._acc: dict[tuple[int, int], complex] = {}
        self._lu = None
        self.dirty = True

    @property
    def dimension(self) -> int:
        return len(self.bus_names)

    def matrix(self) -> sp.csc_matrix:
        """Materialize baseline plus accumulated deltas."""
        if not self._acc:
            return self.base
        rows, cols, vals = [], [], []
        for (i, j), v in self._acc.items():
            rows.append(i)
            cols.append(j)
            vals.append(v)
        delta = sp.coo_matrix((vals, (rows, cols)), shape=self.base.shape, dtype=complex)
        return (self.base + delta.tocsc()).tocsc()

    def toarray(self) -> np.ndarray:
        return self.matrix().toarray()

    def modify(self, deltas) -> list:
        """Increment entries by (row, col, value) deltas; marks dirty.

        Returns a token for :meth:`restore`. A delta followed by its exact
        negation cancels bitwise; for undoing arbitrary interleaved
        modifications use the token, since float rounding makes
        ``(a + d) - d != a`` across mixed magnitudes.
        """
        n = self.dimension
        deltas = list(deltas)
        for i, j, v in deltas:
            if not (0 <= i < n and 0 <= j < n):
                raise IndexError(f"admittance index ({i}, {j}) outside dimension {n}")
        token = []
        for i, j, v in deltas:
            key = (i, j)
            token.append((key, self._acc.get(key)))
            self._acc[key] = self._acc.get(key, 0.0) + complex(v)
        self.dirty = True
        return token

    def restore(self, token) -> None:
        """Put entries touched by a modify() back to their prior values."""
        for key, prior in reversed(token):
            if prior is None:
                self._acc.pop(key, None)
            else:
                self._acc[key] = prior
        self.dirty = True

    def _factorize(self):
        mat = self.matrix()
        if mat.nnz:
            row_mass = np.asarray(np.abs(mat).sum(axis=1)).ravel()
            zero_rows = list(np.where(row_mass == 0.0)[0])
        else:
            zero_rows = list(range(self.dimension))
        if zero_rows:
            names = ", ".join(self.bus_names[k] for k in zero_rows)
            raise SingularNetworkError(f"singular network: no admittance at bus(es) {names}")
        try:
            self._lu = splu(mat)
        except RuntimeError as exc:
            raise SingularNetworkError(f"admittance matrix factorization failed: {exc}") from exc
        self.dirty = False
        self._mat = mat

    def solve(self, i_inj: np.ndarray) -> np.ndarray:
        """Bus voltages for the given current injections (cached LU)."""
        i_inj = np.asarray(i_inj, dtype=complex)
        if i_inj.shape != (self.dimension,):
            raise ValueError(f"injection vector length {i_inj.shape} != dimension {self.dimension}")
        if self.dirty or self._lu is None:
            self._factorize()
        v = self._lu.solve(i_inj)
        residual = self._mat @ v - i_inj
        if np.max(np.abs(residual), initial=0.0) > _RESIDUAL_TOL:
            v = v + self._lu.solve(-residual)
            residual = self._mat @ v - i_inj
            if not np.all(np.isfinite(v)) or np.max(np.abs(residual), initial=0.0) > _RESIDUAL_TOL * max(
                1.0, float(np.max(np.abs(i_inj), initial=0.0))
            ):
                raise SingularNetworkError(
                    f"network solve residual {np.max(np.abs(residual)):.3e} exceeds tolerance")
        return v

    def copy(self) -> "AdmittanceMatrix":
        other = AdmittanceMatrix(self.matrix().copy(), self.bus_names)
        return other


def build_ybus(
    sys: SystemDescription,
    include_loads: bool = False,
    include_generator_shunts: bool = False,
    pf: "PowerFlowSolution | None" = None,
) -> AdmittanceMatrix:
    """Assemble the nodal admittance matrix.

    ``include_loads`` converts each load's power-flow consumption into a
    constant shunt admittance conj(S)/|V|^2 at the solved voltage (a
    PowerFlowSolution is then required); ``include_generator_shunts`` adds
    each machine's stator shunt 1/(R + jX_st) on system base.
    """
    bus_index = sys.bus_index()
    n = len(sys.buses)
    entries: dict[tuple[int, int], complex] = {}

    def add(i: int, j: int, v: complex) -> None:
        entries[(i, j)] = entries.get((i, j), 0.0) + v

    for br in sys.branches:
        if not br.status:
            continue
        for i, j, v in branch_stamps(br, bus_index):
            add(i, j, v)

    if include_loads:
        if pf is None:
            raise ValueError("include_loads requires a PowerFlowSolution")
        for ld in sys.loads:
            k = bus_index[ld.bus]
            v_mag2 = abs(pf.V[k]) ** 2
            add(k, k, np.conj(complex(ld.P, ld.Q)) / v_mag2)

    if include_generator_shunts:
        for g in sys.generators:
            k = bus_index[g.bus]
            r = impedance_to_system_base(g.R, g.S_n, sys.base_mva)
            x = impedance_to_system_base(g.X_d_st, g.S_n, sys.base_mva)
            add(k, k, 1.0 / complex(r, x))

    if entries:
        rows, cols, vals = zip(*((i, j, v) for (i, j), v in entries.items()))
        mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex)
    else:
        mat = sp.coo_matrix((n, n), dtype=complex)
    return AdmittanceMatrix(mat.tocsc(), [b.name for b in sys.buses])


@dataclass
class PowerFlowSolution:
    bus_names: list[str]
    V: np.ndarray  # complex voltage per bus, pu
    S: np.ndarray  # complex net injection per bus, pu
    iterations: int
    max_mismatch: float

    def v_at(self, bus: str) -> complex:
        return complex(self.V[self.bus_names.index(bus)])

    def s_at(self, bus: str) -> complex:
        return complex(self.S[self.bus_names.index(bus)])


def solve_power_flow(
    sys: SystemDescription, tol: float = 1e-8, max_iter: int = 20
) -> PowerFlowSolution:
    """Full Newton-Raphson power flow in polar coordinates."""
    bus_index = sys.bus_index()
    n = len(sys.buses)
    ybus = build_ybus(sys)
    Y = ybus.toarray()

    types = np.array([b.type for b in sys.buses])
    p_spec = np.zeros(n)
    q_spec = np.zeros(n)
    v_sched = np.ones(n)
    for g in sys.generators:
        k = bus_index[g.bus]
        p_spec[k] += g.P_set
        v_sched[k] = g.V_set
    for ld in sys.loads:
        k = bus_index[ld.bus]
        p_spec[k] -= ld.P
        q_spec[k] -= ld.Q

    vm = np.ones(n)
    va = np.zeros(n)
    is_slack = types == "slack"
    is_pv = types == "PV"
    is_pq = types == "PQ"
    vm[is_slack | is_pv] = v_sched[is_slack | is_pv]

    pvpq = np.flatnonzero(~is_slack)
    pq = np.flatnonzero(is_pq)

    def calc_power(vm, va):
        v = vm * np.exp(1j * va)
        return v, v * np.conj(Y @ v)

    trace: list[float] = []
    iterations = 0
    v, s_calc = calc_power(vm, va)
    mis = np.concatenate([(p_spec - s_calc.real)[pvpq], (q_spec - s_calc.imag)[pq]])
    max_mis = float(np.max(np.abs(mis), initial=0.0))
    trace.append(max_mis)

    while max_mis >= tol:
        if iterations >= max_iter:
            raise PowerFlowError(
                f"power flow did not converge in {max_iter} iterations "
                f"(mismatch trace: {', '.join(f'{m:.3e}' for m in trace)})",
                trace,
            )
        diag_v = np.diag(v)
        diag_i = np.diag(Y @ v)
        diag_vn = np.diag(v / np.abs(v))
        ds_dva = 1j * diag_v @ np.conj(diag_i - Y @ diag_v)
        ds_dvm = diag_v @ np.conj(Y @ diag_vn) + np.conj(diag_i) @ diag_vn
        J = np.block([
            [ds_dva[np.ix_(pvpq, pvpq)].real, ds_dvm[np.ix_(pvpq, pq)].real],
            [ds_dva[np.ix_(pq, pvpq)].imag, ds_dvm[np.ix_(pq, pq)].imag],
        ])
        try:
            dx = np.linalg.solve(J, mis)
        except np.linalg.LinAlgError as exc:
            raise PowerFlowError(f"singular power-flow Jacobian: {exc}", trace) from exc
        va[pvpq] += dx[: len(pvpq)]
        vm[pq] += dx[len(pvpq):]
        iterations += 1
        v, s_calc = calc_power(vm, va)
        mis = np.concatenate([(p_spec - s_calc.real)[pvpq], (q_spec - s_calc.imag)[pq]])
        max_mis = float(np.max(np.abs(mis), initial=0.0))
        trace.append(max_mis)

    return PowerFlowSolution([b.name for b in sys.buses], v, s_calc, iterations, max_mis)


@dataclass
class ReductionMap:
    """Recovers eliminated-bus voltages from retained-bus quantities."""

    retained: list[str]
    eliminated: list[str]
    _lu_ee: object = field(repr=False)
    _y_ek: sp.csc_matrix = field(repr=False)

    def recover(self, v_retained: np.ndarray, i_eliminated: np.ndarray | None = None) -> np.ndarray:
        """V_e = Y_ee^-1 (I_e - Y_ek V_k); I_e defaults to zero (passive buses)."""
        if not self.eliminated:
            return np.zeros(0, dtype=complex)
        rhs = -(self._y_ek @ np.asarray(v_retained, dtype=complex))
        if i_eliminated is not None:
            rhs = rhs + np.asarray(i_eliminated, dtype=complex)
        return self._lu_ee.solve(rhs)


def kron_reduce(
    ybus: AdmittanceMatrix, keep: "list[str] | set[str]"
) -> tuple[AdmittanceMatrix, ReductionMap]:
    """Schur-complement elimination of all buses not in ``keep``.

    Requires the eliminated block to be nonsingular, which holds once
    loads/shunts are stamped and every eliminated bus connects (through
    other eliminated buses, possibly) to the retained set.
    """
    unknown = [b for b in keep if b not in ybus.bus_index]
    if unknown:
        raise ValueError(f"keep set references unknown bus(es): {unknown}")
    keep_set = set(keep)
    retained = [b for b in ybus.bus_names if b in keep_set]
    eliminated = [b for b in ybus.bus_names if b not in keep_set]
    k_idx = [ybus.bus_index[b] for b in retained]
    e_idx = [ybus.bus_index[b] for b in eliminated]

    mat = ybus.matrix().tocsc()
    if not eliminated:
        red = AdmittanceMatrix(mat.copy(), retained)
        empty = sp.csc_matrix((0, len(retained)), dtype=complex)
        return red, ReductionMap(retained, [], _lu_ee=None, _y_ek=empty)

    y_kk = mat[np.ix_(k_idx, k_idx)].tocsc()
    y_ke = mat[np.ix_(k_idx, e_idx)].tocsc()
    y_ek = mat[np.ix_(e_idx, k_idx)].tocsc()
    y_ee = mat[np.ix_(e_idx, e_idx)].tocsc()

    try:
        lu_ee = splu(y_ee)
        ee_inv_ek = lu_ee.solve(y_ek.toarray())
    except RuntimeError as exc:
        orphans = _unconnected_eliminated(mat, k_idx, e_idx, eliminated)
        if orphans:
            raise SingularNetworkError(
                f"cannot eliminate bus(es) {', '.join(orphans)}: "
                "no admittance path to the retained set") from exc
        raise SingularNetworkError(f"eliminated block is singular: {exc}") from exc
    if not np.all(np.isfinite(ee_inv_ek)):
        orphans = _unconnected_eliminated(mat, k_idx, e_idx, eliminated)
        target = ", ".join(orphans) if orphans else "eliminated block"
        raise SingularNetworkError(f"singular elimination: {target}")

    y_red = y_kk - sp.csc_matrix(y_ke @ ee_inv_ek)
    return AdmittanceMatrix(y_red, retained), ReductionMap(retained, eliminated, _lu_ee=lu_ee, _y_ek=y_ek)


def _unconnected_eliminated(mat, k_idx, e_idx, eliminated) -> list[str]:
    """Eliminated buses with no graph path to any retained bus."""
    adj = (np.abs(mat.toarray()) > 0.0)
    np.fill_diagonal(adj, False)
    reach = set(k_idx)
    frontier = list(k_idx)
    while frontier:
        nxt = []
        for i in frontier:
            for j in np.flatnonzero(adj[i]):
                if j not in reach:
                    reach.add(j)
                    nxt.append(j)
        frontier = nxt
    return [name for pos, name in zip(e_idx, eliminated) if pos not in reach]


def solve_network(ybus: AdmittanceMatrix, i_inj: np.ndarray) -> np.ndarray:
    """Solve Y V = I_inj with the cached sparse factorization."""
    return ybus.solve(i_inj)


def modify_admittance(ybus: AdmittanceMatrix, deltas) -> AdmittanceMatrix:
    """Increment entries by deltas; sets the dirty flag and returns ybus."""
    ybus.modify(deltas)
    return ybus
