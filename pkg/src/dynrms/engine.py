"""Assembly of the global ODE: state allocation, equilibrium, stepping, events.

The network algebraic equations are eliminated inside the derivative
function: every evaluation computes machine Norton injections, solves the
reduced network for bus voltages, derives terminal/dq currents and feeds
the wired device models. The result is a plain ODE in the flat state
vector, integrable with any of the fixed-step methods or the adaptive
pair.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import controls, machines
from .data import SystemDescription
from .errors import EventError, InitializationError
from .integrators import AdaptiveIntegrator, fixed_step
from .network import (
    AdmittanceMatrix,
    PowerFlowSolution,
    ReductionMap,
    branch_stamps,
    build_ybus,
    kron_reduce,
)
from .recorder import RecordedTrajectory, Recorder

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AllocationEntry:
    device: str
    model: str  # machine | avr_sexs | gov_tgov1 | pss_stab1
    offset: int
    length: int


@dataclass(frozen=True)
class AllocationMap:
    entries: tuple[AllocationEntry, ...]
    total: int
    state_names: tuple[str, ...]

    def slice_of(self, device: str) -> slice:
        for e in self.entries:
            if e.device == device:
                return slice(e.offset, e.offset + e.length)
        raise KeyError(device)


@dataclass(frozen=True)
class SimulationConfig:
    method: str = "modified_euler"
    dt: float = 0.005
    corrector_iters: int = 1
    t_end: float = 10.0
    fault_admittance: float = 1e5
    keep_buses: tuple[str, ...] = ()
    rtol: float = 1e-6
    atol: float = 1e-8

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.corrector_iters < 1:
            raise ValueError("corrector_iters must be at least 1")


@dataclass(frozen=True)
class Event:
    t: float
    kind: str
    target: str
    value: object = None  # number; (re, im) pair for y_delta

    KINDS = ("line_trip", "line_close", "fault_on", "fault_off",
             "param_change", "control_toggle", "setpoint_change", "y_delta")


@dataclass(frozen=True)
class EventReceipt:
    event: Event
    inverse: Event | None  # replay-level counterpart; None for no-ops
    applied: bool
    detail: str = ""
    # exact-restoration closure (captures admittance restore tokens and
    # prior parameter values); run through OdeSystem.undo
    undo_fn: object = None


@dataclass
class StateVector:
    values: np.ndarray
    t: float


@dataclass
class _ControlBlock:
    params: object
    gen_pos: np.ndarray  # machine-array position per device
    state_idx: np.ndarray  # (n_devices, n_states) indices into the state vector
    active: np.ndarray  # bool per device
    ref: np.ndarray | None = None  # V_ref (AVR) / P_ref (GOV)


@dataclass
class _BranchInfo:
    record: object
    reduced_stamps: list[tuple[int, int, complex]] | None
    status: bool


class OdeSystem:
    """The assembled ODE: reduced network plus wired device models."""

    def __init__(self, sys: SystemDescription, pf: PowerFlowSolution,
                 config: SimulationConfig, y_red: AdmittanceMatrix,
                 reduction: ReductionMap):
        self.description = sys
        self.pf = pf
        self.config = config
        self.y_red = y_red
        self.reduction = reduction
        self.omega_s = 2.0 * math.pi * sys.f_n

        self.machines = machines.MachineParams.from_records(list(sys.generators), sys.base_mva)
        self.gen_names = [g.name for g in sys.generators]
        gen_pos_by_name = {n: k for k, n in enumerate(self.gen_names)}
        self.gen_bus_pos = np.array(
            [y_red.bus_index[g.bus] for g in sys.generators], dtype=int)

        n_gen = len(self.machines)
        entries: list[AllocationEntry] = []
        names: list[str] = []
        offset = 0
        for g in sys.generators:
            entries.append(AllocationEntry(g.name, "machine", offset, machines.N_STATES))
            names.extend(f"{g.name}.{s}" for s in machines.STATE_NAMES)
            offset += machines.N_STATES

        avr_by_gen = {a.gen: a for a in sys.avrs}
        gov_by_gen = {g.gen: g for g in sys.govs}
        pss_by_gen = {p.gen: p for p in sys.psss}
        block_slices: dict[str, dict[str, slice]] = {"avr": {}, "gov": {}, "pss": {}}
        for g in sys.generators:
            for kind, table, state_names in (
                ("avr", avr_by_gen, controls.SEXS_STATES),
                ("gov", gov_by_gen, controls.TGOV1_STATES),
                ("pss", pss_by_gen, controls.STAB1_STATES),
            ):
                rec = table.get(g.name)
                if rec is None:
                    continue
                length = len(state_names)
                entries.append(AllocationEntry(f"{g.name}.{kind}", f"{kind}_model", offset, length))
                names.extend(f"{g.name}.{kind}.{s}" for s in state_names)
                block_slices[kind][g.name] = slice(offset, offset + length)
                offset += length
        self.allocation = AllocationMap(tuple(entries), offset, tuple(names))

        def make_block(records, params, n_states, kind):
            if not records:
                return None
            gen_pos = np.array([gen_pos_by_name[r.gen] for r in records], dtype=int)
            idx = np.array(
                [np.arange(block_slices[kind][r.gen].start,
                           block_slices[kind][r.gen].stop) for r in records], dtype=int)
            return _ControlBlock(params, gen_pos, idx, np.ones(len(records), dtype=bool))

        s_n_of = lambda recs: np.array([ # noqa: E731 - machine base per control record
            sys.generators[gen_pos_by_name[r.gen]].S_n for r in recs])
        self.avr = make_block(sys.avrs, controls.SEXSParams.from_records(sys.avrs),
                              2, "avr")
        self.gov = make_block(
            sys.govs,
            controls.TGOV1Params.from_records(sys.govs, s_n_of(sys.govs), sys.base_mva),
            2, "gov")
        self.pss = make_block(sys.psss, controls.STAB1Params.from_records(sys.psss),
                              3, "pss")

        # per-generator device lookup (-1 where absent)
        def gen_map(block):
            out = np.full(n_gen, -1, dtype=int)
            if block is not None:
                out[block.gen_pos] = np.arange(len(block.gen_pos))
            return out

        self.gen_avr = gen_map(self.avr)
        self.gen_gov = gen_map(self.gov)
        self.gen_pss = gen_map(self.pss)

        # manual inputs: used for machines without (or with deactivated) controls
        self.e_f_manual = np.zeros(n_gen)
        self.p_m_manual = np.zeros(n_gen)
        self.v_pss_manual = np.zeros(n_gen)

        # branch registry for line events (needs both endpoints retained)
        full_index = sys.bus_index()
        self.branches: dict[str, _BranchInfo] = {}
        for br in sys.branches:
            stamps = branch_stamps(br, full_index)
            if br.from_bus in y_red.bus_index and br.to_bus in y_red.bus_index:
                red = [(y_red.bus_index[sys.buses[i].name],
                        y_red.bus_index[sys.buses[j].name], v) for i, j, v in stamps]
            else:
                red = None
            self.branches[br.name] = _BranchInfo(br, red, br.status)

        self.active_faults: dict[str, float] = {}

    # -- derivative evaluation ------------------------------------------

    def _network(self, x: np.ndarray):
        n = len(self.machines)
        gen = x[: 6 * n].reshape(n, 6)
        e_st = machines.network_emf(gen)
        z_no = self.machines.R + 1j * self.machines.X_d_st
        inj = np.zeros(self.y_red.dimension, dtype=complex)
        np.add.at(inj, self.gen_bus_pos, e_st / z_no)
        v = self.y_red.solve(inj)
        v_gen = v[self.gen_bus_pos]
        i_t = (e_st - v_gen) / z_no
        i_d, i_q = machines.to_dq(i_t, gen[:, 0])
        return gen, v, v_gen, i_t, i_d, i_q

    def rhs(self, x: np.ndarray) -> np.ndarray:
        """Time derivative of the full state vector (pure in x)."""
        n = len(self.machines)
        gen, v, v_gen, i_t, i_d, i_q = self._network(x)
        v_mag = np.abs(v_gen)
        dxdt = np.zeros_like(x)

        v_pss = self.v_pss_manual.copy()
        if self.pss is not None:
            st = x[self.pss.state_idx]
            dst, out = controls.stab1(st, self.pss.params, gen[self.pss.gen_pos, 1])
            act = self.pss.active
            dxdt[self.pss.state_idx[act]] = dst[act]
            v_pss[self.pss.gen_pos[act]] = out[act]

        e_f = self.e_f_manual.copy()
        if self.avr is not None:
            st = x[self.avr.state_idx]
            dst, out = controls.sexs(st, self.avr.params, self.avr.ref,
                                     v_mag[self.avr.gen_pos], v_pss[self.avr.gen_pos])
            act = self.avr.active
            dxdt[self.avr.state_idx[act]] = dst[act]
            e_f[self.avr.gen_pos[act]] = out[act]

        p_m = self.p_m_manual.copy()
        if self.gov is not None:
            st = x[self.gov.state_idx]
            dst, out = controls.tgov1(st, self.gov.params, gen[self.gov.gen_pos, 1],
                                      self.gov.ref)
            act = self.gov.active
            dxdt[self.gov.state_idx[act]] = dst[act]
            p_m[self.gov.gen_pos[act]] = out[act]

        dxdt[: 6 * n] = machines.derivatives(
            gen, self.machines, p_m, e_f, i_d, i_q, self.omega_s).ravel()
        return dxdt

    def observe(self, x: np.ndarray) -> dict:
        """Named signals at state x (pure): voltages, currents, P_e, E_f, P_m."""
        gen, v, v_gen, i_t, i_d, i_q = self._network(x)
        v_mag = np.abs(v_gen)

        v_pss = self.v_pss_manual.copy()
        if self.pss is not None:
            _, out = controls.stab1(x[self.pss.state_idx], self.pss.params,
                                    gen[self.pss.gen_pos, 1])
            act = self.pss.active
            v_pss[self.pss.gen_pos[act]] = out[act]
        e_f = self.e_f_manual.copy()
        if self.avr is not None:
            _, out = controls.sexs(x[self.avr.state_idx], self.avr.params,
                                   self.avr.ref, v_mag[self.avr.gen_pos],
                                   v_pss[self.avr.gen_pos])
            act = self.avr.active
            e_f[self.avr.gen_pos[act]] = out[act]
        p_m = self.p_m_manual.copy()
        if self.gov is not None:
            _, out = controls.tgov1(x[self.gov.state_idx], self.gov.params,
                                    gen[self.gov.gen_pos, 1], self.gov.ref)
            act = self.gov.active
            p_m[self.gov.gen_pos[act]] = out[act]

        return {
            "v_retained": v,
            "v_gen": v_gen,
            "i_t": i_t,
            "i_d": i_d,
            "i_q": i_q,
            "p_e": machines.electrical_power(gen, i_d, i_q),
            "e_f": e_f,
            "p_m": p_m,
            "v_pss": v_pss,
        }

    # -- initialization ---------------------------------------------------

    def _terminal_conditions(self) -> tuple[np.ndarray, np.ndarray]:
        sysd = self.description
        bus_idx = sysd.bus_index()
        load_sum: dict[str, complex] = {}
        for ld in sysd.loads:
            load_sum[ld.bus] = load_sum.get(ld.bus, 0.0) + complex(ld.P, ld.Q)

        n = len(self.machines)
        v_t = np.empty(n, dtype=complex)
        s_t = np.empty(n, dtype=complex)
        by_bus: dict[str, list[int]] = {}
        for k, g in enumerate(sysd.generators):
            by_bus.setdefault(g.bus, []).append(k)
        for bus, positions in by_bus.items():
            kb = bus_idx[bus]
            s_total = complex(self.pf.S[kb]) + load_sum.get(bus, 0.0)
            v_t[positions] = self.pf.V[kb]
            if len(positions) == 1:
                s_t[positions[0]] = s_total
            else:
                gens = [sysd.generators[k] for k in positions]
                w = np.array([g.S_n for g in gens])
                w = w / w.sum()
                p_res = s_total.real - sum(g.P_set for g in gens)
                for g, wk, k in zip(gens, w, positions):
                    s_t[k] = complex(g.P_set + p_res * wk, s_total.imag * wk)
        return v_t, s_t

    def initialize(self) -> StateVector:
        """Equilibrium state: every derivative vanishes at the power flow point."""
        v_t, s_t = self._terminal_conditions()
        gen_states, p_m, e_f = machines.initialize(v_t, s_t, self.machines, self.omega_s)
        self.e_f_manual = e_f.copy()
        self.p_m_manual = p_m.copy()
        self.v_pss_manual = np.zeros(len(self.machines))

        x = np.zeros(self.allocation.total)
        x[: 6 * len(self.machines)] = gen_states.ravel()
        if self.pss is not None:
            st = controls.stab1_initialize(self.pss.params,
                                           np.zeros(len(self.pss.gen_pos)))
            x[self.pss.state_idx] = st
        if self.avr is not None:
            st, v_ref = controls.sexs_initialize(
                self.avr.params, e_f[self.avr.gen_pos], np.abs(v_t[self.avr.gen_pos]))
            self.avr.ref = v_ref
            x[self.avr.state_idx] = st
        if self.gov is not None:
            st, p_ref = controls.tgov1_initialize(self.gov.params, p_m[self.gov.gen_pos])
            self.gov.ref = p_ref
            x[self.gov.state_idx] = st

        resid = float(np.max(np.abs(self.rhs(x)), initial=0.0))
        if resid >= 1e-8:
            k = int(np.argmax(np.abs(self.rhs(x))))
            raise InitializationError(
                f"equilibrium residual {resid:.2e} at state "
                f"{self.allocation.state_names[k]}")
        return StateVector(x, 0.0)

    # -- events ------------------------------------------------------------

    def apply_event(self, ev: Event, x: np.ndarray | None = None) -> EventReceipt:
        """Apply one event; the receipt can exactly undo it (see undo())."""
        kind = ev.kind
        if kind in ("line_trip", "line_close"):
            info = self.branches.get(ev.target)
            if info is None:
                raise EventError(f"unknown line: {ev.target}")
            want_closed = kind == "line_close"
            if info.status == want_closed:
                state = "closed" if want_closed else "open"
                log.warning("line %s already %s; event ignored", ev.target, state)
                return EventReceipt(ev, None, False, f"line already {state}")
            if info.reduced_stamps is None:
                raise EventError(
                    f"line {ev.target}: endpoint buses are not retained in the "
                    "reduced network (retain them via keep_buses)")
            sign = 1.0 if want_closed else -1.0
            token = self.y_red.modify(
                [(i, j, sign * v) for i, j, v in info.reduced_stamps])
            info.status = want_closed
            was = not want_closed

            def undo_line():
                self.y_red.restore(token)
                info.status = was

            inverse = Event(ev.t, "line_trip" if want_closed else "line_close", ev.target)
            return EventReceipt(ev, inverse, True, undo_fn=undo_line)

        if kind in ("fault_on", "fault_off"):
            if ev.target not in self.y_red.bus_index:
                raise EventError(f"fault bus {ev.target!r} not in the retained set")
            k = self.y_red.bus_index[ev.target]
            if kind == "fault_on":
                if ev.target in self.active_faults:
                    log.warning("bus %s already faulted; event ignored", ev.target)
                    return EventReceipt(ev, None, False, "already faulted")
                y_f = float(ev.value) if ev.value is not None else self.config.fault_admittance
                token = self.y_red.modify([(k, k, complex(y_f, 0.0))])
                self.active_faults[ev.target] = y_f

                def undo_fault_on():
                    self.y_red.restore(token)
                    self.active_faults.pop(ev.target, None)

                return EventReceipt(ev, Event(ev.t, "fault_off", ev.target), True,
                                    undo_fn=undo_fault_on)
            y_f = self.active_faults.pop(ev.target, None)
            if y_f is None:
                log.warning("no active fault at bus %s; event ignored", ev.target)
                return EventReceipt(ev, None, False, "no active fault")
            token = self.y_red.modify([(k, k, complex(-y_f, 0.0))])

            def undo_fault_off():
                self.y_red.restore(token)
                self.active_faults[ev.target] = y_f

            return EventReceipt(ev, Event(ev.t, "fault_on", ev.target, y_f), True,
                                undo_fn=undo_fault_off)

        if kind == "control_toggle":
            gen_name, block, dev = self._control_of(ev.target)
            was = bool(block.active[dev])
            want = (not was) if ev.value is None else bool(ev.value)
            if want == was:
                return EventReceipt(ev, None, False, "already in requested state")
            gpos = self.gen_names.index(gen_name)
            manual_arr = {"avr": self.e_f_manual, "gov": self.p_m_manual,
                          "pss": self.v_pss_manual}[ev.target.rsplit(".", 1)[-1]]
            prior_manual = float(manual_arr[gpos])
            if not want:
                self._freeze_control(ev.target, gen_name, block, dev, x)
            block.active[dev] = want

            def undo_toggle():
                block.active[dev] = was
                manual_arr[gpos] = prior_manual

            inverse = Event(ev.t, "control_toggle", ev.target, float(was))
            return EventReceipt(ev, inverse, True, undo_fn=undo_toggle)

        if kind == "setpoint_change" or kind == "param_change":
            ref = self.resolve_path(ev.target)
            if ev.value is None:
                raise EventError(f"{kind} requires a value")
            old = ref.get()
            ref.set(float(ev.value))
            return EventReceipt(ev, Event(ev.t, kind, ev.target, old), True,
                                undo_fn=lambda: ref.set(old))

        if kind == "y_delta":
            i, j = self._bus_pair(ev.target)
            re, im = ev.value
            token = self.y_red.modify([(i, j, complex(re, im))])
            return EventReceipt(ev, Event(ev.t, "y_delta", ev.target, (-re, -im)),
                                True, undo_fn=lambda: self.y_red.restore(token))

        raise EventError(f"unknown event kind: {kind}")

    def undo(self, receipt: EventReceipt) -> None:
        """Exactly restore the state changed by apply_event (bitwise)."""
        if receipt.applied and receipt.undo_fn is not None:
            receipt.undo_fn()

    def _bus_pair(self, target: str) -> tuple[int, int]:
        parts = target.split(",")
        if len(parts) != 2:
            raise EventError(f"bad bus pair {target!r} (expected 'BUS_I,BUS_J')")
        out = []
        for p in parts:
            p = p.strip()
            if p in self.y_red.bus_index:
                out.append(self.y_red.bus_index[p])
            else:
                raise EventError(f"bus {p!r} not in the retained set")
        return out[0], out[1]

    def _control_of(self, target: str):
        parts = target.split(".")
        if len(parts) != 2 or parts[1] not in ("avr", "gov", "pss"):
            raise EventError(f"bad control target {target!r} (expected GEN.avr/gov/pss)")
        gen_name, kind = parts
        if gen_name not in self.gen_names:
            raise EventError(f"unknown generator: {gen_name}")
        gpos = self.gen_names.index(gen_name)
        block = {"avr": self.avr, "gov": self.gov, "pss": self.pss}[kind]
        dev = {"avr": self.gen_avr, "gov": self.gen_gov, "pss": self.gen_pss}[kind][gpos]
        if block is None or dev < 0:
            raise EventError(f"generator {gen_name} has no {kind}")
        return gen_name, block, int(dev)

    def _freeze_control(self, target, gen_name, block, dev, x) -> None:
        """Latch the device's present output into the manual input arrays."""
        gpos = self.gen_names.index(gen_name)
        if x is None:
            return  # manual arrays keep their previous values
        st = x[block.state_idx[dev]][None, :]
        one = lambda arr: np.asarray(arr)[dev:dev + 1]
        if target.endswith(".avr"):
            p = block.params
            e_f = float(np.clip(st[0, 1], p.E_min[dev], p.E_max[dev]))
            self.e_f_manual[gpos] = e_f
        elif target.endswith(".gov"):
            p = block.params
            sub = controls.TGOV1Params([p.names[dev]], one(p.R_droop), one(p.T_1),
                                       one(p.T_2), one(p.T_3), one(p.V_min), one(p.V_max))
            _, p_m = controls.tgov1(st, sub, np.zeros(1), block.ref[dev:dev + 1])
            self.p_m_manual[gpos] = float(p_m[0])
        else:
            p = block.params
            sub = controls.STAB1Params([p.names[dev]], one(p.K), one(p.T_w), one(p.T_1),
                                       one(p.T_2), one(p.T_3), one(p.T_4), one(p.H_lim))
            d_omega = x[6 * gpos + 1:6 * gpos + 2]
            _, v_pss = controls.stab1(st, sub, d_omega)
            self.v_pss_manual[gpos] = float(v_pss[0])

    # -- parameter/setpoint paths -----------------------------------------

    def resolve_path(self, path: str) -> "PathRef":
        """Resolve 'G1.avr.K'-style paths to a gettable/settable scalar."""
        parts = path.split(".")
        if len(parts) < 2 or parts[0] not in self.gen_names:
            raise EventError(f"cannot resolve path {path!r}")
        gpos = self.gen_names.index(parts[0])

        if len(parts) == 2:
            manual = {"E_f": self.e_f_manual, "P_m": self.p_m_manual,
                      "V_pss": self.v_pss_manual}
            if parts[1] in manual:
                return PathRef(path, manual[parts[1]], gpos)
            mp = self.machines
            if parts[1] in ("R", "X_d_st", "X_q_st"):
                raise EventError(
                    f"{path}: parameter is stamped into the admittance matrix "
                    "and cannot be changed at runtime")
            if hasattr(mp, parts[1]) and isinstance(getattr(mp, parts[1]), np.ndarray):
                return PathRef(path, getattr(mp, parts[1]), gpos)
            raise EventError(f"cannot resolve path {path!r}")

        if len(parts) == 3:
            _, block, dev = self._control_of(".".join(parts[:2]))
            name = parts[2]
            if name in ("V_ref", "P_ref"):
                expected = "avr" if name == "V_ref" else "gov"
                if parts[1] != expected:
                    raise EventError(f"{path}: {name} lives on the {expected}")
                return PathRef(path, block.ref, dev)
            p = block.params
            if hasattr(p, name) and isinstance(getattr(p, name), np.ndarray):
                return PathRef(path, getattr(p, name), dev)
            raise EventError(f"cannot resolve path {path!r}")
        raise EventError(f"cannot resolve path {path!r}")


@dataclass
class PathRef:
    path: str
    array: np.ndarray
    index: int

    def get(self) -> float:
        return float(self.array[self.index])

    def set(self, value: float) -> None:
        self.array[self.index] = value


def build(sys: SystemDescription, pf: PowerFlowSolution,
          config: SimulationConfig | None = None) -> OdeSystem:
    """Stamp loads and machine shunts, Kron-reduce, allocate the state vector."""
    config = config or SimulationConfig()
    ybus = build_ybus(sys, include_loads=True, include_generator_shunts=True, pf=pf)
    keep = list(dict.fromkeys(sys.generator_buses() + list(config.keep_buses)))
    y_red, reduction = kron_reduce(ybus, keep)
    return OdeSystem(sys, pf, config, y_red, reduction)


def step(sysm: OdeSystem, x: np.ndarray, dt: float, method: str | None = None,
         corrector_iters: int | None = None) -> np.ndarray:
    """Advance one step of size dt with the configured (or given) method."""
    method = method or sysm.config.method
    iters = corrector_iters if corrector_iters is not None else sysm.config.corrector_iters
    if method == "adaptive":
        integ = AdaptiveIntegrator(sysm.rhs, rtol=sysm.config.rtol,
                                   atol=sysm.config.atol, h_init=dt)
        _, xs = integ.integrate(x, 0.0, dt)
        return xs[-1]
    return fixed_step(sysm.rhs, x, dt, method, iters)


def _check_finite(x: np.ndarray, t: float, allocation: AllocationMap) -> None:
    if not np.all(np.isfinite(x)):
        k = int(np.flatnonzero(~np.isfinite(x))[0])
        raise FloatingPointError(
            f"non-finite state {allocation.state_names[k]} at t = {t:.6f} s")


def run_batch(sysm: OdeSystem, x0: StateVector, config: SimulationConfig | None = None,
              events: "list[Event] | None" = None,
              recorder: Recorder | None = None) -> RecordedTrajectory:
    """Fixed- or adaptive-step run with events applied at step boundaries."""
    config = config or sysm.config
    events = sorted(events or [], key=lambda e: e.t)
    recorder = recorder or Recorder(sysm)
    x = np.array(x0.values, dtype=float)
    pending = list(events)

    def apply_due(t: float, horizon: float) -> None:
        while pending and pending[0].t <= t + horizon:
            ev = pending.pop(0)
            if abs(ev.t - t) > 1e-9:
                log.warning("event %s at t=%.6f snapped to step boundary %.6f",
                            ev.kind, ev.t, t)
            sysm.apply_event(ev, x)

    if config.method == "adaptive":
        integ = AdaptiveIntegrator(sysm.rhs, rtol=config.rtol, atol=config.atol,
                                   h_init=config.dt)
        t = 0.0
        apply_due(t, 1e-12)
        recorder.capture(t, x)
        while t < config.t_end - 1e-12:
            cap = config.t_end - t
            if pending:
                cap = min(cap, max(pending[0].t - t, 1e-12))
            x, h = integ.step(x, h_cap=cap)
            t += h
            _check_finite(x, t, sysm.allocation)
            apply_due(t, 1e-12)
            recorder.capture(t, x)
        return recorder.finish()

    n_steps = int(round(config.t_end / config.dt))
    for k in range(n_steps + 1):
        t = k * config.dt
        apply_due(t, config.dt / 2)
        recorder.capture(t, x)
        if k == n_steps:
            break
        x = fixed_step(sysm.rhs, x, config.dt, config.method, config.corrector_iters)
        _check_finite(x, (k + 1) * config.dt, sysm.allocation)
    return recorder.finish()
