"""Wall-clock-synchronized simulation loop with live commands and snapshots.

One thread owns the state and steps it at fixed dt; a thread-safe command
queue is drained between steps, snapshots fan out to subscribers after
every step. Synchronization keeps simulation time locked to the wall
clock: after each step the loop sleeps (coarse sleep plus a short spin)
until the next step is due. When a step overruns, the loop proceeds
immediately; simulation time never skips, lateness accumulates as drift.

Replay guarantee: integration is wall-clock-independent, so the log of
applied events (with their application times) replayed through
``engine.run_batch`` reproduces the live trajectory bitwise.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .engine import Event, OdeSystem, SimulationConfig, StateVector
from .errors import EventError
from .integrators import fixed_step

log = logging.getLogger(__name__)

SPEED_BOUNDS = (0.01, 10.0)

SETPOINT_LEAVES = ("V_ref", "P_ref", "E_f", "P_m", "V_pss")


@dataclass(frozen=True)
class TimingRecord:
    step: int
    t_sim: float
    calc_time: float  # derivative+integration time, s
    loop_time: float  # full step wall time including sleep, s
    overrun: bool


@dataclass
class TimingStats:
    dt: float
    records: list[TimingRecord] = field(default_factory=list)
    drift: float = 0.0  # wall seconds (scaled by speed) ahead of t_sim

    @property
    def steps(self) -> int:
        return len(self.records)

    def _calc(self) -> np.ndarray:
        return np.array([r.calc_time for r in self.records]) if self.records else np.zeros(1)

    @property
    def mean_calc_time(self) -> float:
        return float(self._calc().mean())

    @property
    def max_calc_time(self) -> float:
        return float(self._calc().max())

    @property
    def p99_calc_time(self) -> float:
        return float(np.percentile(self._calc(), 99))

    @property
    def overrun_fraction(self) -> float:
        if not self.records:
            return 0.0
        return sum(r.overrun for r in self.records) / len(self.records)

    @property
    def mean_abs_loop_error(self) -> float:
        if not self.records:
            return 0.0
        loops = np.array([r.loop_time for r in self.records])
        return float(np.mean(np.abs(loops - self.dt)))

    def summary(self) -> str:
        return (
            f"steps: {self.steps}\n"
            f"calc time: mean {self.mean_calc_time * 1e3:.3f} ms, "
            f"p99 {self.p99_calc_time * 1e3:.3f} ms, max {self.max_calc_time * 1e3:.3f} ms\n"
            f"loop jitter: mean |loop - dt| {self.mean_abs_loop_error * 1e3:.3f} ms\n"
            f"overruns: {self.overrun_fraction * 100:.2f} %\n"
            f"drift: {self.drift * 1e3:.3f} ms"
        )


@dataclass(frozen=True)
class Command:
    id: str
    kind: str  # Event kinds plus pause | resume | set_speed | console
    payload: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Ack:
    id: str
    status: str  # "applied" | "rejected"
    t_sim: float
    detail: str | None = None

    def to_message(self) -> dict:
        return {"type": "ack", "id": self.id, "status": self.status,
                "t_sim": self.t_sim, "detail": self.detail}


def build_snapshot(sysm: OdeSystem, x: np.ndarray, t_sim: float,
                   timing: TimingRecord | None, diverged: bool = False) -> dict:
    """Wire-format snapshot of the live state (complex values as [re, im])."""
    sig = sysm.observe(x)
    n = len(sysm.machines)
    gen = x[: 6 * n].reshape(n, 6)
    generators = {}
    for k, name in enumerate(sysm.gen_names):
        generators[name] = {
            "delta": float(gen[k, 0]),
            "d_omega": float(gen[k, 1]),
            "e_f": float(sig["e_f"][k]),
            "p_e": float(sig["p_e"][k]),
        }
    buses = {name: [float(v.real), float(v.imag)]
             for name, v in zip(sysm.y_red.bus_names, sig["v_retained"])}
    controls = {}
    for k, name in enumerate(sysm.gen_names):
        entry = {}
        for kind, block, lookup in (("avr", sysm.avr, sysm.gen_avr),
                                    ("gov", sysm.gov, sysm.gen_gov),
                                    ("pss", sysm.pss, sysm.gen_pss)):
            dev = lookup[k]
            entry[kind] = bool(block.active[dev]) if dev >= 0 else None
        controls[name] = entry
    lines = {name: info.status for name, info in sysm.branches.items()}
    timing_msg = None
    if timing is not None:
        timing_msg = {"step": timing.step, "t_sim": timing.t_sim,
                      "calc_time": timing.calc_time, "loop_time": timing.loop_time,
                      "overrun": timing.overrun}
    return {"type": "snapshot", "t_sim": t_sim, "generators": generators,
            "buses": buses, "controls": controls, "lines": lines,
            "timing": timing_msg, "diverged": diverged}


class RealtimeSession:
    """Steerable wall-clock simulation around an assembled OdeSystem."""

    def __init__(self, sysm: OdeSystem, x0: StateVector,
                 config: SimulationConfig | None = None, speed: float = 1.0,
                 t_end: float | None = None,
                 command_source: "queue.Queue | None" = None):
        self.sysm = sysm
        self.config = config or sysm.config
        if self.config.method == "adaptive":
            raise ValueError("real-time mode requires a fixed-step method")
        self.x = np.array(x0.values, dtype=float)
        self.t0 = float(x0.t)
        self.t_sim = self.t0
        self.speed = float(speed)
        self.t_end = t_end
        self.commands: queue.Queue = command_source if command_source is not None else queue.Queue()
        self.command_log: list[Event] = []
        self.acks: list[Ack] = []
        self.stats = TimingStats(dt=self.config.dt)
        self.diverged = False
        self._stop = threading.Event()
        self._paused = False
        self._scheduled: list[tuple[float, int, Event]] = []
        self._sched_count = itertools.count()
        self._subscribers: dict[int, tuple] = {}
        self._sub_lock = threading.Lock()
        self._sub_tokens = itertools.count(1)
        self._step_index = 0
        self._last_record: TimingRecord | None = None

    # -- public control ------------------------------------------------

    def submit(self, cmd: Command, reply=None) -> None:
        """Queue a command; it is applied before the next integration step."""
        self.commands.put((cmd, reply))

    def add_subscriber(self, sink, decimation: int = 1) -> int:
        with self._sub_lock:
            token = next(self._sub_tokens)
            self._subscribers[token] = (sink, max(1, int(decimation)))
            return token

    def remove_subscriber(self, token: int) -> None:
        with self._sub_lock:
            self._subscribers.pop(token, None)

    def stop(self) -> None:
        self._stop.set()

    # -- command handling -----------------------------------------------

    def _ack(self, cmd: Command, reply, status: str, detail: str | None = None) -> None:
        ack = Ack(cmd.id, status, self.t_sim, detail)
        self.acks.append(ack)
        if reply is not None:
            try:
                reply(ack)
            except Exception:
                log.exception("ack delivery failed for command %s", cmd.id)

    def _apply_logged(self, ev: Event) -> bool:
        """Apply an event at the current boundary; log it if it changed state."""
        ev = Event(self.t_sim, ev.kind, ev.target, ev.value)
        receipt = self.sysm.apply_event(ev, self.x)
        if receipt.applied:
            self.command_log.append(ev)
        return receipt.applied

    def schedule(self, delay: float, ev: Event) -> None:
        heapq.heappush(self._scheduled, (self.t_sim + delay, next(self._sched_count), ev))

    def _handle(self, cmd: Command, reply) -> None:
        kind = cmd.kind
        try:
            if kind == "pause":
                self._paused = True
                self._ack(cmd, reply, "applied")
            elif kind == "resume":
                self._paused = False
                self._reanchor = True
                self._ack(cmd, reply, "applied")
            elif kind == "set_speed":
                factor = float(cmd.payload["factor"])
                if not SPEED_BOUNDS[0] <= factor <= SPEED_BOUNDS[1]:
                    raise EventError(f"speed factor {factor} outside {SPEED_BOUNDS}")
                self.speed = factor
                self._reanchor = True
                self._ack(cmd, reply, "applied")
            elif kind == "console":
                result = console_eval(self, cmd.payload.get("text", ""))
                self._ack(cmd, reply, "applied", result)
            elif kind in Event.KINDS:
                value = cmd.payload.get("value")
                ev = Event(self.t_sim, kind, cmd.payload.get("target", ""), value)
                applied = self._apply_logged(ev)
                detail = None if applied else "no-op"
                self._ack(cmd, reply, "applied", detail)
            else:
                raise EventError(f"unknown command kind: {kind}")
        except (EventError, KeyError, TypeError, ValueError) as exc:
            self._ack(cmd, reply, "rejected", str(exc))

    def _drain(self) -> None:
        while self._scheduled and self._scheduled[0][0] <= self.t_sim + self.config.dt / 2:
            _, _, ev = heapq.heappop(self._scheduled)
            try:
                self._apply_logged(ev)
            except EventError as exc:
                log.warning("scheduled event failed: %s", exc)
        while True:
            try:
                cmd, reply = self.commands.get_nowait()
            except queue.Empty:
                return
            self._handle(cmd, reply)

    # -- the loop ---------------------------------------------------------

    def _publish(self, snapshot: dict) -> None:
        with self._sub_lock:
            subs = list(self._subscribers.items())
        for token, (sink, decimation) in subs:
            if self._step_index % decimation:
                continue
            try:
                sink(snapshot)
            except Exception:
                log.exception("snapshot subscriber %d failed; removing", token)
                self.remove_subscriber(token)

    @staticmethod
    def _sleep_until(due: float) -> float:
        """Coarse sleep, then spin for the final sub-millisecond."""
        while True:
            now = time.perf_counter()
            remaining = due - now
            if remaining <= 0:
                return now
            if remaining > 0.0015:
                time.sleep(remaining - 0.001)
            else:
                while time.perf_counter() < due:
                    pass
                return time.perf_counter()

    def run(self) -> TimingStats:
        """Blocking loop; returns timing statistics on stop/end/divergence."""
        dt = self.config.dt
        anchor_wall = time.perf_counter()
        anchor_sim = self.t_sim
        drift_carry = 0.0
        self._reanchor = False

        while not self._stop.is_set():
            if self.t_end is not None and self.t_sim >= self.t_end - 1e-12:
                break
            loop_start = time.perf_counter()
            self._drain()
            if self._reanchor:
                drift_carry = self.stats.drift
                anchor_wall = time.perf_counter()
                anchor_sim = self.t_sim
                self._reanchor = False
            if self._paused:
                drift_carry = self.stats.drift
                time.sleep(0.001)
                anchor_wall = time.perf_counter()
                anchor_sim = self.t_sim
                continue

            t0 = time.perf_counter()
            x_new = fixed_step(self.sysm.rhs, self.x, dt, self.config.method,
                               self.config.corrector_iters)
            calc = time.perf_counter() - t0

            self._step_index += 1
            # exact k*dt (matches run_batch's time grid bitwise for replay)
            self.t_sim = self.t0 + self._step_index * dt
            if not np.all(np.isfinite(x_new)):
                self.diverged = True
                log.error("state diverged at t = %.6f s; halting loop", self.t_sim)
                self._publish(build_snapshot(self.sysm, self.x, self.t_sim,
                                             self._last_record, diverged=True))
                break
            self.x = x_new

            self._publish(build_snapshot(self.sysm, self.x, self.t_sim,
                                         self._last_record))

            due = anchor_wall + (self.t_sim - anchor_sim) / self.speed
            now = time.perf_counter()
            overrun = now > due
            if not overrun:
                now = self._sleep_until(due)
            loop_time = now - loop_start
            self.stats.drift = drift_carry + (now - anchor_wall) * self.speed - (
                self.t_sim - anchor_sim)
            self._last_record = TimingRecord(self._step_index, self.t_sim, calc,
                                             loop_time, overrun)
            self.stats.records.append(self._last_record)
        return self.stats


def run_realtime(sysm: OdeSystem, x0: StateVector, config: SimulationConfig,
                 command_source: "queue.Queue | None" = None,
                 snapshot_sink=None, speed: float = 1.0,
                 t_end: float | None = None) -> TimingStats:
    """Run the synchronized loop until t_end (or stop); returns TimingStats."""
    session = RealtimeSession(sysm, x0, config, speed=speed, t_end=t_end,
                              command_source=command_source)
    if snapshot_sink is not None:
        session.add_subscriber(snapshot_sink)
    return session.run()


# -- console grammar ---------------------------------------------------------

CONSOLE_HELP = (
    "commands: get <path> | set <path> <value> | trip <line> | close <line> | "
    "fault <bus> [duration_s] | y add <bus_i> <bus_j> <re> <im>"
)


def console_eval(session: RealtimeSession, text: str) -> str:
    """Evaluate one console command; mutations go through the event path."""
    tokens = text.split()
    if not tokens:
        raise EventError("empty console command")
    verb = tokens[0].lower()

    if verb == "help":
        return CONSOLE_HELP
    if verb == "get":
        if len(tokens) != 2:
            raise EventError("usage: get <path>")
        ref = session.sysm.resolve_path(tokens[1])
        return f"{tokens[1]} = {ref.get()!r}"
    if verb == "set":
        if len(tokens) != 3:
            raise EventError("usage: set <path> <value>")
        path, value = tokens[1], _number(tokens[2])
        leaf = path.rsplit(".", 1)[-1]
        kind = "setpoint_change" if leaf in SETPOINT_LEAVES else "param_change"
        session._apply_logged(Event(session.t_sim, kind, path, value))
        return f"{path} = {value!r}"
    if verb in ("trip", "close"):
        if len(tokens) != 2:
            raise EventError(f"usage: {verb} <line>")
        kind = "line_trip" if verb == "trip" else "line_close"
        applied = session._apply_logged(Event(session.t_sim, kind, tokens[1]))
        return f"line {tokens[1]} {'now ' if applied else 'already '}" + (
            "open" if verb == "trip" else "closed")
    if verb == "fault":
        if len(tokens) not in (2, 3):
            raise EventError("usage: fault <bus> [duration_s]")
        bus = tokens[1]
        session._apply_logged(Event(session.t_sim, "fault_on", bus))
        if len(tokens) == 3:
            duration = _number(tokens[2])
            session.schedule(duration, Event(0.0, "fault_off", bus))
            return f"fault applied at {bus}; clearing in {duration} s"
        return f"fault applied at {bus}"
    if verb == "y" and len(tokens) == 6 and tokens[1].lower() == "add":
        re_v, im_v = _number(tokens[4]), _number(tokens[5])
        target = f"{tokens[2]},{tokens[3]}"
        session._apply_logged(Event(session.t_sim, "y_delta", target, (re_v, im_v)))
        return f"added {re_v}+{im_v}j to Y[{tokens[2]}, {tokens[3]}]"
    raise EventError(f"cannot parse console command {text!r} ({CONSOLE_HELP})")


def _number(token: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise EventError(f"not a number: {token!r}") from None
