"""Command-line entry point: validate, run, modal, serve.

Exit codes: 0 success, 1 domain error (invalid model, divergence, ...),
2 usage or file error. Model arguments take a path, a name found on
``DYNRMS_MODEL_PATH``, or the name of a bundled fixture
(``kundur_two_area``, ``ieee39``).
"""

from __future__ import annotations

import hashlib
import json
import os
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import __version__, data, engine, modal, network
from .engine import Event, SimulationConfig
from .errors import (EventError, InitializationError, ModelError,
                     ModelFormatError, PowerFlowError, SingularNetworkError)

_DOMAIN_ERRORS = (ModelError, ModelFormatError, PowerFlowError,
                  SingularNetworkError, InitializationError, EventError,
                  FloatingPointError)

_EVENT_KIND_ALIASES = {"trip": "line_trip", "close": "line_close",
                       "fault": "fault_on", "clear": "fault_off"}


class FileError(click.ClickException):
    exit_code = 2


def resolve_model_path(name: str) -> Path:
    """Find a model by path, on DYNRMS_MODEL_PATH, or among bundled fixtures."""
    p = Path(name)
    if p.is_file():
        return p
    candidates = [name] if name.endswith(".grid") else [name, f"{name}.grid"]
    for d in os.environ.get("DYNRMS_MODEL_PATH", "").split(os.pathsep):
        if not d:
            continue
        for c in candidates:
            q = Path(d) / c
            if q.is_file():
                return q
    try:
        return data.fixture_path(name)
    except FileNotFoundError:
        raise FileError(f"model not found: {name}") from None


def load_model_checked(name: str) -> data.SystemDescription:
    path = resolve_model_path(name)
    try:
        return data.load_model(path)
    except (ModelFormatError, ModelError) as exc:
        raise click.ClickException(f"{path}: {exc}") from exc


def parse_events_file(text: str) -> list[Event]:
    """One event per line: ``t kind target [value]``; '#' starts a comment."""
    events: list[Event] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) not in (3, 4):
            raise ModelFormatError("expected 't kind target [value]'", line_no)
        try:
            t = float(tokens[0])
        except ValueError:
            raise ModelFormatError(f"bad event time {tokens[0]!r}", line_no) from None
        kind = _EVENT_KIND_ALIASES.get(tokens[1], tokens[1])
        if kind not in Event.KINDS:
            raise ModelFormatError(f"unknown event kind {tokens[1]!r}", line_no)
        value = None
        if len(tokens) == 4:
            try:
                value = float(tokens[3])
            except ValueError:
                raise ModelFormatError(f"bad event value {tokens[3]!r}", line_no) from None
        events.append(Event(t, kind, tokens[2], value))
    return events


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@click.group()
@click.version_option(version=__version__, prog_name="dynrms")
def main() -> None:
    """Dynamic RMS power system simulator."""


@main.command()
@click.argument("model")
def validate(model: str) -> None:
    """Check a model file; exit 0 only if every invariant holds."""
    path = resolve_model_path(model)
    try:
        sysd = data.load_model(path, check=False)
    except ModelFormatError as exc:
        raise click.ClickException(str(exc)) from exc
    diagnostics = data.validate(sysd)
    for d in diagnostics:
        click.echo(str(d), err=True)
    errors = [d for d in diagnostics if d.severity == "error"]
    if errors:
        raise click.ClickException(f"{len(errors)} error(s) in {path}")
    click.echo(f"{path}: OK ({len(sysd.buses)} buses, {len(sysd.generators)} "
               f"generators, {len(sysd.branches)} branches)")


def _build_initialized(sysd, config):
    pf = network.solve_power_flow(sysd)
    sysm = engine.build(sysd, pf, config)
    x0 = sysm.initialize()
    return pf, sysm, x0


@main.command()
@click.argument("model")
@click.option("--t-end", type=float, default=10.0, show_default=True)
@click.option("--dt", type=float, default=0.005, show_default=True)
@click.option("--method", type=click.Choice(["euler", "modified_euler", "rk4", "adaptive"]),
              default="modified_euler", show_default=True)
@click.option("--corrector-iters", type=int, default=1, show_default=True)
@click.option("--events", "events_path", type=click.Path(path_type=Path), default=None,
              help="Event file: one 't kind target [value]' per line.")
@click.option("--out", type=click.Path(path_type=Path), default=Path("trajectory.csv"),
              show_default=True)
@click.option("--keep-bus", "keep_buses", multiple=True,
              help="Extra bus to retain in the reduced network (repeatable).")
@click.option("--fault-admittance", type=float, default=1e5, show_default=True)
def run(model, t_end, dt, method, corrector_iters, events_path, out, keep_buses,
        fault_admittance) -> None:
    """Batch simulation: power flow, initialization, time-domain run, CSV."""
    sysd = load_model_checked(model)
    model_path = resolve_model_path(model)
    events: list[Event] = []
    events_text = None
    if events_path is not None:
        if not events_path.is_file():
            raise FileError(f"event file not found: {events_path}")
        events_text = events_path.read_text(encoding="utf-8")
        try:
            events = parse_events_file(events_text)
        except ModelFormatError as exc:
            raise click.ClickException(f"{events_path}: {exc}") from exc
    config = SimulationConfig(method=method, dt=dt, corrector_iters=corrector_iters,
                              t_end=t_end, fault_admittance=fault_admittance,
                              keep_buses=tuple(keep_buses))
    try:
        pf, sysm, x0 = _build_initialized(sysd, config)
        traj = engine.run_batch(sysm, x0, config, events)
    except _DOMAIN_ERRORS as exc:
        raise click.ClickException(str(exc)) from exc
    out.parent.mkdir(parents=True, exist_ok=True)
    traj.to_csv(out)

    manifest = {
        "inputs": {
            "model": str(model_path),
            "model_sha256": _sha256(model_path),
            "events": [{"t": e.t, "kind": e.kind, "target": e.target, "value": e.value}
                       for e in events],
            "config": {"method": method, "dt": dt, "corrector_iters": corrector_iters,
                       "t_end": t_end, "fault_admittance": fault_admittance,
                       "keep_buses": list(keep_buses)},
        },
        "outputs": {"trajectory": str(out), "trajectory_sha256": _sha256(out)},
        "meta": {
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "tool": f"dynrms {__version__}",
            "python": sys.version.split()[0],
            "platform": platform.platform(),
        },
    }
    manifest_path = out.with_suffix(".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    click.echo(f"wrote {out} ({traj.data.shape[0]} samples, "
               f"{len(traj.columns)} columns) and {manifest_path}")


@main.command()
@click.argument("model", required=False)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Write the mode table CSV here (default: stdout).")
@click.option("--eps", type=float, default=1e-6, show_default=True,
              help="Finite-difference perturbation size.")
@click.option("--linear-test", default=None, hidden=True,
              help="JSON matrix: analyse this linear system instead of a model.")
def modal_cmd(model, out, eps, linear_test) -> None:
    """Small-signal analysis: numerical Jacobian, eigenvalues, mode table."""
    if linear_test is not None:
        A = np.array(json.loads(linear_test), dtype=float)
        lin = modal.eigenanalysis(A)
    else:
        if model is None:
            raise click.UsageError("MODEL is required (or use --linear-test)")
        sysd = load_model_checked(model)
        try:
            pf, sysm, x0 = _build_initialized(sysd, SimulationConfig())
            A = modal.numerical_jacobian(sysm, x0.values, eps=eps)
            lin = modal.eigenanalysis(A, sysm.allocation.state_names, x0.values)
        except _DOMAIN_ERRORS as exc:
            raise click.ClickException(str(exc)) from exc
    report = modal.mode_report(lin)
    if out is None:
        click.echo(report, nl=False)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report, encoding="utf-8")
        click.echo(f"wrote {out} ({len(lin.modes)} modes)")


main.add_command(modal_cmd, name="modal")


@main.command()
@click.argument("model")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8700, show_default=True)
@click.option("--dt", type=float, default=0.005, show_default=True)
@click.option("--method", type=click.Choice(["euler", "modified_euler", "rk4"]),
              default="modified_euler", show_default=True)
@click.option("--corrector-iters", type=int, default=1, show_default=True)
@click.option("--speed", type=float, default=1.0, show_default=True)
@click.option("--keep-bus", "keep_buses", multiple=True)
@click.option("--t-end", type=float, default=None,
              help="Stop after this much simulation time (default: run until interrupted).")
@click.option("--ui", "ui_dir", type=click.Path(path_type=Path), default=None,
              help="Serve this directory as the web UI (default: bundled frontend/dist if present).")
def serve(model, host, port, dt, method, corrector_iters, speed, keep_buses,
          t_end, ui_dir) -> None:
    """Real-time simulation behind the WebSocket protocol."""
    from .realtime import RealtimeSession
    from .service import serve as _serve

    sysd = load_model_checked(model)
    config = SimulationConfig(method=method, dt=dt, corrector_iters=corrector_iters,
                              keep_buses=tuple(keep_buses))
    try:
        pf, sysm, x0 = _build_initialized(sysd, config)
    except _DOMAIN_ERRORS as exc:
        raise click.ClickException(str(exc)) from exc
    session = RealtimeSession(sysm, x0, config, speed=speed, t_end=t_end)
    if ui_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = bundled if bundled.is_dir() else None
    click.echo(f"serving {model} on ws://{host}:{port}/ws (dt={dt}s, {method})")
    try:
        _serve(session, host=host, port=port, static_dir=ui_dir)
    except KeyboardInterrupt:
        pass
    finally:
        session.stop()
        click.echo("\n" + session.stats.summary())


if __name__ == "__main__":
    main()
