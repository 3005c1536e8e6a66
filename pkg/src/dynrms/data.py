"""Grid model records, the model text format, and validation.

A model file is UTF-8 text made of named tables. A table starts with a
bracketed header line (``[buses]``), followed by one row of column names
and then one whitespace/comma-separated value row per record. ``#`` starts
a comment anywhere on a line. Required tables: ``buses``, ``branches``,
``generators``; optional: ``loads``, ``avr_sexs``, ``gov_tgov1``,
``pss_stab1`` and ``base``. All impedances in the file are per-unit on the
system base, except generator parameters, which are per-unit on the
machine base ``S_n`` (TGOV1 power limits and droop likewise).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .errors import ModelError, ModelFormatError

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_.:+-]*$")

BUS_TYPES = ("slack", "PV", "PQ")


@dataclass(frozen=True)
class BusRecord:
    name: str
    v_n: float  # nominal voltage, kV
    type: str  # slack | PV | PQ


@dataclass(frozen=True)
class BranchRecord:
    name: str
    from_bus: str
    to_bus: str
    r: float  # series resistance, pu system base
    x: float  # series reactance, pu system base
    b: float = 0.0  # total shunt susceptance, pu
    ratio: float = 1.0  # off-nominal tap on the from side
    status: bool = True  # in service


@dataclass(frozen=True)
class GeneratorRecord:
    name: str
    bus: str
    S_n: float  # machine base, MVA
    P_set: float  # dispatch, pu on system base
    V_set: float  # terminal voltage setpoint, pu
    H: float  # inertia constant, s (machine base)
    X_d: float
    X_q: float
    X_d_t: float
    X_q_t: float
    X_d_st: float
    X_q_st: float
    T_d0_t: float
    T_q0_t: float
    T_d0_st: float
    T_q0_st: float
    D: float = 0.0  # damping torque coefficient, pu (machine base)
    R: float = 0.0  # stator resistance, pu (machine base)


@dataclass(frozen=True)
class LoadRecord:
    name: str
    bus: str
    P: float  # pu on system base
    Q: float


@dataclass(frozen=True)
class SEXSRecord:
    name: str
    gen: str
    K: float
    T_a: float
    T_b: float
    T_e: float
    E_min: float
    E_max: float


@dataclass(frozen=True)
class TGOV1Record:
    name: str
    gen: str
    R_droop: float  # speed droop, pu on machine base
    T_1: float
    T_2: float
    T_3: float
    V_min: float  # valve limits, pu on machine base
    V_max: float


@dataclass(frozen=True)
class STAB1Record:
    name: str
    gen: str
    K: float
    T_w: float
    T_1: float
    T_2: float
    T_3: float
    T_4: float
    H_lim: float


@dataclass(frozen=True)
class SystemDescription:
    base_mva: float = 1000.0
    f_n: float = 50.0
    buses: tuple[BusRecord, ...] = ()
    branches: tuple[BranchRecord, ...] = ()
    generators: tuple[GeneratorRecord, ...] = ()
    loads: tuple[LoadRecord, ...] = ()
    avrs: tuple[SEXSRecord, ...] = ()
    govs: tuple[TGOV1Record, ...] = ()
    psss: tuple[STAB1Record, ...] = ()

    def bus_index(self) -> dict[str, int]:
        return {b.name: i for i, b in enumerate(self.buses)}

    def slack_bus(self) -> BusRecord:
        return next(b for b in self.buses if b.type == "slack")

    def generator_buses(self) -> list[str]:
        seen: list[str] = []
        for g in self.generators:
            if g.bus not in seen:
                seen.append(g.bus)
        return seen

    def without_controls(self) -> "SystemDescription":
        """Copy with all AVR/GOV/PSS records dropped (bare machines)."""
        return replace(self, avrs=(), govs=(), psss=())


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    record: str  # identity of the offending record
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.record}: {self.message}"


# --- per-unit base conversion -------------------------------------------

def impedance_to_system_base(z: float, S_n: float, base_mva: float) -> float:
    """Machine-base impedance to system base (same voltage base)."""
    return z * base_mva / S_n


def impedance_to_machine_base(z: float, S_n: float, base_mva: float) -> float:
    return z * S_n / base_mva


# --- file format ---------------------------------------------------------

_TABLES: dict[str, tuple[type, list[str], dict[str, object]]] = {
    "buses": (BusRecord, ["name", "v_n", "type"], {}),
    "branches": (
        BranchRecord,
        ["name", "from", "to", "r", "x", "b", "ratio", "status"],
        {"b": 0.0, "ratio": 1.0, "status": True},
    ),
    "generators": (
        GeneratorRecord,
        ["name", "bus", "S_n", "P_set", "V_set", "H", "D", "R",
         "X_d", "X_q", "X_d_t", "X_q_t", "X_d_st", "X_q_st",
         "T_d0_t", "T_q0_t", "T_d0_st", "T_q0_st"],
        {"D": 0.0, "R": 0.0},
    ),
    "loads": (LoadRecord, ["name", "bus", "P", "Q"], {}),
    "avr_sexs": (SEXSRecord, ["name", "gen", "K", "T_a", "T_b", "T_e", "E_min", "E_max"], {}),
    "gov_tgov1": (TGOV1Record, ["name", "gen", "R_droop", "T_1", "T_2", "T_3", "V_min", "V_max"], {}),
    "pss_stab1": (STAB1Record, ["name", "gen", "K", "T_w", "T_1", "T_2", "T_3", "T_4", "H_lim"], {}),
}

# file column -> dataclass field where they differ
_FIELD_ALIASES = {"from": "from_bus", "to": "to_bus"}


def _parse_value(column: str, token: str, line_no: int):
    if column == "name" or column in ("bus", "gen", "from", "to"):
        if not _IDENT.match(token):
            raise ModelFormatError(f"invalid identifier {token!r}", line_no)
        return token
    if column == "type":
        for t in BUS_TYPES:
            if token.lower() == t.lower():
                return t
        raise ModelFormatError(f"unknown bus type {token!r} (expected slack/PV/PQ)", line_no)
    if column == "status":
        if token in ("1", "in"):
            return True
        if token in ("0", "out"):
            return False
        raise ModelFormatError(f"bad status {token!r} (expected 1/0/in/out)", line_no)
    try:
        return float(token)
    except ValueError:
        raise ModelFormatError(f"bad number {token!r} for column {column!r}", line_no) from None


def _tokenize(line: str) -> list[str]:
    return [t for t in re.split(r"[,\s]+", line.strip()) if t]


def parse_model(text: str, check: bool = True) -> SystemDescription:
    """Parse model-file text into a SystemDescription.

    Raises ModelFormatError on syntax problems (with line number) and,
    when ``check`` is true, ModelError if the parsed system violates any
    structural invariant (duplicate names, dangling references, ...).
    """
    tables: dict[str, list] = {name: [] for name in _TABLES}
    base_row: dict[str, float] = {}
    section: str | None = None
    columns: list[str] | None = None
    seen_sections: set[str] = set()

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.match(r"^\[([A-Za-z0-9_]+)\]$", line)
        if m:
            section = m.group(1)
            if section != "base" and section not in _TABLES:
                raise ModelFormatError(f"unknown table {section!r}", line_no)
            if section in seen_sections:
                raise ModelFormatError(f"table {section!r} appears twice", line_no)
            seen_sections.add(section)
            columns = None
            continue
        if section is None:
            raise ModelFormatError("data before any table header", line_no)

        tokens = _tokenize(line)
        if columns is None:
            columns = tokens
            if section == "base":
                bad = [c for c in columns if c not in ("base_mva", "f_n")]
            else:
                known = _TABLES[section][1]
                bad = [c for c in columns if c not in known]
                missing = [
                    c for c in known
                    if c not in columns
                    and _FIELD_ALIASES.get(c, c) not in _TABLES[section][2]
                ]
                if missing:
                    raise ModelFormatError(
                        f"table {section!r} missing required column(s) {missing}", line_no)
            if bad:
                raise ModelFormatError(f"unknown column(s) {bad} in table {section!r}", line_no)
            if len(set(columns)) != len(columns):
                raise ModelFormatError("repeated column name", line_no)
            continue

        if len(tokens) != len(columns):
            raise ModelFormatError(
                f"expected {len(columns)} values, got {len(tokens)}", line_no)
        if section == "base":
            for col, tok in zip(columns, tokens):
                base_row[col] = _parse_value(col, tok, line_no)
            continue
        cls, _, defaults = _TABLES[section]
        kwargs = dict(defaults)
        for col, tok in zip(columns, tokens):
            kwargs[_FIELD_ALIASES.get(col, col)] = _parse_value(col, tok, line_no)
        tables[section].append(cls(**kwargs))

    if section is None:
        raise ModelFormatError("empty model file", 1)

    sys = SystemDescription(
        base_mva=base_row.get("base_mva", 1000.0),
        f_n=base_row.get("f_n", 50.0),
        buses=tuple(tables["buses"]),
        branches=tuple(tables["branches"]),
        generators=tuple(tables["generators"]),
        loads=tuple(tables["loads"]),
        avrs=tuple(tables["avr_sexs"]),
        govs=tuple(tables["gov_tgov1"]),
        psss=tuple(tables["pss_stab1"]),
    )
    if not sys.buses:
        raise ModelFormatError("model defines no buses", 1)
    if check:
        problems = [d for d in validate(sys) if d.severity == "error"]
        if problems:
            raise ModelError(problems)
    return sys


def load_model(path: str | Path, check: bool = True) -> SystemDescription:
    return parse_model(Path(path).read_text(encoding="utf-8"), check=check)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_model(sys: SystemDescription) -> str:
    """Canonical text form; ``parse_model(serialize_model(s)) == s``."""
    out: list[str] = []

    def table(name: str, columns: list[str], rows) -> None:
        out.append(f"[{name}]")
        out.append("  ".join(columns))
        for row in rows:
            out.append("  ".join(_fmt(getattr(row, _FIELD_ALIASES.get(c, c))) for c in columns))
        out.append("")

    out.append("[base]")
    out.append("base_mva  f_n")
    out.append(f"{_fmt(sys.base_mva)}  {_fmt(sys.f_n)}")
    out.append("")
    table("buses", _TABLES["buses"][1], sys.buses)
    table("branches", _TABLES["branches"][1], sys.branches)
    table("generators", _TABLES["generators"][1], sys.generators)
    if sys.loads:
        table("loads", _TABLES["loads"][1], sys.loads)
    if sys.avrs:
        table("avr_sexs", _TABLES["avr_sexs"][1], sys.avrs)
    if sys.govs:
        table("gov_tgov1", _TABLES["gov_tgov1"][1], sys.govs)
    if sys.psss:
        table("pss_stab1", _TABLES["pss_stab1"][1], sys.psss)
    return "\n".join(out)


# --- validation ----------------------------------------------------------

def validate(sys: SystemDescription) -> list[Diagnostic]:
    """Check every structural invariant; empty result means a valid system."""
    diags: list[Diagnostic] = []

    def err(record: str, message: str) -> None:
        diags.append(Diagnostic("error", record, message))

    bus_names = [b.name for b in sys.buses]
    bus_set = set(bus_names)
    for name in sorted({n for n in bus_names if bus_names.count(n) > 1}):
        err(f"bus {name}", "duplicate bus name")

    if sys.base_mva <= 0:
        err("base", "base_mva must be positive")
    if sys.f_n <= 0:
        err("base", "f_n must be positive")

    slack = [b.name for b in sys.buses if b.type == "slack"]
    if len(slack) != 1:
        err("buses", f"exactly one slack bus required, found {len(slack)}")

    for b in sys.buses:
        if b.v_n <= 0:
            err(f"bus {b.name}", "nominal voltage must be positive")

    def unique_names(records, kind: str) -> None:
        names = [r.name for r in records]
        for name in sorted({n for n in names if names.count(n) > 1}):
            err(f"{kind} {name}", f"duplicate {kind} name")

    unique_names(sys.branches, "branch")
    unique_names(sys.generators, "generator")
    unique_names(sys.loads, "load")
    unique_names(sys.avrs + sys.govs + sys.psss, "control")

    for br in sys.branches:
        rid = f"branch {br.name}"
        for end in (br.from_bus, br.to_bus):
            if end not in bus_set:
                err(rid, f"references unknown bus {end!r}")
        if br.r == 0 and br.x == 0:
            err(rid, "zero-impedance branch (r = x = 0)")
        if br.ratio <= 0:
            err(rid, "tap ratio must be positive")

    gen_names = set()
    for g in sys.generators:
        rid = f"generator {g.name}"
        gen_names.add(g.name)
        if g.bus not in bus_set:
            err(rid, f"references unknown bus {g.bus!r}")
        if g.S_n <= 0:
            err(rid, "machine base S_n must be positive")
        if g.H <= 0:
            err(rid, "inertia constant H must be positive")
        if not (g.X_d >= g.X_d_t >= g.X_d_st > 0):
            err(rid, "d-axis reactances must satisfy X_d >= X_d_t >= X_d_st > 0")
        if not (g.X_q >= g.X_q_t >= g.X_q_st > 0):
            err(rid, "q-axis reactances must satisfy X_q >= X_q_t >= X_q_st > 0")
        if g.X_d_st != g.X_q_st:
            err(rid, "subtransient saliency not supported: X_d_st must equal X_q_st")
        for tc in ("T_d0_t", "T_q0_t", "T_d0_st", "T_q0_st"):
            if getattr(g, tc) <= 0:
                err(rid, f"time constant {tc} must be positive")

    for ld in sys.loads:
        if ld.bus not in bus_set:
            err(f"load {ld.name}", f"references unknown bus {ld.bus!r}")

    def check_control(rec, kind: str, denoms: list[str], limits: tuple[str, str] | None) -> None:
        rid = f"{kind} {rec.name}"
        if rec.gen not in gen_names:
            err(rid, f"references unknown generator {rec.gen!r}")
        for d in denoms:
            if getattr(rec, d) <= 0:
                err(rid, f"time constant {d} must be positive")
        if limits is not None:
            lo, hi = limits
            if not getattr(rec, lo) < getattr(rec, hi):
                err(rid, f"limits must satisfy {lo} < {hi}")

    attached: set[tuple[str, str]] = set()
    for rec, kind, denoms, limits in (
        [(a, "avr_sexs", ["T_b", "T_e"], ("E_min", "E_max")) for a in sys.avrs]
        + [(g, "gov_tgov1", ["T_1", "T_3"], ("V_min", "V_max")) for g in sys.govs]
        + [(p, "pss_stab1", ["T_w", "T_2", "T_4"], None) for p in sys.psss]
    ):
        check_control(rec, kind, denoms, limits)
        key = (kind, rec.gen)
        if rec.gen in gen_names and key in attached:
            err(f"{kind} {rec.name}", f"generator {rec.gen!r} already has a {kind} record")
        attached.add(key)

    for p in sys.psss:
        if p.H_lim <= 0:
            err(f"pss_stab1 {p.name}", "output limit H_lim must be positive")

    return diags


# --- bundled fixtures ----------------------------------------------------

def fixture_path(name: str) -> Path:
    """Path to a bundled model file, e.g. ``kundur_two_area`` or ``ieee39``."""
    fname = name if name.endswith(".grid") else f"{name}.grid"
    ref = resources.files("dynrms") / "fixtures" / fname
    with resources.as_file(ref) as p:
        if not p.exists():
            raise FileNotFoundError(f"no bundled fixture named {name!r}")
        return Path(p)
