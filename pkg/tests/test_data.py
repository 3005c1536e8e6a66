import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynrms import data
from dynrms.data import (
    BranchRecord,
    BusRecord,
    GeneratorRecord,
    LoadRecord,
    SEXSRecord,
    STAB1Record,
    SystemDescription,
    TGOV1Record,
    impedance_to_machine_base,
    impedance_to_system_base,
    parse_model,
    serialize_model,
    validate,
)
from dynrms.errors import ModelError, ModelFormatError

MINIMAL = """
[buses]
name  v_n  type
B1    230  slack
"""

GOLDEN = """[base]
base_mva  f_n
100.0  60.0

[buses]
name  v_n  type
B1  20.0  slack
B2  230.0  PQ

[branches]
name  from  to  r  x  b  ratio  status
L1  B1  B2  0.01  0.1  0.2  1.0  1

[generators]
name  bus  S_n  P_set  V_set  H  D  R  X_d  X_q  X_d_t  X_q_t  X_d_st  X_q_st  T_d0_t  T_q0_t  T_d0_st  T_q0_st
G1  B1  900.0  7.0  1.03  6.5  0.0  0.0025  1.8  1.7  0.3  0.55  0.25  0.25  8.0  0.4  0.03  0.05

[loads]
name  bus  P  Q
LD1  B2  0.5  0.1

[avr_sexs]
name  gen  K  T_a  T_b  T_e  E_min  E_max
AVR1  G1  200.0  1.0  1.0  0.02  -5.0  5.0

[gov_tgov1]
name  gen  R_droop  T_1  T_2  T_3  V_min  V_max
GOV1  G1  0.05  0.5  3.0  10.0  0.0  1.2

[pss_stab1]
name  gen  K  T_w  T_1  T_2  T_3  T_4  H_lim
PSS1  G1  10.0  10.0  0.05  0.02  3.0  5.4  0.1
"""


def test_minimal_file_parses():
    sysd = parse_model(MINIMAL)
    assert len(sysd.buses) == 1
    assert len(sysd.branches) == 0
    assert sysd.buses[0].type == "slack"
    assert sysd.base_mva == 1000.0 and sysd.f_n == 50.0  # defaults


def test_kundur_fixture_contents(kundur_sys):
    assert len(kundur_sys.buses) == 11
    assert len(kundur_sys.generators) == 4
    gens = {g.name for g in kundur_sys.generators}
    assert {a.gen for a in kundur_sys.avrs} == gens
    assert {g.gen for g in kundur_sys.govs} == gens
    assert {p.gen for p in kundur_sys.psss} == gens
    assert validate(kundur_sys) == []


def test_ieee39_fixture_contents(ieee39_sys):
    assert len(ieee39_sys.buses) == 39
    assert len(ieee39_sys.generators) == 10
    assert len(ieee39_sys.avrs) == len(ieee39_sys.govs) == len(ieee39_sys.psss) == 9
    assert validate(ieee39_sys) == []


def test_unknown_generator_reference_names_it():
    text = GOLDEN + "\n[avr_sexs]"  # malformed duplicate header
    with pytest.raises(ModelFormatError):
        parse_model(text)
    broken = GOLDEN.replace("AVR1  G1", "AVR1  G9")
    with pytest.raises(ModelError, match="G9"):
        parse_model(broken)


def test_duplicate_bus_name_rejected():
    text = MINIMAL + "B1    230  PQ\n"
    with pytest.raises(ModelError, match="duplicate bus name"):
        parse_model(text)
    sysd = parse_model(text, check=False)
    diags = validate(sysd)
    assert any("duplicate" in d.message for d in diags)


def test_subtransient_saliency_enforced():
    broken = GOLDEN.replace(
        "1.8  1.7  0.3  0.55  0.25  0.25",
        "1.8  1.7  0.3  0.55  0.25  0.24")
    sysd = parse_model(broken, check=False)
    diags = validate(sysd)
    assert any("saliency" in d.message for d in diags)
    with pytest.raises(ModelError, match="saliency"):
        parse_model(broken)


def test_syntax_error_carries_line_number():
    bad = "[buses]\nname  v_n  type\nB1  oops  slack\n"
    with pytest.raises(ModelFormatError, match="line 3"):
        parse_model(bad)


def test_unknown_table_and_column():
    with pytest.raises(ModelFormatError, match="unknown table"):
        parse_model("[nonsense]\na b\n1 2\n")
    with pytest.raises(ModelFormatError, match="unknown column"):
        parse_model("[buses]\nname  v_n  type  paint\nB1  230  slack  red\n")
    with pytest.raises(ModelFormatError, match="missing required column"):
        parse_model("[buses]\nname  v_n\nB1  230\n")


def test_missing_value_count():
    with pytest.raises(ModelFormatError, match="expected 3 values"):
        parse_model("[buses]\nname  v_n  type\nB1  230\n")


def test_golden_file_roundtrip():
    sysd = parse_model(GOLDEN)
    assert sysd.base_mva == 100.0
    assert sysd.branches[0].b == 0.2
    assert sysd.generators[0].X_q_t == 0.55
    assert sysd.loads[0].Q == 0.1
    assert sysd.govs[0].T_3 == 10.0
    # canonical text is stable under parse/serialize
    canon = serialize_model(sysd)
    assert parse_model(canon) == sysd
    assert serialize_model(parse_model(canon)) == canon


def test_validate_catches_structural_problems():
    sysd = parse_model(GOLDEN)
    no_slack = data.SystemDescription(
        base_mva=100, f_n=60,
        buses=tuple(BusRecord(b.name, b.v_n, "PQ") for b in sysd.buses),
        branches=sysd.branches, generators=sysd.generators)
    assert any("slack" in d.message for d in validate(no_slack))

    dangling = data.SystemDescription(
        base_mva=100, f_n=60, buses=sysd.buses,
        branches=(BranchRecord("LX", "B1", "NOPE", 0.0, 0.1),),
        generators=sysd.generators)
    assert any("unknown bus" in d.message for d in validate(dangling))

    zero_z = data.SystemDescription(
        base_mva=100, f_n=60, buses=sysd.buses,
        branches=(BranchRecord("LZ", "B1", "B2", 0.0, 0.0),),
        generators=sysd.generators)
    assert any("zero-impedance" in d.message for d in validate(zero_z))


# --- round-trip property over random valid systems ------------------------

_name = st.from_regex(r"[A-Za-z][A-Za-z0-9_-]{0,7}", fullmatch=True)
_value = st.floats(min_value=1e-4, max_value=1e3, allow_nan=False,
                   allow_infinity=False)
_signed = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False,
                    allow_infinity=False)


@st.composite
def _systems(draw) -> SystemDescription:
    n_bus = draw(st.integers(min_value=1, max_value=5))
    bus_names = draw(st.lists(_name, min_size=n_bus, max_size=n_bus, unique=True))
    slack = draw(st.integers(min_value=0, max_value=n_bus - 1))
    buses = tuple(
        BusRecord(nm, draw(_value), "slack" if i == slack else draw(st.sampled_from(["PV", "PQ"])))
        for i, nm in enumerate(bus_names))

    def record_names(prefix, k):
        return [f"{prefix}{i}" for i in range(k)]

    n_br = draw(st.integers(min_value=0, max_value=4))
    branches = tuple(
        BranchRecord(nm, draw(st.sampled_from(bus_names)), draw(st.sampled_from(bus_names)),
                     r=draw(_value), x=draw(_value), b=draw(_value),
                     ratio=draw(_value), status=draw(st.booleans()))
        for nm in record_names("L", n_br))

    n_gen = draw(st.integers(min_value=0, max_value=3))
    gens = []
    for nm in record_names("G", n_gen):
        x_st = draw(_value)
        x_d_t = x_st * (1.0 + draw(_value))
        x_d = x_d_t * (1.0 + draw(_value))
        x_q_t = x_st * (1.0 + draw(_value))
        x_q = x_q_t * (1.0 + draw(_value))
        gens.append(GeneratorRecord(
            nm, draw(st.sampled_from(bus_names)), S_n=draw(_value),
            P_set=draw(_signed), V_set=draw(_value), H=draw(_value),
            D=draw(_value), R=draw(_value),
            X_d=x_d, X_q=x_q, X_d_t=x_d_t, X_q_t=x_q_t, X_d_st=x_st, X_q_st=x_st,
            T_d0_t=draw(_value), T_q0_t=draw(_value),
            T_d0_st=draw(_value), T_q0_st=draw(_value)))
    gens = tuple(gens)

    loads = tuple(
        LoadRecord(nm, draw(st.sampled_from(bus_names)), draw(_signed), draw(_signed))
        for nm in record_names("LD", draw(st.integers(0, 2))))

    avrs = govs = psss = ()
    if gens:
        gen_names = [g.name for g in gens]
        if draw(st.booleans()):
            avrs = tuple(SEXSRecord(f"A{g}", g, K=draw(_value), T_a=draw(_value),
                                    T_b=draw(_value), T_e=draw(_value),
                                    E_min=-draw(_value), E_max=draw(_value))
                         for g in gen_names)
        if draw(st.booleans()):
            govs = tuple(TGOV1Record(f"GO{g}", g, R_droop=draw(_value), T_1=draw(_value),
                                     T_2=draw(_value), T_3=draw(_value),
                                     V_min=-draw(_value), V_max=draw(_value))
                         for g in gen_names)
        if draw(st.booleans()):
            psss = tuple(STAB1Record(f"P{g}", g, K=draw(_value), T_w=draw(_value),
                                     T_1=draw(_value), T_2=draw(_value),
                                     T_3=draw(_value), T_4=draw(_value),
                                     H_lim=draw(_value))
                         for g in gen_names)
    return SystemDescription(draw(_value), draw(_value), buses, branches, gens,
                             loads, avrs, govs, psss)


@given(_systems())
@settings(max_examples=60, deadline=None)
def test_parse_serialize_identity(sysd):
    assert parse_model(serialize_model(sysd), check=False) == sysd


@given(z=st.floats(min_value=1e-6, max_value=1e4, allow_nan=False),
       s_n=st.floats(min_value=0.1, max_value=5e3, allow_nan=False),
       base=st.floats(min_value=0.1, max_value=5e3, allow_nan=False))
@settings(max_examples=100, deadline=None)
def test_per_unit_conversion_roundtrip(z, s_n, base):
    back = impedance_to_machine_base(impedance_to_system_base(z, s_n, base), s_n, base)
    assert math.isclose(back, z, rel_tol=1e-12)
