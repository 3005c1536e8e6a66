import numpy as np
import pytest
import scipy.sparse as sp

from dynrms import data, network
from dynrms.data import parse_model
from dynrms.errors import PowerFlowError, SingularNetworkError
from dynrms.network import (
    build_ybus,
    kron_reduce,
    modify_admittance,
    solve_network,
    solve_power_flow,
)

TWO_BUS = """
[base]
base_mva  f_n
100  60

[buses]
name  v_n  type
B1  230  slack
B2  230  PQ

[branches]
name  from  to  r  x  b
L1  B1  B2  0.0  0.1  0.0

[loads]
name  bus  P  Q
LD  B2  0.5  0.0
"""

ONE_BUS_GEN = """
[base]
base_mva  f_n
100  60

[buses]
name  v_n  type
B1  20  slack

[generators]
name  bus  S_n  P_set  V_set  H  R  X_d  X_q  X_d_t  X_q_t  X_d_st  X_q_st  T_d0_t  T_q0_t  T_d0_st  T_q0_st
G1  B1  100.0  0.0  1.0  3.0  0.0  1.0  1.0  0.5  0.5  0.2  0.2  5.0  1.0  0.05  0.05
"""

CHAIN_3 = """
[buses]
name  v_n  type
B1  230  slack
B2  230  PQ
B3  230  PQ

[branches]
name  from  to  r  x  b
L12  B1  B2  0.0  0.1  0.0
L23  B2  B3  0.0  0.1  0.0
"""


def test_two_bus_line_stamping():
    sysd = parse_model(TWO_BUS)
    Y = build_ybus(sysd).toarray()
    expected = np.array([[-10j, 10j], [10j, -10j]])
    assert np.allclose(Y, expected, atol=1e-14)


def test_generator_shunt_stamping():
    sysd = parse_model(ONE_BUS_GEN)
    Y = build_ybus(sysd, include_generator_shunts=True).toarray()
    assert np.allclose(Y, [[-5j]], atol=1e-14)


def test_diagonal_dominance_on_shunted_rows(kundur_sys, kundur_pf):
    # Direct summation over the built matrix: rows that received load or
    # generator shunt stamps must dominate their off-diagonal row sum.
    Y = build_ybus(kundur_sys, include_loads=True, include_generator_shunts=True,
                   pf=kundur_pf)
    A = Y.toarray()
    shunted = {Y.bus_index[g.bus] for g in kundur_sys.generators}
    shunted |= {Y.bus_index[ld.bus] for ld in kundur_sys.loads}
    for i in sorted(shunted):
        off = sum(abs(A[i, j]) for j in range(A.shape[0]) if j != i)
        assert abs(A[i, i]) >= off, f"row {Y.bus_names[i]} not dominant"


# --- power flow -------------------------------------------------------------

def test_power_flow_single_slack_bus():
    sysd = parse_model("[buses]\nname v_n type\nB1 230 slack\n")
    pf = solve_power_flow(sysd)
    assert pf.iterations == 0
    assert pf.v_at("B1") == pytest.approx(1.0)
    assert pf.s_at("B1") == pytest.approx(0.0)


def test_power_flow_two_bus_against_bisection_oracle():
    # Frozen from the independent bisection oracle on the polar power
    # equations (Q2 = 0 -> v = cos(theta), sin(2 theta) = 2 x P2):
    theta_ref = -0.050083710580779898
    v_ref = 0.9987460731103327
    pf = solve_power_flow(parse_model(TWO_BUS), tol=1e-12)
    v2 = pf.v_at("B2")
    assert np.angle(v2) == pytest.approx(theta_ref, abs=1e-11)
    assert abs(v2) == pytest.approx(v_ref, abs=1e-11)


def test_power_flow_kundur_converges_and_balances(kundur_sys, kundur_pf):
    assert kundur_pf.iterations <= 6
    assert kundur_pf.max_mismatch < 1e-8
    # net injections sum to the losses; generation = load + losses
    losses = kundur_pf.S.real.sum()
    assert losses > 0
    # independent oracle: branch-wise I^2 R summation from the pi model
    idx = kundur_sys.bus_index()
    V = kundur_pf.V
    branch_losses = 0.0
    for br in kundur_sys.branches:
        if not br.status:
            continue
        vi, vj = V[idx[br.from_bus]], V[idx[br.to_bus]]
        y = 1.0 / complex(br.r, br.x)
        ysh = 0.5j * br.b
        a = br.ratio
        i_from = ((vi / a - vj) * y + (vi / a) * ysh) / a
        i_to = (vj - vi / a) * y + vj * ysh
        branch_losses += (vi * np.conj(i_from) + vj * np.conj(i_to)).real
    assert branch_losses == pytest.approx(losses, abs=1e-8)
    # specified P reproduced at non-slack generator buses
    bus_idx = kundur_sys.bus_index()
    for g in kundur_sys.generators:
        bus = kundur_sys.buses[bus_idx[g.bus]]
        if bus.type == "PV":
            assert kundur_pf.S[bus_idx[g.bus]].real == pytest.approx(g.P_set, abs=1e-8)


def test_power_flow_reproduces_specified_injections(ieee39_sys, ieee39_pf):
    bus_idx = ieee39_sys.bus_index()
    p_spec = np.zeros(len(ieee39_sys.buses))
    q_spec = np.zeros(len(ieee39_sys.buses))
    for g in ieee39_sys.generators:
        p_spec[bus_idx[g.bus]] += g.P_set
    for ld in ieee39_sys.loads:
        p_spec[bus_idx[ld.bus]] -= ld.P
        q_spec[bus_idx[ld.bus]] -= ld.Q
    for i, b in enumerate(ieee39_sys.buses):
        if b.type == "PQ":
            assert ieee39_pf.S[i].real == pytest.approx(p_spec[i], abs=1e-8)
            assert ieee39_pf.S[i].imag == pytest.approx(q_spec[i], abs=1e-8)
        elif b.type == "PV":
            assert ieee39_pf.S[i].real == pytest.approx(p_spec[i], abs=1e-8)


def test_power_flow_nonconvergence_reports_trace():
    # impossible load forces divergence
    hopeless = TWO_BUS.replace("LD  B2  0.5  0.0", "LD  B2  500.0  0.0")
    with pytest.raises(PowerFlowError) as err:
        solve_power_flow(parse_model(hopeless), max_iter=10)
    assert len(err.value.trace) > 0


# --- Kron reduction ----------------------------------------------------------

def test_kron_keep_all_is_identity():
    sysd = parse_model(CHAIN_3)
    Y = build_ybus(sysd)
    red, rmap = kron_reduce(Y, ["B1", "B2", "B3"])
    assert rmap.eliminated == []
    assert np.allclose(red.toarray(), Y.toarray())


def test_kron_chain_by_hand():
    sysd = parse_model(CHAIN_3)
    Y = build_ybus(sysd)
    red, rmap = kron_reduce(Y, ["B1", "B3"])
    assert rmap.eliminated == ["B2"]
    expected = np.array([[-5j, 5j], [5j, -5j]])
    assert np.allclose(red.toarray(), expected, atol=1e-12)


def test_kron_equivalence_random_injections(kundur_sys, kundur_pf):
    Y = build_ybus(kundur_sys, include_loads=True, include_generator_shunts=True,
                   pf=kundur_pf)
    keep = kundur_sys.generator_buses()
    red, rmap = kron_reduce(Y, keep)
    k_idx = [Y.bus_index[b] for b in rmap.retained]
    e_idx = [Y.bus_index[b] for b in rmap.eliminated]
    rng = np.random.default_rng(7)
    full = Y.matrix().toarray()
    for _ in range(100):
        i_k = rng.standard_normal(len(keep)) + 1j * rng.standard_normal(len(keep))
        v_red = solve_network(red, i_k)
        i_full = np.zeros(Y.dimension, dtype=complex)
        i_full[k_idx] = i_k
        v_full = np.linalg.solve(full, i_full)
        assert np.max(np.abs(v_red - v_full[k_idx])) < 1e-10
        # recovery map satisfies the eliminated rows of the full equation
        v_e = rmap.recover(v_red)
        assert np.max(np.abs(v_e - v_full[e_idx])) < 1e-10
        v_all = np.zeros(Y.dimension, dtype=complex)
        v_all[k_idx] = v_red
        v_all[e_idx] = v_e
        assert np.max(np.abs(full[e_idx] @ v_all)) < 1e-10


def test_kron_orphan_bus_named():
    # B3 connects only to eliminated B2; eliminating both is fine, but
    # eliminating an isolated bus must name it.
    text = """
[buses]
name v_n type
B1 230 slack
B2 230 PQ
B3 230 PQ

[branches]
name from to r x b
L12 B1 B2 0.0 0.1 0.0
"""
    Y = build_ybus(parse_model(text))
    with pytest.raises(SingularNetworkError, match="B3"):
        kron_reduce(Y, ["B1"])


# --- linear solves ------------------------------------------------------------

def test_solve_network_unit_cases():
    sysd = parse_model(ONE_BUS_GEN)
    Y = build_ybus(sysd, include_generator_shunts=True)
    v = solve_network(Y, np.array([-5j]))
    assert v == pytest.approx([1.0 + 0j])
    assert solve_network(Y, np.array([0j])) == pytest.approx([0j])


def test_solve_network_against_dense_oracle():
    rng = np.random.default_rng(3)
    n = 20
    A = np.zeros((n, n), dtype=complex)
    for i in range(n - 1):  # chain plus random extra couplings
        y = 1.0 / complex(0.01 * rng.random(), 0.05 + 0.2 * rng.random())
        A[i, i] += y
        A[i + 1, i + 1] += y
        A[i, i + 1] -= y
        A[i + 1, i] -= y
    for _ in range(15):
        i, j = rng.integers(0, n, 2)
        if i == j:
            continue
        y = 1.0 / complex(0.01, 0.1 + rng.random())
        A[i, i] += y
        A[j, j] += y
        A[i, j] -= y
        A[j, i] -= y
    A[np.diag_indices(n)] += 0.5 + 0.1j  # shunts keep it nonsingular
    Y = network.AdmittanceMatrix(sp.csc_matrix(A), [f"B{i}" for i in range(n)])
    i_inj = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v = solve_network(Y, i_inj)
    v_dense = np.linalg.solve(A, i_inj)
    assert np.max(np.abs(v - v_dense)) < 1e-10


def test_factorization_cache_bit_identical(kundur_sys, kundur_pf):
    Y = build_ybus(kundur_sys, include_loads=True, include_generator_shunts=True,
                   pf=kundur_pf)
    rng = np.random.default_rng(11)
    i_inj = rng.standard_normal(Y.dimension) + 1j * rng.standard_normal(Y.dimension)
    results = [solve_network(Y, i_inj) for _ in range(1000)]
    fresh = build_ybus(kundur_sys, include_loads=True, include_generator_shunts=True,
                       pf=kundur_pf)
    v_fresh = solve_network(fresh, i_inj)
    for v in results:
        assert np.array_equal(v, v_fresh)


def test_solve_dimension_mismatch():
    Y = build_ybus(parse_model(ONE_BUS_GEN), include_generator_shunts=True)
    with pytest.raises(ValueError, match="dimension"):
        solve_network(Y, np.zeros(3, dtype=complex))


# --- incremental modification -------------------------------------------------

def test_modify_involution_bitwise():
    sysd = parse_model(TWO_BUS)
    Y = build_ybus(sysd)
    before = Y.toarray().copy()
    deltas = [(0, 0, 0.3 + 0.7j), (0, 1, -0.1j), (1, 0, -0.1j), (1, 1, 0.1 + 0.2j)]
    modify_admittance(Y, deltas)
    assert Y.dirty
    assert not np.array_equal(Y.toarray(), before)
    modify_admittance(Y, [(i, j, -v) for i, j, v in deltas])
    after = Y.toarray()
    assert np.array_equal(after, before)


def test_line_trip_delta_zeroes_and_reports_singular():
    sysd = parse_model(TWO_BUS)
    Y = build_ybus(sysd)
    stamps = network.branch_stamps(sysd.branches[0], sysd.bus_index())
    modify_admittance(Y, [(i, j, -v) for i, j, v in stamps])
    assert np.max(np.abs(Y.toarray())) == 0.0
    with pytest.raises(SingularNetworkError):
        solve_network(Y, np.array([1j, 0j]))


def test_fault_delta_collapses_voltage(kundur_sys, kundur_pf):
    Y = build_ybus(kundur_sys, include_loads=True, include_generator_shunts=True,
                   pf=kundur_pf)
    k = Y.bus_index["B8"]
    modify_admittance(Y, [(k, k, 1e5 + 0j)])
    rng = np.random.default_rng(5)
    for _ in range(20):
        i_inj = rng.standard_normal(Y.dimension) + 1j * rng.standard_normal(Y.dimension)
        i_inj = i_inj / max(1.0, np.max(np.abs(i_inj)))  # bounded injection
        v = solve_network(Y, i_inj)
        assert abs(v[k]) < 1e-3


def test_modify_out_of_range():
    Y = build_ybus(parse_model(TWO_BUS))
    with pytest.raises(IndexError):
        modify_admittance(Y, [(0, 5, 1.0)])
