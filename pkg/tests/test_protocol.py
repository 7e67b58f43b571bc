import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonlocalgate import gates
from nonlocalgate.protocol import (
    LocalityError, NodeId, ProtocolError, ProtocolTranscript, Register, RegisterLayout, StepTag,
    correction_table, direct_controlled, distribute_epr, protocol_circuit, run_eisert,
    run_eisert_branches,
)
from nonlocalgate.sim import (
    apply_unitary, basis_state, outcome_distribution, partial_trace, purity, run_ideal,
    to_density_matrix,
)

from conftest import SQ2, random_state, random_unitary


def overlap(a, b):
    return abs(np.vdot(a, b)) ** 2


@pytest.mark.parametrize("bit,tag,expected", [
    (0, StepTag.ALICE_MEASUREMENT, "I"), (1, StepTag.ALICE_MEASUREMENT, "X"),
    (0, StepTag.BOB_MEASUREMENT, "I"), (1, StepTag.BOB_MEASUREMENT, "Z"),
    (1, "AliceMeasurement", "X"),
])
def test_correction_table(bit, tag, expected):
    assert correction_table(bit, tag) == expected


@pytest.mark.parametrize("bit,tag", [(2, StepTag.ALICE_MEASUREMENT), (0, "Nobody")])
def test_correction_table_rejects_bad_input(bit, tag):
    with pytest.raises(ValueError):
        correction_table(bit, tag)


def test_layout_parse_and_owner():
    lay = RegisterLayout.parse("A=3,a=2,b=1,B=0")
    assert (lay.A, lay.a, lay.b, lay.B) == (3, 2, 1, 0)
    assert lay.owner(2) is NodeId.ALICE and lay.owner(1) is NodeId.BOB


@pytest.mark.parametrize("text", ["A=0,a=0,b=2,B=3", "A=0,a=1", "A=x,a=1,b=2,B=3"])
def test_layout_parse_rejects(text):
    with pytest.raises(ValueError):
        RegisterLayout.parse(text)


def test_epr_correlators():
    lay = RegisterLayout()
    reg = Register(basis_state("0000"), lay, np.random.default_rng(0))
    distribute_epr(reg, ProtocolTranscript())
    rho = partial_trace(to_density_matrix(reg.state), [lay.a, lay.b])
    X, Y, Z = gates.X, gates.Y, gates.Z
    assert np.trace(rho @ np.kron(Z, Z)).real == pytest.approx(1, abs=1e-12)
    assert np.trace(rho @ np.kron(X, X)).real == pytest.approx(1, abs=1e-12)
    assert np.trace(rho @ np.kron(Y, Y)).real == pytest.approx(-1, abs=1e-12)
    assert np.trace(rho @ np.kron(Z, np.eye(2))).real == pytest.approx(0, abs=1e-12)


def test_epr_needs_fresh_ancillas():
    lay = RegisterLayout()
    reg = Register(basis_state("0100"), lay, np.random.default_rng(0))
    with pytest.raises(ProtocolError):
        distribute_epr(reg, ProtocolTranscript())


@pytest.mark.parametrize("u", [gates.X, gates.Z, gates.H], ids=["X", "Z", "H"])
def test_all_branches_match_direct(u, rng):
    psi_a, psi_b = random_state(rng), random_state(rng)
    target = direct_controlled(psi_a, psi_b, u)
    seen = []
    for bits, out, _ in run_eisert_branches(psi_a, psi_b, u):
        seen.append(bits)
        assert overlap(out, target) > 1 - 1e-10
    assert seen == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_resource_accounting():
    _, tr = run_eisert(basis_state("1"), basis_state("0"), gates.X, seed=3)
    assert len(tr.of_kind("EPRAllocated")) == 1
    sent = tr.of_kind("Sent")
    assert [e.message["sender"] for e in sent] == ["Alice", "Bob"]
    assert all(e.message["bit"] in (0, 1) for e in sent)


def test_locality_of_operations():
    lay = RegisterLayout()
    _, tr = run_eisert(basis_state("1"), basis_state("0"), gates.H, seed=9)
    for e in tr.events:
        if e.kind in ("LocalGate", "Measured", "Correction"):
            assert {lay.owner(q).value for q in e.qubits} == {e.node}


def test_register_blocks_cross_node_gate():
    lay = RegisterLayout()
    reg = Register(basis_state("0000"), lay, np.random.default_rng(0))
    with pytest.raises(LocalityError):
        reg.apply(NodeId.ALICE, gates.CNOT, [lay.A, lay.B])
    with pytest.raises(LocalityError):
        reg.measure(NodeId.BOB, lay.a)


def test_ancillas_disentangled_and_output_pure(rng):
    psi_a, psi_b = random_state(rng), random_state(rng)
    for bits, out, _ in run_eisert_branches(psi_a, psi_b, gates.H):
        assert purity(to_density_matrix(out)) == pytest.approx(1, abs=1e-10)
        assert np.linalg.norm(out) == pytest.approx(1, abs=1e-10)


def test_circuit_output_matches_direct_with_ancillas_in_basis_states(rng):
    c = protocol_circuit(gates.X, prepare=False, measure_outputs=False)
    psi_a, psi_b = random_state(rng), random_state(rng)
    init = np.kron(np.kron(np.kron(psi_a, [1, 0]), [1, 0]), psi_b)
    for seed in range(8):
        psi, bits = run_ideal(c, seed=seed, initial_state=init)
        ma, mb = bits[:2]
        t = psi.reshape(2, 2, 2, 2)
        ab = t[:, ma, mb, :].reshape(-1)
        assert np.linalg.norm(ab) == pytest.approx(1, abs=1e-10)
        assert overlap(ab, direct_controlled(psi_a, psi_b, gates.X)) > 1 - 1e-10


def test_outcome_distribution_for_prepared_cnot():
    dist = outcome_distribution(protocol_circuit(gates.X), cbits=[2, 3])
    expected = {"00": 1 / 8, "01": (3 + 2 * SQ2) / 8, "10": 1 / 8, "11": (3 - 2 * SQ2) / 8}
    for k, v in expected.items():
        assert dist[k] == pytest.approx(v, abs=1e-12)


def test_outcome_distribution_for_prepared_ch():
    dist = outcome_distribution(protocol_circuit(gates.H), cbits=[2, 3])
    expected = {"00": 1 / 8, "01": (3 + 2 * SQ2) / 8, "10": (4 - 2 * SQ2) / 16, "11": (4 - 2 * SQ2) / 16}
    for k, v in expected.items():
        assert dist[k] == pytest.approx(v, abs=1e-12)


def test_ancilla_outcomes_are_uniform():
    dist = outcome_distribution(protocol_circuit(gates.H), cbits=[0, 1])
    for k in ("00", "01", "10", "11"):
        assert dist[k] == pytest.approx(0.25, abs=1e-12)


def test_custom_layout_gives_same_result(rng):
    psi_a, psi_b = random_state(rng), random_state(rng)
    lay = RegisterLayout.parse("A=3,a=1,b=0,B=2")
    out, _ = run_eisert(psi_a, psi_b, gates.H, seed=4, layout=lay)
    assert overlap(out, direct_controlled(psi_a, psi_b, gates.H)) > 1 - 1e-10


def test_transcript_json_round_trip():
    _, tr = run_eisert(basis_state("1"), basis_state("0"), gates.X, seed=1)
    back = ProtocolTranscript.from_json(tr.to_json())
    assert back.to_json() == tr.to_json()
    assert back.bits == tr.bits


def test_transcript_rejects_bad_sequence():
    with pytest.raises(ValueError):
        ProtocolTranscript.from_json('[{"seq": 1, "kind": "EPRAllocated"}]')


def test_run_eisert_rejects_bad_inputs():
    with pytest.raises(ValueError):
        run_eisert(basis_state("1"), basis_state("0"), np.diag([1, 2]))
    with pytest.raises(ValueError):
        run_eisert(basis_state("10"), basis_state("0"), gates.X)


def test_same_seed_same_transcript():
    a = run_eisert(basis_state("1"), np.array([1, 1]) / SQ2, gates.H, seed=12)[1].to_json()
    b = run_eisert(basis_state("1"), np.array([1, 1]) / SQ2, gates.H, seed=12)[1].to_json()
    assert a == b


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_universality_property(seed):
    rng = np.random.default_rng(seed)
    psi_a, psi_b, u = random_state(rng), random_state(rng), random_unitary(rng)
    target = direct_controlled(psi_a, psi_b, u)
    for _, out, _ in run_eisert_branches(psi_a, psi_b, u):
        assert overlap(out, target) > 1 - 1e-10


def test_direct_controlled_reference():
    out = direct_controlled(basis_state("1"), basis_state("0"), gates.X)
    np.testing.assert_allclose(out, basis_state("11"))
    alt = apply_unitary(basis_state("10"), gates.CNOT, [0, 1])
    np.testing.assert_allclose(out, alt)
