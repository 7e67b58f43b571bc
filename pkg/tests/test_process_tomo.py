import numpy as np
import pytest

from nonlocalgate import gates
from nonlocalgate.noise import depolarizing, load_calibration
from nonlocalgate.process_tomo import (
    INPUT_LABELS, OPERATOR_BASIS, OPERATOR_LABELS, acquire_outputs, apply_chi,
    average_gate_fidelity, chi_of_unitary, input_state, map_to_jk, measurement_matrix,
    monte_carlo_average_fidelity, process_fidelity, process_tomography, unitary_channel,
)
from nonlocalgate.protocol import protocol_circuit
from nonlocalgate.sim import Circuit, matrix_of

from conftest import RH, SQ2

CZ = np.diag([1, 1, 1, -1]).astype(complex)
CH = np.block([[np.eye(2), np.zeros((2, 2))], [np.zeros((2, 2)), RH]])


def chi_of(u, **kw):
    return process_tomography([np.asarray(u, dtype=complex)], **kw).chi


@pytest.mark.parametrize("label,ket", [
    ("HH", [1, 0, 0, 0]), ("VH", [0, 0, 1, 0]), ("HV", [0, 1, 0, 0]),
    ("DH", np.array([1, 0, 1, 0]) / SQ2), ("HR", np.array([1, 1j, 0, 0]) / SQ2),
])
def test_input_states(label, ket):
    np.testing.assert_allclose(input_state(label)[0], ket, atol=1e-12)


def test_input_prep_circuits_match_kets():
    for label in INPUT_LABELS:
        ket, circ = input_state(label)
        np.testing.assert_allclose(matrix_of(circ)[:, 0], ket, atol=1e-12)


def test_single_qubit_density_for_d():
    ket = input_state("DH")[0].reshape(2, 2)[:, 0]
    np.testing.assert_allclose(np.outer(ket, ket.conj()).reshape(-1), [0.5, 0.5, 0.5, 0.5], atol=1e-12)


def test_measurement_matrix_invertible():
    m = measurement_matrix()
    np.testing.assert_allclose(m @ np.linalg.inv(m), np.eye(16), atol=1e-10)


def test_identity_channel_returns_matrix_units():
    outputs = acquire_outputs([np.eye(4)])
    blocks = map_to_jk(outputs)
    for j in range(4):
        for k in range(4):
            unit = np.zeros((4, 4))
            unit[j, k] = 1
            np.testing.assert_allclose(blocks[j, k], unit, atol=1e-10)


@pytest.mark.parametrize("label,expected", [("HV", "HV"), ("VH", "VV"), ("VV", "VH")])
def test_cnot_on_basis_inputs(label, expected):
    outputs = acquire_outputs([gates.CNOT])
    ket = input_state(expected)[0]
    np.testing.assert_allclose(outputs[label].rho, np.outer(ket, ket.conj()), atol=1e-12)


@pytest.mark.parametrize("m", range(16))
def test_basis_unitary_lands_on_its_diagonal(m):
    chi = chi_of(OPERATOR_BASIS[m])
    expected = np.zeros((16, 16))
    expected[m, m] = 1
    np.testing.assert_allclose(chi, expected, atol=1e-10)


def test_operator_labels_order():
    assert OPERATOR_LABELS[:5] == ["I.I", "I.X", "I.-iY", "I.Z", "X.I"]


@pytest.mark.parametrize("name,u", [("II", np.eye(4)), ("CNOT", gates.CNOT), ("CZ", CZ), ("CH", CH)])
def test_pipeline_matches_oracle(name, u):
    chi = chi_of(u)
    np.testing.assert_allclose(chi, chi_of_unitary(u), atol=1e-9)
    assert np.trace(chi).real == pytest.approx(1, abs=1e-9)


def test_chi_reproduces_channel(rng):
    chi = chi_of_unitary(CH)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    rho = np.outer(psi, psi.conj()) / np.vdot(psi, psi).real
    np.testing.assert_allclose(apply_chi(chi, rho), CH @ rho @ CH.conj().T, atol=1e-12)


def test_fully_depolarizing_channel_is_flat():
    # weight 1/16 on every Pauli, identity included
    chi = process_tomography(depolarizing(15 / 16, 2)).chi
    np.testing.assert_allclose(chi, np.eye(16) / 16, atol=1e-10)


def test_cnot_vs_identity_process_fidelity():
    assert process_fidelity(chi_of_unitary(gates.CNOT), chi_of_unitary(np.eye(4))) == pytest.approx(0.25)


def test_general_fidelity_agrees_for_pure_target():
    chi_t = chi_of_unitary(gates.CNOT)
    chi_e = process_tomography([k @ gates.CNOT for k in depolarizing(0.1, 2)]).chi
    # the general form takes square roots of round-off eigenvalues of the rank-one target
    assert process_fidelity(chi_t, chi_e, general=True) == pytest.approx(process_fidelity(chi_t, chi_e), abs=1e-6)


@pytest.mark.parametrize("fp,expected", [(0.536, 0.6288), (0.554, 0.6432), (1.0, 1.0), (0.25, 0.4)])
def test_average_gate_fidelity(fp, expected):
    assert average_gate_fidelity(fp) == pytest.approx(expected, abs=1e-12)


def test_average_gate_fidelity_range():
    with pytest.raises(ValueError):
        average_gate_fidelity(1.5)


def test_depolarized_cnot_fidelities():
    kraus = [k @ gates.CNOT for k in depolarizing(0.05, 2)]
    chi = process_tomography(kraus).chi
    fp = process_fidelity(chi_of_unitary(gates.CNOT), chi)
    assert fp == pytest.approx(0.95, abs=1e-10)

    def channel(rho):
        return sum(k @ rho @ k.conj().T for k in kraus)
    mc = monte_carlo_average_fidelity(channel, gates.CNOT, 500, seed=1)
    assert mc == pytest.approx(average_gate_fidelity(fp), abs=1e-10)


def test_monte_carlo_for_unitary_mismatch():
    mc = monte_carlo_average_fidelity(unitary_channel(np.eye(4)), gates.CNOT, 3000, seed=2)
    assert mc == pytest.approx(0.4, abs=0.01)


def test_protocol_circuit_process_is_controlled_u():
    c = protocol_circuit(gates.H, prepare=False, measure_outputs=False)
    res = process_tomography(c, qubits=(0, 3))
    np.testing.assert_allclose(res.chi, chi_of_unitary(CH), atol=1e-9)


def test_sampled_process_tomography_is_close():
    res = process_tomography([gates.CNOT], mode="sampled", shots=4096, seed=3)
    assert process_fidelity(chi_of_unitary(gates.CNOT), res.chi) > 0.98


def test_bad_mode():
    with pytest.raises(ValueError):
        acquire_outputs([np.eye(4)], mode="guess")


def test_noise_needs_a_circuit():
    with pytest.raises(ValueError):
        acquire_outputs([np.eye(4)], noise=load_calibration("ibmqx2-paper"))


def test_map_to_jk_needs_sixteen():
    with pytest.raises(ValueError):
        map_to_jk([np.eye(4)] * 15)


def test_circuit_operation_on_sub_register():
    c = Circuit(3).gate("CX", gates.CNOT, 2, 0)
    res = process_tomography(c, qubits=(2, 0))
    np.testing.assert_allclose(res.chi, chi_of_unitary(gates.CNOT), atol=1e-9)
