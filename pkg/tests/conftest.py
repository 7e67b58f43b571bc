import numpy as np
import pytest

# Reference matrices written out independently of nonlocalgate.gates.
SQ2 = np.sqrt(2)
RI = np.eye(2)
RX = np.array([[0, 1], [1, 0]], dtype=complex)
RY = np.array([[0, -1j], [1j, 0]])
RZ = np.diag([1, -1]).astype(complex)
RH = np.array([[1, 1], [1, -1]]) / SQ2
RS = np.diag([1, 1j])
RT = np.diag([1, np.exp(1j * np.pi / 4)])


def random_state(rng, n_qubits=1):
    psi = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return psi / np.linalg.norm(psi)


def random_unitary(rng, dim=2):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def criterion_report():
    def record(number, title, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        _ACCEPTANCE_LINES.append(f"[{status}] criterion {number:>2}: {title}" + (f"  ({detail})" if detail else ""))
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
