"""Gate set, controlled-gate construction, equivalent circuits and topology lint."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sim import Circuit, CircuitValidationError, Conditional, Unitary, is_unitary, matrix_of

_SQ2 = np.sqrt(2.0)

I = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / _SQ2
S = np.array([[1, 0], [0, 1j]], dtype=complex)
SDG = S.conj().T
T = np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex)
TDG = T.conj().T
CNOT = np.array([[1, 0, 0, 0],
                 [0, 1, 0, 0],
                 [0, 0, 0, 1],
                 [0, 0, 1, 0]], dtype=complex)

GATES: dict[str, np.ndarray] = {
    "I": I, "X": X, "Y": Y, "Z": Z, "H": H,
    "S": S, "SDG": SDG, "T": T, "TDG": TDG, "CX": CNOT,
}
_ALIASES = {"CNOT": "CX", "ID": "I", "S†": "SDG", "T†": "TDG"}


def gate_matrix(name: str) -> np.ndarray:
    """Look up a named gate, case-insensitively (``cx``/``cnot`` both work)."""
    key = name.strip().upper()
    key = _ALIASES.get(key, key)
    try:
        return GATES[key].copy()
    except KeyError:
        raise KeyError(f"unknown gate {name!r}; known: {', '.join(GATES)}") from None


def canonical_name(name: str) -> str:
    key = name.strip().upper()
    return _ALIASES.get(key, key)


def controlled(u: np.ndarray) -> np.ndarray:
    """``diag(I, U)`` with the control on the more significant qubit."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise ValueError(f"controlled() takes a 2x2 matrix, got shape {u.shape}")
    if not is_unitary(u):
        raise ValueError("controlled() needs a unitary matrix")
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = u
    return out


def equal_up_to_phase(a: np.ndarray, b: np.ndarray) -> float:
    """``min_phi ||a - e^{i phi} b||_F``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    overlap = np.vdot(b.ravel(), a.ravel())
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(a - phase * b))


def _add(circ: Circuit, name: str, *targets: int) -> Circuit:
    return circ.gate(name, gate_matrix(name), *targets)


def cz_circuit(control: int = 0, target: int = 1, n_qubits: int = 2) -> Circuit:
    """Controlled-Z as ``H`` on the target around a CNOT."""
    c = Circuit(n_qubits)
    _add(c, "H", target)
    _add(c, "CX", control, target)
    _add(c, "H", target)
    return c


# A = S^dagger H T H S rotates the target so that A X A^dagger = H exactly.
_CH_PRE = ("S", "H", "TDG", "H", "SDG")   # A^dagger, in application order
_CH_POST = ("S", "H", "T", "H", "SDG")    # A, in application order


def ch_circuit(control: int = 0, target: int = 1, n_qubits: int = 2) -> Circuit:
    """Controlled-H from single-qubit basis changes on the target around one CNOT."""
    c = Circuit(n_qubits)
    for g in _CH_PRE:
        _add(c, g, target)
    _add(c, "CX", control, target)
    for g in _CH_POST:
        _add(c, g, target)
    return c


def controlled_circuit(u: np.ndarray, control: int, target: int, n_qubits: int,
                       name: str | None = None) -> Circuit:
    """Controlled-``u`` expressed over the native gate set when a decomposition is known.

    X, Z and H map to CNOT, :func:`cz_circuit` and :func:`ch_circuit`; any
    other unitary becomes a single two-qubit instruction.
    """
    u = np.asarray(u, dtype=complex)
    cu = controlled(u)
    for native, build in (("X", None), ("Z", cz_circuit), ("H", ch_circuit)):
        if np.allclose(u, GATES[native], atol=1e-12):
            if build is None:
                return _add(Circuit(n_qubits), "CX", control, target)
            return build(control, target, n_qubits)
    return Circuit(n_qubits).gate(name or "CU", cu, control, target)


# ---------------------------------------------------------------------------
# state preparations
# ---------------------------------------------------------------------------

def prepare_alice(qubit: int = 0, n_qubits: int = 1) -> Circuit:
    """``H T H |0>``: amplitudes ((1+e^{i pi/4})/2, (1-e^{i pi/4})/2)."""
    c = Circuit(n_qubits)
    for g in ("H", "T", "H"):
        _add(c, g, qubit)
    return c


def prepare_bob(qubit: int = 0, n_qubits: int = 1) -> Circuit:
    """``H S T H |0>``: amplitudes ((1+i e^{i pi/4})/2, (1-i e^{i pi/4})/2)."""
    c = Circuit(n_qubits)
    for g in ("H", "T", "S", "H"):
        _add(c, g, qubit)
    return c


def prepared_state(circuit: Circuit) -> np.ndarray:
    return matrix_of(circuit)[:, 0]


# ---------------------------------------------------------------------------
# topology
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Topology:
    name: str
    n_qubits: int
    edges: frozenset  # directed (control, target) pairs

    def allows(self, control: int, target: int) -> bool:
        return (control, target) in self.edges


IBMQX2 = Topology(
    "ibmqx2", 5,
    frozenset({(0, 1), (0, 2), (1, 2), (3, 2), (3, 4), (4, 2)}),
)
TOPOLOGIES = {"ibmqx2": IBMQX2}


@dataclass(frozen=True)
class Violation:
    position: int
    control: int
    target: int
    kind: str  # "reversed" or "unconnected"

    def __str__(self):
        return f"instruction {self.position}: CX {self.control}->{self.target} is {self.kind}"


def topology_lint(circuit: Circuit, topology: Topology = IBMQX2) -> list[Violation]:
    """Report every CNOT whose direction is not a coupling-map edge.

    Advisory only; nothing stops such a circuit from being simulated.
    """
    found = []
    for pos, ins in enumerate(circuit.instructions):
        if not isinstance(ins, (Unitary, Conditional)) or canonical_name(ins.name) != "CX":
            continue
        c, t = ins.targets
        if topology.allows(c, t):
            continue
        kind = "reversed" if topology.allows(t, c) else "unconnected"
        found.append(Violation(pos, c, t, kind))
    return found


def parse_instruction_list(items: list[dict], n_qubits: int, n_cbits: int = 0) -> Circuit:
    """Build a circuit from dicts like ``{"gate": "cx", "qubits": [0, 1]}``.

    ``{"measure": q, "cbit": c}`` adds a measurement and ``"if": [cbit, value]``
    makes a gate conditional.
    """
    circ = Circuit(n_qubits, n_cbits)
    for pos, item in enumerate(items):
        if "measure" in item:
            circ.measure(int(item["measure"]), int(item["cbit"]))
            continue
        try:
            name = canonical_name(item["gate"])
            m = gate_matrix(name)
        except KeyError as exc:
            raise CircuitValidationError(f"item {pos}: {exc}") from None
        qubits = [int(q) for q in item.get("qubits", [])]
        if "if" in item:
            cbit, value = item["if"]
            if len(qubits) != 1:
                raise CircuitValidationError(f"item {pos}: conditional gates take one qubit")
            circ.c_if(name, m, qubits[0], int(cbit), int(value))
        else:
            circ.gate(name, m, *qubits)
    circ.validate()
    return circ
