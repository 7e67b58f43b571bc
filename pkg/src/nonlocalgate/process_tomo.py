"""Two-qubit process tomography: chi matrix from 16 product input states.

Inputs are all pairs of ``|H>=|0>``, ``|V>=|1>``, ``|D>=(|0>+|1>)/sqrt2`` and
``|R>=(|0>+i|1>)/sqrt2``.  Their outputs are mapped linearly onto the
outputs of the 16 matrix units ``rho^{jk}`` and assembled as

    chi = K^T [eps(rho^{jk})]_{jk} K,   K = P Lambda,
    P = I (x) SWAP (x) I,   Lambda = (Z(x)I + X(x)X) (x) (Z(x)I + X(x)X) / 4.

In this convention ``eps(rho) = sum_mn chi[m, n] E_m rho E_n^dagger`` with
``E`` running over :data:`OPERATOR_LABELS` (``{I, X, -iY, Z}`` on each qubit,
first qubit major).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from . import gates
from .sim import Circuit, spawn_seeds, DEFAULT_MAX_SHOTS
from .state_tomo import TomographyResult, state_tomography, tomography_of_state

INPUT_KETS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "R": np.array([1, 1j], dtype=complex) / np.sqrt(2),
}
INPUT_PREP = {"H": [], "V": ["X"], "D": ["H"], "R": ["H", "S"]}
INPUT_LABELS = ["".join(p) for p in itertools.product("HVDR", repeat=2)]

# Where each operator lands on chi's diagonal, frozen from pushing every
# basis unitary through the pipeline (see tests/test_process_tomo.py).
_SINGLE = {"I": gates.I, "X": gates.X, "-iY": -1j * gates.Y, "Z": gates.Z}
OPERATOR_LABELS = [f"{a}.{b}" for a, b in itertools.product(_SINGLE, repeat=2)]
OPERATOR_BASIS = [np.kron(_SINGLE[a], _SINGLE[b]) for a, b in itertools.product(_SINGLE, repeat=2)]

_LAMBDA1 = np.kron(gates.Z, gates.I) + np.kron(gates.X, gates.X)
_SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
P_MATRIX = np.kron(np.kron(gates.I, _SWAP), gates.I).real
LAMBDA_MATRIX = np.kron(_LAMBDA1, _LAMBDA1).real / 4
K_MATRIX = P_MATRIX @ LAMBDA_MATRIX

Operation = Union[Circuit, Sequence[np.ndarray], Callable[[np.ndarray], np.ndarray]]


def input_state(label: str, qubits: Sequence[int] = (0, 1), n_qubits: int = 2) -> tuple[np.ndarray, Circuit]:
    """Two-qubit product ket for ``label`` (e.g. ``"HD"``) and a circuit preparing it from ``|00>``."""
    label = label.upper()
    if len(label) != 2 or any(c not in INPUT_KETS for c in label):
        raise ValueError(f"input label must be two of H, V, D, R; got {label!r}")
    ket = np.kron(INPUT_KETS[label[0]], INPUT_KETS[label[1]])
    circ = Circuit(n_qubits)
    for c, q in zip(label, qubits):
        for g in INPUT_PREP[c]:
            circ.gate(g, gates.gate_matrix(g), q)
    return ket, circ


def measurement_matrix() -> np.ndarray:
    """``M`` with ``rho^{ab} = sum_jk M[ab, jk] rho^{jk}`` (rows in :data:`INPUT_LABELS` order)."""
    rows = []
    for label in INPUT_LABELS:
        ket, _ = input_state(label)
        rows.append(np.outer(ket, ket.conj()).reshape(-1))
    return np.array(rows)


def _channel_fn(operation) -> Callable[[np.ndarray], np.ndarray]:
    if callable(operation):
        return operation
    ops = [np.asarray(k, dtype=complex) for k in operation]

    def apply(rho):
        return sum(k @ rho @ k.conj().T for k in ops)
    return apply


def acquire_outputs(operation: Operation, mode: str = "analytic", shots: int = 8192, seed=None,
                    qubits: Sequence[int] = (0, 1), noise=None,
                    max_shots: int | None = DEFAULT_MAX_SHOTS) -> dict[str, TomographyResult]:
    """Tomographed output for every input label.

    ``operation`` is a circuit (inputs are prepared on ``qubits`` of its
    register and the same qubits are tomographed afterwards), a list of 4x4
    Kraus operators, or a function mapping a 4x4 density matrix to its image.
    ``mode`` is ``"analytic"`` (exact probabilities) or ``"sampled"``.
    """
    if mode not in ("analytic", "sampled"):
        raise ValueError(f"mode must be 'analytic' or 'sampled', got {mode!r}")
    n_shots = None if mode == "analytic" else shots
    seeds = spawn_seeds(seed, len(INPUT_LABELS))
    out = {}
    if isinstance(operation, Circuit):
        for label, ss in zip(INPUT_LABELS, seeds):
            _, prep = input_state(label, qubits, operation.n_qubits)
            circ = Circuit(operation.n_qubits, operation.n_cbits, prep.instructions + operation.instructions)
            out[label] = state_tomography(circ, qubits, n_shots, ss, noise, max_shots)
        return out
    if noise is not None:
        raise ValueError("noise applies to circuit operations only")
    fn = _channel_fn(operation)
    for label, ss in zip(INPUT_LABELS, seeds):
        ket, _ = input_state(label)
        out[label] = tomography_of_state(fn(np.outer(ket, ket.conj())), n_shots, ss)
    return out


def map_to_jk(outputs: Mapping[str, np.ndarray] | Sequence[np.ndarray]) -> np.ndarray:
    """Outputs of the matrix units, shape ``(4, 4, 4, 4)`` indexed ``[j, k]``.

    ``outputs`` maps input labels to output density matrices, or lists them
    in :data:`INPUT_LABELS` order.
    """
    if isinstance(outputs, Mapping):
        missing = [l for l in INPUT_LABELS if l not in outputs]
        if missing:
            raise ValueError(f"missing outputs for inputs {missing}")
        stack = [getattr(outputs[l], "rho", outputs[l]) for l in INPUT_LABELS]
    else:
        stack = list(outputs)
        if len(stack) != 16:
            raise ValueError("need 16 output matrices")
    stack = np.array([np.asarray(r, dtype=complex) for r in stack])
    m = measurement_matrix()
    if abs(np.linalg.det(m)) < 1e-12:
        raise np.linalg.LinAlgError("input states do not span the operator space")
    m_inv = np.linalg.inv(m)
    eps_jk = np.einsum("ab,bxy->axy", m_inv, stack)
    return eps_jk.reshape(4, 4, 4, 4)


def chi_from_blocks(blocks: np.ndarray) -> np.ndarray:
    """``K^T B K`` where ``B`` tiles ``eps(rho^{jk})`` as its (j, k) block."""
    blocks = np.asarray(blocks, dtype=complex)
    if blocks.shape != (4, 4, 4, 4):
        raise ValueError(f"blocks must have shape (4, 4, 4, 4), got {blocks.shape}")
    big = blocks.transpose(0, 2, 1, 3).reshape(16, 16)
    return K_MATRIX.T @ big @ K_MATRIX


@dataclass
class ProcessResult:
    chi: np.ndarray
    outputs: dict

    @property
    def trace(self) -> float:
        return float(np.trace(self.chi).real)


def process_tomography(operation: Operation, mode: str = "analytic", shots: int = 8192, seed=None,
                       qubits: Sequence[int] = (0, 1), noise=None,
                       max_shots: int | None = DEFAULT_MAX_SHOTS) -> ProcessResult:
    outputs = acquire_outputs(operation, mode, shots, seed, qubits, noise, max_shots)
    return ProcessResult(chi_from_blocks(map_to_jk(outputs)), outputs)


def operator_coefficients(u: np.ndarray) -> np.ndarray:
    """Coefficients ``c`` with ``U = sum_m c[m] E_m``."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise ValueError("expected a 4x4 operator")
    return np.array([np.trace(e.conj().T @ u) / 4 for e in OPERATOR_BASIS])


def chi_of_unitary(u: np.ndarray) -> np.ndarray:
    """Ideal chi of a two-qubit unitary: the outer product of its operator coefficients."""
    c = operator_coefficients(u)
    return np.outer(c, c.conj())


def apply_chi(chi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``sum_mn chi[m, n] E_m rho E_n^dagger``."""
    ops = OPERATOR_BASIS
    return sum(chi[m, n] * ops[m] @ rho @ ops[n].conj().T for m in range(16) for n in range(16))


def _psd_sqrt(a):
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def process_fidelity(chi_t: np.ndarray, chi_e: np.ndarray, general: bool = False) -> float:
    """Process fidelity between two trace-normalized chi matrices.

    By default ``Tr(chi_t chi_e)``, which is exact when ``chi_t`` is rank one
    (a unitary target).  ``general=True`` evaluates
    ``(Tr sqrt(sqrt(chi_e) chi_t sqrt(chi_e)))**2`` instead.
    """
    chi_t = np.asarray(chi_t, dtype=complex)
    chi_e = np.asarray(chi_e, dtype=complex)
    if chi_t.shape != chi_e.shape or chi_t.ndim != 2:
        raise ValueError("chi matrices must share one square shape")
    if not general:
        return float(np.trace(chi_t @ chi_e).real)
    s = _psd_sqrt(chi_e)
    w = np.linalg.eigvalsh(s @ chi_t @ s)
    return float(np.sqrt(np.clip(w, 0.0, None)).sum() ** 2)


def average_gate_fidelity(process_fid: float, d: int = 4) -> float:
    """``(d F_p + 1) / (d + 1)``."""
    if not 0.0 <= process_fid <= 1.0 + 1e-9:
        raise ValueError(f"process fidelity must be in [0, 1], got {process_fid}")
    return (d * process_fid + 1.0) / (d + 1.0)


def monte_carlo_average_fidelity(channel: Callable[[np.ndarray], np.ndarray], u: np.ndarray,
                                 n_states: int = 2000, seed=None) -> float:
    """Mean of ``<psi|U^dag eps(|psi><psi|) U|psi>`` over Haar-random pure states."""
    rng = np.random.default_rng(seed)
    d = u.shape[0]
    total = 0.0
    for _ in range(n_states):
        psi = rng.normal(size=d) + 1j * rng.normal(size=d)
        psi /= np.linalg.norm(psi)
        target = u @ psi
        total += np.vdot(target, channel(np.outer(psi, psi.conj())) @ target).real
    return total / n_states


def unitary_channel(u: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    u = np.asarray(u, dtype=complex)
    return lambda rho: u @ rho @ u.conj().T

