"""Linear-inversion state tomography for one and two qubits, plus fidelities.

Each qubit is measured in the X, Y or Z basis (``3**N`` settings).  A
correlation coefficient ``T[i1, i2]`` (index 0..3 for I, X, Y, Z) is the
expectation of the parity of the non-identity positions, and the density
matrix is ``(1/2**N) sum T[i] sigma_i1 (x) sigma_i2``.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import gates
from .noise import noisy_distribution
from .sim import (
    Circuit, spawn_seeds, Histogram, check_shots, outcome_distribution,
    sample_distribution, DEFAULT_MAX_SHOTS,
)

log = logging.getLogger(__name__)

BASES = "XYZ"
PAULIS = (gates.I, gates.X, gates.Y, gates.Z)
PAULI_LABELS = "IXYZ"


class IncompleteDataError(ValueError):
    """A basis setting needed for reconstruction has no data."""


def settings(n_qubits: int = 2) -> list[str]:
    """All basis settings, e.g. ``["XX", "XY", ..., "ZZ"]``."""
    if n_qubits not in (1, 2):
        raise ValueError("tomography is implemented for 1 and 2 qubits only")
    return ["".join(s) for s in itertools.product(BASES, repeat=n_qubits)]


def _check_setting(setting: str) -> str:
    setting = setting.upper()
    if not setting or any(b not in BASES for b in setting):
        raise ValueError(f"invalid basis setting {setting!r}")
    return setting


def rotation_for(basis: str) -> list[str]:
    """Gates applied before a Z measurement to measure in ``basis``."""
    return {"X": ["H"], "Y": ["SDG", "H"], "Z": []}[_check_setting(basis)]


def rotation_circuit(setting: str, qubits: Sequence[int], n_qubits: int) -> Circuit:
    setting = _check_setting(setting)
    if len(setting) != len(qubits):
        raise ValueError("one basis label per measured qubit")
    c = Circuit(n_qubits)
    for basis, q in zip(setting, qubits):
        for g in rotation_for(basis):
            c.gate(g, gates.gate_matrix(g), q)
    return c


def tomography_circuit(circuit: Circuit, qubits: Sequence[int], setting: str) -> tuple[Circuit, list[int]]:
    """``circuit`` followed by basis rotations and fresh measurements of ``qubits``."""
    out = circuit.copy()
    out.extend(rotation_circuit(setting, qubits, circuit.n_qubits))
    cbits = list(range(circuit.n_cbits, circuit.n_cbits + len(qubits)))
    out.n_cbits += len(qubits)
    for q, c in zip(qubits, cbits):
        out.measure(q, c)
    return out, cbits


def setting_probabilities(rho: np.ndarray, setting: str) -> dict[str, float]:
    """Exact outcome probabilities of a 1- or 2-qubit ``rho`` (or ket) in ``setting``."""
    setting = _check_setting(setting)
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    n = len(setting)
    if rho.shape != (2**n, 2**n):
        raise ValueError("setting length does not match the state")
    rot = np.eye(1, dtype=complex)
    for basis in setting:
        r = np.eye(2, dtype=complex)
        for g in rotation_for(basis):
            r = gates.gate_matrix(g) @ r
        rot = np.kron(rot, r)
    diag = np.real(np.diag(rot @ rho @ rot.conj().T))
    return {format(i, f"0{n}b"): float(max(p, 0.0)) for i, p in enumerate(diag)}


def _as_probabilities(data) -> dict[str, float]:
    if isinstance(data, Histogram):
        if data.shots <= 0:
            raise IncompleteDataError("histogram has no shots")
        return {k: v / data.shots for k, v in data.counts.items()}
    total = sum(data.values())
    if total <= 0:
        raise IncompleteDataError("empty probability table")
    return {k: v / total for k, v in data.items()}


def t_from_counts(data: Mapping[str, Histogram | Mapping[str, float]], n_qubits: int = 2) -> np.ndarray:
    """Correlation coefficients from per-setting histograms or probabilities.

    Returns an array of shape ``(4,)*n_qubits``.  Coefficients with identity
    positions (the single-qubit marginals) are averaged over every setting
    that measures the non-identity qubits in the right basis.
    """
    probs = {}
    for s in settings(n_qubits):
        if s not in data:
            raise IncompleteDataError(f"missing data for basis setting {s}")
        probs[s] = _as_probabilities(data[s])
    T = np.zeros((4,) * n_qubits)
    for idx in itertools.product(range(4), repeat=n_qubits):
        active = [k for k, i in enumerate(idx) if i]
        values = []
        for s, p in probs.items():
            if any(s[k] != BASES[idx[k] - 1] for k in active):
                continue
            values.append(sum(pr * (-1) ** sum(int(bits[k]) for k in active) for bits, pr in p.items()))
        T[idx] = np.mean(values)
    return T


def stokes(data: Mapping[str, Histogram | Mapping[str, float]]) -> np.ndarray:
    """Single-qubit Stokes vector ``(S0, S1, S2, S3)``."""
    return t_from_counts(data, n_qubits=1)


def reconstruct(T: np.ndarray) -> np.ndarray:
    """Density matrix ``(1/2**N) sum_i T[i] sigma_i``; PSD is not enforced."""
    T = np.asarray(T)
    n = T.ndim
    if T.shape != (4,) * n or n not in (1, 2):
        raise ValueError(f"T must have shape (4,) or (4, 4), got {T.shape}")
    rho = np.zeros((2**n, 2**n), dtype=complex)
    for idx in itertools.product(range(4), repeat=n):
        op = np.eye(1, dtype=complex)
        for i in idx:
            op = np.kron(op, PAULIS[i])
        rho += T[idx] * op
    return rho / 2**n


def t_of(rho: np.ndarray) -> np.ndarray:
    """Exact ``T[i] = Tr(rho sigma_i)`` for a 1- or 2-qubit state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    n = int(round(np.log2(rho.shape[0])))
    T = np.zeros((4,) * n)
    for idx in itertools.product(range(4), repeat=n):
        op = np.eye(1, dtype=complex)
        for i in idx:
            op = np.kron(op, PAULIS[i])
        T[idx] = np.real(np.trace(rho @ op))
    return T


def project_physical(rho: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and renormalize to unit trace."""
    rho = np.asarray(rho, dtype=complex)
    herm = (rho + rho.conj().T) / 2
    w, v = np.linalg.eigh(herm)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        raise ValueError("matrix has no positive spectrum to keep")
    w = w / w.sum()
    return (v * w) @ v.conj().T


def _psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def _as_dm(x: np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.ndim == 1:
        return np.outer(x, x.conj())
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"{what} must be a square matrix or a state vector")
    if not np.allclose(x, x.conj().T, atol=1e-10):
        raise ValueError(f"{what} is not Hermitian")
    return x


def state_fidelity(rho_t: np.ndarray, rho_e: np.ndarray) -> float:
    """``Tr sqrt(sqrt(rho_t) rho_e sqrt(rho_t))``.

    Either argument may be a ket.  A non-PSD ``rho_e`` (as linear inversion
    can produce) is projected onto the physical set first.
    """
    rt = _as_dm(rho_t, "rho_t")
    re = _as_dm(rho_e, "rho_e")
    if rt.shape != re.shape:
        raise ValueError("density matrices differ in shape")
    if np.linalg.eigvalsh(re).min() < -1e-10:
        log.info("rho_e is not positive semidefinite; using its physical projection")
        re = project_physical(re)
    # pure arguments reduce to sqrt(<psi|rho|psi>), which avoids square roots of round-off
    for a, b in ((rt, re), (re, rt)):
        w, v = np.linalg.eigh(a)
        if w[-1] > 1 - 1e-12:
            psi = v[:, -1]
            return float(np.sqrt(np.clip(np.vdot(psi, b @ psi).real, 0.0, 1.0)))
    s = _psd_sqrt(rt)
    w = np.linalg.eigvalsh(s @ re @ s)
    return float(np.clip(np.sqrt(np.clip(w, 0.0, None)).sum(), 0.0, 1.0))


def statistical_fidelity(p_exp, p_th) -> float:
    """Bhattacharyya coefficient ``sum_j sqrt(p_exp[j] p_th[j])``.

    Accepts equal-length vectors or dicts keyed by outcome (missing keys count as 0).
    """
    if isinstance(p_exp, Mapping) or isinstance(p_th, Mapping):
        if not (isinstance(p_exp, Mapping) and isinstance(p_th, Mapping)):
            raise ValueError("pass two vectors or two outcome maps")
        keys = sorted(set(p_exp) | set(p_th))
        p_exp = [p_exp.get(k, 0.0) for k in keys]
        p_th = [p_th.get(k, 0.0) for k in keys]
    a = np.asarray(p_exp, dtype=float)
    b = np.asarray(p_th, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"distributions must be equal-length vectors, got {a.shape} and {b.shape}")
    for v in (a, b):
        if abs(v.sum() - 1.0) > 1e-6 or (v < 0).any():
            raise ValueError("each distribution must be non-negative and sum to 1")
    return float(np.sum(np.sqrt(a * b)))


# ---------------------------------------------------------------------------
# tomography runs
# ---------------------------------------------------------------------------

@dataclass
class TomographyResult:
    T: np.ndarray
    rho: np.ndarray
    data: dict = field(default_factory=dict)  # setting -> Histogram or probabilities

    @property
    def physical(self) -> bool:
        return bool(np.linalg.eigvalsh(self.rho).min() >= -1e-8)


def _setting_shots(shots, setting: str):
    if shots is None or isinstance(shots, int):
        return shots
    return shots[setting]


def state_tomography(circuit: Circuit, qubits: Sequence[int], shots: int | Mapping[str, int] | None = None,
                     seed=None, noise=None, max_shots: int | None = DEFAULT_MAX_SHOTS) -> TomographyResult:
    """Tomography of ``qubits`` at the end of ``circuit``.

    ``shots=None`` uses exact outcome probabilities; otherwise every setting
    is sampled (``shots`` may be a per-setting mapping, as in a job file).
    ``noise`` (a :class:`~nonlocalgate.noise.NoiseModel` or calibration table)
    switches to noisy density-matrix execution.
    """
    qubits = list(qubits)
    all_settings = settings(len(qubits))
    seeds = spawn_seeds(seed, len(all_settings))
    data: dict = {}
    for s, ss in zip(all_settings, seeds):
        circ, cbits = tomography_circuit(circuit, qubits, s)
        if noise is None:
            dist = outcome_distribution(circ, cbits)
        else:
            dist = noisy_distribution(circ, noise, cbits)
        n_shots = _setting_shots(shots, s)
        if n_shots is None:
            data[s] = dist
        else:
            data[s] = sample_distribution(dist, check_shots(n_shots, max_shots), ss)
    T = t_from_counts(data, len(qubits))
    return TomographyResult(T, reconstruct(T), data)


def tomography_of_state(rho: np.ndarray, shots: int | None = None, seed=None) -> TomographyResult:
    """Tomography of a given 1- or 2-qubit state (exact or sampled probabilities)."""
    rho = _as_dm(rho, "rho")
    n = int(round(np.log2(rho.shape[0])))
    seeds = spawn_seeds(seed, 3**n)
    data: dict = {}
    for s, ss in zip(settings(n), seeds):
        dist = setting_probabilities(rho, s)
        data[s] = dist if shots is None else sample_distribution(dist, check_shots(shots, None), ss)
    T = t_from_counts(data, n)
    return TomographyResult(T, reconstruct(T), data)
