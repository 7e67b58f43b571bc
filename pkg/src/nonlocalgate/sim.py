"""Dense state-vector and density-matrix simulation.

Qubit ordering: the ket label ``|q0 q1 ... q(n-1)>`` puts ``q0`` on the most
significant bit of the amplitude index.  Bitstrings in histograms follow the
same convention, with classical bit ``c0`` leftmost.

States are plain numpy arrays: a state vector is a 1-D complex array of length
``2**n`` and a density matrix a ``(2**n, 2**n)`` complex array.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

MAX_QUBITS = 20
DEFAULT_MAX_SHOTS = 8192
ATOL = 1e-10


class SimulationError(Exception):
    """Base class for simulator errors."""


class DimensionError(SimulationError, ValueError):
    """Gate arity, target indices or array shapes do not fit together."""


class CircuitValidationError(SimulationError, ValueError):
    """A circuit refers to missing qubits/cbits or reads a cbit before writing it."""


class ChannelError(SimulationError, ValueError):
    """A Kraus set is not completely positive and trace preserving."""


# ---------------------------------------------------------------------------
# state helpers
# ---------------------------------------------------------------------------

def n_qubits_of(array: np.ndarray) -> int:
    dim = array.shape[0]
    n = int(round(np.log2(dim))) if dim > 0 else -1
    if n < 0 or 2**n != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


def zero_state(n_qubits: int) -> np.ndarray:
    if not 0 < n_qubits <= MAX_QUBITS:
        raise DimensionError(f"register size must be in [1, {MAX_QUBITS}], got {n_qubits}")
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[0] = 1.0
    return psi


def basis_state(bits: str) -> np.ndarray:
    """Computational basis ket for a bitstring such as ``"01"``."""
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[int(bits, 2)] = 1.0
    return psi


def check_state(psi: np.ndarray, atol: float = ATOL) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise DimensionError("a state vector must be one-dimensional")
    n_qubits_of(psi)
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > atol:
        raise ValueError(f"state is not normalized (norm^2 = {norm:.12g})")
    return psi


def to_density_matrix(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def is_physical(rho: np.ndarray, atol: float = 1e-8) -> bool:
    """True when ``rho`` is Hermitian, unit trace and PSD within ``atol``."""
    rho = np.asarray(rho)
    if not np.allclose(rho, rho.conj().T, atol=ATOL):
        return False
    if abs(np.trace(rho) - 1.0) > ATOL:
        return False
    return bool(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() >= -atol)


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def partial_trace(rho: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix on ``keep`` (returned in the order given)."""
    n = n_qubits_of(rho)
    keep = list(keep)
    drop = [q for q in range(n) if q not in keep]
    t = rho.reshape((2,) * (2 * n))
    # move kept row axes then kept column axes to the front, traced ones last
    perm = keep + drop + [n + q for q in keep] + [n + q for q in drop]
    t = t.transpose(perm)
    k, d = len(keep), len(drop)
    t = t.reshape(2**k, 2**d, 2**k, 2**d)
    return np.einsum("ajbj->ab", t)


def is_unitary(matrix: np.ndarray, atol: float = ATOL) -> bool:
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.allclose(m @ m.conj().T, np.eye(m.shape[0]), atol=atol))


# ---------------------------------------------------------------------------
# gate / channel application
# ---------------------------------------------------------------------------

def _check_targets(n: int, targets: Sequence[int], arity: int) -> list[int]:
    targets = [int(t) for t in targets]
    if len(targets) != arity:
        raise DimensionError(f"gate acts on {arity} qubit(s) but {len(targets)} target(s) given")
    if len(set(targets)) != len(targets):
        raise DimensionError(f"targets must be distinct, got {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise DimensionError(f"qubit index {t} out of range for {n}-qubit register")
    return targets


def _gate_arity(gate: np.ndarray) -> int:
    gate = np.asarray(gate)
    if gate.ndim != 2 or gate.shape[0] != gate.shape[1]:
        raise DimensionError(f"gate matrix must be square, got shape {gate.shape}")
    return n_qubits_of(gate)


def _apply_to_axes(tensor: np.ndarray, op: np.ndarray, axes: list[int]) -> np.ndarray:
    k = len(axes)
    op_t = op.reshape((2,) * (2 * k))
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the new axes first; move them back into place
    return np.moveaxis(out, list(range(k)), axes)


def apply_unitary(state: np.ndarray, gate: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Return ``U|psi>`` with ``gate`` embedded on ``targets``.

    The first target is the most significant qubit of ``gate``'s own index,
    so ``apply_unitary(psi, CNOT, [c, t])`` uses ``c`` as control.
    """
    state = np.asarray(state, dtype=complex)
    n = n_qubits_of(state)
    k = _gate_arity(gate)
    targets = _check_targets(n, targets, k)
    t = state.reshape((2,) * n)
    return _apply_to_axes(t, np.asarray(gate, dtype=complex), targets).reshape(-1)


def apply_operator_dm(rho: np.ndarray, op: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """``A rho A^dagger`` with ``A`` embedded on ``targets``."""
    rho = np.asarray(rho, dtype=complex)
    n = n_qubits_of(rho)
    k = _gate_arity(op)
    targets = _check_targets(n, targets, k)
    op = np.asarray(op, dtype=complex)
    t = rho.reshape((2,) * (2 * n))
    t = _apply_to_axes(t, op, targets)
    t = _apply_to_axes(t, op.conj(), [n + q for q in targets])
    return t.reshape(2**n, 2**n)


def check_kraus(kraus: Iterable[np.ndarray], atol: float = ATOL) -> list[np.ndarray]:
    ops = [np.asarray(k, dtype=complex) for k in kraus]
    if not ops:
        raise ChannelError("empty Kraus set")
    dim = ops[0].shape[0]
    if any(k.shape != (dim, dim) for k in ops):
        raise ChannelError("Kraus operators must share one square shape")
    total = sum(k.conj().T @ k for k in ops)
    if not np.allclose(total, np.eye(dim), atol=atol):
        dev = np.abs(total - np.eye(dim)).max()
        raise ChannelError(f"Kraus set is not trace preserving (max deviation {dev:.3g})")
    return ops


def apply_channel(rho: np.ndarray, kraus: Sequence[np.ndarray], targets: Sequence[int]) -> np.ndarray:
    """``rho -> sum_k K rho K^dagger`` on ``targets``."""
    ops = check_kraus(kraus)
    out = np.zeros_like(np.asarray(rho, dtype=complex))
    for k in ops:
        out += apply_operator_dm(rho, k, targets)
    return out


# ---------------------------------------------------------------------------
# measurement
# ---------------------------------------------------------------------------

def _project(state: np.ndarray, qubit: int, outcome: int) -> np.ndarray:
    n = n_qubits_of(state)
    t = state.reshape((2,) * n).copy()
    idx = [slice(None)] * n
    idx[qubit] = 1 - outcome
    t[tuple(idx)] = 0.0
    return t.reshape(-1)


def outcome_probabilities(state: np.ndarray, qubit: int) -> tuple[float, float]:
    n = n_qubits_of(state)
    _check_targets(n, [qubit], 1)
    t = np.abs(np.asarray(state).reshape((2,) * n)) ** 2
    p1 = float(np.take(t, 1, axis=qubit).sum())
    p0 = float(np.take(t, 0, axis=qubit).sum())
    return p0, p1


def measure_qubit(state: np.ndarray, qubit: int, rng: np.random.Generator,
                  forced: int | None = None) -> tuple[int, np.ndarray]:
    """Projectively measure ``qubit``; returns ``(bit, collapsed state)``.

    ``forced`` selects a branch instead of sampling (used for exhaustive
    branch enumeration); a zero-probability forced branch raises.
    """
    p0, p1 = outcome_probabilities(state, qubit)
    total = p0 + p1
    if forced is None:
        bit = int(rng.random() < p1 / total)
    else:
        bit = int(forced)
    p = p1 if bit else p0
    if p <= 0.0:
        raise SimulationError(f"outcome {bit} on qubit {qubit} has zero probability")
    return bit, _project(state, qubit, bit) / np.sqrt(p)


def projector_dm(rho: np.ndarray, qubit: int, outcome: int) -> np.ndarray:
    """Unnormalized ``P rho P`` for the projector onto ``outcome`` of ``qubit``."""
    n = n_qubits_of(rho)
    t = np.asarray(rho, dtype=complex).reshape((2,) * (2 * n)).copy()
    for axis in (qubit, n + qubit):
        idx = [slice(None)] * (2 * n)
        idx[axis] = 1 - outcome
        t[tuple(idx)] = 0.0
    return t.reshape(2**n, 2**n)


# ---------------------------------------------------------------------------
# circuits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Unitary:
    name: str
    matrix: np.ndarray = field(repr=False)
    targets: tuple[int, ...]


@dataclass(frozen=True)
class Measure:
    qubit: int
    cbit: int


@dataclass(frozen=True)
class Conditional:
    name: str
    matrix: np.ndarray = field(repr=False)
    targets: tuple[int, ...]
    cbit: int
    value: int = 1


Instruction = Union[Unitary, Measure, Conditional]


@dataclass
class Circuit:
    n_qubits: int
    n_cbits: int = 0
    instructions: list = field(default_factory=list)

    # builder helpers return self so calls can be chained
    def gate(self, name: str, matrix: np.ndarray, *targets: int) -> "Circuit":
        self.instructions.append(Unitary(name.upper(), np.asarray(matrix, dtype=complex), tuple(targets)))
        return self

    def measure(self, qubit: int, cbit: int) -> "Circuit":
        self.instructions.append(Measure(qubit, cbit))
        return self

    def c_if(self, name: str, matrix: np.ndarray, target: int, cbit: int, value: int = 1) -> "Circuit":
        self.instructions.append(
            Conditional(name.upper(), np.asarray(matrix, dtype=complex), (target,), cbit, value))
        return self

    def extend(self, other: "Circuit", qubit_map: Sequence[int] | None = None) -> "Circuit":
        """Append ``other``'s unitary instructions, relabelling its qubits via ``qubit_map``."""
        qmap = list(range(other.n_qubits)) if qubit_map is None else list(qubit_map)
        for ins in other.instructions:
            if not isinstance(ins, Unitary):
                raise CircuitValidationError("only unitary sub-circuits can be inlined")
            self.instructions.append(Unitary(ins.name, ins.matrix, tuple(qmap[q] for q in ins.targets)))
        return self

    def copy(self) -> "Circuit":
        return Circuit(self.n_qubits, self.n_cbits, list(self.instructions))

    @property
    def measured_cbits(self) -> list[int]:
        seen: list[int] = []
        for ins in self.instructions:
            if isinstance(ins, Measure) and ins.cbit not in seen:
                seen.append(ins.cbit)
        return seen

    def validate(self) -> None:
        if not 0 < self.n_qubits <= MAX_QUBITS:
            raise CircuitValidationError(f"register size must be in [1, {MAX_QUBITS}]")
        written: set[int] = set()
        for pos, ins in enumerate(self.instructions):
            qubits = (ins.qubit,) if isinstance(ins, Measure) else ins.targets
            for q in qubits:
                if not 0 <= q < self.n_qubits:
                    raise CircuitValidationError(f"instruction {pos}: qubit {q} out of range")
            if isinstance(ins, Measure):
                if not 0 <= ins.cbit < self.n_cbits:
                    raise CircuitValidationError(f"instruction {pos}: cbit {ins.cbit} out of range")
                written.add(ins.cbit)
                continue
            if len(set(ins.targets)) != len(ins.targets):
                raise CircuitValidationError(f"instruction {pos}: repeated target qubit")
            if ins.matrix.shape != (2 ** len(ins.targets),) * 2:
                raise CircuitValidationError(f"instruction {pos}: matrix shape does not match targets")
            if not is_unitary(ins.matrix):
                raise CircuitValidationError(f"instruction {pos}: gate {ins.name} is not unitary")
            if isinstance(ins, Conditional):
                if ins.cbit not in written:
                    raise CircuitValidationError(
                        f"instruction {pos}: cbit {ins.cbit} read before any measurement writes it")
                if ins.value not in (0, 1):
                    raise CircuitValidationError(f"instruction {pos}: trigger value must be 0 or 1")


def matrix_of(circuit: Circuit) -> np.ndarray:
    """Total unitary of a measurement-free circuit."""
    dim = 2**circuit.n_qubits
    cols = []
    for k in range(dim):
        psi = np.zeros(dim, dtype=complex)
        psi[k] = 1.0
        for ins in circuit.instructions:
            if not isinstance(ins, Unitary):
                raise CircuitValidationError("matrix_of needs a measurement-free circuit")
            psi = apply_unitary(psi, ins.matrix, ins.targets)
        cols.append(psi)
    return np.stack(cols, axis=1)


def _initial(circuit: Circuit, initial_state: np.ndarray | None) -> np.ndarray:
    if initial_state is None:
        return zero_state(circuit.n_qubits)
    psi = check_state(initial_state)
    if psi.shape[0] != 2**circuit.n_qubits:
        raise DimensionError("initial state does not match circuit width")
    return psi.copy()


def run_ideal(circuit: Circuit, seed: int | np.random.Generator | None = None,
              initial_state: np.ndarray | None = None) -> tuple[np.ndarray, list[int]]:
    """Run one sampled trajectory; returns ``(final state, classical bits)``."""
    circuit.validate()
    rng = np.random.default_rng(seed)
    psi = _initial(circuit, initial_state)
    cbits = [0] * circuit.n_cbits
    for ins in circuit.instructions:
        if isinstance(ins, Measure):
            cbits[ins.cbit], psi = measure_qubit(psi, ins.qubit, rng)
        elif isinstance(ins, Conditional):
            if cbits[ins.cbit] == ins.value:
                psi = apply_unitary(psi, ins.matrix, ins.targets)
        else:
            psi = apply_unitary(psi, ins.matrix, ins.targets)
    return psi, cbits


@dataclass
class Branch:
    probability: float
    state: np.ndarray
    cbits: tuple[int, ...]


def run_branches(circuit: Circuit, initial_state: np.ndarray | None = None,
                 cutoff: float = 1e-15) -> list[Branch]:
    """Enumerate every measurement branch with its exact probability."""
    circuit.validate()
    branches = [Branch(1.0, _initial(circuit, initial_state), (0,) * circuit.n_cbits)]
    for ins in circuit.instructions:
        nxt = []
        for br in branches:
            if isinstance(ins, Measure):
                probs = outcome_probabilities(br.state, ins.qubit)
                for bit in (0, 1):
                    p = probs[bit] / (probs[0] + probs[1])
                    if p * br.probability <= cutoff:
                        continue
                    psi = _project(br.state, ins.qubit, bit) / np.sqrt(probs[bit])
                    cb = list(br.cbits)
                    cb[ins.cbit] = bit
                    nxt.append(Branch(br.probability * p, psi, tuple(cb)))
            elif isinstance(ins, Conditional):
                if br.cbits[ins.cbit] == ins.value:
                    br = Branch(br.probability, apply_unitary(br.state, ins.matrix, ins.targets), br.cbits)
                nxt.append(br)
            else:
                nxt.append(Branch(br.probability, apply_unitary(br.state, ins.matrix, ins.targets), br.cbits))
        branches = nxt
    return branches


def _resolve_cbits(circuit: Circuit, cbits: Sequence[int] | None) -> list[int]:
    cbits = circuit.measured_cbits if cbits is None else [int(c) for c in cbits]
    if not cbits:
        raise CircuitValidationError("circuit measures nothing; declare measured qubits")
    for c in cbits:
        if not 0 <= c < circuit.n_cbits:
            raise CircuitValidationError(f"cbit {c} out of range")
    return cbits


def outcome_distribution(circuit: Circuit, cbits: Sequence[int] | None = None,
                         initial_state: np.ndarray | None = None) -> dict[str, float]:
    """Exact probability of each bitstring over ``cbits`` (default: all measured cbits)."""
    cbits = _resolve_cbits(circuit, cbits)
    dist: dict[str, float] = {}
    for br in run_branches(circuit, initial_state):
        key = "".join(str(br.cbits[c]) for c in cbits)
        dist[key] = dist.get(key, 0.0) + br.probability
    return dist


# ---------------------------------------------------------------------------
# histograms
# ---------------------------------------------------------------------------

@dataclass
class Histogram:
    shots: int
    counts: dict[str, int]

    def __post_init__(self):
        self.counts = {k: int(v) for k, v in sorted(self.counts.items())}
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("counts must be non-negative")
        if sum(self.counts.values()) != self.shots:
            raise ValueError(f"counts sum to {sum(self.counts.values())}, expected {self.shots}")

    @property
    def width(self) -> int:
        return len(next(iter(self.counts))) if self.counts else 0

    def probabilities(self, width: int | None = None) -> dict[str, float]:
        """Relative frequencies over every bitstring of ``width`` bits (zeros included)."""
        width = self.width if width is None else width
        keys = [format(i, f"0{width}b") for i in range(2**width)]
        return {k: self.counts.get(k, 0) / self.shots for k in keys}

    def vector(self, width: int | None = None) -> np.ndarray:
        return np.array(list(self.probabilities(width).values()))


def spawn_seeds(seed, n: int) -> list[np.random.SeedSequence]:
    """``n`` independent child seeds; ``seed`` may be an int, None or a SeedSequence."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(n)


def check_shots(shots: int, max_shots: int | None = DEFAULT_MAX_SHOTS) -> int:
    if int(shots) != shots or shots < 1:
        raise ValueError(f"shots must be a positive integer, got {shots}")
    if max_shots is not None and shots > max_shots:
        raise ValueError(f"shots={shots} exceeds the cap of {max_shots}; pass max_shots=None to lift it")
    return int(shots)


def sample_distribution(dist: dict[str, float], shots: int, seed) -> Histogram:
    """Draw ``shots`` independent outcomes from an exact distribution."""
    rng = np.random.default_rng(seed)
    keys = sorted(dist)
    p = np.clip(np.array([dist[k] for k in keys], dtype=float), 0.0, None)
    p = p / p.sum()
    draws = rng.choice(len(keys), size=shots, p=p)
    counts = np.bincount(draws, minlength=len(keys))
    return Histogram(shots, {k: int(c) for k, c in zip(keys, counts) if c})


def sample_histogram(circuit: Circuit, shots: int, seed=None, cbits: Sequence[int] | None = None,
                     method: str = "exact", max_shots: int | None = DEFAULT_MAX_SHOTS,
                     initial_state: np.ndarray | None = None) -> Histogram:
    """Histogram of ``shots`` independent runs of ``circuit``.

    ``method="exact"`` enumerates measurement branches once and draws shots
    from the resulting distribution; ``method="trajectory"`` runs every shot
    separately with its own RNG stream spawned from ``seed``.  Both are
    deterministic per seed.
    """
    shots = check_shots(shots, max_shots)
    cbits = _resolve_cbits(circuit, cbits)
    if method == "exact":
        return sample_distribution(outcome_distribution(circuit, cbits, initial_state), shots, seed)
    if method != "trajectory":
        raise ValueError(f"unknown sampling method {method!r}")
    streams = spawn_seeds(seed, shots)
    counts: Counter[str] = Counter()
    for stream in streams:
        _, bits = run_ideal(circuit, np.random.default_rng(stream), initial_state)
        counts["".join(str(bits[c]) for c in cbits)] += 1
    return Histogram(shots, dict(counts))
