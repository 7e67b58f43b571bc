"""Two-party non-local controlled-U over one ebit and two classical bits.

Alice owns the control qubit ``A`` and ancilla ``a``; Bob owns the target
``B`` and ancilla ``b``.  The joint state lives in a single simulated
register, but every local operation goes through an ownership check and the
nodes exchange nothing except :class:`ClassicalMessage` values.

Step order::

    EPR(a, b) -> Alice CNOT(A, a) -> Alice measures a -> message ->
    Bob X^m on b -> Bob controlled-U(b, B) -> Bob H(b) -> Bob measures b ->
    message -> Alice Z^m on A
"""
from __future__ import annotations

import enum
import itertools
import json
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from . import gates
from .noise import NoiseModel, readout_matrix
from .sim import (
    Circuit, SimulationError, apply_operator_dm, apply_unitary, check_state, is_unitary,
    measure_qubit, partial_trace, projector_dm,
)


class ProtocolError(SimulationError):
    """Raised when the protocol is driven out of order or its preconditions fail."""


class LocalityError(ProtocolError):
    """A node tried to act on a qubit it does not own."""


class NodeId(str, enum.Enum):
    ALICE = "Alice"
    BOB = "Bob"


class StepTag(str, enum.Enum):
    ALICE_MEASUREMENT = "AliceMeasurement"
    BOB_MEASUREMENT = "BobMeasurement"


@dataclass(frozen=True)
class ClassicalMessage:
    sender: NodeId
    bit: int
    step_tag: StepTag


def correction_table(bit: int, step_tag: StepTag | str) -> str:
    """Name of the feed-forward correction for a received bit.

    Bob answers Alice's bit with X (or I); Alice answers Bob's bit with Z (or I).
    """
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit}")
    tag = StepTag(step_tag)
    if not bit:
        return "I"
    return "X" if tag is StepTag.ALICE_MEASUREMENT else "Z"


@dataclass(frozen=True)
class RegisterLayout:
    A: int = 0
    a: int = 1
    b: int = 2
    B: int = 3

    def __post_init__(self):
        idx = [self.A, self.a, self.b, self.B]
        if len(set(idx)) != 4 or min(idx) < 0:
            raise ValueError(f"layout needs four distinct non-negative indices, got {idx}")

    @property
    def n_qubits(self) -> int:
        return max(self.A, self.a, self.b, self.B) + 1

    def owner(self, qubit: int) -> NodeId | None:
        if qubit in (self.A, self.a):
            return NodeId.ALICE
        if qubit in (self.b, self.B):
            return NodeId.BOB
        return None

    @classmethod
    def parse(cls, text: str) -> "RegisterLayout":
        """Parse ``"A=0,a=1,b=2,B=3"``."""
        values = {}
        for part in text.split(","):
            key, _, val = part.partition("=")
            key = key.strip()
            if key not in ("A", "a", "b", "B") or not val.strip().isdigit():
                raise ValueError(f"bad layout entry {part!r}; expected e.g. A=0,a=1,b=2,B=3")
            values[key] = int(val)
        if len(values) != 4:
            raise ValueError("layout must assign all of A, a, b, B")
        return cls(**values)


# ---------------------------------------------------------------------------
# transcript
# ---------------------------------------------------------------------------

@dataclass
class Event:
    seq: int
    kind: str  # EPRAllocated | LocalGate | Measured | Sent | Correction
    node: str | None = None
    gate: str | None = None
    qubits: list[int] | None = None
    outcome: int | None = None
    message: dict | None = None

    def to_dict(self) -> dict[str, Any]:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class ProtocolTranscript:
    events: list[Event] = field(default_factory=list)

    def record(self, kind: str, **fields) -> Event:
        ev = Event(len(self.events), kind, **fields)
        self.events.append(ev)
        return ev

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    @property
    def bits(self) -> tuple[int, int]:
        """(Alice's measured bit, Bob's measured bit) as sent."""
        sent = {e.message["step_tag"]: e.message["bit"] for e in self.of_kind("Sent")}
        return sent[StepTag.ALICE_MEASUREMENT.value], sent[StepTag.BOB_MEASUREMENT.value]

    def to_json(self) -> str:
        return json.dumps([e.to_dict() for e in self.events], indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ProtocolTranscript":
        items = json.loads(text)
        events = [Event(**item) for item in items]
        if [e.seq for e in events] != list(range(len(events))):
            raise ValueError("transcript sequence numbers must be 0, 1, 2, ...")
        return cls(events)


# ---------------------------------------------------------------------------
# shared register and classical channel
# ---------------------------------------------------------------------------

class Register:
    """Joint quantum state with an ownership map.

    Pure (state vector) unless a noise model is given, in which case the
    state is a density matrix and every gate is followed by its noise.
    """

    def __init__(self, state: np.ndarray, layout: RegisterLayout, rng: np.random.Generator,
                 noise: NoiseModel | None = None):
        self.layout = layout
        self.rng = rng
        self.noise = noise
        self.state = np.outer(state, state.conj()) if noise is not None else state

    @property
    def mixed(self) -> bool:
        return self.noise is not None

    def _apply(self, matrix: np.ndarray, qubits: Sequence[int]) -> None:
        if self.mixed:
            self.state = apply_operator_dm(self.state, matrix, qubits)
            self.state = self.noise.after_gate(self.state, qubits)
        else:
            self.state = apply_unitary(self.state, matrix, qubits)

    def apply(self, node: NodeId | None, circuit_or_matrix, qubits: Sequence[int] | None = None) -> None:
        """Apply a gate (matrix + qubits) or a unitary circuit on behalf of ``node``."""
        if isinstance(circuit_or_matrix, Circuit):
            ops = [(ins.matrix, ins.targets) for ins in circuit_or_matrix.instructions]
        else:
            ops = [(np.asarray(circuit_or_matrix, dtype=complex), tuple(qubits))]
        for _, targets in ops:
            for q in targets:
                if node is not None and self.layout.owner(q) is not node:
                    raise LocalityError(f"{node.value} cannot act on qubit {q}")
        for matrix, targets in ops:
            self._apply(matrix, targets)

    def probability_zero(self, qubit: int) -> float:
        if self.mixed:
            return float(np.trace(projector_dm(self.state, qubit, 0)).real)
        n = self.layout.n_qubits
        t = np.abs(self.state.reshape((2,) * n)) ** 2
        return float(np.take(t, 0, axis=qubit).sum())

    def measure(self, node: NodeId, qubit: int, forced: int | None = None) -> int:
        if self.layout.owner(qubit) is not node:
            raise LocalityError(f"{node.value} cannot measure qubit {qubit}")
        if not self.mixed:
            bit, self.state = measure_qubit(self.state, qubit, self.rng, forced)
            return bit
        rho = self.noise.before_readout(self.state, qubit)
        flip = readout_matrix(self.noise.readout_error(qubit))
        parts = {(t, r): flip[r, t] * projector_dm(rho, qubit, t) for t in (0, 1) for r in (0, 1)}
        weights = {k: float(np.trace(v).real) for k, v in parts.items()}
        if forced is None:
            keys = list(parts)
            p = np.array([weights[k] for k in keys])
            true_bit, reported = keys[self.rng.choice(len(keys), p=p / p.sum())]
        else:
            reported = int(forced)
            p_true = [weights[(t, reported)] for t in (0, 1)]
            if sum(p_true) <= 0:
                raise SimulationError(f"reported outcome {reported} has zero probability")
            true_bit = int(self.rng.random() < p_true[1] / sum(p_true))
        part = parts[(true_bit, reported)]
        self.state = part / np.trace(part).real
        return reported


class ClassicalChannel:
    """In-process, in-order bit channel between the two nodes."""

    def __init__(self, transcript: ProtocolTranscript):
        self._queue: deque[ClassicalMessage] = deque()
        self._transcript = transcript

    def send(self, msg: ClassicalMessage) -> None:
        self._transcript.record("Sent", node=msg.sender.value,
                                message={"sender": msg.sender.value, "bit": msg.bit,
                                         "step_tag": msg.step_tag.value})
        self._queue.append(msg)

    def receive(self, recipient: NodeId) -> ClassicalMessage:
        if not self._queue or self._queue[0].sender is recipient:
            raise ProtocolError(f"no message waiting for {recipient.value}")
        return self._queue.popleft()


def distribute_epr(register: Register, transcript: ProtocolTranscript) -> None:
    """Put the ancillas ``(a, b)`` into ``(|00> + |11>)/sqrt(2)``.

    The pair is produced by the entanglement source, not by either node, and
    is created noiselessly.
    """
    lay = register.layout
    for q in (lay.a, lay.b):
        if register.probability_zero(q) < 1 - 1e-10:
            raise ProtocolError(f"ancilla qubit {q} is not fresh |0>")
    apply = apply_operator_dm if register.mixed else apply_unitary
    register.state = apply(register.state, gates.H, [lay.a])
    register.state = apply(register.state, gates.CNOT, [lay.a, lay.b])
    transcript.record("EPRAllocated", qubits=[lay.a, lay.b])


# ---------------------------------------------------------------------------
# nodes
# ---------------------------------------------------------------------------

class Alice:
    """Control-side node: entangles, measures ``a``, then applies Bob's Z correction."""

    def __init__(self, register: Register, channel: ClassicalChannel, transcript: ProtocolTranscript,
                 forced: int | None = None):
        self.reg, self.channel, self.log = register, channel, transcript
        self.forced = forced
        self.phase = "ready"

    def step(self) -> None:
        lay = self.reg.layout
        if self.phase == "ready":
            self.reg.apply(NodeId.ALICE, gates.CNOT, [lay.A, lay.a])
            self.log.record("LocalGate", node="Alice", gate="CX", qubits=[lay.A, lay.a])
            bit = self.reg.measure(NodeId.ALICE, lay.a, self.forced)
            self.log.record("Measured", node="Alice", qubits=[lay.a], outcome=bit)
            self.channel.send(ClassicalMessage(NodeId.ALICE, bit, StepTag.ALICE_MEASUREMENT))
            self.phase = "waiting"
        elif self.phase == "waiting":
            msg = self.channel.receive(NodeId.ALICE)
            name = correction_table(msg.bit, msg.step_tag)
            self.reg.apply(NodeId.ALICE, gates.gate_matrix(name), [lay.A])
            self.log.record("Correction", node="Alice", gate=name, qubits=[lay.A])
            self.phase = "done"
        else:
            raise ProtocolError("Alice has already finished")


class Bob:
    """Target-side node: corrects ``b``, applies controlled-U, measures ``b`` in the X basis."""

    def __init__(self, register: Register, channel: ClassicalChannel, transcript: ProtocolTranscript,
                 u: np.ndarray, forced: int | None = None):
        self.reg, self.channel, self.log = register, channel, transcript
        self.u = u
        self.forced = forced
        self.phase = "waiting"

    def step(self) -> None:
        if self.phase != "waiting":
            raise ProtocolError("Bob has already finished")
        lay = self.reg.layout
        msg = self.channel.receive(NodeId.BOB)
        name = correction_table(msg.bit, msg.step_tag)
        self.reg.apply(NodeId.BOB, gates.gate_matrix(name), [lay.b])
        self.log.record("Correction", node="Bob", gate=name, qubits=[lay.b])
        cu = gates.controlled_circuit(self.u, lay.b, lay.B, lay.n_qubits)
        self.reg.apply(NodeId.BOB, cu)
        self.log.record("LocalGate", node="Bob", gate="CU", qubits=[lay.b, lay.B])
        self.reg.apply(NodeId.BOB, gates.H, [lay.b])
        self.log.record("LocalGate", node="Bob", gate="H", qubits=[lay.b])
        bit = self.reg.measure(NodeId.BOB, lay.b, self.forced)
        self.log.record("Measured", node="Bob", qubits=[lay.b], outcome=bit)
        self.channel.send(ClassicalMessage(NodeId.BOB, bit, StepTag.BOB_MEASUREMENT))
        self.phase = "done"


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------

def _check_inputs(control_state, target_state, u):
    psi_a = check_state(control_state)
    psi_b = check_state(target_state)
    if psi_a.shape != (2,) or psi_b.shape != (2,):
        raise ValueError("control and target must be single-qubit states")
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2) or not is_unitary(u):
        raise ValueError("U must be a 2x2 unitary")
    return psi_a, psi_b, u


def _embed(psi_a: np.ndarray, psi_b: np.ndarray, layout: RegisterLayout) -> np.ndarray:
    n = layout.n_qubits
    ket0 = np.array([1, 0], dtype=complex)
    factors = [ket0] * n
    factors[layout.A] = psi_a
    factors[layout.B] = psi_b
    out = np.array([1.0 + 0j])
    for f in factors:
        out = np.kron(out, f)
    return out


def _output(register: Register, bits: tuple[int, int]) -> np.ndarray:
    lay = register.layout
    if register.mixed:
        return partial_trace(register.state, [lay.A, lay.B])
    n = lay.n_qubits
    t = register.state.reshape((2,) * n)
    idx: list[Any] = [slice(None)] * n
    idx[lay.a], idx[lay.b] = bits
    for q in range(n):
        if q not in (lay.A, lay.a, lay.b, lay.B):
            idx[q] = 0
    sub = t[tuple(idx)]
    # remaining axes are A and B in index order
    if lay.A > lay.B:
        sub = sub.T
    return sub.reshape(-1)


def run_eisert(control_state, target_state, u, seed=None, noise: NoiseModel | None = None,
               layout: RegisterLayout | None = None,
               forced: tuple[int, int] | None = None) -> tuple[np.ndarray, ProtocolTranscript]:
    """Run the protocol once.

    Returns the two-qubit output over ``(A, B)`` and the transcript.  The
    output is a state vector in ideal mode and a reduced density matrix when
    ``noise`` is given.  ``forced`` pins both measurement outcomes (as
    reported bits) instead of sampling them.
    """
    psi_a, psi_b, u = _check_inputs(control_state, target_state, u)
    layout = layout or RegisterLayout()
    rng = np.random.default_rng(seed)
    transcript = ProtocolTranscript()
    register = Register(_embed(psi_a, psi_b, layout), layout, rng, noise)
    channel = ClassicalChannel(transcript)
    fa, fb = forced if forced is not None else (None, None)
    alice = Alice(register, channel, transcript, fa)
    bob = Bob(register, channel, transcript, u, fb)

    distribute_epr(register, transcript)
    alice.step()
    bob.step()
    alice.step()
    return _output(register, transcript.bits), transcript


def run_eisert_branches(control_state, target_state, u, noise: NoiseModel | None = None,
                        layout: RegisterLayout | None = None, seed=None):
    """Run all four measurement branches; yields ``(bits, output, transcript)``.

    Branches with zero probability are skipped.
    """
    for bits in itertools.product((0, 1), repeat=2):
        try:
            out, tr = run_eisert(control_state, target_state, u, seed=seed, noise=noise,
                                 layout=layout, forced=bits)
        except SimulationError as exc:
            if "zero probability" in str(exc):
                continue
            raise
        yield bits, out, tr


def direct_controlled(control_state, target_state, u) -> np.ndarray:
    """``controlled(U) (|psi_A> (x) |psi_B>)`` on a single two-qubit register."""
    psi_a, psi_b, u = _check_inputs(control_state, target_state, u)
    return gates.controlled(u) @ np.kron(psi_a, psi_b)


def protocol_circuit(u, layout: RegisterLayout | None = None, prepare: bool = True,
                     measure_outputs: bool = True, u_name: str | None = None) -> Circuit:
    """The whole protocol as a single circuit with mid-circuit feed-forward.

    Classical bits: ``c0`` = Alice's ancilla, ``c1`` = Bob's ancilla,
    ``c2`` = A, ``c3`` = B.  With ``prepare`` the data qubits start in the
    H T H / H S T H states.
    """
    lay = layout or RegisterLayout()
    n = lay.n_qubits
    u = np.asarray(u, dtype=complex)
    c = Circuit(n, 4)
    if prepare:
        c.extend(gates.prepare_alice(lay.A, n))
        c.extend(gates.prepare_bob(lay.B, n))
    c.gate("H", gates.H, lay.a)
    c.gate("CX", gates.CNOT, lay.a, lay.b)
    c.gate("CX", gates.CNOT, lay.A, lay.a)
    c.measure(lay.a, 0)
    c.c_if("X", gates.X, lay.b, 0)
    c.extend(gates.controlled_circuit(u, lay.b, lay.B, n, name=u_name))
    c.gate("H", gates.H, lay.b)
    c.measure(lay.b, 1)
    c.c_if("Z", gates.Z, lay.A, 1)
    if measure_outputs:
        c.measure(lay.A, 2)
        c.measure(lay.B, 3)
    return c


def prepared_inputs() -> tuple[np.ndarray, np.ndarray]:
    """The H T H |0> control and H S T H |0> target states."""
    return gates.prepared_state(gates.prepare_alice()), gates.prepared_state(gates.prepare_bob())
