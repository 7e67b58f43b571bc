"""Calibration-driven noise: Kraus channels and noisy density-matrix execution.

Gate errors become depolarizing channels, T1/T2 become amplitude damping plus
pure dephasing over the gate duration, and readout errors flip the recorded
classical bit.  Noise is inserted after every gate on exactly the qubits the
gate touches.
"""
from __future__ import annotations

import configparser
import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .sim import (
    Circuit, Conditional, Histogram, Measure, SimulationError, apply_channel,
    apply_operator_dm, check_shots, projector_dm, sample_distribution, DEFAULT_MAX_SHOTS,
)

log = logging.getLogger(__name__)

MAX_DM_QUBITS = 10

_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class CalibrationError(ValueError):
    """A calibration source is missing fields or holds out-of-range values."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class CapabilityError(SimulationError):
    """The requested register is too large for density-matrix execution."""


# ---------------------------------------------------------------------------
# Kraus sets
# ---------------------------------------------------------------------------

def _check_probability(p: float, what: str) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{what} must be in [0, 1], got {p}")
    return float(p)


def depolarizing(p: float, arity: int = 1) -> list[np.ndarray]:
    """Identity with weight ``1-p``; the non-identity Paulis share ``p`` equally."""
    _check_probability(p, "depolarizing probability")
    if arity not in (1, 2):
        raise ValueError("depolarizing channels are built for 1 or 2 qubits")
    paulis = [np.array(1.0 + 0j)]
    for _ in range(arity):
        paulis = [np.kron(a, b) for a in paulis for b in _PAULIS]
    n_err = len(paulis) - 1
    ops = [np.sqrt(1.0 - p) * paulis[0]]
    if p > 0:
        ops += [np.sqrt(p / n_err) * P for P in paulis[1:]]
    return ops


def amplitude_damping(gamma: float) -> list[np.ndarray]:
    _check_probability(gamma, "damping probability")
    return [np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex),
            np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)]


def phase_damping(lam: float) -> list[np.ndarray]:
    """Scales off-diagonal elements by ``1 - lam``."""
    _check_probability(lam, "dephasing probability")
    return [np.sqrt(1 - lam) * np.eye(2, dtype=complex),
            np.sqrt(lam) * np.diag([1, 0]).astype(complex),
            np.sqrt(lam) * np.diag([0, 1]).astype(complex)]


def compose(first: Sequence[np.ndarray], second: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Kraus set of ``second`` applied after ``first``."""
    return [b @ a for a in first for b in second]


def relaxation(t1: float, t2: float, duration: float) -> list[np.ndarray]:
    """Amplitude damping with ``1-exp(-t/T1)`` then pure dephasing at ``1/T2 - 1/(2 T1)``.

    All three arguments share one time unit.  ``math.inf`` for T1/T2 turns the
    corresponding decay off.  When T2 > 2 T1 the dephasing rate is clamped to 0.
    """
    if t1 <= 0 or t2 <= 0 or duration < 0:
        raise ValueError("T1, T2 must be positive and duration non-negative")
    gamma = 1.0 - math.exp(-duration / t1)
    rate_phi = 1.0 / t2 - 1.0 / (2.0 * t1)
    if rate_phi < 0:
        log.info("T2=%g exceeds 2*T1=%g; clamping pure dephasing to zero", t2, 2 * t1)
        rate_phi = 0.0
    lam = 1.0 - math.exp(-duration * rate_phi)
    return compose(amplitude_damping(gamma), phase_damping(lam))


def readout_matrix(p: float) -> np.ndarray:
    """``R[reported, true]`` for a symmetric bit flip with probability ``p``."""
    _check_probability(p, "readout error")
    return np.array([[1 - p, p], [p, 1 - p]])


def readout_flip(bit: int, p: float, rng: np.random.Generator) -> int:
    return bit ^ int(rng.random() < p)


# ---------------------------------------------------------------------------
# calibration tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QubitCalibration:
    gate_error: float
    readout_error: float
    t1: float   # microseconds
    t2: float   # microseconds
    frequency: float | None = None  # GHz, informational


@dataclass(frozen=True)
class GateDurations:
    """Gate and readout durations in nanoseconds."""

    single_qubit: float = 80.0
    two_qubit: float = 300.0
    readout: float = 1000.0

    def __post_init__(self):
        if min(self.single_qubit, self.two_qubit, self.readout) <= 0:
            raise ValueError("durations must be positive")


@dataclass
class CalibrationTable:
    qubits: dict[int, QubitCalibration]
    pairs: dict[tuple[int, int], float] = field(default_factory=dict)
    fridge_temperature: float | None = None
    name: str = "custom"

    def violations(self) -> list[str]:
        problems = []
        for q, c in sorted(self.qubits.items()):
            for key in ("gate_error", "readout_error"):
                v = getattr(c, key)
                if not 0.0 <= v <= 1.0:
                    problems.append(f"qubit.{q}.{key}={v} is outside [0, 1]")
            for key in ("t1", "t2"):
                v = getattr(c, key)
                if not v > 0:
                    problems.append(f"qubit.{q}.{key}={v} must be positive")
        for (a, b), v in sorted(self.pairs.items()):
            if not 0.0 <= v <= 1.0:
                problems.append(f"pair.{a}.{b}.gate_error={v} is outside [0, 1]")
            if a == b:
                problems.append(f"pair.{a}.{b} couples a qubit to itself")
        return problems

    def warnings(self) -> list[str]:
        return [f"qubit.{q}: T2={c.t2} exceeds 2*T1={2 * c.t1} (unphysical)"
                for q, c in sorted(self.qubits.items()) if c.t2 > 2 * c.t1]

    def qubit(self, q: int) -> QubitCalibration:
        try:
            return self.qubits[q]
        except KeyError:
            raise CalibrationError([f"no calibration for qubit {q}"]) from None

    def two_qubit_error(self, control: int, target: int) -> float:
        """Error of the pair in either direction; the table mean if the pair is absent."""
        for key in ((control, target), (target, control)):
            if key in self.pairs:
                return self.pairs[key]
        if not self.pairs:
            return 0.0
        return float(np.mean(list(self.pairs.values())))

    def scaled(self, s: float) -> "CalibrationTable":
        """Every error probability and decay rate multiplied by ``s``."""
        if s < 0:
            raise ValueError("scale must be non-negative")

        def stretch(t):
            return math.inf if s == 0 else t / s

        qubits = {q: replace(c, gate_error=c.gate_error * s, readout_error=c.readout_error * s,
                             t1=stretch(c.t1), t2=stretch(c.t2))
                  for q, c in self.qubits.items()}
        pairs = {k: v * s for k, v in self.pairs.items()}
        return CalibrationTable(qubits, pairs, self.fridge_temperature, f"{self.name}*{s:g}")

    @classmethod
    def noiseless(cls, n_qubits: int) -> "CalibrationTable":
        return cls({q: QubitCalibration(0.0, 0.0, math.inf, math.inf) for q in range(n_qubits)},
                   name="noiseless")


_QUBIT_KEYS = ("gate_error", "readout_error", "t1", "t2")


def parse_calibration(text: str, name: str = "custom") -> CalibrationTable:
    """Parse the INI-style calibration format (``[qubit.N]``, ``[pair.N.M]``, ``[device]``)."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise CalibrationError([f"unreadable calibration file: {exc}"]) from None
    problems: list[str] = []
    qubits: dict[int, QubitCalibration] = {}
    pairs: dict[tuple[int, int], float] = {}
    fridge = None

    def number(section, key):
        raw = cp[section].get(key)
        if raw is None:
            problems.append(f"{section}.{key} is missing")
            return None
        try:
            return float(raw)
        except ValueError:
            problems.append(f"{section}.{key}={raw!r} is not a number")
            return None

    for section in cp.sections():
        parts = section.split(".")
        if section == "device":
            name = cp[section].get("name", name)
            if "fridge_temperature" in cp[section]:
                fridge = number(section, "fridge_temperature")
        elif parts[0] == "qubit" and len(parts) == 2 and parts[1].isdigit():
            vals = {k: number(section, k) for k in _QUBIT_KEYS}
            freq = number(section, "frequency") if "frequency" in cp[section] else None
            if all(v is not None for v in vals.values()):
                qubits[int(parts[1])] = QubitCalibration(**vals, frequency=freq)
        elif parts[0] == "pair" and len(parts) == 3 and parts[1].isdigit() and parts[2].isdigit():
            v = number(section, "gate_error")
            if v is not None:
                pairs[(int(parts[1]), int(parts[2]))] = v
        else:
            problems.append(f"unknown section [{section}]")
    if not qubits and not problems:
        problems.append("no [qubit.N] sections")
    table = CalibrationTable(qubits, pairs, fridge, name)
    problems += table.violations()
    if problems:
        raise CalibrationError(problems)
    for w in table.warnings():
        log.warning(w)
    return table


def dump_calibration(table: CalibrationTable) -> str:
    lines = ["[device]", f"name = {table.name}"]
    if table.fridge_temperature is not None:
        lines.append(f"fridge_temperature = {table.fridge_temperature!r}")
    for q, c in sorted(table.qubits.items()):
        lines += ["", f"[qubit.{q}]"] + [f"{k} = {getattr(c, k)!r}" for k in _QUBIT_KEYS]
        if c.frequency is not None:
            lines.append(f"frequency = {c.frequency!r}")
    for (a, b), v in sorted(table.pairs.items()):
        lines += ["", f"[pair.{a}.{b}]", f"gate_error = {v!r}"]
    return "\n".join(lines) + "\n"


def presets() -> list[str]:
    folder = resources.files(__package__) / "presets"
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".ini"))


def load_calibration(source: str | Path) -> CalibrationTable:
    """Load a bundled preset by name, or a calibration file by path."""
    if str(source) in presets():
        text = (resources.files(__package__) / "presets" / f"{source}.ini").read_text()
        return parse_calibration(text, name=str(source))
    path = Path(source)
    if not path.is_file():
        raise CalibrationError([f"{source!r} is neither a preset ({', '.join(presets())}) nor a file"])
    return parse_calibration(path.read_text(), name=path.stem)


# ---------------------------------------------------------------------------
# noisy execution
# ---------------------------------------------------------------------------

@dataclass
class NoiseModel:
    calibration: CalibrationTable
    durations: GateDurations = field(default_factory=GateDurations)
    idle_relaxation: bool = False

    def _relax(self, rho: np.ndarray, qubits: Sequence[int], duration_ns: float) -> np.ndarray:
        for q in qubits:
            c = self.calibration.qubit(q)
            if math.isinf(c.t1) and math.isinf(c.t2):
                continue
            # calibration times are in microseconds
            rho = apply_channel(rho, relaxation(c.t1, c.t2, duration_ns * 1e-3), [q])
        return rho

    def after_gate(self, rho: np.ndarray, targets: Sequence[int]) -> np.ndarray:
        targets = list(targets)
        n = int(round(math.log2(rho.shape[0])))
        if len(targets) == 1:
            p = self.calibration.qubit(targets[0]).gate_error
            duration = self.durations.single_qubit
        elif len(targets) == 2:
            p = self.calibration.two_qubit_error(*targets)
            duration = self.durations.two_qubit
        else:
            raise SimulationError("noise is only defined for 1- and 2-qubit gates")
        if p > 0:
            rho = apply_channel(rho, depolarizing(p, len(targets)), targets)
        rho = self._relax(rho, targets, duration)
        if self.idle_relaxation:
            rho = self._relax(rho, [q for q in range(n) if q not in targets], duration)
        return rho

    def before_readout(self, rho: np.ndarray, qubit: int) -> np.ndarray:
        return self._relax(rho, [qubit], self.durations.readout)

    def readout_error(self, qubit: int) -> float:
        return self.calibration.qubit(qubit).readout_error


def _as_model(noise) -> NoiseModel:
    return noise if isinstance(noise, NoiseModel) else NoiseModel(noise)


def run_density(circuit: Circuit, noise, initial_rho: np.ndarray | None = None,
                cutoff: float = 1e-15) -> dict[tuple[int, ...], np.ndarray]:
    """Execute ``circuit`` on density matrices with noise.

    Returns unnormalized density matrices keyed by the full classical record;
    their traces are the record probabilities.  Branches with identical
    records are merged since nothing downstream can tell them apart.
    """
    model = _as_model(noise)
    circuit.validate()
    n = circuit.n_qubits
    if n > MAX_DM_QUBITS:
        raise CapabilityError(f"{n} qubits exceed the density-matrix limit of {MAX_DM_QUBITS}")
    if initial_rho is None:
        rho0 = np.zeros((2**n, 2**n), dtype=complex)
        rho0[0, 0] = 1.0
    else:
        rho0 = np.asarray(initial_rho, dtype=complex)
    branches = {(0,) * circuit.n_cbits: rho0}
    for ins in circuit.instructions:
        nxt: dict[tuple[int, ...], np.ndarray] = {}
        for bits, rho in branches.items():
            if isinstance(ins, Measure):
                rho = model.before_readout(rho, ins.qubit)
                flip = readout_matrix(model.readout_error(ins.qubit))
                for true_bit, reported in itertools.product((0, 1), (0, 1)):
                    w = flip[reported, true_bit]
                    if w == 0:
                        continue
                    part = w * projector_dm(rho, ins.qubit, true_bit)
                    if np.trace(part).real <= cutoff:
                        continue
                    key = list(bits)
                    key[ins.cbit] = reported
                    key = tuple(key)
                    nxt[key] = nxt[key] + part if key in nxt else part
                continue
            if isinstance(ins, Conditional) and bits[ins.cbit] != ins.value:
                nxt[bits] = rho
                continue
            rho = apply_operator_dm(rho, ins.matrix, ins.targets)
            nxt[bits] = model.after_gate(rho, ins.targets)
        branches = nxt
    return branches


def noisy_distribution(circuit: Circuit, noise, cbits: Sequence[int] | None = None,
                       initial_rho: np.ndarray | None = None) -> dict[str, float]:
    cbits = circuit.measured_cbits if cbits is None else list(cbits)
    if not cbits:
        raise SimulationError("circuit measures nothing; declare measured qubits")
    dist: dict[str, float] = {}
    for bits, rho in run_density(circuit, noise, initial_rho).items():
        key = "".join(str(bits[c]) for c in cbits)
        dist[key] = dist.get(key, 0.0) + float(np.trace(rho).real)
    return dist


def final_density(circuit: Circuit, noise, initial_rho: np.ndarray | None = None) -> np.ndarray:
    """Register density matrix averaged over all classical records."""
    return sum(run_density(circuit, noise, initial_rho).values())


def noisy_run(circuit: Circuit, calibration: CalibrationTable, durations: GateDurations | None = None,
              shots: int = 1024, seed=None, cbits: Sequence[int] | None = None,
              idle_relaxation: bool = False, max_shots: int | None = DEFAULT_MAX_SHOTS) -> Histogram:
    """Sampled histogram of ``circuit`` under the calibration's noise."""
    shots = check_shots(shots, max_shots)
    model = NoiseModel(calibration, durations or GateDurations(), idle_relaxation)
    return sample_distribution(noisy_distribution(circuit, model, cbits), shots, seed)
