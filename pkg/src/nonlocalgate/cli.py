"""Command-line front end.

    nonlocalgate run cnot --shots 8192 --repeats 10 --noise off
    nonlocalgate tomo ch --analytic
    nonlocalgate ptomo cnot --noise ibmqx2-paper
    nonlocalgate calib show ibmqx2-paper

Exit codes: 0 success, 1 simulation failure, 2 usage or validation error.
JSON results are always written; ``--format csv`` adds plot-ready CSV files.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import gates, process_tomo, serialize, state_tomo
from .noise import (
    CalibrationError, CalibrationTable, GateDurations, NoiseModel, load_calibration, noisy_run, presets,
)
from .protocol import RegisterLayout, direct_controlled, prepared_inputs, protocol_circuit, run_eisert
from .sim import DEFAULT_MAX_SHOTS, SimulationError, sample_histogram, spawn_seeds

OUT_ENV = "NONLOCALGATE_OUT"
OUTCOMES = ["00", "01", "10", "11"]

# Hardware values measured on ibmqx2, printed next to simulated results for comparison.
HARDWARE_REFERENCE = {
    "state_fidelity": {"cnot": 0.879, "ch": 0.831},
    "process_fidelity": {"cnot": 0.536, "ch": 0.554},
    "statistical_fidelity": {"cnot": 0.995, "ch": 0.998},
}


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    gate: str
    u: np.ndarray
    shots: int
    repeats: int
    seed: int
    noise: NoiseModel | None
    noise_label: str
    layout: RegisterLayout
    out: Path
    fmt: str
    max_shots: int | None


def _durations(text: str | None) -> GateDurations:
    if not text:
        return GateDurations()
    try:
        single, two, readout = (float(x) for x in text.split(","))
    except ValueError:
        raise UsageError("--durations takes three numbers: single,two,readout (ns)") from None
    return GateDurations(single, two, readout)


def _config(args) -> ExperimentConfig:
    gate = args.gate.lower()
    if gate == "custom":
        if not args.matrix:
            raise UsageError("gate 'custom' needs --matrix FILE")
        u = serialize.read_gate_file(args.matrix)
    else:
        u = {"cnot": gates.X, "ch": gates.H, "cz": gates.Z}[gate]
    if args.shots < 1:
        raise UsageError("--shots must be >= 1")
    if getattr(args, "repeats", 1) < 1:
        raise UsageError("--repeats must be >= 1")
    max_shots = None if args.no_shot_cap else DEFAULT_MAX_SHOTS
    if max_shots is not None and args.shots > max_shots:
        raise UsageError(f"--shots above {max_shots} needs --no-shot-cap")
    layout = RegisterLayout.parse(args.layout)
    durations = _durations(args.durations)
    noise, label = None, "off"
    if args.noise and args.noise.lower() != "off":
        cal = load_calibration(args.noise)
        missing = [q for q in (layout.A, layout.a, layout.b, layout.B) if q not in cal.qubits]
        if missing:
            raise CalibrationError([f"calibration has no entry for layout qubit(s) {missing}"])
        noise = NoiseModel(cal, durations, args.idle_relaxation)
        label = cal.name
    out = Path(args.out or os.environ.get(OUT_ENV, "."))
    return ExperimentConfig(gate, u, args.shots, getattr(args, "repeats", 1), args.seed, noise, label,
                            layout, out, args.format, max_shots)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def theory_probabilities(u: np.ndarray) -> dict[str, float]:
    a, b = prepared_inputs()
    amps = direct_controlled(a, b, u)
    return {k: float(abs(x) ** 2) for k, x in zip(OUTCOMES, amps)}


def _target_state(u: np.ndarray) -> np.ndarray:
    a, b = prepared_inputs()
    return direct_controlled(a, b, u)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_run(cfg: ExperimentConfig, transcript: bool = False) -> dict:
    circ = protocol_circuit(cfg.u, cfg.layout)
    theory = theory_probabilities(cfg.u)
    stem = f"run_{cfg.gate}"
    freqs, fids, files = [], [], []
    for k, ss in enumerate(spawn_seeds(cfg.seed, cfg.repeats)):
        if cfg.noise is None:
            h = sample_histogram(circ, cfg.shots, ss, cbits=[2, 3], max_shots=cfg.max_shots)
        else:
            h = noisy_run(circ, cfg.noise.calibration, cfg.noise.durations, cfg.shots, ss, cbits=[2, 3],
                          idle_relaxation=cfg.noise.idle_relaxation, max_shots=cfg.max_shots)
        p = h.probabilities(2)
        freqs.append([p[o] for o in OUTCOMES])
        fids.append(state_tomo.statistical_fidelity(p, theory))
        name = f"{stem}_repeat{k:02d}"
        _write(cfg.out / f"{name}.json", serialize.dumps(serialize.histogram_to_json(h)))
        files.append(f"{name}.json")
        if cfg.fmt == "csv":
            _write(cfg.out / f"{name}.csv", serialize.histogram_to_csv(h))
    freqs = np.array(freqs)
    ddof = 1 if cfg.repeats > 1 else 0
    mean, sigma = freqs.mean(axis=0), freqs.std(axis=0, ddof=ddof)
    summary = {
        "command": "run", "gate": cfg.gate, "shots": cfg.shots, "repeats": cfg.repeats, "seed": cfg.seed,
        "noise": cfg.noise_label,
        "ideal": theory,
        "run_mean": dict(zip(OUTCOMES, mean.tolist())),
        "run_sigma": dict(zip(OUTCOMES, sigma.tolist())),
        "statistical_fidelity": {"values": fids, "mean": float(np.mean(fids)),
                                 "sigma": float(np.std(fids, ddof=ddof))},
        "histograms": files,
    }
    ref = HARDWARE_REFERENCE["statistical_fidelity"].get(cfg.gate)
    if ref is not None:
        summary["hardware_reference"] = ref
    _write(cfg.out / f"{stem}_summary.json", serialize.dumps(summary))
    if cfg.fmt == "csv":
        lines = ["outcome,theory,mean,sigma"]
        lines += [f"{o},{theory[o]!r},{m!r},{s!r}" for o, m, s in zip(OUTCOMES, mean.tolist(), sigma.tolist())]
        _write(cfg.out / f"{stem}_summary.csv", "\n".join(lines) + "\n")
    if transcript:
        a, b = prepared_inputs()
        _, tr = run_eisert(a, b, cfg.u, seed=cfg.seed, noise=cfg.noise, layout=cfg.layout)
        _write(cfg.out / f"{stem}_transcript.json", tr.to_json() + "\n")
    print(f"run {cfg.gate}: noise={cfg.noise_label} shots={cfg.shots} repeats={cfg.repeats}")
    for o, m, s in zip(OUTCOMES, mean, sigma):
        print(f"  {o}: ideal {theory[o]:.4f}  run {m:.4f} +/- {s:.4f}")
    print(f"  F_s = {np.mean(fids):.4f} +/- {np.std(fids, ddof=ddof):.4f}")
    return summary


def cmd_tomo(cfg: ExperimentConfig, analytic: bool, project: bool, job: dict | None = None) -> dict:
    lay = cfg.layout
    circ = protocol_circuit(cfg.u, lay, measure_outputs=False)
    target = _target_state(cfg.u)
    shots = None if analytic else (job or cfg.shots)
    repeats = 1 if analytic else cfg.repeats
    results, fids = [], []
    for ss in spawn_seeds(cfg.seed, repeats):
        res = state_tomo.state_tomography(circ, [lay.A, lay.B], shots, ss, cfg.noise, cfg.max_shots)
        rho = state_tomo.project_physical(res.rho) if project else res.rho
        results.append((res, rho))
        fids.append(state_tomo.state_fidelity(target, rho))
    res, rho = results[0]
    out = serialize.tomography_to_json(
        res.T, rho, fids[0],
        gate=cfg.gate, mode="analytic" if analytic else "sampled", noise=cfg.noise_label,
        shots=None if analytic else cfg.shots, seed=cfg.seed, projected=project,
        physical=bool(np.linalg.eigvalsh(res.rho).min() >= -1e-8),
        fidelities=fids, median_fidelity=float(np.median(fids)),
        target=serialize.matrix_to_json(np.outer(target, target.conj())),
    )
    ref = HARDWARE_REFERENCE["state_fidelity"].get(cfg.gate)
    if ref is not None:
        out["hardware_reference"] = ref
    stem = f"tomo_{cfg.gate}"
    _write(cfg.out / f"{stem}.json", serialize.dumps(out))
    if cfg.fmt == "csv":
        _write(cfg.out / f"{stem}_rho.csv", serialize.matrix_to_csv(rho, OUTCOMES))
        _write(cfg.out / f"{stem}_T.csv", serialize.matrix_to_csv(res.T, list(state_tomo.PAULI_LABELS)))
    print(f"tomo {cfg.gate}: fidelity {fids[0]:.6f} (median over {len(fids)}: {np.median(fids):.6f})"
          + ("" if ref is None else f"; ibmqx2 hardware: {ref}"))
    return out


def cmd_ptomo(cfg: ExperimentConfig, analytic: bool, against: str) -> dict:
    lay = cfg.layout
    circ = protocol_circuit(cfg.u, lay, prepare=False, measure_outputs=False)
    res = process_tomo.process_tomography(circ, "analytic" if analytic else "sampled", cfg.shots,
                                          cfg.seed, (lay.A, lay.B), cfg.noise, cfg.max_shots)
    ref_u = gates.controlled(cfg.u) if against == "target" else np.eye(4)
    chi_t = process_tomo.chi_of_unitary(ref_u)
    fp = process_tomo.process_fidelity(chi_t, res.chi)
    favg = process_tomo.average_gate_fidelity(min(max(fp, 0.0), 1.0))
    out = serialize.process_to_json(
        res.chi, fp, favg, gate=cfg.gate, against=against, noise=cfg.noise_label,
        mode="analytic" if analytic else "sampled", shots=None if analytic else cfg.shots, seed=cfg.seed,
        operator_basis=process_tomo.OPERATOR_LABELS,
    )
    ref = HARDWARE_REFERENCE["process_fidelity"].get(cfg.gate)
    if ref is not None:
        out["hardware_reference"] = ref
    stem = f"ptomo_{cfg.gate}"
    _write(cfg.out / f"{stem}.json", serialize.dumps(out))
    if cfg.fmt == "csv":
        _write(cfg.out / f"{stem}_chi.csv", serialize.matrix_to_csv(res.chi, process_tomo.OPERATOR_LABELS))
    print(f"ptomo {cfg.gate}: F_p = {fp:.6f} (vs {against}), F_avg = {favg:.6f}, Tr(chi) = {res.trace:.6f}"
          + ("" if ref is None else f"; ibmqx2 hardware F_p: {ref}"))
    return out


def format_calibration(table: CalibrationTable) -> str:
    lines = [f"calibration: {table.name}"]
    if table.fridge_temperature is not None:
        lines.append(f"fridge temperature: {table.fridge_temperature} K")
    lines.append(f"{'qubit':>5} {'gate err':>10} {'readout':>9} {'T1 (us)':>8} {'T2 (us)':>8} {'f (GHz)':>8}")
    for q, c in sorted(table.qubits.items()):
        freq = "-" if c.frequency is None else f"{c.frequency:g}"
        lines.append(f"{'Q' + str(q):>5} {c.gate_error:>10.3g} {c.readout_error:>9.3g} "
                     f"{c.t1:>8g} {c.t2:>8g} {freq:>8}")
    for (a, b), v in sorted(table.pairs.items()):
        lines.append(f"  CX{a}{b}: {v:g}")
    return "\n".join(lines)


def cmd_calib(args) -> int:
    if args.action == "list":
        for name in presets():
            print(name)
        return 0
    if args.action == "show":
        print(format_calibration(load_calibration(args.source)))
        return 0
    try:
        table = load_calibration(args.source)
    except CalibrationError as exc:
        print(f"{args.source}: INVALID", file=sys.stderr)
        for p in exc.problems:
            print(f"  - {p}", file=sys.stderr)
        return 2
    for w in table.warnings():
        print(f"warning: {w}")
    print(f"{args.source}: OK")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _experiment_args(p: argparse.ArgumentParser, repeats_default: int) -> None:
    p.add_argument("gate", choices=["cnot", "ch", "cz", "custom"], type=str.lower)
    p.add_argument("--matrix", help="JSON file with a 2x2 unitary for gate 'custom'")
    p.add_argument("--shots", type=int, default=8192)
    p.add_argument("--repeats", type=int, default=repeats_default)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", "--calibration", dest="noise", default="off",
                   help="'off', a preset name, or a calibration file")
    p.add_argument("--durations", help="gate durations in ns: single,two,readout (default 80,300,1000)")
    p.add_argument("--idle-relaxation", action="store_true", help="let idle qubits decay during gates")
    p.add_argument("--layout", default="A=0,a=1,b=2,B=3")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--no-shot-cap", action="store_true", help=f"allow more than {DEFAULT_MAX_SHOTS} shots")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonlocalgate", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="sample the non-local gate on the prepared inputs")
    _experiment_args(p, repeats_default=10)
    p.add_argument("--transcript", action="store_true", help="also write one protocol transcript")

    p = sub.add_parser("tomo", help="state tomography of the non-local gate's output")
    _experiment_args(p, repeats_default=1)
    p.add_argument("--analytic", action="store_true", help="use exact probabilities")
    p.add_argument("--project", action="store_true", help="repair non-physical reconstructions")
    p.add_argument("--job", help="tomography job file with per-setting shot counts")

    p = sub.add_parser("ptomo", help="process tomography of the non-local gate")
    _experiment_args(p, repeats_default=1)
    p.add_argument("--analytic", action="store_true", help="use exact probabilities")
    p.add_argument("--against", choices=["target", "identity"], default="target",
                   help="ideal process to compare with")

    p = sub.add_parser("calib", help="list, show or validate calibration tables")
    p.add_argument("action", choices=["list", "show", "validate"])
    p.add_argument("source", nargs="?", default="ibmqx2-paper")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "calib":
            return cmd_calib(args)
        cfg = _config(args)
        job = serialize.load_tomography_job(args.job) if getattr(args, "job", None) else None
    except (UsageError, CalibrationError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "run":
            cmd_run(cfg, args.transcript)
        elif args.command == "tomo":
            cmd_tomo(cfg, args.analytic, args.project, job)
        else:
            cmd_ptomo(cfg, args.analytic, args.against)
    except (SimulationError, ValueError, np.linalg.LinAlgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
