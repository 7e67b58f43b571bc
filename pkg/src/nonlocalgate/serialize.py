"""JSON/CSV readers and writers for histograms, tomography results and gate files.

Complex matrices are stored as ``{"re": [[...]], "im": [[...]]}``.  Writers
emit deterministic text (sorted keys, fixed float repr) so equal inputs give
byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any

import numpy as np

from .sim import Histogram, is_unitary


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_json(obj) -> np.ndarray:
    """Accepts ``{"re", "im"}`` or a nested list of ``[re, im]`` pairs."""
    if isinstance(obj, dict):
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
        if re.shape != im.shape:
            raise ValueError("re and im parts differ in shape")
        return re + 1j * im
    arr = np.asarray(obj, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError("expected {re, im} or rows of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def read_gate_file(path: str | Path) -> np.ndarray:
    """Load a custom 2x2 gate and check it is unitary."""
    m = matrix_from_json(json.loads(Path(path).read_text()))
    if m.shape != (2, 2):
        raise ValueError(f"custom gate must be 2x2, got {m.shape}")
    if not is_unitary(m):
        raise ValueError("custom gate is not unitary")
    return m


# -- histograms ------------------------------------------------------------

def histogram_to_json(h: Histogram) -> dict:
    return {"shots": h.shots, "counts": dict(sorted(h.counts.items()))}


def histogram_from_json(obj: dict) -> Histogram:
    return Histogram(int(obj["shots"]), {str(k): int(v) for k, v in obj["counts"].items()})


def histogram_to_csv(h: Histogram) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["outcome", "count"])
    for k, v in sorted(h.counts.items()):
        w.writerow([k, v])
    return buf.getvalue()


def histogram_from_csv(text: str) -> Histogram:
    rows = list(csv.DictReader(io.StringIO(text)))
    counts = {r["outcome"]: int(r["count"]) for r in rows}
    return Histogram(sum(counts.values()), counts)


# -- tomography --------------------------------------------------------------

def tomography_to_json(T: np.ndarray, rho: np.ndarray, fidelity: float | None, **extra) -> dict:
    out = {"T": np.asarray(T).tolist(), "rho": matrix_to_json(rho), "fidelity": fidelity}
    out.update(extra)
    return out


def tomography_from_json(obj: dict) -> tuple[np.ndarray, np.ndarray, float | None]:
    return np.asarray(obj["T"], dtype=float), matrix_from_json(obj["rho"]), obj.get("fidelity")


def matrix_to_csv(m: np.ndarray, labels: list[str] | None = None) -> str:
    """Long-form ``row,col,re,im`` dump for bar-chart plotting."""
    m = np.asarray(m, dtype=complex)
    labels = labels or [str(i) for i in range(m.shape[0])]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "col", "re", "im"])
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            w.writerow([labels[i], labels[j], repr(float(m[i, j].real)), repr(float(m[i, j].imag))])
    return buf.getvalue()


def matrix_from_csv(text: str) -> np.ndarray:
    rows = list(csv.DictReader(io.StringIO(text)))
    labels: list[str] = []
    for r in rows:
        if r["row"] not in labels:
            labels.append(r["row"])
    n = len(labels)
    m = np.zeros((n, n), dtype=complex)
    for r in rows:
        m[labels.index(r["row"]), labels.index(r["col"])] = float(r["re"]) + 1j * float(r["im"])
    return m


def process_to_json(chi: np.ndarray, process_fidelity: float | None,
                    avg_gate_fidelity: float | None, **extra) -> dict:
    out = {
        "chi": matrix_to_json(chi),
        "trace": float(np.trace(chi).real),
        "process_fidelity": process_fidelity,
        "avg_gate_fidelity": avg_gate_fidelity,
    }
    out.update(extra)
    return out


def process_from_json(obj: dict) -> tuple[np.ndarray, float | None, float | None]:
    return matrix_from_json(obj["chi"]), obj.get("process_fidelity"), obj.get("avg_gate_fidelity")


def load_tomography_job(path: str | Path) -> dict:
    """Read a job file ``{"settings": [{"basis": "XZ", "shots": 8192}, ...]}``.

    Returns ``{setting: shots}``.
    """
    obj = json.loads(Path(path).read_text())
    job = {}
    for item in obj["settings"]:
        basis = str(item["basis"]).upper()
        if basis in job:
            raise ValueError(f"setting {basis} listed twice")
        job[basis] = int(item["shots"])
    return job
