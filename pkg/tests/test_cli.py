import json
import subprocess
import sys

import pytest

from nonlocalgate import cli
from nonlocalgate.serialize import histogram_from_json, matrix_from_json


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_run_writes_histograms_and_summary(tmp_path, capsys):
    assert run("run", "cnot", "--shots", 500, "--repeats", 3, "--out", tmp_path, "--format", "csv") == 0
    summary = json.loads((tmp_path / "run_cnot_summary.json").read_text())
    assert summary["repeats"] == 3 and len(summary["histograms"]) == 3
    h = histogram_from_json(json.loads((tmp_path / "run_cnot_repeat00.json").read_text()))
    assert h.shots == 500
    assert (tmp_path / "run_cnot_summary.csv").read_text().startswith("outcome,theory,mean,sigma")
    assert "F_s" in capsys.readouterr().out


def test_run_transcript(tmp_path):
    assert run("run", "ch", "--shots", 10, "--repeats", 1, "--out", tmp_path, "--transcript") == 0
    events = json.loads((tmp_path / "run_ch_transcript.json").read_text())
    assert [e["kind"] for e in events].count("Sent") == 2


def test_out_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path))
    assert run("tomo", "cz", "--analytic") == 0
    assert (tmp_path / "tomo_cz.json").exists()


def test_tomo_analytic_is_perfect(tmp_path):
    assert run("tomo", "ch", "--analytic", "--out", tmp_path, "--format", "csv") == 0
    out = json.loads((tmp_path / "tomo_ch.json").read_text())
    assert out["fidelity"] == pytest.approx(1, abs=1e-9)
    assert (tmp_path / "tomo_ch_rho.csv").exists()


def test_tomo_job_file(tmp_path):
    job = tmp_path / "job.json"
    job.write_text(json.dumps({"settings": [{"basis": a + b, "shots": 300} for a in "XYZ" for b in "XYZ"]}))
    assert run("tomo", "cnot", "--job", job, "--out", tmp_path) == 0


def test_ptomo_against_identity(tmp_path):
    assert run("ptomo", "cnot", "--analytic", "--against", "identity", "--out", tmp_path) == 0
    out = json.loads((tmp_path / "ptomo_cnot.json").read_text())
    assert out["process_fidelity"] == pytest.approx(0.25, abs=1e-9)
    assert out["avg_gate_fidelity"] == pytest.approx(0.4, abs=1e-9)
    assert matrix_from_json(out["chi"]).shape == (16, 16)


def test_custom_matrix(tmp_path):
    m = tmp_path / "u.json"
    m.write_text(json.dumps({"re": [[0, 1], [1, 0]], "im": [[0, 0], [0, 0]]}))
    assert run("ptomo", "custom", "--matrix", m, "--analytic", "--out", tmp_path) == 0
    out = json.loads((tmp_path / "ptomo_custom.json").read_text())
    assert out["process_fidelity"] == pytest.approx(1, abs=1e-9)


@pytest.mark.parametrize("argv", [
    ["run", "cnot", "--shots", "0"],
    ["run", "cnot", "--shots", "9000"],
    ["run", "custom"],
    ["run", "cnot", "--noise", "nowhere.ini"],
    ["run", "cnot", "--layout", "A=0,a=0,b=1,B=2"],
    ["run", "cnot", "--durations", "1,2"],
])
def test_bad_configuration_exits_2(argv, tmp_path):
    assert run(*argv, "--out", tmp_path) == 2


def test_unknown_gate_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        run("run", "swap")
    assert exc.value.code == 2


def test_no_shot_cap(tmp_path):
    assert run("run", "cz", "--shots", 9000, "--repeats", 1, "--no-shot-cap", "--out", tmp_path) == 0


def test_calib_commands(capsys):
    assert run("calib", "list") == 0
    assert "ibmqx2-paper" in capsys.readouterr().out
    assert run("calib", "show", "ibmqx2-paper") == 0
    assert "62.4" in capsys.readouterr().out
    assert run("calib", "validate", "ibmqx2-paper") == 0


def test_calib_validate_rejects_bad_t1(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[qubit.0]\ngate_error = 0.001\nreadout_error = 0.02\nt1 = 0\nt2 = 10\n")
    assert run("calib", "validate", bad) == 2
    assert "t1" in capsys.readouterr().err


def test_noisy_run_uses_calibration(tmp_path):
    assert run("run", "cnot", "--shots", 2000, "--repeats", 2, "--noise", "ibmqx2-paper", "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "run_cnot_summary.json").read_text())
    assert summary["noise"] == "ibmqx2-paper"
    assert summary["statistical_fidelity"]["mean"] < 1


def test_same_seed_gives_identical_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run("run", "ch", "--shots", 300, "--repeats", 2, "--seed", 5, "--out", d, "--format", "csv") == 0
        assert run("tomo", "ch", "--shots", 300, "--seed", 5, "--out", d) == 0
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nonlocalgate", "calib", "list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "ibmqx2-paper" in proc.stdout
