import json

import numpy as np
import pytest

from nonlocalgate import serialize
from nonlocalgate.sim import Histogram


def test_histogram_json_round_trip():
    h = Histogram(10, {"11": 3, "00": 7})
    text = serialize.dumps(serialize.histogram_to_json(h))
    assert serialize.histogram_from_json(json.loads(text)) == h
    assert text.index('"00"') < text.index('"11"')


def test_histogram_csv_round_trip():
    h = Histogram(5, {"0": 2, "1": 3})
    assert serialize.histogram_from_csv(serialize.histogram_to_csv(h)) == h


def test_matrix_json_forms(rng):
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    np.testing.assert_array_equal(serialize.matrix_from_json(serialize.matrix_to_json(m)), m)
    pairs = [[[1, 0], [0, 0]], [[0, 0], [0, -1]]]
    np.testing.assert_array_equal(serialize.matrix_from_json(pairs), np.diag([1, -1j]))


def test_matrix_csv_round_trip(rng):
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    np.testing.assert_array_equal(serialize.matrix_from_csv(serialize.matrix_to_csv(m, list("abcd"))), m)


def test_gate_file_checks(tmp_path):
    good = tmp_path / "h.json"
    good.write_text(json.dumps({"re": [[0.6, 0.8], [0.8, -0.6]], "im": [[0, 0], [0, 0]]}))
    np.testing.assert_allclose(serialize.read_gate_file(good), [[0.6, 0.8], [0.8, -0.6]])
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"re": [[1, 1], [0, 1]]}))
    with pytest.raises(ValueError, match="unitary"):
        serialize.read_gate_file(bad)
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"re": np.eye(4).tolist()}))
    with pytest.raises(ValueError, match="2x2"):
        serialize.read_gate_file(wrong)


def test_tomography_and_process_round_trip():
    T = np.arange(16.0).reshape(4, 4)
    rho = np.eye(4) / 4
    T2, rho2, f = serialize.tomography_from_json(json.loads(serialize.dumps(serialize.tomography_to_json(T, rho, 0.5))))
    np.testing.assert_array_equal(T2, T)
    np.testing.assert_array_equal(rho2, rho)
    assert f == 0.5
    chi, fp, fa = serialize.process_from_json(serialize.process_to_json(np.eye(16) / 16, 0.1, 0.28))
    assert (fp, fa) == (0.1, 0.28) and chi.shape == (16, 16)


def test_tomography_job(tmp_path):
    job = tmp_path / "job.json"
    job.write_text(json.dumps({"settings": [{"basis": "xz", "shots": 100}, {"basis": "ZZ", "shots": 50}]}))
    assert serialize.load_tomography_job(job) == {"XZ": 100, "ZZ": 50}
    job.write_text(json.dumps({"settings": [{"basis": "ZZ", "shots": 1}, {"basis": "zz", "shots": 2}]}))
    with pytest.raises(ValueError):
        serialize.load_tomography_job(job)
