import json

import numpy as np

from arrayg2 import io, square_array


def test_digest_is_canonical():
    a = {"b": 1, "a": [1.0, 2]}
    b = {"a": [1.0, 2], "b": 1}
    assert io.config_digest(a) == io.config_digest(b)
    assert io.config_digest(a) != io.config_digest({"b": 2, "a": [1.0, 2]})


def test_csv_round_trip(tmp_path):
    prov = io.make_provenance({"x": 1}, "test")
    rows = [(0, 0.1, -1e-300), (1, np.float64(2.5), 3.0)]
    path = io.write_table(tmp_path / "t", ["i", "u", "v"], rows, prov)
    p, cols, data = io.read_csv(path)
    assert p == prov and cols == ["i", "u", "v"]
    np.testing.assert_array_equal(data, np.array(rows, dtype=float))


def test_json_table_and_non_finite(tmp_path):
    prov = io.make_provenance({}, "test")
    path = io.write_table(tmp_path / "t", ["a"], [(float("inf"),)], prov, fmt="json")
    data = json.loads(path.read_text())
    assert data["rows"] == [{"a": "inf"}]


def test_spectrum_table_without_constants():
    cols, rows = io.spectrum_table(square_array().spectrum)
    assert len(rows) == 4 and np.isnan(rows[0][4])
