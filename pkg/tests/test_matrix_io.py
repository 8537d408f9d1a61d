import time

import numpy as np
import pandas as pd
import pytest

from gsca import DataError
from gsca.matrix_io import (MANIFEST_NAME, MatrixFile, append_rows_csv, file_digest, load_coupled,
                            load_truth, read_json, read_matrix_csv, write_json, write_manifest,
                            write_matrix_csv, write_table, write_truth)


def _write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestMatrixCsv:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        values = rng.normal(size=(6, 4)) * 10.0 ** rng.integers(-8, 8, size=(6, 4))
        values[2, 1] = np.nan
        path = tmp_path / "m.csv"
        write_matrix_csv(path, values)
        back = read_matrix_csv(path)
        assert np.isnan(back[2, 1])
        mask = ~np.isnan(values)
        assert np.array_equal(back[mask], values[mask])

    def test_missing_is_written_as_NA(self, tmp_path):
        path = tmp_path / "m.csv"
        write_matrix_csv(path, [[1.0, np.nan]], columns=["a", "b"])
        assert path.read_text(encoding="utf-8").splitlines() == ["a,b", "1,NA"]

    def test_column_names(self, tmp_path):
        path = tmp_path / "m.csv"
        write_matrix_csv(path, np.zeros((2, 3)), prefix="PC")
        assert MatrixFile.read(path).columns == ["PC1", "PC2", "PC3"]

    def test_cells_are_stripped(self, tmp_path):
        path = _write_text(tmp_path / "m.csv", "a,b\n 1 , NA\n0,1\n")
        back = read_matrix_csv(path, binary=True)
        assert back[0, 0] == 1.0 and np.isnan(back[0, 1])

    def test_binary_rejects_other_values(self, tmp_path):
        path = _write_text(tmp_path / "m.csv", "a,b\n1,2\n0,1\n")
        with pytest.raises(DataError, match="binary"):
            read_matrix_csv(path, binary=True)

    def test_non_numeric_cell(self, tmp_path):
        path = _write_text(tmp_path / "m.csv", "a,b\n1,x\n0,1\n")
        with pytest.raises(DataError, match="non-numeric"):
            read_matrix_csv(path)

    def test_nan_literal_is_rejected(self, tmp_path):
        path = _write_text(tmp_path / "m.csv", "a,b\n1,nan\n0,1\n")
        with pytest.raises(DataError, match="NaN"):
            read_matrix_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="no such file"):
            read_matrix_csv(tmp_path / "absent.csv")

    def test_empty_file(self, tmp_path):
        path = _write_text(tmp_path / "m.csv", "")
        with pytest.raises(DataError):
            read_matrix_csv(path)


class TestLoadCoupled:
    def test_loads_both_blocks(self, tmp_path):
        x1 = _write_text(tmp_path / "X1.csv", "g1,g2\n1,0\nNA,1\n0,0\n")
        x2 = _write_text(tmp_path / "X2.csv", "e1\n0.5\n-1.5\nNA\n")
        data, cols1, cols2 = load_coupled(x1, x2)
        assert (data.I, data.J1, data.J2) == (3, 2, 1)
        assert cols1 == ["g1", "g2"] and cols2 == ["e1"]
        assert not data.Q1[1, 0] and not data.Q2[2, 0]
        assert data.n_observed == 7

    def test_row_mismatch(self, tmp_path):
        x1 = _write_text(tmp_path / "X1.csv", "g1\n1\n0\n")
        x2 = _write_text(tmp_path / "X2.csv", "e1\n0.5\n1.0\n2.0\n")
        with pytest.raises(DataError, match="rows"):
            load_coupled(x1, x2)


class TestJson:
    def test_non_finite_values_become_null(self, tmp_path):
        path = tmp_path / "a.json"
        write_json(path, {"x": np.float64(np.inf), "y": np.arange(3), "z": np.bool_(True)})
        assert read_json(path) == {"x": None, "y": [0, 1, 2], "z": True}

    def test_invalid_json(self, tmp_path):
        path = _write_text(tmp_path / "a.json", "{")
        with pytest.raises(DataError, match="invalid JSON"):
            read_json(path)


class TestTables:
    def test_append_writes_header_once(self, tmp_path):
        path = tmp_path / "log.csv"
        append_rows_csv(path, [{"a": 1, "b": 2.5}])
        append_rows_csv(path, [{"a": 2, "b": 3.5}, {"a": 3, "b": 4.5}])
        append_rows_csv(path, [])
        frame = pd.read_csv(path)
        assert frame["a"].tolist() == [1, 2, 3]

    def test_write_table_with_excel(self, tmp_path):
        frame = pd.DataFrame({"lambda": [1.0, 2.0], "rank": [3, 1]})
        path = tmp_path / "table.csv"
        write_table(frame, path, excel=True)
        pd.testing.assert_frame_equal(pd.read_csv(path), frame)
        back = pd.read_excel(tmp_path / "table.xlsx", engine="openpyxl")
        pd.testing.assert_frame_equal(back, frame)


class TestManifest:
    def test_records_inputs_and_outputs(self, tmp_path):
        data_file = _write_text(tmp_path / "X1.csv", "a\n1\n")
        manifest = write_manifest(tmp_path, "fit", {"lam": 1.5}, 3, [data_file],
                                  time.time(), outputs=[tmp_path / "fit.json"])
        assert manifest.inputs[str(data_file)] == file_digest(data_file)
        payload = read_json(tmp_path / MANIFEST_NAME)
        assert payload["command"] == "fit"
        assert payload["seed"] == 3
        assert payload["params"] == {"lam": 1.5}
        assert payload["elapsed_seconds"] >= 0.0

    def test_digest_changes_with_content(self, tmp_path):
        a = _write_text(tmp_path / "a.csv", "x\n1\n")
        b = _write_text(tmp_path / "b.csv", "x\n2\n")
        assert file_digest(a) != file_digest(b)
        assert len(file_digest(a)) == 64


class TestTruth:
    def test_write_and_load(self, small_truth, tmp_path):
        written = write_truth(small_truth, tmp_path)
        assert tmp_path / "truth.json" in written
        back = load_truth(tmp_path)
        np.testing.assert_array_equal(back.X1, small_truth.X1)
        np.testing.assert_array_equal(back.X2, small_truth.X2)
        np.testing.assert_array_equal(back.Z, small_truth.Z)
        np.testing.assert_array_equal(back.mu, small_truth.mu)
        assert back.params == small_truth.params
        assert back.c1 == small_truth.c1

    def test_missing_truth(self, tmp_path):
        with pytest.raises(DataError):
            load_truth(tmp_path)
