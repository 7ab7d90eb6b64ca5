import numpy as np
import pytest

from otselect.features import (
    EvfFormatError,
    FeatureError,
    FeatureMatrix,
    ProjectionSpec,
    RawFeatureMatrix,
    normalize_rows,
    project,
    read_csv,
    read_evf,
    read_features,
    write_evf,
)


class TestNormalizeRows:
    def test_three_four_five(self):
        out = normalize_rows(RawFeatureMatrix(np.array([[3.0, 4.0]])))
        np.testing.assert_allclose(out.data, [[0.6, 0.8]], atol=1e-15)

    def test_unit_row_unchanged(self):
        row = np.array([[1.0, 0.0, 0.0]])
        out = normalize_rows(RawFeatureMatrix(row))
        np.testing.assert_array_equal(out.data, row)

    def test_random_rows_unit_norm(self, rng):
        data = rng.standard_normal((5, 7))
        out = normalize_rows(RawFeatureMatrix(data))
        np.testing.assert_allclose(np.linalg.norm(out.data, axis=1), 1.0, atol=1e-12)

    def test_zero_row_reports_index(self):
        data = np.ones((4, 3))
        data[2] = 0.0
        with pytest.raises(FeatureError, match="row 2"):
            normalize_rows(RawFeatureMatrix(data))


class TestProject:
    def test_identity_mode_returns_input(self, rng):
        exact = np.eye(4)[:3]
        spec = ProjectionSpec(d_in=4, d_out=4, sparsity=1.0, identity=True)
        np.testing.assert_array_equal(project(RawFeatureMatrix(exact), spec).data, exact)

        data = rng.standard_normal((3, 6))
        data /= np.linalg.norm(data, axis=1)[:, None]
        spec = ProjectionSpec(d_in=6, d_out=6, sparsity=1.0, identity=True)
        out = project(RawFeatureMatrix(data), spec)
        np.testing.assert_allclose(out.data, data, atol=1e-15)

    def test_identical_rows_identical_outputs(self, rng):
        row = rng.standard_normal(40)
        raw = RawFeatureMatrix(np.vstack([row, row]))
        out = project(raw, ProjectionSpec(d_in=40, d_out=16, seed=5))
        np.testing.assert_array_equal(out.data[0], out.data[1])

    def test_deterministic_across_runs(self, rng):
        raw = RawFeatureMatrix(rng.standard_normal((8, 64)))
        spec = ProjectionSpec(d_in=64, d_out=32, seed=123)
        a = project(raw, spec)
        b = project(raw, spec)
        np.testing.assert_array_equal(a.data, b.data)
        other = project(raw, ProjectionSpec(d_in=64, d_out=32, seed=124))
        assert not np.array_equal(a.data, other.data)

    def test_unit_norm_contract(self, rng):
        raw = RawFeatureMatrix(rng.standard_normal((20, 100)))
        out = project(raw, ProjectionSpec(d_in=100, d_out=24, seed=3))
        assert np.max(np.abs(np.linalg.norm(out.data, axis=1) - 1.0)) <= 1e-6

    def test_dimension_mismatch(self, rng):
        raw = RawFeatureMatrix(rng.standard_normal((2, 5)))
        with pytest.raises(FeatureError, match="d_in"):
            project(raw, ProjectionSpec(d_in=6, d_out=4))

    def test_distance_preservation(self):
        # Pairwise sphere distances before and after sketching, compared by
        # brute force over all pairs of the fixture.
        rng = np.random.default_rng(77)
        n, d_in, d_out = 100, 10000, 256
        raw_data = rng.standard_normal((n, d_in))
        normalized = raw_data / np.linalg.norm(raw_data, axis=1)[:, None]
        original_sq = 2.0 - 2.0 * (normalized @ normalized.T)

        spec = ProjectionSpec(d_in=d_in, d_out=d_out, sparsity=1.0 / np.sqrt(d_out), seed=9)
        proj = project(RawFeatureMatrix(raw_data), spec).data
        projected_sq = 2.0 - 2.0 * (proj @ proj.T)

        iu = np.triu_indices(n, k=1)
        ratio = projected_sq[iu] / original_sq[iu]
        frac = np.mean((ratio >= 0.7) & (ratio <= 1.3))
        assert frac >= 0.9


class TestEvf:
    def test_round_trip_bit_exact(self, rng, tmp_path):
        data = rng.standard_normal((6, 5)).astype(np.float32)
        data /= np.linalg.norm(data, axis=1)[:, None]
        m = FeatureMatrix(data.astype(np.float32).astype(np.float64))
        path = str(tmp_path / "m.evf")
        write_evf(m, path)
        back = read_evf(path)
        np.testing.assert_array_equal(back.data, m.data)

    def test_round_trip_is_f32_quantization(self, rng, tmp_path):
        data = rng.standard_normal((4, 9))
        m = normalize_rows(RawFeatureMatrix(data))
        path = str(tmp_path / "m.evf")
        write_evf(m, path)
        back = read_evf(path)
        np.testing.assert_array_equal(back.data, m.data.astype(np.float32).astype(np.float64))

    def test_ids_round_trip(self, tmp_path):
        m = FeatureMatrix(np.eye(3), ids=["a", "b", "longer-id"])
        path = str(tmp_path / "ids.evf")
        write_evf(m, path)
        back = read_evf(path)
        assert back.ids == ["a", "b", "longer-id"]

    def test_file_size_arithmetic(self, tmp_path):
        # header(4) + version(4) + n(4) + d(4) + 6 f32 values(24), no trailer
        m = FeatureMatrix(np.hstack([np.eye(2), np.zeros((2, 1))]))
        path = str(tmp_path / "size.evf")
        write_evf(m, path)
        assert (tmp_path / "size.evf").stat().st_size == 4 + 4 + 4 + 4 + 24

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.evf"
        path.write_bytes(b"XXXX" + b"\0" * 20)
        with pytest.raises(EvfFormatError, match="magic"):
            read_evf(str(path))

    def test_bad_version(self, tmp_path):
        good = tmp_path / "good.evf"
        write_evf(FeatureMatrix(np.eye(2)), str(good))
        blob = bytearray(good.read_bytes())
        blob[4] = 9
        bad = tmp_path / "bad.evf"
        bad.write_bytes(bytes(blob))
        with pytest.raises(EvfFormatError, match="version"):
            read_evf(str(bad))

    def test_truncated(self, tmp_path):
        good = tmp_path / "good.evf"
        write_evf(FeatureMatrix(np.eye(4)), str(good))
        trunc = tmp_path / "trunc.evf"
        trunc.write_bytes(good.read_bytes()[:-8])
        with pytest.raises(EvfFormatError, match="truncated"):
            read_evf(str(trunc))

    def test_nonfinite_payload(self, tmp_path):
        good = tmp_path / "good.evf"
        write_evf(FeatureMatrix(np.eye(2)), str(good))
        blob = bytearray(good.read_bytes())
        blob[16:20] = np.array([np.inf], dtype="<f4").tobytes()
        bad = tmp_path / "nan.evf"
        bad.write_bytes(bytes(blob))
        with pytest.raises(EvfFormatError, match="non-finite"):
            read_evf(str(bad))


class TestCsv:
    def test_read_round(self, tmp_path):
        path = tmp_path / "raw.csv"
        path.write_text("1.0,2.0,2.0\n0.0,3.0,4.0\n")
        raw = read_csv(str(path))
        np.testing.assert_array_equal(raw.data, [[1, 2, 2], [0, 3, 4]])

    def test_read_features_normalizes_csv(self, tmp_path):
        path = tmp_path / "raw.csv"
        path.write_text("3.0,4.0\n")
        m = read_features(str(path))
        np.testing.assert_allclose(m.data, [[0.6, 0.8]], atol=1e-15)

    def test_read_features_evf_passthrough(self, tmp_path, rng):
        m = normalize_rows(RawFeatureMatrix(rng.standard_normal((3, 4))))
        path = str(tmp_path / "f.evf")
        write_evf(m, path)
        back = read_features(path)
        assert back.n == 3 and back.d == 4
