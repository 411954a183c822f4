import numpy as np
import pytest

from emkirch import formats, scene


@pytest.fixture
def grid():
    return scene.ImagingGrid(
        np.array([0.5, -0.25, 12.5]),
        np.array([[1.0, 0, 0], [0, 0, 1.0]]),
        np.array([0.0625, 0.015625]),
        (4, 5),
    )


FIELD_SHAPES = [(3,), (3, 3), (2,), (2, 2)]


class TestBinaryRoundTrip:
    @pytest.mark.parametrize("comp", FIELD_SHAPES)
    def test_complex_fields(self, tmp_path, grid, rng, comp):
        values = rng.standard_normal((grid.n_points, *comp)) + 1j * rng.standard_normal(
            (grid.n_points, *comp)
        )
        path = tmp_path / "field.emkm"
        formats.write_grid_binary(path, grid, values)
        rgrid, rvalues = formats.read_grid_binary(path)
        assert rgrid.counts == grid.counts
        assert np.array_equal(rgrid.origin, grid.origin)
        assert np.array_equal(rgrid.axes, grid.axes)
        assert np.array_equal(rgrid.spacings, grid.spacings)
        assert np.array_equal(rvalues, values)

    def test_real_scalar_field(self, tmp_path, grid, rng):
        values = rng.standard_normal(grid.n_points)
        path = tmp_path / "scalar.emkm"
        formats.write_grid_binary(path, grid, values)
        _, rvalues = formats.read_grid_binary(path)
        assert np.array_equal(rvalues, values)

    def test_write_is_bitwise_stable(self, tmp_path, grid, rng):
        values = rng.standard_normal((grid.n_points, 3)) + 0j
        p1, p2 = tmp_path / "a.emkm", tmp_path / "b.emkm"
        formats.write_grid_binary(p1, grid, values)
        formats.write_grid_binary(p2, grid, values)
        assert p1.read_bytes() == p2.read_bytes()

    def test_magic_check(self, tmp_path):
        bad = tmp_path / "bad.emkm"
        bad.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ValueError):
            formats.read_grid_binary(bad)

    def test_wrong_point_count_rejected(self, tmp_path, grid):
        with pytest.raises(ValueError):
            formats.write_grid_binary(
                tmp_path / "x.emkm", grid, np.zeros((3, 3), complex)
            )

    def test_complex_scalar_rejected(self, tmp_path, grid):
        with pytest.raises(ValueError):
            formats.write_grid_binary(
                tmp_path / "x.emkm", grid, np.zeros(grid.n_points, complex)
            )


class TestTextGrid:
    def test_header_and_rows(self, tmp_path, grid, rng):
        values = rng.standard_normal((grid.n_points, 3)) + 1j * rng.standard_normal(
            (grid.n_points, 3)
        )
        path = tmp_path / "field.tsv"
        formats.write_grid_text(path, grid, values, "unit test")
        lines = path.read_text().splitlines()
        header = [ln for ln in lines if ln.startswith("#")]
        rows = [ln for ln in lines if not ln.startswith("#")]
        assert any("kind: cvec3" in ln for ln in header)
        assert len(rows) == grid.n_points + 1  # column names + points
        cols = rows[0].split("\t")
        assert cols[:3] == ["x", "y", "z"]
        assert len(cols) == 3 + 6
        first = rows[1].split("\t")
        pt = grid.points()[0]
        assert float(first[0]) == pt[0]
        assert float(first[3]) == values[0, 0].real
        assert float(first[4]) == values[0, 0].imag

    def test_scalar_grid(self, tmp_path, grid, rng):
        values = rng.standard_normal(grid.n_points)
        path = tmp_path / "scalar.tsv"
        formats.write_grid_text(path, grid, values, "norms")
        rows = [
            ln for ln in path.read_text().splitlines() if not ln.startswith("#")
        ]
        assert rows[0].split("\t") == ["x", "y", "z", "value"]
        assert float(rows[1].split("\t")[3]) == values[0]


class TestProfileAndReport:
    def test_profile_text(self, tmp_path):
        path = tmp_path / "p.tsv"
        formats.write_profile_text(path, [-0.1, 0.0, 0.1], [1.0, 3.0, 1.0], "scan")
        rows = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
        assert rows[0] == "offset\tmagnitude"
        assert rows[2].split("\t") == ["0", "3"]

    def test_report_text(self, tmp_path):
        path = tmp_path / "r.txt"
        formats.write_report_text(path, {"alpha": 1, "beta": "two"})
        text = path.read_text()
        assert "alpha: 1" in text
        assert "beta: two" in text


class TestManifest:
    def test_round_trip(self, tmp_path):
        man = formats.RunManifest(config_hash="abc123", backend="compiled")
        man.add_file("image.emkm", "image", 1)
        man.timings = {"imaging": 1.25}
        path = tmp_path / "manifest.json"
        man.write(path)
        doc = formats.read_manifest(path)
        assert doc["config_hash"] == "abc123"
        assert doc["files"][0]["path"] == "image.emkm"
        assert doc["timings_seconds"]["imaging"] == 1.25

    def test_config_hash_deterministic_and_sensitive(self):
        a = {"x": 1, "y": [1, 2, {"z": "s"}]}
        b = {"y": [1, 2, {"z": "s"}], "x": 1}  # same content, other order
        c = {"x": 1, "y": [1, 2, {"z": "t"}]}
        assert formats.config_hash(a) == formats.config_hash(b)
        assert formats.config_hash(a) != formats.config_hash(c)
