import numpy as np
import pytest

from emkirch import scene
from emkirch.errors import DataMismatchError

from conftest import APERTURE, F0, LAM


class TestSquareArray:
    def test_two_by_two_cell_centers(self):
        arr = scene.make_square_array(2.0, 2)
        want = {(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)}
        got = {tuple(p) for p in arr.positions}
        assert got == want
        assert np.all(arr.weights == 1.0)

    def test_weights_partition_area(self):
        arr = scene.make_square_array(2.5, 40)
        assert arr.area == pytest.approx(2.5**2, rel=1e-14)

    def test_paper_configuration(self):
        arr = scene.make_square_array(APERTURE, 40)
        assert arr.n_elements == 1600
        # equispaced, spacing a/n = lambda/2, centered at the origin
        xs = np.unique(arr.positions[:, 0])
        assert xs.size == 40
        assert np.allclose(np.diff(xs), LAM / 2)
        assert abs(arr.positions.mean(axis=0)).max() < 1e-12

    def test_validation(self):
        with pytest.raises(ValueError):
            scene.make_square_array(0.0, 4)
        with pytest.raises(ValueError):
            scene.make_square_array(1.0, 1)

    def test_positions3_in_plane(self):
        arr = scene.make_square_array(1.0, 3)
        assert np.all(arr.positions3[:, 2] == 0.0)


class TestDiskArray:
    def test_weights_sum_to_disk_area(self):
        arr = scene.make_disk_array(1.25, 64, 128)
        assert arr.area == pytest.approx(np.pi * 1.25**2, rel=1e-10)

    def test_all_elements_inside(self):
        arr = scene.make_disk_array(0.7, 8, 16)
        assert np.all(np.linalg.norm(arr.positions, axis=1) <= 0.7)

    def test_validation(self):
        with pytest.raises(ValueError):
            scene.make_disk_array(1.0, 1, 16)
        with pytest.raises(ValueError):
            scene.make_disk_array(1.0, 4, 3)


class TestBand:
    def test_degenerate_single_sample(self):
        band = scene.make_band(F0, 0.0, 1)
        assert band.n_freq == 1
        assert band.omegas[0] == pytest.approx(2 * np.pi * F0)
        assert band.quadrature_weights().tolist() == [1.0]

    def test_paper_band_span(self):
        band = scene.make_band(F0, F0, 25)
        assert band.omegas[0] == pytest.approx(2 * np.pi * 1.2e9)
        assert band.omegas[-1] == pytest.approx(2 * np.pi * 3.6e9)

    def test_equal_spacing(self):
        band = scene.make_band(F0, F0, 25)
        assert np.allclose(np.diff(band.omegas), band.bandwidth / 24)

    def test_trapezoid_weights_integrate_constants(self):
        band = scene.make_band(F0, 1e9, 9)
        assert band.quadrature_weights().sum() == pytest.approx(band.bandwidth)

    def test_validation(self):
        with pytest.raises(ValueError):
            scene.make_band(F0, 2 * F0, 9)  # nonpositive frequencies
        with pytest.raises(ValueError):
            scene.make_band(F0, 0.0, 2)  # zero width needs one sample
        with pytest.raises(ValueError):
            scene.make_band(F0, 1e9, 1)  # one sample needs zero width

    def test_single_subband(self, medium):
        band = scene.make_band(F0, F0, 5)
        sub = band.single(2)
        assert sub.n_freq == 1
        assert sub.omegas[0] == band.omegas[2]
        assert band.index_of(band.wavenumbers(medium)[3], medium) == 3
        with pytest.raises(DataMismatchError):
            band.index_of(1.2345, medium)


class TestImagingGrid:
    def test_origin_is_a_grid_point(self):
        g = scene.ImagingGrid(
            np.array([1.0, 2.0, 3.0]),
            np.array([[1.0, 0, 0], [0, 1.0, 0]]),
            np.array([0.25, 0.5]),
            (64, 7),
        )
        pts = g.points()
        center = g.flat_index((32, 3))
        assert np.allclose(pts[center], [1.0, 2.0, 3.0])

    def test_row_major_reproducible(self):
        g = scene.ImagingGrid(
            np.zeros(3), np.array([[1.0, 0, 0], [0, 0, 1.0]]), np.array([0.1, 0.2]), (3, 4)
        )
        a, b = g.points(), g.points()
        assert np.array_equal(a, b)
        # row-major: second index varies fastest
        assert np.allclose(a[1] - a[0], [0, 0, 0.2])
        assert np.allclose(a[4] - a[0], [0.1, 0, 0])

    def test_nearest_index_roundtrip(self, rng):
        g = scene.ImagingGrid(
            np.array([0.0, 0.0, 5.0]),
            np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]]),
            np.array([0.2, 0.3, 0.1]),
            (5, 6, 7),
        )
        pts = g.points()
        for _ in range(10):
            idx = tuple(rng.integers(0, c) for c in g.counts)
            jitter = rng.uniform(-0.04, 0.04, 3)
            assert g.nearest_index(pts[g.flat_index(idx)] + jitter) == idx

    def test_axes_must_be_orthonormal(self):
        with pytest.raises(ValueError):
            scene.ImagingGrid(
                np.zeros(3),
                np.array([[1.0, 0, 0], [1.0, 1.0, 0]]),
                np.array([0.1, 0.1]),
                (2, 2),
            )

    def test_line_and_plane_helpers(self):
        line = scene.make_line_grid([0, 0, 5.0], [0, 0, 1.0], 1.0, 0.25)
        assert line.counts == (9,)
        assert np.allclose(line.points()[4], [0, 0, 5.0])
        plane = scene.make_plane_grid(
            [0, 0, 5.0], [1.0, 0, 0], [0, 0, 1.0], (1.0, 0.5), (0.5, 0.25)
        )
        assert plane.counts == (5, 5)


class TestSources:
    def test_dipole_validation(self):
        with pytest.raises(ValueError):
            scene.Dipole(np.zeros(3), np.zeros(3))
        d = scene.Dipole([0, 0, 1.0], [1, 2j, 0])
        assert d.polarization.dtype == complex

    def test_scatterer_symmetry_enforced(self):
        asym = np.array([[1, 2, 0], [2.1, 1, 0], [0, 0, 1]], complex)
        with pytest.raises(ValueError):
            scene.Scatterer([0, 0, 1.0], asym)
        sym = np.array([[2 + 1j, 1, 0], [1, 2 + 2j, 0], [0, 0, 1 + 1j]])
        s = scene.Scatterer([0, 0, 1.0], sym)
        assert s.polarizability.shape == (3, 3)

    def test_immutability(self):
        arr = scene.make_square_array(1.0, 2)
        with pytest.raises((ValueError, RuntimeError)):
            arr.positions[0, 0] = 99.0
