import numpy as np
import pytest

from emkirch import analysis, imaging, scene
from conftest import APERTURE, LAM, RANGE_L


def line_image(values):
    n = len(values)
    grid = scene.ImagingGrid(
        np.array([0.0, 0.0, 5.0]), np.array([[1.0, 0, 0]]), np.array([0.1]), (n,)
    )
    vals = np.zeros((n, 3), complex)
    vals[:, 0] = values
    band = scene.make_band(2.4e9, 0.0, 1)
    return imaging.VectorImage(grid, band, vals)


class TestProfile:
    def test_constant_image_constant_profile(self):
        img = line_image(np.full(11, 2.0))
        line = analysis.make_profile_line([0, 0, 5.0], [1.0, 0, 0], 0.5, 11)
        pos, mag = analysis.profile(img, line)
        assert np.all(mag == 2.0)
        assert np.all(np.diff(pos) > 0)

    def test_magnitude_is_norm(self):
        img = line_image(np.zeros(5))
        img.values[2] = [3.0, 4.0, 0.0]
        line = analysis.make_profile_line([0, 0, 5.0], [1.0, 0, 0], 0.2, 5)
        _, mag = analysis.profile(img, line)
        assert mag.max() == pytest.approx(5.0)

    def test_empty_line_rejected(self):
        img = line_image(np.ones(5))
        line = analysis.ProfileLine(
            np.zeros(3), np.array([1.0, 0, 0]), np.array([])
        )
        with pytest.raises(ValueError):
            analysis.profile(img, line)


class TestFocalWidth:
    def test_sinc_width_recovered(self):
        w = 0.7
        pos = np.linspace(-2.0, 2.0, 201)
        mag = np.abs(np.sinc(pos / w))  # numpy sinc: zeros at multiples of w
        got = analysis.focal_width(pos, mag)
        assert abs(got - w) <= pos[1] - pos[0]

    def test_ten_percent_fallback_without_nulls(self):
        pos = np.linspace(-3.0, 3.0, 301)
        sigma = 0.5
        mag = np.exp(-0.5 * (pos / sigma) ** 2)
        got = analysis.focal_width(pos, mag)
        # 10%-of-peak crossing of a gaussian: |x| = sigma sqrt(2 ln 10)
        want = sigma * np.sqrt(2 * np.log(10.0))
        assert got == pytest.approx(want, rel=0.02)

    def test_boundary_peak_rejected(self):
        pos = np.linspace(0, 1, 20)
        mag = np.linspace(0, 1, 20)
        with pytest.raises(ValueError):
            analysis.focal_width(pos, mag)

    def test_unsorted_positions_rejected(self):
        with pytest.raises(ValueError):
            analysis.focal_width([0, 2, 1, 3, 4], [0, 1, 2, 1, 0])


class TestEllipse:
    def test_diagonal(self):
        e = analysis.ellipse_of(np.diag([2.0, 1.0]))
        assert e.semi_axes == (2.0, 1.0)
        assert e.angle == pytest.approx(0.0)

    def test_rotation_invariance(self):
        theta = np.pi / 4
        c, s = np.cos(theta), np.sin(theta)
        rot = np.array([[c, -s], [s, c]])
        m = rot @ np.diag([2.0, 1.0]) @ rot.T
        e = analysis.ellipse_of(m)
        assert e.semi_axes[0] == pytest.approx(2.0)
        assert e.semi_axes[1] == pytest.approx(1.0)
        assert analysis.axis_angle_distance(e.angle, theta) < 1e-12

    def test_zero_matrix_convention(self):
        e = analysis.ellipse_of(np.zeros((2, 2)))
        assert e.semi_axes == (0.0, 0.0)
        assert e.angle == 0.0

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            analysis.ellipse_of(np.array([[1.0, 0.5], [0.2, 1.0]]))

    def test_reconstruction_roundtrip(self, rng):
        for _ in range(20):
            m = rng.standard_normal((2, 2))
            m = (m + m.T) / 2
            e = analysis.ellipse_of(m)
            assert np.abs(e.reconstruct() - m).max() < 1e-10
            assert tuple(sorted(e.semi_axes, reverse=True)) == e.semi_axes

    def test_angle_range(self, rng):
        for _ in range(20):
            m = rng.standard_normal((2, 2))
            m = (m + m.T) / 2
            e = analysis.ellipse_of(m)
            assert -np.pi / 2 < e.angle <= np.pi / 2


class TestAngleHelpers:
    def test_angle_between(self):
        assert analysis.angle_between([1, 0], [0, 2]) == pytest.approx(np.pi / 2)
        assert analysis.angle_between([1, 1], [2, 2]) == pytest.approx(0.0, abs=1e-7)
        with pytest.raises(ValueError):
            analysis.angle_between([0, 0], [1, 0])

    def test_axis_angle_distance_wraps(self):
        assert analysis.axis_angle_distance(np.pi / 2, -np.pi / 2) == pytest.approx(0.0)
        assert analysis.axis_angle_distance(0.3, 0.1) == pytest.approx(0.2)


class TestDiskPsfValidator:
    def test_paper_scale_discrepancy(self, k0):
        disk = scene.make_disk_array(APERTURE, 64, 128)
        rep = analysis.validate_disk_psf(disk, [0.0, 0.0, RANGE_L], k0, RANGE_L)
        assert rep.discrepancy <= 0.1

    def test_monotone_decrease_under_halving(self, k0):
        discs = []
        for i in range(4):
            disk = scene.make_disk_array(APERTURE / 2**i, 64, 128)
            rep = analysis.validate_disk_psf(disk, [0.0, 0.0, RANGE_L], k0, RANGE_L)
            discs.append(rep.discrepancy)
        assert all(a > b for a, b in zip(discs, discs[1:]))
        slopes = np.log2(np.array(discs[:-1]) / np.array(discs[1:]))
        assert np.all(np.abs(slopes - 2.0) <= 0.3)

    def test_off_center_adds_off_diagonals(self, k0):
        disk = scene.make_disk_array(APERTURE, 64, 128)
        on = analysis.validate_disk_psf(disk, [0.0, 0.0, RANGE_L], k0, RANGE_L)
        off = analysis.validate_disk_psf(
            disk, [7 * LAM, 0.0, RANGE_L], k0, RANGE_L
        )
        off_diag = lambda m: np.abs(m - np.diag(np.diag(m))).max()
        assert off_diag(off.scaled_matrix) > 5 * off_diag(on.scaled_matrix)
        assert off.offcenter_scale == pytest.approx(7 * LAM / RANGE_L)

    def test_requires_disk(self, k0):
        square = scene.make_square_array(1.0, 4)
        with pytest.raises(ValueError):
            analysis.validate_disk_psf(square, [0, 0, RANGE_L], k0, RANGE_L)


class TestFraunhoferValidator:
    def test_paper_scale_amplitude_error(self):
        k0 = 2 * np.pi / LAM
        arr = scene.make_square_array(APERTURE, 40)
        window = np.array(
            [[7 * LAM, 7 * LAM, RANGE_L], [-7 * LAM, 0, RANGE_L + LAM]]
        )
        rep = analysis.validate_fraunhofer(arr, window, k0, RANGE_L)
        # amplitude freeze error is O(a^2 / L^2) = 4%
        assert rep.max_amplitude_error < 0.06

    def test_phase_error_shrinks_with_window(self):
        k0 = 2 * np.pi / LAM
        arr = scene.make_square_array(APERTURE, 40)
        errs = []
        for b in (8 * LAM, 4 * LAM, 2 * LAM):
            window = np.array([[b, -b / 2, RANGE_L + LAM / 4]])
            rep = analysis.validate_fraunhofer(arr, window, k0, RANGE_L)
            errs.append(rep.max_phase_error)
        assert errs[0] > errs[1] > errs[2]

    def test_reported_scales(self):
        k0 = 2 * np.pi / LAM
        arr = scene.make_square_array(APERTURE, 40)
        window = np.array([[3 * LAM, 0, RANGE_L]])
        rep = analysis.validate_fraunhofer(arr, window, k0, RANGE_L)
        assert rep.theta_b == pytest.approx(k0 * (3 * LAM) ** 2 / RANGE_L)
        assert rep.aperture_phase_scale == pytest.approx(
            k0 * APERTURE**4 / RANGE_L**3
        )


class TestResolutionReport:
    def test_predictions(self):
        band = scene.make_band(2.4e9, 2.4e9, 25)
        rep = analysis.resolution_report(
            cross_width=5 * LAM,
            range_width=LAM,
            wavelength=LAM,
            aperture=APERTURE,
            distance=RANGE_L,
            bandwidth=band.bandwidth,
            c=3.0e8,
        )
        assert rep.predicted_cross == pytest.approx(5 * LAM)
        assert rep.predicted_range == pytest.approx(LAM)
        assert rep.cross_ratio == pytest.approx(1.0)
        active = analysis.resolution_report(
            5 * LAM, LAM / 2, LAM, APERTURE, RANGE_L, band.bandwidth, 3.0e8, active=True
        )
        assert active.predicted_range == pytest.approx(LAM / 2)
