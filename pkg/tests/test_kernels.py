"""Backend contract tests: python/compiled equivalence and oracle checks."""

import numpy as np
import pytest

from emkirch import kernels
from emkirch.errors import SingularEvaluationError

import oracles

BACKENDS = ["python"]
try:
    kernels.get_backend("compiled")
    BACKENDS.append("compiled")
except ImportError:
    pass


@pytest.fixture(scope="module")
def geometry():
    rng = np.random.default_rng(7)
    elements = np.column_stack([rng.uniform(-1, 1, (40, 2)), np.zeros(40)])
    weights = rng.uniform(0.5, 1.5, 40)
    points = np.column_stack([rng.uniform(-1, 1, (9, 2)), rng.uniform(2.0, 3.0, 9)])
    amplitudes = rng.standard_normal((40, 3)) + 1j * rng.standard_normal((40, 3))
    return elements, weights, points, amplitudes


K = 2 * np.pi / 0.125


@pytest.mark.parametrize("backend", BACKENDS)
class TestAgainstOracle:
    def test_green_field(self, geometry, backend):
        el, _, pts, amp = geometry
        impl = kernels.get_backend(backend)
        got = impl.green_field(el, amp, pts, K, 1e-12)
        for t in range(3):
            want = sum(oracles.dyadic(pts[t], el[s], K) @ amp[s] for s in range(40))
            assert np.abs(got[t] - want).max() < 1e-13 * np.abs(want).max()

    def test_psf_diag(self, geometry, backend):
        el, w, pts, _ = geometry
        impl = kernels.get_backend(backend)
        got = impl.psf_diag(el, w, pts, K, 0.0)
        for t in range(3):
            want = oracles.point_spread(el, w, pts[t], pts[t], K)
            assert np.abs(want.imag).max() < 1e-16  # coincident PSF is real
            assert np.abs(got[t] - want.real).max() < 1e-13 * np.abs(want).max()

    def test_psf_pair(self, geometry, backend):
        el, w, pts, _ = geometry
        impl = kernels.get_backend(backend)
        y2 = pts[4]
        got = impl.psf_pair(el, w, pts, y2, K, 0.0)
        for t in range(3):
            want = oracles.point_spread(el, w, pts[t], y2, K)
            assert np.abs(got[t] - want).max() < 1e-13 * np.abs(want).max()

    def test_green_stack_blocks(self, geometry, backend):
        el, w, pts, _ = geometry
        impl = kernels.get_backend(backend)
        stack = impl.green_stack(pts, el, K, 1e-12, True, w)
        assert stack.shape == (9, 3, 120)
        block = stack[2, :, 15:18]
        want = w[5] * np.conj(oracles.dyadic(pts[2], el[5], K))
        assert np.abs(block - want).max() < 1e-13 * np.abs(want).max()

    def test_moments_reproduce_all_wavenumbers(self, geometry, backend):
        el, w, pts, _ = geometry
        impl = kernels.get_backend(backend)
        mom = impl.psf_moments(el, w, pts, 0.0)
        for k in (K / 3, K, 5 * K):
            direct = impl.psf_diag(el, w, pts, k, 0.0)
            rebuilt = mom[:, 0] + mom[:, 1] / k**2 + mom[:, 2] / k**4
            assert np.abs(direct - rebuilt).max() < 1e-13 * np.abs(direct).max()

    def test_singularity_guard(self, geometry, backend):
        el, w, pts, amp = geometry
        impl = kernels.get_backend(backend)
        bad = el[:1].copy()  # evaluation point on an element
        with pytest.raises(SingularEvaluationError):
            impl.green_field(el, amp, bad, K, 1e-9)
        with pytest.raises(SingularEvaluationError):
            impl.psf_diag(el, w, bad, K, 1e-9)
        with pytest.raises(SingularEvaluationError):
            impl.psf_pair(el, w, pts, el[0], K, 1e-9)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
class TestBackendEquivalence:
    def test_all_kernels_agree(self, geometry):
        el, w, pts, amp = geometry
        py = kernels.get_backend("python")
        cy = kernels.get_backend("compiled")
        pairs = [
            (py.green_field(el, amp, pts, K, 1e-12), cy.green_field(el, amp, pts, K, 1e-12)),
            (
                py.green_stack(pts, el, K, 1e-12, False, None),
                cy.green_stack(pts, el, K, 1e-12, False, None),
            ),
            (py.psf_moments(el, w, pts, 0.0), cy.psf_moments(el, w, pts, 0.0)),
            (py.psf_diag(el, w, pts, K, 0.0), cy.psf_diag(el, w, pts, K, 0.0)),
            (
                py.psf_pair(el, w, pts, pts[0], K, 0.0),
                cy.psf_pair(el, w, pts, pts[0], K, 0.0),
            ),
        ]
        for a, b in pairs:
            scale = np.abs(np.asarray(a)).max()
            assert np.abs(np.asarray(a) - np.asarray(b)).max() < 1e-12 * scale

    def test_repeat_calls_bitwise_stable(self, geometry):
        el, w, pts, amp = geometry
        for name in BACKENDS:
            impl = kernels.get_backend(name)
            a = impl.green_field(el, amp, pts, K, 1e-12)
            b = impl.green_field(el, amp, pts, K, 1e-12)
            assert np.array_equal(a, b)


def test_backend_name_reported():
    assert kernels.backend_name() in ("python", "compiled")


def test_set_num_threads_does_not_change_results(geometry=None):
    rng = np.random.default_rng(3)
    el = np.column_stack([rng.uniform(-1, 1, (30, 2)), np.zeros(30)])
    amp = rng.standard_normal((30, 3)) + 0j
    pts = np.column_stack([rng.uniform(-1, 1, (8, 2)), rng.uniform(2, 3, 8)])
    before = kernels.green_field(el, amp, pts, K, 1e-12)
    kernels.set_num_threads(1)
    single = kernels.green_field(el, amp, pts, K, 1e-12)
    kernels.set_num_threads(2)
    double = kernels.green_field(el, amp, pts, K, 1e-12)
    assert np.array_equal(before, single)
    assert np.array_equal(single, double)
