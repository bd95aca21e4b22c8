"""Bessel functions and agreement of the compiled and NumPy backends."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enclosure import _kernels_py, kernels
from enclosure.cgo import bessel_j, gauss_legendre01

# mpmath, 30 digits
J_REF = {
    0.5: (0.93846980724081290423, 0.24226845767487388638),
    3.9: (-0.40182601488763990745, -0.027244039620779891184),
    4.1: (-0.38866967983585371972, -0.10327325774733857266),
    10.0: (-0.2459357644513483352, 0.04347274616886143667),
    24.9: (0.083245968353015490053, -0.13485569953140886933),
    25.1: (0.10827567149994945198, -0.11463478413442256746),
    37.3: (0.048811957363259748132, -0.1205318200240868866),
}
J0_ZEROS = (2.4048255576957727686, 5.5200781102863106496, 8.653727912911012217)
J1_ZEROS = (3.8317059702075123156, 7.0155866698156187535)

BACKENDS = kernels.available()


@pytest.fixture(params=BACKENDS)
def backend(request):
    prev = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(prev)


def test_reference_values(backend):
    z = np.array(sorted(J_REF))
    j0, j1 = kernels.bessel_j01(z)
    ref = np.array([J_REF[v] for v in sorted(J_REF)])
    np.testing.assert_allclose(j0, ref[:, 0], atol=2e-15, rtol=0)
    np.testing.assert_allclose(j1, ref[:, 1], atol=2e-15, rtol=0)


def _bisect_zero(f, a, b):
    fa = f(a)
    for _ in range(200):
        m = 0.5 * (a + b)
        if (f(m) > 0) == (fa > 0):
            a, fa = m, f(m)
        else:
            b = m
    return 0.5 * (a + b)


@pytest.mark.parametrize("order,zeros", [(0, J0_ZEROS), (1, J1_ZEROS)])
def test_zeros_by_bisection(backend, order, zeros):
    for z in zeros:
        root = _bisect_zero(lambda x: bessel_j(order, x), z - 0.3, z + 0.3)
        assert abs(root - z) < 1e-13


def test_regime_boundaries_continuous(backend):
    # series/recurrence switch at 4 and recurrence/asymptotic switch at 25
    for z0 in (4.0, 25.0):
        z = np.array([z0 - 1e-12, z0])
        j0, j1 = kernels.bessel_j01(z)
        assert abs(j0[1] - j0[0]) < 1e-12
        assert abs(j1[1] - j1[0]) < 1e-12


def test_bessel_small_argument(backend):
    j0, j1 = kernels.bessel_j01(np.array([0.0, 1e-8]))
    assert j0[0] == 1.0 and j1[0] == 0.0
    assert abs(j1[1] - 5e-9) < 1e-22


def test_bessel_rejects_negative():
    with pytest.raises(ValueError, match="z must be nonnegative"):
        bessel_j(0, -1.0)
    with pytest.raises(ValueError):
        bessel_j(2, 1.0)


def test_bessel_shape_and_scalar():
    assert isinstance(bessel_j(0, 1.0), float)
    assert bessel_j(1, np.ones((3, 2))).shape == (3, 2)


@given(st.lists(st.floats(0.0, 60.0), min_size=1, max_size=30))
@settings(max_examples=60, deadline=None)
def test_backends_agree_bessel(zs):
    if "cython" not in BACKENDS:
        pytest.skip("compiled backend not built")
    from enclosure import _kernels

    z = np.array(zs)
    a = _kernels.bessel_j01(z)
    b = _kernels_py.bessel_j01(z)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, atol=2e-15, rtol=0)


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled backend not built")
@pytest.mark.parametrize("N", [1, 2, 3])
def test_backends_agree_remainder(N, rng):
    from enclosure import _kernels

    s, w = gauss_legendre01(64)
    pts = rng.uniform(2.0, 4.0, size=(50, 2)) * np.array([1.0, 0.2])
    beta = np.exp(-0.1j * N)
    a = _kernels.remainder(1.3, N, beta, (0.0, 0.0), 0.15, pts, s, w, 2)
    b = _kernels_py.remainder(1.3, N, beta, (0.0, 0.0), 0.15, pts, s, w, 2)
    for x, y in zip(a, b):
        assert np.abs(x - y).max() <= 1e-12 * np.abs(y).max()


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled backend not built")
def test_backends_agree_elements(coarse_model):
    from enclosure import _kernels

    m = coarse_model.mesh
    g1, a1 = _kernels.p1_element_gradients(m.nodes, m.triangles)
    g2, a2 = _kernels_py.p1_element_gradients(m.nodes, m.triangles)
    np.testing.assert_allclose(g1, g2, rtol=1e-14)
    np.testing.assert_allclose(a1, a2, rtol=1e-14)
    lam = np.linspace(1, 2, len(a1))
    mu = np.linspace(0.5, 1, len(a1))
    np.testing.assert_allclose(_kernels.elasticity_blocks(g1, a1, lam, mu), _kernels_py.elasticity_blocks(g2, a2, lam, mu), rtol=1e-13, atol=1e-14)


def test_use_backend_rejects_unknown():
    with pytest.raises(ValueError, match="not available"):
        kernels.use_backend("fortran")


def test_backend_name():
    assert kernels.backend() in BACKENDS
