import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enclosure.cgo import (
    ProbeParams,
    WaveNumbers,
    bessel_j,
    cgo_field,
    cutoff,
    probe,
    remainder_R,
    remainder_R_grad,
    rho_of,
    vekua,
)
from enclosure.geometry import ConeFrame, GeometryError, in_cone, tau
from enclosure.validate import (
    cone_points,
    suite_cgo_residual,
    suite_cutoff_regularity,
    suite_remainder_scaling,
    suite_vekua,
)


def test_wave_numbers():
    w = WaveNumbers.from_lame(2.0, 1.0, 1.0)
    assert w.k1 == pytest.approx(0.5)
    assert w.k2 == pytest.approx(1.0)
    with pytest.raises(GeometryError):
        WaveNumbers.from_lame(1.0, 0.0, 1.0)


@pytest.mark.parametrize("omega", [0.5, 1.0, 2.0])
def test_vekua_of_constant_is_j0(omega, rng):
    # T(1)(x) = 1 - w r int_0^1 J1(w r s) ds = J0(w r)
    apex = (0.3, -0.2)
    x = rng.uniform(-2, 2, size=(30, 2))
    r = np.hypot(x[:, 0] - apex[0], x[:, 1] - apex[1])
    got = vekua(omega, lambda p: np.ones(len(p)), x, apex)
    np.testing.assert_allclose(got, bessel_j(0, omega * r), atol=1e-13)


def test_vekua_zero_frequency_is_identity(rng):
    x = rng.uniform(-1, 1, size=(5, 2))
    u = lambda p: p[:, 0] ** 2 - p[:, 1] ** 2  # noqa: E731
    np.testing.assert_allclose(vekua(0.0, u, x), u(x))


def test_vekua_helmholtz_residual(rng):
    res = suite_vekua(rng)
    assert res.passed, res.line()
    assert res.measured <= 1e-6


def test_remainder_defined_only_in_cone(frame):
    with pytest.raises(GeometryError, match="cone"):
        remainder_R(frame, 1.0, 0.2, np.array([[-1.0, 0.0]]))


def test_remainder_vanishes_at_apex_and_zero_frequency(frame):
    assert np.all(remainder_R(frame, 0.0, 0.2, np.array([[3.0, 0.1]])) == 0)
    assert abs(remainder_R(frame, 1.0, 0.2, np.array([[1e-12, 0.0]]))[0]) < 1e-10


def test_remainder_gradient_matches_fd(frame):
    p = np.array([[2.7, 0.3], [3.4, -0.5]])
    g = remainder_R_grad(frame, 1.0, 0.2, p)
    step = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = step
        fd = (remainder_R(frame, 1.0, 0.2, p + e) - remainder_R(frame, 1.0, 0.2, p - e)) / (2 * step)
        np.testing.assert_allclose(g[:, j], fd, rtol=1e-6)


def test_remainder_scaling(domain, material, frame, rng):
    res = suite_remainder_scaling(domain, material, frame, rng)
    assert res.passed, res.details


@pytest.mark.parametrize("N", [1, 2])
def test_cgo_residual(domain, material, frame, N):
    res = suite_cgo_residual(domain, material, frame, np.random.default_rng(N), orders=(N,))
    assert res.passed, res.details


def test_cutoff_range_and_support(domain, frame, rng):
    params = ProbeParams(0.3, 0.1, 0.05)
    pts = cone_points(domain, frame, 2000, rng, margin=0.0)
    phi = cutoff(frame, params, pts)
    assert np.all((phi >= 0) & (phi <= 1))
    t = tau(frame, pts)
    assert np.all(phi[t <= 1 / (0.3 + 0.1)] == 0)
    # equal to one on the truncated cone at d + eps, away from the angular guard
    core = (t >= 1 / 0.35) & (np.abs(np.angle(pts[:, 0] + 1j * pts[:, 1])) < frame.half_angle - params.guard(frame))
    assert np.all(phi[core] == 1)


def test_cutoff_zero_outside_cone():
    fr = ConeFrame((0.0, 0.0), 2, 0.0)
    p = np.array([[0.5, 3.0], [-3.0, 0.1]])
    assert not np.any(in_cone(fr, p))
    assert np.all(cutoff(fr, ProbeParams(0.3, 0.1), p) == 0)


def test_cutoff_regularity(domain, frame, base):
    res = suite_cutoff_regularity(domain, frame, base, [0.28, 0.3, 0.33])
    assert res.passed


def test_probe_is_cutoff_times_cgo_field(domain, frame, waves):
    th = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    pts = np.column_stack([3 + np.cos(th), np.sin(th)])
    params = ProbeParams(1 / 3.3, 0.1, 0.05)
    pv = probe(frame, waves, params, pts)
    phi = cutoff(frame, params, pts)
    assert np.all(pv.value[phi == 0] == 0)
    live = phi > 0
    Q, _ = cgo_field(frame, waves, params.h, pts[live])
    expect = (phi[live] * np.exp((rho_of(frame, pts[live]) - 3.3) / params.h))[:, None] * Q
    np.testing.assert_allclose(pv.value[live], expect, rtol=1e-12)
    np.testing.assert_allclose(np.abs(np.exp(pv.exponent[live])), np.abs(np.exp((rho_of(frame, pts[live]) - 3.3) / 0.1)), rtol=1e-12)


def test_probe_params_validated():
    with pytest.raises(ValueError):
        ProbeParams(0.0, 0.1)
    with pytest.raises(ValueError):
        ProbeParams(1.0, 1.5)
    with pytest.raises(ValueError):
        ProbeParams(1.0, 0.1, quad_order=4)
    assert ProbeParams(1.0, 0.1).guard(ConeFrame((0, 0), 2, 0.0)) == pytest.approx(math.pi / 16)


@given(st.floats(0.05, 0.5), st.floats(0.25, 0.4))
@settings(max_examples=15, deadline=None)
def test_probe_exponent_formula(h, d):
    fr = ConeFrame((0.0, 0.0), 1, 0.0)
    w = WaveNumbers(0.5, 1.0)
    p = np.array([[3.5, 0.0]])
    pv = probe(fr, w, ProbeParams(d, h), p)
    assert pv.exponent[0] == pytest.approx((3.5 - 1 / d) / h)
