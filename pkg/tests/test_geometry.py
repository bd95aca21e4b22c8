import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enclosure.geometry import (
    ConeFrame,
    Disc,
    DomainSpec,
    Ellipse,
    GeometryError,
    MaterialConfig,
    Polygon,
    RadialStar,
    in_cone,
    in_gamma_d,
    level_curve,
    relative_angle,
    sup_tau,
    tau,
    wrap_angle,
)

# brute force over ~10^6 grid points and 10^6 boundary points, independent of
# the package's shape code (ellipse center (3, 0.1), semiaxes (0.35, 0.2),
# angle 0.4; cone N=2 at the origin with axis 0, where tau = x^2 - y^2)
ELLIPSE_SUP_TAU_N2 = 11.065467206672528


def test_tau_is_polar_form():
    fr = ConeFrame((1.0, -1.0), 3, 0.2)
    p = np.array([[2.5, -0.4], [1.3, 0.9]])
    z = (p[:, 0] - 1.0) + 1j * (p[:, 1] + 1.0)
    expect = np.abs(z) ** 3 * np.cos(3 * (np.angle(z) - 0.2))
    np.testing.assert_allclose(tau(fr, p), expect, rtol=1e-13)


def test_half_angle_and_beta():
    fr = ConeFrame((0, 0), 4, 0.3)
    assert fr.half_angle == pytest.approx(math.pi / 8)
    assert fr.beta == pytest.approx(np.exp(-1.2j))


def test_tau_positive_exactly_in_open_cone(rng):
    for N in (1, 2, 3):
        fr = ConeFrame((0.0, 0.0), N, 0.7)
        p = rng.normal(size=(2000, 2))
        inside = in_cone(fr, p)
        t = tau(fr, p)
        assert np.all(t[inside] > 0)
        # outside the cone but within the adjacent sector tau is negative
        ang = np.abs(relative_angle(fr, p))
        near = (~inside) & (ang < 3 * fr.half_angle)
        assert np.all(t[near] <= 1e-12)


def test_in_gamma_d():
    fr = ConeFrame((0.0, 0.0), 1, 0.0)
    assert in_gamma_d(fr, 0.5, (2.0, 0.0))
    assert not in_gamma_d(fr, 0.5, (1.9, 0.0))
    assert not in_gamma_d(fr, 0.5, (0.0, 0.0))
    with pytest.raises(GeometryError):
        in_gamma_d(fr, 0.0, (1, 1))


@pytest.mark.parametrize("N", [1, 2, 3])
def test_level_curve_lies_on_level_and_in_cone(N):
    fr = ConeFrame((0.0, 0.0), N, 0.4)
    t = 0.3
    pts = level_curve(fr, t, (-5, 5, -5, 5), 100)
    assert pts.shape == (100, 2)
    np.testing.assert_allclose(tau(fr, pts), 1 / t, rtol=1e-10)
    assert np.all(in_cone(fr, pts, closed=True))


def test_level_curve_misses_box():
    fr = ConeFrame((0.0, 0.0), 1, 0.0)
    assert level_curve(fr, 1.0, (10, 11, 10, 11), 50).shape == (0, 2)


def test_wrap_angle_range():
    a = wrap_angle(np.linspace(-20, 20, 1001))
    assert np.all(a > -math.pi - 1e-12) and np.all(a <= math.pi + 1e-12)


def test_apex_must_be_outside_closed_domain():
    dom = DomainSpec((3.0, 0.0), 1.0)
    ConeFrame((1.9, 0.0), 1, 0.0).check_apex(dom)
    with pytest.raises(GeometryError, match="apex"):
        ConeFrame((2.0, 0.0), 1, 0.0).check_apex(dom)
    with pytest.raises(GeometryError, match="apex"):
        ConeFrame((3.0, 0.5), 1, 0.0).check_apex(dom)


def test_cone_order_validated():
    with pytest.raises(GeometryError):
        ConeFrame((0, 0), 0, 0.0)
    with pytest.raises(GeometryError):
        ConeFrame((0, 0), 1.5, 0.0)


def test_sup_tau_reference_disc(disc, frame):
    assert sup_tau(frame, disc) == pytest.approx(3.3, abs=1e-9)


@pytest.mark.parametrize("k", range(8))
def test_sup_tau_rotated_frames(disc, k):
    # N = 1: tau is the projection on the axis, so sup = (c - a).e + r
    th = k * math.pi / 4
    e = np.array([math.cos(th), math.sin(th)])
    apex = np.array([3.0, 0.0]) - 3 * e
    fr = ConeFrame(tuple(apex), 1, th)
    expect = float((np.array(disc.center) - apex) @ e + disc.radius)
    assert sup_tau(fr, disc) == pytest.approx(expect, abs=1e-9)


def test_sup_tau_ellipse_n2_brute_force():
    shp = Ellipse(0.0, 1.0, (3.0, 0.1), (0.35, 0.2), 0.4)
    fr = ConeFrame((0.0, 0.0), 2, 0.0)
    assert sup_tau(fr, shp) == pytest.approx(ELLIPSE_SUP_TAU_N2, abs=1e-6)


def test_sup_tau_outside_cone_is_zero():
    fr = ConeFrame((0.0, 0.0), 1, math.pi)
    assert sup_tau(fr, Disc(0.0, 1.0, (3.0, 0.0), 0.3)) == 0.0


def test_sup_tau_polygon_vertex():
    sq = Polygon(0.0, 1.0, ((2.8, -0.1), (3.2, -0.1), (3.2, 0.3), (2.8, 0.3)))
    fr = ConeFrame((0.0, 0.0), 1, math.pi / 4)
    expect = (3.2 + 0.3) / math.sqrt(2)
    assert sup_tau(fr, sq) == pytest.approx(expect, abs=1e-6)


def test_shapes_contain_center_and_not_far_points():
    shapes = [
        Disc(0.0, 1.0, (3.0, 0.0), 0.3),
        Ellipse(0.0, 1.0, (3.0, 0.0), (0.3, 0.1), 0.5),
        Polygon(0.0, 1.0, ((2.8, -0.2), (3.2, -0.2), (3.0, 0.3))),
        RadialStar(0.0, 1.0, (3.0, 0.0), 0.3, (0.05,), (0.0, 0.03)),
    ]
    for s in shapes:
        assert s.contains((3.0, 0.0))
        assert not s.contains((5.0, 5.0))
        b = s.boundary(64)
        assert b.shape == (64, 2)


def test_jump_condition_messages():
    with pytest.raises(GeometryError, match="lambdaD\\+muD < 0 with muD > 0"):
        MaterialConfig(2.0, 1.0, 1.0, (Disc(-1.0, 0.5, (3, 0), 0.3),))
    with pytest.raises(GeometryError, match="lambdaD\\+muD > 0 with muD < 0"):
        MaterialConfig(2.0, 1.0, 1.0, (Disc(1.0, -0.5, (3, 0), 0.3),))


def test_strong_convexity_checked():
    with pytest.raises(GeometryError, match="strong convexity"):
        MaterialConfig(2.0, 1.0, 1.0, (Disc(0.0, -1.5, (3, 0), 0.3),))
    with pytest.raises(GeometryError, match="background"):
        MaterialConfig(2.0, -1.0, 1.0, ())


def test_check_domain_rejects_touching_and_overlap(domain):
    m = MaterialConfig(2.0, 1.0, 1.0, (Disc(0.0, 1.0, (3.8, 0.0), 0.3),))
    with pytest.raises(GeometryError, match="strictly inside"):
        m.check_domain(domain)
    m = MaterialConfig(2.0, 1.0, 1.0, (Disc(0.0, 1.0, (3.0, 0.0), 0.3), Disc(0.0, 1.0, (3.4, 0.0), 0.3)))
    with pytest.raises(GeometryError, match="overlap"):
        m.check_domain(domain)


@given(
    st.floats(-math.pi, math.pi),
    st.floats(0.1, 0.4),
    st.floats(-0.4, 0.4),
    st.floats(-0.4, 0.4),
)
@settings(max_examples=40, deadline=None)
def test_sup_tau_disc_n1_property(theta, r, cx, cy):
    # hypothesis: closed form for N = 1 whenever the disc lies inside the cone
    e = np.array([math.cos(theta), math.sin(theta)])
    c = np.array([3.0 + cx, cy])
    apex = c - 3 * e
    fr = ConeFrame(tuple(apex), 1, theta)
    got = sup_tau(fr, Disc(0.0, 1.0, tuple(c), r), nboundary=1024, ngrid=64)
    assert got == pytest.approx(3 + r, abs=1e-9)
