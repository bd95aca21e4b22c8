"""Domains, inclusion shapes, materials and probing cones.

Points are handled as NumPy arrays; every function that takes a point also
accepts an ``(n, 2)`` array of points and then returns one value per row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class GeometryError(ValueError):
    """Raised when a geometric or material invariant is violated."""


def _as_points(x):
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, 2), x.ndim == 1


def wrap_angle(theta):
    """Principal value of an angle in (-pi, pi]."""
    theta = np.asarray(theta, dtype=float)
    out = np.angle(np.exp(1j * theta))
    # np.angle returns -pi for exp(-i pi) on some platforms
    return np.where(np.isclose(out, -np.pi, rtol=0, atol=1e-15), np.pi, out)


@dataclass(frozen=True)
class DomainSpec:
    """Disc-shaped body."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("domain radius must be positive")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def contains(self, x, closed=True):
        pts, single = _as_points(x)
        dist = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])
        out = dist <= self.radius if closed else dist < self.radius
        return bool(out[0]) if single else out

    def bbox(self):
        c, r = self.center, self.radius
        return (c[0] - r, c[0] + r, c[1] - r, c[1] + r)


@dataclass(frozen=True)
class ConeFrame:
    """Probing cone with apex ``a``, order ``N`` and axis angle ``theta0``.

    The phase is ``rho(x) = beta ((x1-a1) + i(x2-a2))^N`` with
    ``beta = exp(-i N theta0)``.
    """

    apex: tuple[float, float]
    order: int
    axis: float

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise GeometryError("cone order N must be a positive integer")
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "apex", (float(self.apex[0]), float(self.apex[1])))
        object.__setattr__(self, "axis", float(self.axis))

    @property
    def beta(self) -> complex:
        return complex(np.exp(-1j * self.order * self.axis))

    @property
    def half_angle(self) -> float:
        return math.pi / (2 * self.order)

    def check_apex(self, domain: DomainSpec):
        """Require the apex to lie strictly outside the closed domain."""
        dist = math.hypot(domain.center[0] - self.apex[0], domain.center[1] - self.apex[1])
        if not dist > domain.radius:
            raise GeometryError(
                f"cone apex {self.apex} lies inside the closed domain; "
                "the apex must be a point outside the closure of the body"
            )

    def rel(self, x):
        pts, single = _as_points(x)
        return pts[:, 0] - self.apex[0] + 1j * (pts[:, 1] - self.apex[1]), single


def rho(frame: ConeFrame, x):
    """Complex polynomial phase at ``x``."""
    zc, single = frame.rel(x)
    out = frame.beta * zc**frame.order
    return complex(out[0]) if single else out


def tau(frame: ConeFrame, x):
    """Real part of the phase, ``r^N cos N(theta - theta0)`` about the apex."""
    zc, single = frame.rel(x)
    out = (frame.beta * zc**frame.order).real
    return float(out[0]) if single else out


def relative_angle(frame: ConeFrame, x):
    """Wrapped polar angle of ``x - apex`` measured from the cone axis."""
    zc, single = frame.rel(x)
    if np.any(zc == 0):
        raise GeometryError("apex has no polar angle")
    out = wrap_angle(np.angle(zc) - frame.axis)
    return float(out) if single else out


def in_cone(frame: ConeFrame, x, closed=False):
    """Membership in the open cone (or its closure with ``closed=True``)."""
    ang = np.abs(relative_angle(frame, x))
    out = ang <= frame.half_angle if closed else ang < frame.half_angle
    return bool(out) if np.ndim(out) == 0 else out


def in_gamma_d(frame: ConeFrame, d: float, x):
    """Membership in the truncated cone ``{x in closed cone : tau(x) >= 1/d}``."""
    if not d > 0:
        raise GeometryError("d must be positive")
    pts, single = _as_points(x)
    zc, _ = frame.rel(pts)
    out = np.zeros(len(pts), dtype=bool)
    nz = zc != 0
    if np.any(nz):
        ang = np.abs(wrap_angle(np.angle(zc[nz]) - frame.axis))
        t = (frame.beta * zc[nz] ** frame.order).real
        out[nz] = (ang <= frame.half_angle) & (t >= 1.0 / d)
    return bool(out[0]) if single else out


def level_curve(frame: ConeFrame, t: float, bbox: Sequence[float], npts: int):
    """Points on the in-cone branch of ``{tau = 1/t}`` inside ``bbox``.

    ``bbox`` is ``(xmin, xmax, ymin, ymax)``. Returns an ``(npts, 2)`` array
    ordered by angle, or an empty ``(0, 2)`` array when the branch misses
    the box.
    """
    if not t > 0:
        raise GeometryError("t must be positive")
    if npts < 2:
        raise GeometryError("npts must be at least 2")
    N = frame.order
    half = frame.half_angle
    xmin, xmax, ymin, ymax = bbox

    def point(phi):
        phi = np.asarray(phi, dtype=float)
        r = (1.0 / (t * np.cos(N * phi))) ** (1.0 / N)
        th = frame.axis + phi
        return np.stack([frame.apex[0] + r * np.cos(th), frame.apex[1] + r * np.sin(th)], axis=-1)

    def inside(phi):
        p = point(phi)
        return (p[..., 0] >= xmin) & (p[..., 0] <= xmax) & (p[..., 1] >= ymin) & (p[..., 1] <= ymax)

    phis = np.linspace(-half, half, 20003)[1:-1]
    mask = inside(phis)
    if not np.any(mask):
        return np.empty((0, 2))
    # largest contiguous run of in-box angles
    idx = np.flatnonzero(mask)
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    stops = np.concatenate([idx[breaks], [idx[-1]]])
    k = int(np.argmax(stops - starts))
    i0, i1 = starts[k], stops[k]

    def edge(a_in, b_out):
        for _ in range(60):
            mid = 0.5 * (a_in + b_out)
            if inside(mid):
                a_in = mid
            else:
                b_out = mid
        return a_in

    lo = phis[i0] if i0 == 0 else edge(phis[i0], phis[i0 - 1])
    hi = phis[i1] if i1 == len(phis) - 1 else edge(phis[i1], phis[i1 + 1])
    return point(np.linspace(lo, hi, npts))


# ---------------------------------------------------------------------------
# inclusion shapes


@dataclass(frozen=True)
class Shape:
    lambda_d: float
    mu_d: float

    kind = "shape"

    def contains(self, x):
        raise NotImplementedError

    def boundary(self, n):
        """``n`` boundary points for the parameter ``t`` in [0, 1)."""
        return self.boundary_at(np.arange(n) / n)

    def boundary_at(self, t):
        raise NotImplementedError

    def bbox(self):
        pts = self.boundary(2048)
        pad = 1e-9
        return (pts[:, 0].min() - pad, pts[:, 0].max() + pad, pts[:, 1].min() - pad, pts[:, 1].max() + pad)

    def params(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Disc(Shape):
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0

    kind = "disc"

    def contains(self, x):
        pts, single = _as_points(x)
        out = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1]) < self.radius
        return bool(out[0]) if single else out

    def boundary_at(self, t):
        th = 2 * np.pi * np.asarray(t)
        return np.stack([self.center[0] + self.radius * np.cos(th), self.center[1] + self.radius * np.sin(th)], -1)

    def bbox(self):
        c, r = self.center, self.radius
        return (c[0] - r, c[0] + r, c[1] - r, c[1] + r)

    def params(self):
        return {"center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Ellipse(Shape):
    center: tuple[float, float] = (0.0, 0.0)
    semiaxes: tuple[float, float] = (1.0, 1.0)
    angle: float = 0.0

    kind = "ellipse"

    def contains(self, x):
        pts, single = _as_points(x)
        c, s = math.cos(self.angle), math.sin(self.angle)
        dx = pts[:, 0] - self.center[0]
        dy = pts[:, 1] - self.center[1]
        u = c * dx + s * dy
        v = -s * dx + c * dy
        out = (u / self.semiaxes[0]) ** 2 + (v / self.semiaxes[1]) ** 2 < 1.0
        return bool(out[0]) if single else out

    def boundary_at(self, t):
        th = 2 * np.pi * np.asarray(t)
        u = self.semiaxes[0] * np.cos(th)
        v = self.semiaxes[1] * np.sin(th)
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.stack([self.center[0] + c * u - s * v, self.center[1] + s * u + c * v], -1)

    def params(self):
        return {"center": list(self.center), "semiaxes": list(self.semiaxes), "angle": self.angle}


@dataclass(frozen=True)
class Polygon(Shape):
    vertices: tuple[tuple[float, float], ...] = ()

    kind = "polygon"

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise GeometryError("polygon needs at least 3 vertices")

    def contains(self, x):
        pts, single = _as_points(x)
        v = np.asarray(self.vertices, dtype=float)
        inside = np.zeros(len(pts), dtype=bool)
        px, py = pts[:, 0], pts[:, 1]
        for i in range(len(v)):
            x1, y1 = v[i]
            x2, y2 = v[(i + 1) % len(v)]
            crosses = (y1 > py) != (y2 > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (px < xint)
        return bool(inside[0]) if single else inside

    def boundary_at(self, t):
        v = np.asarray(self.vertices, dtype=float)
        edges = np.roll(v, -1, axis=0) - v
        lengths = np.hypot(edges[:, 0], edges[:, 1])
        cum = np.concatenate([[0.0], np.cumsum(lengths)]) / lengths.sum()
        t = np.mod(np.asarray(t, dtype=float), 1.0)
        i = np.clip(np.searchsorted(cum, t, side="right") - 1, 0, len(v) - 1)
        frac = (t - cum[i]) / (cum[i + 1] - cum[i])
        return v[i] + frac[..., None] * edges[i]

    def params(self):
        return {"vertices": [list(p) for p in self.vertices]}


@dataclass(frozen=True)
class RadialStar(Shape):
    """Star-shaped region ``r(t) = r0 + sum_k a_k cos(k t) + b_k sin(k t)``."""

    center: tuple[float, float] = (0.0, 0.0)
    base_radius: float = 1.0
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()

    kind = "star"

    def radius_at(self, th):
        th = np.asarray(th, dtype=float)
        r = np.full_like(th, self.base_radius)
        for k, a in enumerate(self.cos_coeffs, start=1):
            r = r + a * np.cos(k * th)
        for k, b in enumerate(self.sin_coeffs, start=1):
            r = r + b * np.sin(k * th)
        return r

    def contains(self, x):
        pts, single = _as_points(x)
        dx = pts[:, 0] - self.center[0]
        dy = pts[:, 1] - self.center[1]
        out = np.hypot(dx, dy) < self.radius_at(np.arctan2(dy, dx))
        return bool(out[0]) if single else out

    def boundary_at(self, t):
        th = 2 * np.pi * np.asarray(t, dtype=float)
        r = self.radius_at(th)
        return np.stack([self.center[0] + r * np.cos(th), self.center[1] + r * np.sin(th)], -1)

    def params(self):
        return {
            "center": list(self.center),
            "base_radius": self.base_radius,
            "cos_coeffs": list(self.cos_coeffs),
            "sin_coeffs": list(self.sin_coeffs),
        }


SHAPE_KINDS = {cls.kind: cls for cls in (Disc, Ellipse, Polygon, RadialStar)}


def check_jump(shape: Shape):
    """Sign and jump conditions on the coefficient contrast of one shape."""
    lam, mu = shape.lambda_d, shape.mu_d
    if (lam + mu) * mu < 0:
        if mu > 0:
            raise GeometryError("jump condition violated: lambdaD+muD < 0 with muD > 0")
        raise GeometryError("jump condition violated: lambdaD+muD > 0 with muD < 0")
    if mu == 0:
        raise GeometryError("jump condition violated: muD must be nonzero")


@dataclass(frozen=True)
class MaterialConfig:
    """Background Lame constants, frequency and inclusions."""

    lambda0: float
    mu0: float
    k: float
    inclusions: tuple[Shape, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "inclusions", tuple(self.inclusions))
        if not self.k > 0:
            raise GeometryError("frequency k must be positive")
        if not (self.lambda0 + self.mu0 > 0 and self.mu0 > 0):
            raise GeometryError("strong convexity violated for the background: need lambda0+mu0 > 0 and mu0 > 0")
        for i, s in enumerate(self.inclusions):
            lam = self.lambda0 + s.lambda_d
            mu = self.mu0 + s.mu_d
            if not (lam + mu > 0 and mu > 0):
                raise GeometryError(f"strong convexity violated on inclusion {i}: need lambda+mu > 0 and mu > 0")
            check_jump(s)

    def check_domain(self, domain: DomainSpec, nsample=2048):
        """Inclusions strictly inside the domain and pairwise disjoint."""
        for i, s in enumerate(self.inclusions):
            b = s.boundary(nsample)
            dist = np.hypot(b[:, 0] - domain.center[0], b[:, 1] - domain.center[1])
            if not np.all(dist < domain.radius):
                raise GeometryError(f"inclusion {i} is not strictly inside the domain")
        for i, a in enumerate(self.inclusions):
            for j in range(i + 1, len(self.inclusions)):
                b = self.inclusions[j]
                if np.any(b.contains(a.boundary(nsample))) or np.any(a.contains(b.boundary(nsample))):
                    raise GeometryError(f"inclusions {i} and {j} overlap")

    def region_of(self, x):
        """Inclusion index per point, ``-1`` for background."""
        pts, _ = _as_points(x)
        out = np.full(len(pts), -1, dtype=int)
        for i, s in enumerate(self.inclusions):
            out[s.contains(pts)] = i
        return out


# ---------------------------------------------------------------------------
# supremum of tau over a shape inside the cone


def _golden_max(f, a, b, iters=80):
    g = (math.sqrt(5) - 1) / 2
    c = b - g * (b - a)
    d = a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return max(fc, fd)


def sup_tau(frame: ConeFrame, shape: Shape, nboundary=4096, ngrid=512) -> float:
    """Supremum of ``tau`` over ``shape`` intersected with the open cone.

    Returns 0 when the intersection is empty.
    """

    def tau_in(pts):
        pts = np.atleast_2d(pts)
        zc, _ = frame.rel(pts)
        t = (frame.beta * zc**frame.order).real
        ok = zc != 0
        ang = np.full(len(pts), np.inf)
        ang[ok] = np.abs(wrap_angle(np.angle(zc[ok]) - frame.axis))
        return np.where(ang < frame.half_angle, t, -np.inf)

    tb = np.arange(nboundary) / nboundary
    vals_b = tau_in(shape.boundary_at(tb))
    xmin, xmax, ymin, ymax = shape.bbox()
    gx, gy = np.meshgrid(np.linspace(xmin, xmax, ngrid), np.linspace(ymin, ymax, ngrid))
    grid = np.stack([gx.ravel(), gy.ravel()], axis=1)
    grid = grid[shape.contains(grid)]
    best = -np.inf
    if len(grid):
        best = float(np.max(tau_in(grid)))
    ib = int(np.argmax(vals_b))
    if np.isfinite(vals_b[ib]):
        step = 1.0 / nboundary

        def f(t):
            return float(tau_in(shape.boundary_at(np.array([t])))[0])

        refined = _golden_max(f, tb[ib] - step, tb[ib] + step)
        best = max(best, float(vals_b[ib]), refined)
    if not np.isfinite(best) or best <= 0:
        return 0.0
    return best
