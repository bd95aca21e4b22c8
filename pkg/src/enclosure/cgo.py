"""CGO solutions with complex polynomial phases and the probing data built from them.

The scalar potentials are Vekua transforms of ``exp(rho/h)``::

    T_w(u)(x) = u(x) - int_0^1 w|x-a| J1(w|x-a| s) u((1-s^2)(x-a) + a) ds

which, for ``u = exp(rho/h)``, factor as ``exp(rho/h) (1 + R)`` with a
remainder ``R`` whose exponent has nonpositive real part inside the cone.
The displacement ``v = grad(phi) + rot(psi)`` solves the background Navier
equation, and the probe multiplies it by a cutoff and ``exp(-1/(h d))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .geometry import ConeFrame, GeometryError, MaterialConfig, _as_points, wrap_angle

DEFAULT_QUAD_ORDER = 48
MAX_QUAD_ORDER = 1536
QUAD_RTOL = 1e-10


@dataclass(frozen=True)
class WaveNumbers:
    k1: float
    k2: float

    @classmethod
    def from_material(cls, material: MaterialConfig) -> "WaveNumbers":
        return cls.from_lame(material.lambda0, material.mu0, material.k)

    @classmethod
    def from_lame(cls, lambda0, mu0, k) -> "WaveNumbers":
        if not (lambda0 + 2 * mu0 > 0 and mu0 > 0):
            raise GeometryError("wave numbers need lambda0+2mu0 > 0 and mu0 > 0")
        return cls(math.sqrt(k * k / (lambda0 + 2 * mu0)), math.sqrt(k * k / mu0))


@dataclass(frozen=True)
class ProbeParams:
    """Parameters of one probe ``p_{d,h}``.

    ``eps_band`` is the width (in d) of the cutoff transition and
    ``angular_guard`` the angular margin of the cutoff inside the cone; it
    defaults to ``pi/(8N)`` when left as None.
    """

    d: float
    h: float
    eps_band: float = 0.05
    quad_order: int = DEFAULT_QUAD_ORDER
    angular_guard: float | None = None

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("d must be positive")
        if not 0 < self.h <= 1:
            raise ValueError("h must lie in (0, 1]")
        if not self.eps_band > 0:
            raise ValueError("eps_band must be positive")
        if self.quad_order < 16:
            raise ValueError("quad_order must be at least 16")
        if self.angular_guard is not None and not self.angular_guard > 0:
            raise ValueError("angular_guard must be positive")

    def guard(self, frame: ConeFrame) -> float:
        return self.angular_guard if self.angular_guard is not None else math.pi / (8 * frame.order)


@dataclass
class ProbeValue:
    value: np.ndarray  # (n, 2) complex
    exponent: np.ndarray  # (n,) real, (tau - 1/d)/h


@lru_cache(maxsize=None)
def gauss_legendre01(n: int):
    """Gauss-Legendre nodes and weights on [0, 1] (cached, read-only)."""
    x, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (x + 1.0)
    w = 0.5 * w
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w


def bessel_j(order: int, z):
    """Bessel function of the first kind of order 0 or 1 for ``z >= 0``."""
    if order not in (0, 1):
        raise ValueError("only orders 0 and 1 are supported")
    za = np.asarray(z, dtype=float)
    if np.any(za < 0):
        raise ValueError("bessel_j: domain error, z must be nonnegative")
    j0, j1 = kernels.bessel_j01(np.atleast_1d(za))
    out = j0 if order == 0 else j1
    return float(out[0]) if za.ndim == 0 else out.reshape(za.shape)


def vekua(omega: float, u, x, apex=(0.0, 0.0), quad_order: int = DEFAULT_QUAD_ORDER):
    """Vekua transform ``T_omega(u)(x)`` about ``apex``.

    ``u`` is a vectorised callable taking an ``(m, 2)`` array of points.
    """
    pts, single = _as_points(x)
    a = np.asarray(apex, dtype=float)
    y = pts - a
    r = np.hypot(y[:, 0], y[:, 1])
    s, w = gauss_legendre01(quad_order)
    ux = np.asarray(u(pts))
    out = ux.astype(complex if np.iscomplexobj(ux) else float)
    if omega != 0.0:
        shrink = (1.0 - s * s)[None, :, None] * y[:, None, :] + a
        vals = np.asarray(u(shrink.reshape(-1, 2))).reshape(len(pts), len(s))
        j1 = bessel_j(1, omega * r[:, None] * s[None, :])
        out = out - omega * r * np.sum(w * j1 * vals, axis=1)
    return out[0] if single else out


def _check_in_cone(frame: ConeFrame, pts):
    zc, _ = frame.rel(pts)
    nz = zc != 0
    ang = np.zeros(len(pts))
    ang[nz] = np.abs(wrap_angle(np.angle(zc[nz]) - frame.axis))
    if np.any(ang > frame.half_angle + 1e-14):
        raise GeometryError("remainder defined only in the cone")


def _remainder(frame: ConeFrame, omega, h, pts, deriv, quad_order):
    """Remainder with automatic order doubling until two orders agree."""
    if not 0 < h <= 1:
        raise ValueError("h must lie in (0, 1]")
    _check_in_cone(frame, pts)
    args = (float(omega), frame.order, frame.beta, frame.apex, float(h))
    n = quad_order
    out = list(kernels.remainder(*args, pts, *gauss_legendre01(n), deriv))
    if omega == 0.0:
        return tuple(out)
    r = np.hypot(pts[:, 0] - frame.apex[0], pts[:, 1] - frame.apex[1])
    floor = 1e-14 * omega * r * (1 + omega * r)
    todo = np.arange(len(pts))
    while len(todo) and n < MAX_QUAD_ORDER:
        n *= 2
        cur = kernels.remainder(*args, pts[todo], *gauss_legendre01(n), deriv)
        bad = np.abs(cur[0] - out[0][todo]) > QUAD_RTOL * np.abs(cur[0]) + floor[todo]
        if deriv >= 1:
            diff = np.max(np.abs(cur[1] - out[1][todo]), axis=1)
            bad |= diff > QUAD_RTOL * np.max(np.abs(cur[1]), axis=1) + floor[todo]
        for k, c in enumerate(cur):
            if c is not None:
                out[k][todo] = c
        todo = todo[bad]
    return tuple(out)


def remainder_R(frame: ConeFrame, omega: float, h: float, x, quad_order=DEFAULT_QUAD_ORDER):
    """``R = exp(-rho/h) T_omega(exp(rho/h)) - 1`` in overflow-safe form."""
    pts, single = _as_points(x)
    R, _, _ = _remainder(frame, omega, h, pts, 0, quad_order)
    return complex(R[0]) if single else R


def remainder_R_grad(frame: ConeFrame, omega: float, h: float, x, quad_order=DEFAULT_QUAD_ORDER):
    pts, single = _as_points(x)
    _, g, _ = _remainder(frame, omega, h, pts, 1, quad_order)
    return g[0] if single else g


def remainder_R_hess(frame: ConeFrame, omega: float, h: float, x, quad_order=DEFAULT_QUAD_ORDER):
    pts, single = _as_points(x)
    _, _, H = _remainder(frame, omega, h, pts, 2, quad_order)
    return H[0] if single else H


def phase_derivatives(frame: ConeFrame, pts):
    """``rho``, its gradient ``(n, 2)`` and Hessian ``(n, 2, 2)``."""
    zc, _ = frame.rel(pts)
    N, beta = frame.order, frame.beta
    rho = beta * zc**N
    d1 = beta * N * zc ** (N - 1)
    grad = np.stack([d1, 1j * d1], axis=1)
    d2 = beta * N * (N - 1) * zc ** (N - 2) if N >= 2 else np.zeros_like(zc)
    hess = np.empty((len(zc), 2, 2), dtype=complex)
    hess[:, 0, 0] = d2
    hess[:, 0, 1] = hess[:, 1, 0] = 1j * d2
    hess[:, 1, 1] = -d2
    return rho, grad, hess


def cgo_field(frame: ConeFrame, waves: WaveNumbers, h: float, x, quad_order=DEFAULT_QUAD_ORDER, with_grad=False):
    """Amplitude ``Q`` and exponent ``rho/h`` with ``v_h = exp(rho/h) Q``.

    With ``with_grad=True`` also returns ``dQ[n, i, j] = dQ_i/dx_j``.
    """
    pts, single = _as_points(x)
    deriv = 2 if with_grad else 1
    R1, g1, H1 = _remainder(frame, waves.k1, h, pts, deriv, quad_order)
    R2, g2, H2 = _remainder(frame, waves.k2, h, pts, deriv, quad_order)
    rho, dr, ddr = phase_derivatives(frame, pts)
    Q = np.empty((len(pts), 2), dtype=complex)
    Q[:, 0] = (dr[:, 0] * (1 + R1) / h + g1[:, 0]) - (dr[:, 1] * (1 + R2) / h + g2[:, 1])
    Q[:, 1] = (dr[:, 1] * (1 + R1) / h + g1[:, 1]) + (dr[:, 0] * (1 + R2) / h + g2[:, 0])
    expo = rho / h
    if not with_grad:
        return (Q[0], expo[0]) if single else (Q, expo)
    dQ = np.empty((len(pts), 2, 2), dtype=complex)
    for j in range(2):
        dQ[:, 0, j] = (
            ddr[:, 0, j] * (1 + R1) / h + dr[:, 0] * g1[:, j] / h + H1[:, 0, j]
            - (ddr[:, 1, j] * (1 + R2) / h + dr[:, 1] * g2[:, j] / h + H2[:, 1, j])
        )
        dQ[:, 1, j] = (
            ddr[:, 1, j] * (1 + R1) / h + dr[:, 1] * g1[:, j] / h + H1[:, 1, j]
            + (ddr[:, 0, j] * (1 + R2) / h + dr[:, 0] * g2[:, j] / h + H2[:, 0, j])
        )
    if single:
        return Q[0], expo[0], dQ[0]
    return Q, expo, dQ


def scalar_potentials(frame: ConeFrame, waves: WaveNumbers, h: float, x, shift=0.0, quad_order=DEFAULT_QUAD_ORDER):
    """``exp(-shift/h) (phi_h, psi_h)``; ``shift`` keeps values in range."""
    pts, _ = _as_points(x)
    R1 = remainder_R(frame, waves.k1, h, pts, quad_order)
    R2 = remainder_R(frame, waves.k2, h, pts, quad_order)
    e = np.exp((np.asarray(rho_of(frame, pts)) - shift) / h)
    return e * (1 + R1), e * (1 + R2)


def rho_of(frame, pts):
    zc, _ = frame.rel(pts)
    return frame.beta * zc**frame.order


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6 * t - 15) + 10)


def cutoff(frame: ConeFrame, params: ProbeParams, x):
    """Cutoff equal to 1 on the truncated cone at ``d+eps`` and 0 off ``d+2 eps``.

    Product of a quintic smoothstep in ``tau`` and an angular guard that
    selects the in-cone branch of the level sets.
    """
    pts, single = _as_points(x)
    zc, _ = frame.rel(pts)
    t = (frame.beta * zc**frame.order).real
    lo = 1.0 / (params.d + 2 * params.eps_band)
    hi = 1.0 / (params.d + params.eps_band)
    S = _smoothstep((t - lo) / (hi - lo))
    ang = np.full(len(pts), np.inf)
    nz = zc != 0
    ang[nz] = np.abs(wrap_angle(np.angle(zc[nz]) - frame.axis))
    A = _smoothstep((frame.half_angle - ang) / params.guard(frame))
    out = S * A
    return float(out[0]) if single else out


def probe(frame: ConeFrame, waves: WaveNumbers, params: ProbeParams, x) -> ProbeValue:
    """Probe ``phi_d exp((rho - 1/d)/h) Q``; exactly zero off the cutoff support."""
    pts, single = _as_points(x)
    phi = np.atleast_1d(cutoff(frame, params, pts))
    value = np.zeros((len(pts), 2), dtype=complex)
    expo = (np.asarray(tau_of(frame, pts)) - 1.0 / params.d) / params.h
    live = phi > 0
    if np.any(live):
        Q, _ = cgo_field(frame, waves, params.h, pts[live], params.quad_order)
        e = np.exp((rho_of(frame, pts[live]) - 1.0 / params.d) / params.h)
        value[live] = (phi[live] * e)[:, None] * Q
    if single:
        return ProbeValue(value[0], expo[0])
    return ProbeValue(value, expo)


def tau_of(frame, pts):
    return rho_of(frame, pts).real


def probe_trace(frame: ConeFrame, waves: WaveNumbers, params: ProbeParams, mesh) -> np.ndarray:
    """Probe sampled at the mesh boundary nodes, shape ``(nb, 2)``."""
    pts = mesh.nodes[mesh.boundary_nodes]
    return probe(frame, waves, params, pts).value


def navier_residual(field, x, lambda0, mu0, k, step=1e-3):
    """Finite-difference ``div sigma0(v) + k^2 v`` for a callable field.

    ``field`` maps ``(m, 2)`` points to ``(m, 2)`` complex values. Uses a
    Richardson-extrapolated central difference stencil. Returns the
    residual and the magnitude scale of the individual terms.
    """
    pts, _ = _as_points(x)

    def second(delta):
        e1 = np.array([delta, 0.0])
        e2 = np.array([0.0, delta])
        f0 = field(pts)
        fxx = (field(pts + e1) - 2 * f0 + field(pts - e1)) / delta**2
        fyy = (field(pts + e2) - 2 * f0 + field(pts - e2)) / delta**2
        fxy = (field(pts + e1 + e2) - field(pts + e1 - e2) - field(pts - e1 + e2) + field(pts - e1 - e2)) / (4 * delta**2)
        return f0, fxx, fyy, fxy

    def terms(delta):
        f0, fxx, fyy, fxy = second(delta)
        # grad(div v) and laplacian of each component
        graddiv = np.stack([fxx[:, 0] + fxy[:, 1], fxy[:, 0] + fyy[:, 1]], axis=1)
        lap = fxx + fyy
        return f0, graddiv, lap

    f0, gd1, lp1 = terms(step)
    _, gd2, lp2 = terms(step / 2)
    gd = (4 * gd2 - gd1) / 3
    lp = (4 * lp2 - lp1) / 3
    res = (lambda0 + mu0) * gd + mu0 * lp + k * k * f0
    scale = np.abs((lambda0 + mu0) * gd) + np.abs(mu0 * lp) + np.abs(k * k * f0)
    return res, scale


def probe_residual(frame: ConeFrame, waves: WaveNumbers, params: ProbeParams, x, lambda0, mu0, k, step=None):
    """Diagnostic source ``g_h = div sigma0(p) + k^2 p`` by finite differences."""
    if step is None:
        step = 0.02 * params.h
    return navier_residual(lambda p: probe(frame, waves, params, p).value, x, lambda0, mu0, k, step)
