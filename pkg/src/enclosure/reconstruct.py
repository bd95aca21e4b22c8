"""(d, h) sweeps of the indicator, growth/decay classification and s_* estimation.

For a fixed cone and level ``1/d`` the indicator behaves like
``|E| ~ C h^{-c} exp(m/h)`` as ``h -> 0``; the sign of the exponential rate
``m`` decides between decay (the truncated cone misses the inclusion) and
growth. ``m`` is estimated by least squares of ``log|E| + c log h`` against
``1/h`` on the smallest-h window, with the prefactor exponent ``c`` fixed
(``c = 0`` fits the raw log-slope).
"""
from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .cgo import ProbeParams, WaveNumbers, cgo_field, probe_trace, rho_of
from .geometry import ConeFrame, DomainSpec, in_cone, level_curve, tau
from .indicator import ForwardModel, IndicatorSample

DEFAULT_H_GRID = (0.25, 0.2, 0.16, 0.128, 0.1024, 0.08)
THETA_PLUS = 0.05
THETA_MINUS = 0.05
DEFAULT_WINDOW = 4
# h^{-3+1/alpha} with alpha = 1: the smallest prefactor among Lipschitz
# boundaries, so the correction never pushes a growing sweep toward decay
DEFAULT_PREFACTOR = 2.0
RESOLUTION_WARN = 0.5

GROWTH, DECAY, INCONCLUSIVE = "growth", "decay", "inconclusive"


class RangeError(ValueError):
    """The configured d-range does not bracket s_*."""


def fit_slope(h, absE, prefactor=0.0):
    """Least-squares slope and intercept of ``log|E| + c log h`` against ``1/h``."""
    h = np.asarray(h, dtype=float)
    y = np.log(np.maximum(np.asarray(absE, dtype=float), np.finfo(float).tiny)) + prefactor * np.log(h)
    m, a = np.polyfit(1.0 / h, y, 1)
    return float(m), float(a)


def fit_slope_free(h, absE):
    """Fit ``log|E| = a + m/h - c log h`` with ``c`` free; returns ``(m, c)``."""
    h = np.asarray(h, dtype=float)
    y = np.log(np.maximum(np.asarray(absE, dtype=float), np.finfo(float).tiny))
    X = np.column_stack([np.ones_like(h), 1.0 / h, -np.log(h)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return float(coef[1]), float(coef[2])


def classify(slope, theta_plus=THETA_PLUS, theta_minus=THETA_MINUS):
    if slope > theta_plus:
        return GROWTH
    if slope < -theta_minus:
        return DECAY
    return INCONCLUSIVE


def check_h_grid(h_grid, window=DEFAULT_WINDOW):
    h = np.asarray(h_grid, dtype=float)
    if h.ndim != 1 or len(h) < window:
        raise ValueError(f"hGrid needs at least {window} values")
    if not np.all((h > 0) & (h <= 1)):
        raise ValueError("hGrid values must lie in (0, 1]")
    if not np.all(np.diff(h) < 0):
        raise ValueError("hGrid must be strictly decreasing")
    return h


@dataclass
class SweepResult:
    frame: ConeFrame
    d: float
    samples: list
    slope: float
    classification: str
    raw_slope: float = float("nan")
    prefactor: float = DEFAULT_PREFACTOR
    window: int = DEFAULT_WINDOW
    flags: list = field(default_factory=list)

    @property
    def h(self):
        return np.array([s.h for s in self.samples])

    @property
    def absE(self):
        return np.array([s.absE for s in self.samples])

    def refit(self, skip_last=0):
        """Classification on the window shifted ``skip_last`` points toward larger h."""
        n = len(self.samples) - skip_last
        if n < self.window:
            return None
        sl = slice(n - self.window, n)
        m, _ = fit_slope(self.h[sl], self.absE[sl], self.prefactor)
        return classify(m)


def _bits(x):
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def noise_factor(level, seed, key, d, h):
    """Deterministic multiplicative perturbation ``1 + eta`` for one sample."""
    if not level:
        return 1.0
    ss = np.random.SeedSequence([int(seed), int(key), _bits(d), _bits(h)])
    return 1.0 + float(np.random.default_rng(ss).uniform(-level, level))


def indicator_sample(model: ForwardModel, frame, waves, base: ProbeParams, d, h) -> IndicatorSample:
    params = replace(base, d=float(d), h=float(h))
    return model.indicator(probe_trace(frame, waves, params, model.mesh), d, h)


def h_sweep(
    model: ForwardModel,
    frame: ConeFrame,
    waves: WaveNumbers,
    base: ProbeParams,
    d: float,
    h_grid: Sequence[float] = DEFAULT_H_GRID,
    *,
    window: int = DEFAULT_WINDOW,
    prefactor: float = DEFAULT_PREFACTOR,
    noise: float = 0.0,
    seed: int = 0,
    key: int = 0,
    jobs: int = 1,
    resolution: "ResolutionCheck | None" = None,
    resolution_tol: float | None = None,
) -> SweepResult:
    """Indicator samples over ``h_grid`` at level ``1/d`` and their classification.

    ``noise`` perturbs every ``|E|`` by a factor ``1 + eta``, ``eta`` uniform
    in ``[-noise, noise]``, drawn from a stream keyed on ``(seed, key, d, h)``.
    With ``resolution`` and ``resolution_tol`` set, samples whose CGO
    reproduction error at level ``1/d`` exceeds the tolerance are left out of
    the fit; with fewer than ``window`` usable samples the sweep is
    inconclusive.
    """
    h = check_h_grid(h_grid, window)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            samples = list(pool.map(lambda hh: indicator_sample(model, frame, waves, base, d, hh), h))
    else:
        samples = [indicator_sample(model, frame, waves, base, d, hh) for hh in h]
    flags = []
    if noise:
        samples = [replace(s, absE=s.absE * noise_factor(noise, seed, key, d, s.h)) for s in samples]
        flags.append("noise")
    absE = np.array([s.absE for s in samples])
    use = np.arange(len(h))
    if resolution is not None and resolution_tol is not None:
        err = np.array([resolution.error(frame, hh, 1.0 / d) for hh in h])
        use = np.flatnonzero(~(err > resolution_tol))
        if len(use) < len(h):
            flags.append("under-resolved h: " + ", ".join(f"{hh:g}" for hh in h[err > resolution_tol]))
    short = len(use) < window
    tail = use[-window:] if not short else np.arange(len(h) - window, len(h))
    m, _ = fit_slope(h[tail], absE[tail], prefactor)
    raw, _ = fit_slope(h[tail], absE[tail], 0.0)
    below = sum(s.absE <= s.floor for s in samples)
    if below >= 2:
        cls = DECAY
        flags.append("underflow floor")
    elif short:
        cls = INCONCLUSIVE
        flags.append(f"only {len(use)} resolved samples")
    else:
        cls = classify(m)
    return SweepResult(frame, float(d), samples, m, cls, raw, prefactor, window, flags)


@dataclass
class DirectionEstimate:
    frame: ConeFrame
    s_star: float
    d_star: float
    bisection: list  # (d, classification, slope)
    touching_curve: np.ndarray
    bracket: tuple = (float("nan"), float("nan"))  # final (growth, decay) levels in 1/d
    carve_level: float = float("nan")  # lowest level with an observed decay
    sweeps: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    resolution: dict = field(default_factory=dict)
    slope_checks: list = field(default_factory=list)

    @property
    def detected(self):
        return self.s_star > 0


def estimate_s_star(
    model: ForwardModel,
    frame: ConeFrame,
    waves: WaveNumbers,
    base: ProbeParams,
    d_range: tuple[float, float],
    tol: float,
    h_grid: Sequence[float] = DEFAULT_H_GRID,
    *,
    curve_points: int = 200,
    check_resolution: bool = False,
    **sweep_kw,
) -> DirectionEstimate:
    """Bisection in ``1/d`` between decay at ``dMin`` and growth at ``dMax``.

    Inconclusive sweeps count as not decaying, so only observed decay moves
    the upper end of the bracket.
    """
    d_min, d_max = map(float, d_range)
    if not 0 < d_min < d_max:
        raise ValueError("dRange needs 0 < dMin < dMax")
    if not tol > 0:
        raise ValueError("bisection tolerance must be positive")
    trace, sweeps = [], []

    def run(d):
        sw = h_sweep(model, frame, waves, base, d, h_grid, **sweep_kw)
        sweeps.append(sw)
        trace.append((sw.d, sw.classification, sw.slope))
        return sw

    hi_sw = run(d_min)
    if hi_sw.classification != DECAY:
        raise RangeError(f"s_* outside configured range: {hi_sw.classification} at dMin = {d_min:g} (1/d = {1 / d_min:g})")
    lo_sw = run(d_max)
    bbox = model.mesh.domain.bbox() if model.mesh.domain is not None else None
    if lo_sw.classification == DECAY:
        est = DirectionEstimate(frame, 0.0, math.inf, trace, np.empty((0, 2)), (math.nan, 1 / d_max), 1 / d_max, sweeps)
        est.flags.append("no detection in this cone")
        return est
    t_lo, t_hi = 1 / d_max, 1 / d_min
    # roundoff in 1/(1/t) must not cost an extra halving
    while t_hi - t_lo > tol * (1 + 1e-9):
        mid = 0.5 * (t_lo + t_hi)
        sw = run(1 / mid)
        if sw.classification == DECAY:
            t_hi, hi_sw = mid, sw
        else:
            t_lo, lo_sw = mid, sw
    s = 0.5 * (t_lo + t_hi)
    curve = level_curve(frame, 1 / s, bbox, curve_points) if bbox is not None else np.empty((0, 2))
    est = DirectionEstimate(frame, s, 1 / s, trace, curve, (t_lo, t_hi), t_hi, sweeps)
    if lo_sw.refit(1) not in (None, lo_sw.classification) or hi_sw.refit(1) not in (None, hi_sw.classification):
        est.flags.append("bracket relies on the smallest h")
    if not classification_consistent(trace):
        est.flags.append("non-monotone classification")
    if check_resolution:
        res = sweep_kw.get("resolution") or ResolutionCheck(model, waves, base.quad_order)
        h = np.asarray(h_grid, dtype=float)
        for hh in h[len(h) - sweep_kw.get("window", DEFAULT_WINDOW):]:
            err = res.error(frame, hh, s)
            est.resolution[float(hh)] = err
            if err is not None and err > RESOLUTION_WARN:
                est.flags.append(f"under-resolved at h={hh:g} (CGO reproduction error {err:.2g})")
    return est


def classification_consistent(trace) -> bool:
    """Growth at ``d1`` implies growth at every ``d2 > d1``."""
    pts = sorted((d, c) for d, c, *_ in trace)
    seen_growth = False
    for _, c in pts:
        if c == GROWTH:
            seen_growth = True
        elif seen_growth and c == DECAY:
            return False
    return True


class ResolutionCheck:
    """Cached nodal CGO reproduction errors per (frame, h).

    The relative error does not depend on the level used to scale the data,
    so one background solve per (frame, h) serves every d.
    """

    def __init__(self, model: ForwardModel, waves: WaveNumbers, quad_order=48):
        self.model = model
        self.waves = waves
        self.quad_order = quad_order
        self._cache = {}
        self._interior = np.zeros(model.mesh.n_nodes, dtype=bool)
        self._interior[model.mesh.interior_nodes()] = True

    def nodal(self, frame, h):
        key = (frame, float(h))
        if key not in self._cache:
            self._cache[key] = _nodal_error(self.model, frame, self.waves, h, self.quad_order)
        return self._cache[key]

    def error(self, frame, h, level):
        """Largest relative error on interior nodes with ``tau >= level``; None if unavailable."""
        got = self.nodal(frame, h)
        if got is None:
            return None
        t, err = got
        sel = self._interior & (t >= level)
        return float(err[sel].max()) if np.any(sel) else 0.0


def _nodal_error(model, frame, waves, h, quad_order):
    mesh = model.mesh
    nodes = mesh.nodes
    if not np.all(in_cone(frame, nodes[mesh.boundary_nodes])):
        return None
    t = tau(frame, nodes)
    Q, _ = cgo_field(frame, waves, h, nodes, quad_order)
    # scale so the largest nodal value is O(1)
    v = np.exp((rho_of(frame, nodes) - t.max()) / h)[:, None] * Q
    u = model.bg.solve(v[mesh.boundary_nodes]).values
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.linalg.norm(u - v, axis=1) / np.linalg.norm(v, axis=1)
    return t, np.nan_to_num(err, nan=np.inf)


def resolution_error(model: ForwardModel, frame, waves, h, level, quad_order=48):
    """Relative error of the discrete background solution with exact CGO data.

    The CGO field solves the background equation, so the Dirichlet solve with
    its trace must reproduce it. The error is measured on interior nodes with
    ``tau >= level``. Returns None when part of the boundary lies outside the
    open cone, where the field is not defined.
    """
    return ResolutionCheck(model, waves, quad_order).error(frame, h, level)


def slope_rate_check(sweep: SweepResult, s_star_true: float, eps_band: float, touching_tol=1e-9) -> dict:
    """Compare the fitted exponential rate with the theoretical one.

    Growth (``1/d < s_*``): rate ``2(s_* - 1/d)``. Decay: rate
    ``-2(1/d - s_d)`` with ``s_d = max(1/(d+eps), s_*)``. The level exactly at
    ``s_*`` is reported as touching and not checked.
    """
    t = 1.0 / sweep.d
    tail = slice(len(sweep.samples) - sweep.window, len(sweep.samples))
    h, absE = sweep.h[tail], sweep.absE[tail]
    free_m, free_c = fit_slope_free(h, absE)
    rep = {
        "d": sweep.d,
        "inv_d": t,
        "slope": sweep.slope,
        "raw_slope": sweep.raw_slope,
        "prefactor": sweep.prefactor,
        "free_slope": free_m,
        "free_prefactor": free_c,
    }
    if abs(t - s_star_true) <= touching_tol:
        rep.update(case="touching", theory=None, rel_dev=None, ok=None)
        return rep
    if t < s_star_true:
        theory = 2 * (s_star_true - t)
        dev = abs(sweep.slope - theory) / abs(theory)
        rep.update(case=GROWTH, theory=theory, rel_dev=dev, ok=bool(dev <= 0.4))
    else:
        s_d = max(1.0 / (sweep.d + eps_band), s_star_true)
        theory = -2 * (t - s_d)
        dev = abs(sweep.slope - theory) / abs(theory) if theory else math.inf
        rep.update(case=DECAY, theory=theory, rel_dev=dev, ok=bool(sweep.slope < 0))
    return rep


@dataclass
class Reconstruction:
    estimates: list  # DirectionEstimate or None per frame
    errors: list  # message or None per frame
    grid: tuple  # (x0, x1, y0, y1, n)
    mask: np.ndarray  # (n, n) bool, row j is y_j, column i is x_i

    def grid_points(self):
        x0, x1, y0, y1, n = self.grid
        X, Y = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n))
        return X, Y


def carveout_mask(domain: DomainSpec, frames, levels, n=400):
    """Grid points of the closed domain with ``tau > level`` in some closed cone."""
    x0, x1, y0, y1 = domain.bbox()
    X, Y = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n))
    pts = np.column_stack([X.ravel(), Y.ravel()])
    mask = np.zeros(len(pts), dtype=bool)
    inside = domain.contains(pts)
    for fr, lev in zip(frames, levels):
        if lev is None or not np.isfinite(lev):
            continue
        zc, _ = fr.rel(pts)
        ok = inside & (zc != 0)
        cone = np.zeros(len(pts), dtype=bool)
        cone[ok] = in_cone(fr, pts[ok], closed=True)
        mask |= cone & (tau(fr, pts) > lev)
    return mask.reshape(n, n), (x0, x1, y0, y1, n)


def trace_boundary(
    model: ForwardModel,
    frames: Sequence[ConeFrame],
    waves: WaveNumbers,
    base: ProbeParams,
    d_range,
    tol: float,
    h_grid: Sequence[float] = DEFAULT_H_GRID,
    *,
    grid_n: int = 400,
    jobs: int = 1,
    s_star_true: Sequence[float] | None = None,
    **sweep_kw,
) -> Reconstruction:
    """Per-direction s_* estimates and the union of the certified carve-outs.

    ``d_range`` is one ``(dMin, dMax)`` pair or one pair per direction.
    Directions run concurrently; results keep the order of ``frames``. A
    direction whose range does not bracket s_* records the error and carves
    nothing.
    """
    frames = list(frames)
    if not frames:
        return Reconstruction([], [], (math.nan,) * 4 + (0,), np.zeros((0, 0), dtype=bool))
    ranges = list(d_range) if np.ndim(d_range) == 2 else [tuple(d_range)] * len(frames)
    if len(ranges) != len(frames):
        raise ValueError("one d-range per direction expected")

    def one(idx):
        try:
            est = estimate_s_star(model, frames[idx], waves, base, ranges[idx], tol, h_grid, key=idx, **sweep_kw)
        except RangeError as exc:
            return None, str(exc)
        if s_star_true is not None:
            est.slope_checks = [
                slope_rate_check(sw, s_star_true[idx], base.eps_band)
                for sw in est.sweeps
                if "underflow floor" not in sw.flags
            ]
        return est, None

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            out = list(pool.map(one, range(len(frames))))
    else:
        out = [one(i) for i in range(len(frames))]
    ests = [e for e, _ in out]
    errs = [m for _, m in out]
    levels = [e.carve_level if e is not None else None for e in ests]
    mask, grid = carveout_mask(model.mesh.domain, frames, levels, grid_n)
    return Reconstruction(ests, errs, grid, mask)


# ---------------------------------------------------------------------------
# output

CSV_HEADER = "N,theta0,apex_x,apex_y,d,h,re_E,im_E,abs_E,energyD,energyW,l2w"


def sample_row(frame, s) -> str:
    """One CSV line for an indicator sample; floats use the shortest round-trip form."""
    vals = (
        frame.axis, frame.apex[0], frame.apex[1], s.d, s.h,
        s.E.real, s.E.imag, s.absE, s.energyD, s.energyW, s.l2w,
    )
    return f"{frame.order}," + ",".join(repr(float(v)) for v in vals)


def sweep_rows(sweeps):
    for sw in sweeps:
        for s in sw.samples:
            yield sample_row(sw.frame, s)


def write_sweep_csv(path, sweeps):
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in sweep_rows(sweeps):
            fh.write(row + "\n")


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def reconstruction_json(rec: Reconstruction) -> dict:
    dirs = []
    for est, err in zip(rec.estimates, rec.errors):
        if est is None:
            dirs.append({"error": err})
            continue
        fr = est.frame
        dirs.append(
            {
                "N": fr.order,
                "theta0": fr.axis,
                "apex": list(fr.apex),
                "s_star": est.s_star,
                "d_star": _clean(est.d_star),
                "bracket": [_clean(v) for v in est.bracket],
                "carve_level": _clean(est.carve_level),
                "bisection": [{"d": d, "inv_d": 1 / d, "classification": c, "slope": m} for d, c, m in est.bisection],
                "slope_checks": [{k: _clean(v) for k, v in r.items()} for r in est.slope_checks],
                "flags": list(est.flags),
                "resolution": {repr(k): v for k, v in est.resolution.items()},
                "touching_curve": est.touching_curve.tolist(),
            }
        )
    x0, x1, y0, y1, n = rec.grid
    mask = ["".join("1" if v else "0" for v in row) for row in rec.mask]
    return {
        "directions": dirs,
        "carveout": {"grid": {"x0": _clean(x0), "x1": _clean(x1), "y0": _clean(y0), "y1": _clean(y1), "n": n}, "mask": mask},
    }


def write_svg(path, domain: DomainSpec, material, rec: Reconstruction | None = None, size=480):
    """Domain, inclusions, touching level curves and carve-out shading."""
    x0, x1, y0, y1 = domain.bbox()
    pad = 0.05 * (x1 - x0)
    x0, x1, y0, y1 = x0 - pad, x1 + pad, y0 - pad, y1 + pad
    sc = size / (x1 - x0)

    def P(x, y):
        return f"{(x - x0) * sc:.2f},{(y1 - y) * sc:.2f}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    if rec is not None and rec.mask.size:
        gx0, gx1, gy0, gy1, n = rec.grid
        dx, dy = (gx1 - gx0) / (n - 1), (gy1 - gy0) / (n - 1)
        for j, row in enumerate(rec.mask):
            i = 0
            while i < n:
                if not row[i]:
                    i += 1
                    continue
                k = i
                while k < n and row[k]:
                    k += 1
                xa, yb = gx0 + (i - 0.5) * dx, gy0 + (j + 0.5) * dy
                out.append(
                    f'<rect x="{(xa - x0) * sc:.2f}" y="{(y1 - yb) * sc:.2f}" width="{(k - i) * dx * sc:.2f}" '
                    f'height="{dy * sc:.2f}" fill="#c8d8f0"/>'
                )
                i = k
    c, r = domain.center, domain.radius
    out.append(f'<circle cx="{(c[0] - x0) * sc:.2f}" cy="{(y1 - c[1]) * sc:.2f}" r="{r * sc:.2f}" fill="none" stroke="black"/>')
    for shape in material.inclusions:
        pts = shape.boundary(200)
        out.append(f'<polygon points="{" ".join(P(x, y) for x, y in pts)}" fill="none" stroke="#b03030" stroke-width="1.5"/>')
    if rec is not None:
        for est in rec.estimates:
            if est is None or len(est.touching_curve) < 2:
                continue
            pts = est.touching_curve
            out.append(f'<polyline points="{" ".join(P(x, y) for x, y in pts)}" fill="none" stroke="#2050a0"/>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
