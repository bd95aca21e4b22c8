"""Acceptance criteria 1-10.

Each test records one PASS/FAIL line (collected in the terminal summary and
printed immediately) before asserting at the stated tolerance.
"""
import math
import time

import numpy as np
import pytest
from scipy.spatial import cKDTree

from enclosure.cgo import ProbeParams, WaveNumbers
from enclosure.config import RunConfig
from enclosure.fem import generate_mesh
from enclosure.geometry import ConeFrame, Disc, DomainSpec, Ellipse, MaterialConfig, sup_tau
from enclosure.indicator import ForwardModel
from enclosure.reconstruct import (
    DECAY,
    GROWTH,
    ResolutionCheck,
    estimate_s_star,
    fit_slope_free,
    h_sweep,
    slope_rate_check,
    trace_boundary,
)
from enclosure.validate import (
    suite_cgo_residual,
    suite_fem_convergence,
    suite_identities,
    suite_remainder_scaling,
    suite_vekua,
)

from .conftest import ACCEPTANCE_LINES

S_STAR = 3.3
REF_RANGE = (1 / 3.7, 1 / 2.9)
# carve-out run: finer mesh, and samples whose CGO reproduction error at the
# probed level exceeds 10% are left out of the slope fit
CARVE_MESH = 0.01
CARVE_TOL = 0.01
CARVE_RESOLUTION_TOL = 0.1


def report(n, ok, text):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture(scope="module")
def ref_sweeps(ref_model, frame, waves, base):
    """Sweeps at the levels checked by criteria 7 and 8, with their wall time."""
    out = {}
    for t in (2.9, 3.0, 3.1, 3.5, 3.6, 3.7):
        t0 = time.perf_counter()
        out[t] = h_sweep(ref_model, frame, waves, base, 1 / t)
        out[t].seconds = time.perf_counter() - t0
    return out


def test_criterion_1_vekua():
    res = suite_vekua(np.random.default_rng(1))
    ok = res.measured <= 1e-6 and res.seconds < 5
    report(1, ok, f"Vekua Helmholtz residual {res.measured:.2e} <= 1e-6 ({res.seconds:.1f} s)")
    assert ok


def test_criterion_2_cgo_residual(domain, material, frame):
    res = suite_cgo_residual(domain, material, frame, np.random.default_rng(2), hs=(0.5, 0.2, 0.1), orders=(1, 2), npts=10)
    ok = res.measured <= 1e-4 and res.seconds < 30
    report(2, ok, f"CGO Navier residual {res.measured:.2e} <= 1e-4 over N in {{1,2}}, h in {{0.5,0.2,0.1}} ({res.seconds:.1f} s)")
    assert ok


def test_criterion_3_remainder_scaling(domain, material, frame):
    res = suite_remainder_scaling(domain, material, frame, np.random.default_rng(3), hs=(0.4, 0.2, 0.1), npts=10)
    lo, hi = res.details["min"], res.details["max"]
    ok = 0.35 <= lo and hi <= 0.65 and res.seconds < 5
    report(3, ok, f"|R_h/2|/|R_h| in [{lo:.3f}, {hi:.3f}] within [0.35, 0.65] ({res.seconds:.1f} s)")
    assert ok


def test_criterion_4_fem_convergence(domain, material):
    res = suite_fem_convergence(domain, material, (0.08, 0.04, 0.02), 1.8)
    ok = res.measured >= 1.8 and res.seconds < 120
    orders = ", ".join(f"{k}: {', '.join(f'{v:.2f}' for v in vs)}" for k, vs in res.details.items())
    report(4, ok, f"plane-wave L2 orders ({orders}) >= 1.8 ({res.seconds:.1f} s)")
    assert ok


CONTRASTS = [(0.0, 1.0), (0.0, 2.0), (-0.4, -0.4)]


@pytest.fixture(scope="module")
def identity_matrix(domain, frame, waves):
    params = ProbeParams(1 / 3.2, 0.16, 0.05)
    rows = []
    t0 = time.perf_counter()
    for lam_d, mu_d in CONTRASTS:
        for shape in (Disc(lam_d, mu_d, (3.0, 0.2), 0.3), Ellipse(lam_d, mu_d, (3.1, -0.1), (0.35, 0.2), 0.5)):
            mat = MaterialConfig(2.0, 1.0, 1.0, (shape,))
            model = ForwardModel(generate_mesh(domain, mat, 0.02), mat)
            rows.append(suite_identities(model, frame, waves, params).details)
    return rows, time.perf_counter() - t0


def test_criterion_5_identities(identity_matrix):
    rows, secs = identity_matrix
    worst = max(max(r["identity_a"], r["identity_b"]) for r in rows)
    ok = len(rows) == 6 and worst <= 1e-8 and secs < 180
    report(5, ok, f"max identity deviation {worst:.2e} * scale <= 1e-8 on 6 configurations ({secs:.1f} s)")
    assert ok


def test_criterion_6_sandwich(identity_matrix):
    rows, _ = identity_matrix
    worst = max(r["sandwich_slack"] for r in rows)
    ok = worst <= 1e-8
    report(6, ok, f"lower <= Re E <= upper, worst slack {worst:.2e} * scale <= 1e-8 on 6 configurations")
    assert ok


def test_criterion_7_dichotomy(ref_model, frame, waves, base, ref_sweeps):
    decay = {t: ref_sweeps[t].slope for t in (3.5, 3.6, 3.7)}
    growth = {t: ref_sweeps[t].slope for t in (2.9, 3.0, 3.1)}
    ok_a = all(m < -0.05 for m in decay.values()) and all(ref_sweeps[t].classification == DECAY for t in decay)
    ok_b = all(m > 0.05 for m in growth.values()) and all(ref_sweeps[t].classification == GROWTH for t in growth)
    t0 = time.perf_counter()
    est = estimate_s_star(ref_model, frame, waves, base, REF_RANGE, 0.05)
    secs = time.perf_counter() - t0
    evals = sum(len(sw.samples) for sw in est.sweeps)
    ok_c = abs(est.s_star - S_STAR) <= 0.165 and evals <= 40
    fmt = lambda d: ", ".join(f"{t:g}: {m:+.3f}" for t, m in d.items())  # noqa: E731
    report(
        7,
        ok_a and ok_b and ok_c,
        f"(a) decay slopes {fmt(decay)} < -0.05; (b) growth slopes {fmt(growth)} > 0.05; "
        f"(c) s_* = {est.s_star:.4f}, |error| {abs(est.s_star - S_STAR):.4f} <= 0.165 "
        f"({evals} <= 40 indicator evaluations, one factorisation pair, {secs:.1f} s)",
    )
    assert ok_a, decay
    assert ok_b, growth
    assert ok_c, (est.s_star, evals)


def test_criterion_8_rate(ref_sweeps):
    sw = ref_sweeps[3.0]
    rep = slope_rate_check(sw, S_STAR, 0.05)
    m = sw.slope
    target = 2 * (S_STAR - 3.0)
    free_m, free_c = fit_slope_free(sw.h[-sw.window:], sw.absE[-sw.window:])
    ok = abs(m - target) <= 0.4 * target
    report(
        8,
        ok,
        f"prefactor-corrected slope (c = {sw.prefactor:g}) {m:.3f} vs {target:.3f}: |dev| {abs(m - target):.3f} <= {0.4 * target:.3f} "
        f"(raw slope {sw.raw_slope:.3f}, free-c fit slope {free_m:.3f} with c = {free_c:.2f})",
    )
    assert rep["case"] == GROWTH
    assert ok


def test_criterion_9_carveout():
    domain = DomainSpec((3.0, 0.0), 1.0)
    disc = Disc(0.0, 2.0, (3.0, 0.2), 0.3)
    mat = MaterialConfig(2.0, 1.0, 1.0, (disc,))
    waves = WaveNumbers.from_material(mat)
    frames = []
    for k in range(8):
        th = k * math.pi / 4
        frames.append(ConeFrame((3 - 3 * math.cos(th), -3 * math.sin(th)), 1, th))
    cfg = RunConfig(domain, mat, cones=tuple(frames))
    ranges = [cfg.d_range(fr) for fr in frames]  # automatic ranges from tau on the domain
    truth = [sup_tau(fr, disc) for fr in frames]
    t0 = time.perf_counter()
    model = ForwardModel(generate_mesh(domain, mat, CARVE_MESH), mat)
    rec = trace_boundary(
        model, frames, waves, ProbeParams(1.0, 0.5, 0.05), ranges, CARVE_TOL,
        grid_n=400, s_star_true=truth,
        resolution=ResolutionCheck(model, waves), resolution_tol=CARVE_RESOLUTION_TOL,
    )
    secs = time.perf_counter() - t0
    X, Y = rec.grid_points()
    P = np.column_stack([X.ravel(), Y.ravel()])
    carved = rec.mask.ravel()
    violations = int(np.sum(carved & disc.contains(P)))
    # two-sided Hausdorff distance between the uncarved region and the hull of
    # D (the disc itself), both sampled on the grid plus the boundary circle
    keep = P[domain.contains(P) & ~carved]
    phi = np.linspace(0, 2 * np.pi, 2000, endpoint=False)
    hull = np.vstack([P[disc.contains(P)], np.column_stack([3.0 + 0.3 * np.cos(phi), 0.2 + 0.3 * np.sin(phi)])])
    hausdorff = max(
        float(np.max(np.maximum(np.hypot(keep[:, 0] - 3.0, keep[:, 1] - 0.2) - 0.3, 0.0))),
        float(np.max(cKDTree(keep).query(hull)[0])),
    )
    errors = [e for e in rec.errors if e is not None]
    gaps = ", ".join(f"{e.carve_level - t:+.3f}" for e, t in zip(rec.estimates, truth) if e is not None)
    ok_sound = violations == 0 and not errors
    ok_haus = hausdorff <= 0.1
    report(
        9,
        ok_sound and ok_haus and secs < 1800,
        f"8 cones, 400x400 grid: {violations} violations; Hausdorff {hausdorff:.3f} (bound 0.1); "
        f"carve level minus s_* per cone [{gaps}] (meshSize {CARVE_MESH:g}, {secs:.0f} s)",
    )
    assert ok_sound, (violations, errors)
    assert ok_haus, hausdorff
    assert secs < 1800


def test_criterion_10_negative_control(domain, frame, waves, base):
    mat = MaterialConfig(2.0, 1.0, 1.0, ())
    t0 = time.perf_counter()
    model = ForwardModel(generate_mesh(domain, mat, 0.02), mat)
    d_min, d_max = RunConfig(domain, mat, cones=(frame,)).d_range(frame)
    levels = np.linspace(1 / d_max, 1 / d_min, 7)
    sweeps = [h_sweep(model, frame, waves, base, 1 / t) for t in levels]
    secs = time.perf_counter() - t0
    all_decay = all(sw.classification == DECAY for sw in sweeps)
    at_floor = all(s.absE <= s.floor for sw in sweeps for s in sw.samples)
    ok = all_decay and at_floor and secs < 120
    report(10, ok, f"empty D: decay at all {len(levels)} levels 1/d in [{levels[0]:.2f}, {levels[-1]:.2f}], every |E| at the floor ({secs:.1f} s)")
    assert ok
