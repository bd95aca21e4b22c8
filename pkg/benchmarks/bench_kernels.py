"""Compare the compiled and NumPy kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--full]

``--full`` adds an end-to-end indicator sweep at meshSize 0.02 per backend.
Each line reports the best wall time over ``--repeat`` runs, the speedup of
the compiled backend and the maximum relative difference between backends.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from enclosure import kernels


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def rel_diff(a, b):
    if isinstance(a, tuple):
        return max(rel_diff(x, y) for x, y in zip(a, b) if x is not None)
    scale = np.abs(b).max() or 1.0
    return float(np.abs(np.asarray(a) - np.asarray(b)).max() / scale)


def cases():
    rng = np.random.default_rng(0)
    z = np.linspace(0.0, 40.0, 200_000)
    x, w = np.polynomial.legendre.leggauss(96)
    nodes, weights = 0.5 * (x + 1.0), 0.5 * w
    pts = rng.uniform(2.0, 4.0, size=(2000, 2))
    from enclosure.fem import generate_mesh
    from enclosure.geometry import DomainSpec, MaterialConfig

    mesh = generate_mesh(DomainSpec((3.0, 0.0), 1.0), MaterialConfig(2.0, 1.0, 1.0, ()), 0.02)
    xy, tri = mesh.nodes, mesh.triangles
    lam = np.full(len(tri), 2.0)
    mu = np.ones(len(tri))
    grads, area = kernels.p1_element_gradients(xy, tri)
    return {
        "bessel_j01 (2e5 args)": lambda: kernels.bessel_j01(z),
        "remainder N=1 deriv=2 (2000 pts)": lambda: kernels.remainder(1.2, 1, 1.0, (0.0, 0.0), 0.1, pts, nodes, weights, 2),
        "remainder N=2 deriv=0 (2000 pts)": lambda: kernels.remainder(1.2, 2, np.exp(-0.4j), (0.0, 0.0), 0.1, pts, nodes, weights, 0),
        f"p1_element_gradients ({len(tri)} tris)": lambda: kernels.p1_element_gradients(xy, tri),
        f"elasticity_blocks ({len(tri)} tris)": lambda: kernels.elasticity_blocks(grads, area, lam, mu),
    }


def sweep_once():
    from enclosure.cgo import ProbeParams, WaveNumbers
    from enclosure.fem import generate_mesh
    from enclosure.geometry import ConeFrame, Disc, DomainSpec, MaterialConfig
    from enclosure.indicator import ForwardModel
    from enclosure.reconstruct import DEFAULT_H_GRID, h_sweep

    mat = MaterialConfig(2.0, 1.0, 1.0, (Disc(0.0, 2.0, (3.0, 0.2), 0.3),))
    model = ForwardModel(generate_mesh(DomainSpec((3.0, 0.0), 1.0), mat, 0.02), mat)
    frame = ConeFrame((0.0, 0.0), 1, 0.0)
    return lambda: h_sweep(model, frame, WaveNumbers.from_material(mat), ProbeParams(1.0, 0.5, 0.05), 1 / 3.0, DEFAULT_H_GRID).slope


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--full", action="store_true", help="also time an end-to-end h-sweep")
    args = ap.parse_args(argv)
    have = kernels.available()
    print(f"backends available: {', '.join(have)}")
    if "cython" not in have:
        print("compiled backend not built; nothing to compare")
        return 1
    prev = kernels.backend()
    print(f"{'kernel':42s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, fn in cases().items():
        kernels.use_backend("python")
        tp, ref = best_of(fn, args.repeat)
        kernels.use_backend("cython")
        tc, out = best_of(fn, args.repeat)
        print(f"{name:42s} {tp:11.4f} {tc:11.4f} {tp / tc:8.2f} {rel_diff(out, ref):13.2e}")
    if args.full:
        fn = sweep_once()
        kernels.use_backend("python")
        tp, sp = best_of(fn, 1)
        kernels.use_backend("cython")
        tc, sc = best_of(fn, 1)
        print(f"{'h_sweep meshSize 0.02 (6 solves)':42s} {tp:11.4f} {tc:11.4f} {tp / tc:8.2f} {abs(sp - sc):13.2e}")
    kernels.use_backend(prev)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
