"""P1 finite elements for the time-harmonic Navier system on a disc.

Degrees of freedom are interleaved: ``2*node + component``. Coefficients are
real and piecewise constant, so a single real sparse LU of the interior
block serves the real and imaginary parts of every complex right-hand side.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import Delaunay

from . import kernels
from .geometry import DomainSpec, MaterialConfig

log = logging.getLogger(__name__)

BACKGROUND = -1
COND_LIMIT = 1e12


class EigenvalueError(RuntimeError):
    """The frequency sits on (or too near) a discrete Dirichlet eigenvalue."""


@dataclass
class Mesh:
    nodes: np.ndarray  # (n, 2)
    triangles: np.ndarray  # (m, 3), counter-clockwise
    boundary_nodes: np.ndarray  # ordered counter-clockwise around the circle
    element_region: np.ndarray  # (m,), -1 background or inclusion index
    mesh_size: float
    domain: DomainSpec
    metadata: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return len(self.nodes)

    def areas(self):
        p = self.nodes[self.triangles]
        return 0.5 * (
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
        )

    def edges(self):
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def edge_lengths(self):
        e = self.edges()
        d = self.nodes[e[:, 0]] - self.nodes[e[:, 1]]
        return np.hypot(d[:, 0], d[:, 1])

    def centroids(self):
        return self.nodes[self.triangles].mean(axis=1)

    def interior_nodes(self):
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    def fingerprint(self):
        return (self.nodes.shape, self.triangles.shape, float(self.nodes.sum()), int(self.triangles.sum()))


def _ring_points(center, radius, h):
    nr = max(1, math.ceil(radius / h))
    pts = [np.asarray(center, dtype=float)[None, :]]
    for i in range(1, nr + 1):
        r = radius * i / nr
        m = max(6, int(round(2 * math.pi * r / h)))
        th = 2 * math.pi * (np.arange(m) + 0.5 * (i % 2)) / m
        pts.append(np.stack([center[0] + r * np.cos(th), center[1] + r * np.sin(th)], axis=1))
    return pts


def generate_mesh(domain: DomainSpec, material: MaterialConfig, mesh_size: float, refine_inclusions=False) -> Mesh:
    """Quasi-uniform triangulation of the disc from concentric node rings.

    Elements are tagged by centroid membership. With ``refine_inclusions``
    extra nodes are placed along every inclusion boundary at half the mesh
    size, which locally refines the elements that cross it.
    """
    if not mesh_size > 0:
        raise ValueError("mesh_size must be positive")
    rings = _ring_points(domain.center, domain.radius, mesh_size)
    boundary = rings[-1]
    interior = np.concatenate(rings[:-1])
    meta = {"warnings": []}
    if refine_inclusions and material.inclusions:
        extra = []
        for s in material.inclusions:
            b = s.boundary(4096)
            seg = np.hypot(*np.diff(np.vstack([b, b[:1]]), axis=0).T)
            perim = seg.sum()
            n = max(8, int(math.ceil(perim / (0.5 * mesh_size))))
            extra.append(s.boundary(n))
        extra = np.concatenate(extra)
        # drop ring nodes that would crowd the inserted interface nodes
        from scipy.spatial import cKDTree

        dist, _ = cKDTree(extra).query(interior)
        interior = np.concatenate([interior[dist > 0.3 * mesh_size], extra])
    nodes = np.concatenate([interior, boundary])
    nb = len(boundary)
    boundary_nodes = np.arange(len(nodes) - nb, len(nodes))
    tri = Delaunay(nodes).simplices.astype(np.int64)
    p = nodes[tri]
    det = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    flip = det < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    keep = np.abs(det) > 1e-14 * mesh_size**2
    tri = tri[keep]
    # boundary nodes in angular order
    ang = np.arctan2(nodes[boundary_nodes, 1] - domain.center[1], nodes[boundary_nodes, 0] - domain.center[0])
    boundary_nodes = boundary_nodes[np.argsort(ang, kind="stable")]
    cent = nodes[tri].mean(axis=1)
    region = material.region_of(cent)
    for i, s in enumerate(material.inclusions):
        xmin, xmax, ymin, ymax = s.bbox()
        diam = max(xmax - xmin, ymax - ymin)
        if diam / mesh_size < 8:
            msg = f"inclusion {i}: fewer than 8 elements across its diameter ({diam / mesh_size:.1f})"
            meta["warnings"].append(msg)
            log.warning(msg)
    return Mesh(nodes, tri, boundary_nodes, region, float(mesh_size), domain, meta)


# ---------------------------------------------------------------------------
# assembly


def element_coefficients(mesh: Mesh, material: MaterialConfig, coefficients="full"):
    """Per-element Lame constants for ``'full'``, ``'background'`` or ``'contrast'``."""
    m = len(mesh.triangles)
    lam_d = np.zeros(m)
    mu_d = np.zeros(m)
    for i, s in enumerate(material.inclusions):
        sel = mesh.element_region == i
        lam_d[sel] = s.lambda_d
        mu_d[sel] = s.mu_d
    if coefficients == "full":
        return material.lambda0 + lam_d, material.mu0 + mu_d
    if coefficients == "background":
        return np.full(m, float(material.lambda0)), np.full(m, float(material.mu0))
    if coefficients == "contrast":
        return lam_d, mu_d
    raise ValueError(f"unknown coefficient set {coefficients!r}")


@dataclass
class System:
    """Assembled ``A = K - k^2 M`` with its parts."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    A: sp.csr_matrix
    k: float
    coefficients: str


def _scatter(tri, blocks, ndof):
    dofs = np.empty((len(tri), 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * tri
    dofs[:, 1::2] = 2 * tri + 1
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    mat = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(ndof, ndof)).tocsr()
    mat.sum_duplicates()
    return mat


def stiffness(mesh: Mesh, lam, mu):
    grads, area = kernels.p1_element_gradients(mesh.nodes, mesh.triangles)
    Ke = kernels.elasticity_blocks(grads, area, np.asarray(lam, float), np.asarray(mu, float))
    return _scatter(mesh.triangles, Ke, 2 * mesh.n_nodes)


def mass(mesh: Mesh):
    area = mesh.areas()
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    Me = np.zeros((len(area), 6, 6))
    Me[:, 0::2, 0::2] = area[:, None, None] * base
    Me[:, 1::2, 1::2] = area[:, None, None] * base
    return _scatter(mesh.triangles, Me, 2 * mesh.n_nodes)


def assemble(mesh: Mesh, material: MaterialConfig, coefficients="full") -> System:
    lam, mu = element_coefficients(mesh, material, coefficients)
    K = stiffness(mesh, lam, mu)
    M = mass(mesh)
    A = (K - material.k**2 * M).tocsr()
    return System(K, M, A, material.k, coefficients)


# ---------------------------------------------------------------------------
# Dirichlet solves


def dof_split(mesh: Mesh):
    b = mesh.boundary_nodes
    bd = np.empty(2 * len(b), dtype=np.int64)
    bd[0::2] = 2 * b
    bd[1::2] = 2 * b + 1
    mask = np.ones(2 * mesh.n_nodes, dtype=bool)
    mask[bd] = False
    return np.flatnonzero(mask), bd


@dataclass
class FemSolution:
    values: np.ndarray  # (n_nodes, 2) complex
    dirichlet: np.ndarray  # (nb, 2) complex
    coefficients: str
    mesh: Mesh

    @property
    def flat(self):
        return self.values.reshape(-1)


class DirichletSolver:
    """Factorised interior block of one assembled system.

    The factor is read-only after construction; ``solve`` allocates its own
    work arrays and may be called from several threads.
    """

    def __init__(self, mesh: Mesh, system: System, check=True):
        self.mesh = mesh
        self.system = system
        self.interior, self.boundary = dof_split(mesh)
        A = system.A
        self.A_II = A[self.interior][:, self.interior].tocsc()
        self.A_IB = A[self.interior][:, self.boundary].tocsr()
        try:
            self.lu = spla.splu(self.A_II, permc_spec="COLAMD")
        except RuntimeError as exc:  # exactly singular
            raise EigenvalueError("k^2 near a discrete Dirichlet eigenvalue; choose a different k") from exc
        self.condition = self._condition() if check else float("nan")
        if check and not self.condition < COND_LIMIT:
            raise EigenvalueError(
                f"k^2 near a discrete Dirichlet eigenvalue (condition estimate {self.condition:.3g}); choose a different k"
            )

    def _condition(self):
        udiag = np.abs(self.lu.U.diagonal())
        if udiag.min() <= 1e-14 * udiag.max():
            return float("inf")
        n = self.A_II.shape[0]
        inv = spla.LinearOperator(
            (n, n), matvec=self.lu.solve, rmatvec=lambda x: self.lu.solve(x, trans="T"), dtype=float
        )
        return float(spla.norm(self.A_II, 1) * spla.onenormest(inv))

    def solve_interior(self, rhs):
        """Solve ``A_II x = rhs`` for a complex right-hand side."""
        rhs = np.asarray(rhs)
        if np.iscomplexobj(rhs):
            return self.lu.solve(np.ascontiguousarray(rhs.real)) + 1j * self.lu.solve(np.ascontiguousarray(rhs.imag))
        return self.lu.solve(rhs)

    def solve(self, f) -> FemSolution:
        f = np.asarray(f, dtype=complex)
        nb = len(self.mesh.boundary_nodes)
        if f.shape != (nb, 2):
            raise ValueError(f"boundary field must have shape ({nb}, 2), got {f.shape}")
        u = np.zeros(2 * self.mesh.n_nodes, dtype=complex)
        fb = f.reshape(-1)
        u[self.boundary] = fb
        u[self.interior] = self.solve_interior(-(self.A_IB @ fb))
        return FemSolution(u.reshape(-1, 2), f.copy(), self.system.coefficients, self.mesh)


def solve_dirichlet(system: System, mesh: Mesh, f) -> FemSolution:
    return DirichletSolver(mesh, system).solve(f)


# ---------------------------------------------------------------------------
# energy forms and tractions


def element_gradients(mesh: Mesh, u):
    """Constant displacement gradients per element: ``G[e, i, j] = d u_i / d x_j``."""
    grads, area = kernels.p1_element_gradients(mesh.nodes, mesh.triangles)
    vals = np.asarray(u)[mesh.triangles]  # (m, 3, 2)
    return np.einsum("eai,eaj->eij", vals, grads), area


def strain_parts(G):
    """Divergence and deviatoric strain of per-element gradients."""
    div = G[:, 0, 0] + G[:, 1, 1]
    eps = 0.5 * (G + np.swapaxes(G, 1, 2))
    dev = eps - 0.5 * div[:, None, None] * np.eye(2)
    return div, eps, dev


def _values(u):
    return u.values if isinstance(u, FemSolution) else np.asarray(u)


def energy_density(mesh, lam, mu, u, v):
    """Elementwise ``tr(sigma(u) grad(conj v))`` times the element area."""
    Gu, area = element_gradients(mesh, _values(u))
    Gv, _ = element_gradients(mesh, _values(v))
    div_u, eps_u, _ = strain_parts(Gu)
    div_v, eps_v, _ = strain_parts(Gv)
    dens = lam * div_u * np.conj(div_v) + 2 * mu * np.einsum("eij,eij->e", eps_u, np.conj(eps_v))
    return dens * area


def energy_form(mesh: Mesh, material: MaterialConfig, coefficients, u, v) -> complex:
    """``int tr(sigma(u) grad(conj v)) - k^2 u . conj v`` over the domain."""
    for w in (u, v):
        if isinstance(w, FemSolution) and w.mesh is not mesh:
            raise ValueError("solutions live on a different mesh")
    uu, vv = _values(u), _values(v)
    if uu.shape != (mesh.n_nodes, 2) or vv.shape != (mesh.n_nodes, 2):
        raise ValueError("mesh mismatch: nodal arrays do not match the mesh")
    lam, mu = element_coefficients(mesh, material, coefficients)
    stiff = energy_density(mesh, lam, mu, uu, vv).sum()
    M = mass(mesh)
    return complex(stiff - material.k**2 * (uu.reshape(-1) @ (M @ np.conj(vv.reshape(-1)))))


def boundary_mass(mesh: Mesh):
    """P1 mass matrix on the boundary polygon (per component)."""
    b = mesh.boundary_nodes
    p = mesh.nodes[b]
    q = np.roll(p, -1, axis=0)
    L = np.hypot(*(q - p).T)
    nb = len(b)
    i = np.arange(nb)
    j = (i + 1) % nb
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([i, j, j, i])
    vals = np.concatenate([L / 3, L / 3, L / 6, L / 6])
    return sp.coo_matrix((vals, (rows, cols)), shape=(nb, nb)).tocsc()


def boundary_functional(system: System, mesh: Mesh, u) -> np.ndarray:
    """Residual pairing ``(A u)`` restricted to the boundary dofs, shape ``(nb, 2)``."""
    _, bd = dof_split(mesh)
    r = system.A @ _values(u).reshape(-1)
    return r[bd].reshape(-1, 2)


def traction(mesh: Mesh, system: System, u) -> np.ndarray:
    """Consistent-flux traction as nodal values against the boundary mass matrix."""
    r = boundary_functional(system, mesh, u)
    lu = spla.splu(boundary_mass(mesh))
    return lu.solve(np.ascontiguousarray(r.real)) + 1j * lu.solve(np.ascontiguousarray(r.imag))


def l2_error(mesh: Mesh, u, exact):
    """L2 norm of ``u_h - exact`` with a 6-point (degree 4) triangle rule."""
    # Dunavant degree-4 rule
    a, b = 0.445948490915965, 0.091576213509771
    wa, wb = 0.223381589678011, 0.109951743655322
    bary = np.array([[a, a, 1 - 2 * a], [a, 1 - 2 * a, a], [1 - 2 * a, a, a], [b, b, 1 - 2 * b], [b, 1 - 2 * b, b], [1 - 2 * b, b, b]])
    wts = np.array([wa] * 3 + [wb] * 3)
    p = mesh.nodes[mesh.triangles]  # (m, 3, 2)
    vals = _values(u)[mesh.triangles]  # (m, 3, 2)
    area = mesh.areas()
    total = 0.0
    for lam_q, w in zip(bary, wts):
        x = np.einsum("a,mak->mk", lam_q, p)
        uh = np.einsum("a,mak->mk", lam_q, vals)
        err = uh - exact(x)
        total += w * np.sum(area * np.sum(np.abs(err) ** 2, axis=1))
    return math.sqrt(total)


# ---------------------------------------------------------------------------
# export


def write_mesh(mesh: Mesh, path):
    """Plain-text mesh: header, then node rows, element rows and boundary rows."""
    with open(path, "w") as fh:
        fh.write("# enclosure mesh v1\n")
        fh.write(f"# mesh_size {mesh.mesh_size!r}\n")
        fh.write(f"nodes {mesh.n_nodes}\n")
        for x, y in mesh.nodes:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"elements {len(mesh.triangles)}\n")
        for (a, b, c), reg in zip(mesh.triangles, mesh.element_region):
            fh.write(f"{a} {b} {c} {reg}\n")
        fh.write(f"boundary {len(mesh.boundary_nodes)}\n")
        for i in mesh.boundary_nodes:
            fh.write(f"{i}\n")


def read_mesh(path, domain: DomainSpec):
    """Inverse of ``write_mesh``."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    size = math.nan
    body = []
    for ln in lines:
        if ln.startswith("# mesh_size"):
            size = float(ln.split()[2])
        elif ln and not ln.startswith("#"):
            body.append(ln)
    pos = 0

    def block(name, conv):
        nonlocal pos
        tag, n = body[pos].split()
        if tag != name:
            raise ValueError(f"expected section {name!r}, found {tag!r}")
        rows = [conv(ln.split()) for ln in body[pos + 1:pos + 1 + int(n)]]
        pos += 1 + int(n)
        return rows

    nodes = np.array(block("nodes", lambda r: [float(v) for v in r]))
    elems = np.array(block("elements", lambda r: [int(v) for v in r]), dtype=np.int64)
    bnd = np.array(block("boundary", lambda r: int(r[0])), dtype=np.int64)
    return Mesh(nodes, elems[:, :3], bnd, elems[:, 3], size, domain)


def write_solution_csv(sol: FemSolution, path):
    with open(path, "w") as fh:
        fh.write("node,x1,x2,re_u1,im_u1,re_u2,im_u2\n")
        for i, ((x, y), (u1, u2)) in enumerate(zip(sol.mesh.nodes, sol.values)):
            fh.write(f"{i}," + ",".join(repr(float(v)) for v in (x, y, u1.real, u1.imag, u2.real, u2.imag)) + "\n")
