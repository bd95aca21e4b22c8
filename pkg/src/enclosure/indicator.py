"""Indicator functional ``E(f) = int [(Lambda_D - Lambda_0) f] . conj(f) ds``.

Computed from volume forms. With ``u0`` the background solution and
``w = u - u0`` (zero on the boundary) the discrete solutions satisfy

    E = int_D tr(sigma_D(u0) grad(conj u)) dx

exactly, which avoids subtracting two large boundary energies. ``w`` is
obtained from its own interior solve with the source ``-K_D u0`` so that it
is accurate relative to the field inside the inclusions, not relative to
the (possibly exponentially larger) boundary data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import (
    DirichletSolver,
    FemSolution,
    Mesh,
    assemble,
    element_coefficients,
    element_gradients,
    mass,
    stiffness,
    strain_parts,
)
from .geometry import MaterialConfig

EPS = np.finfo(float).eps


@dataclass
class IndicatorSample:
    d: float
    h: float
    E: complex
    absE: float
    energyD: float
    energyW: float
    l2w: float
    floor: float = 0.0  # numerical floor for |E| at this data scale


class ForwardModel:
    """Mesh, material and the two factorised Dirichlet problems.

    Read-only after construction; ``indicator`` may run concurrently.
    """

    def __init__(self, mesh: Mesh, material: MaterialConfig):
        self.mesh = mesh
        self.material = material
        self.sys_full = assemble(mesh, material, "full")
        self.sys_bg = assemble(mesh, material, "background")
        self.bg = DirichletSolver(mesh, self.sys_bg)
        self.has_inclusion = bool(np.any(mesh.element_region >= 0))
        self.full = DirichletSolver(mesh, self.sys_full) if self.has_inclusion else self.bg
        lam_d, mu_d = element_coefficients(mesh, material, "contrast")
        self.K_D = stiffness(mesh, lam_d, mu_d)
        self.M = self.sys_full.M

    def solve_pair(self, f):
        """Background solution ``u0`` and full solution ``u`` for data ``f``."""
        u0 = self.bg.solve(f)
        if not self.has_inclusion:
            return u0, FemSolution(u0.values.copy(), u0.dirichlet, "full", self.mesh)
        src = self.K_D @ u0.flat
        w = np.zeros_like(u0.flat)
        w[self.full.interior] = self.full.solve_interior(-src[self.full.interior])
        u = FemSolution((u0.flat + w).reshape(-1, 2), u0.dirichlet, "full", self.mesh)
        return u0, u

    def energy_scale(self, u0: FemSolution) -> float:
        """Absolute size of the background energy density integrated over the domain."""
        lam, mu = element_coefficients(self.mesh, self.material, "background")
        G, area = element_gradients(self.mesh, u0.values)
        div, eps, _ = strain_parts(G)
        dens = np.abs(lam) * np.abs(div) ** 2 + 2 * mu * np.sum(np.abs(eps) ** 2, axis=(1, 2))
        v = u0.flat
        return float(np.sum(dens * area) + self.material.k**2 * np.real(v @ (self.M @ np.conj(v))))

    def indicator(self, f, d=float("nan"), h=float("nan")) -> IndicatorSample:
        u0, u = self.solve_pair(f)
        return indicator_from_solutions(self, u0, u, d, h)


def _dev_energy(mesh, lam_plus_mu, mu, G, area):
    div, _, dev = strain_parts(G)
    dens = lam_plus_mu * np.abs(div) ** 2 + 2 * mu * np.sum(np.abs(dev) ** 2, axis=(1, 2))
    return dens * area


def _w_terms(model: ForwardModel, u0: FemSolution, u: FemSolution):
    mesh, mat = model.mesh, model.material
    w = u.values - u0.values
    Gw, area = element_gradients(mesh, w)
    wf = w.reshape(-1)
    l2w = mat.k**2 * float(np.real(wf @ (model.M @ np.conj(wf))))
    return Gw, area, l2w


def indicator_from_solutions(model: ForwardModel, u0: FemSolution, u: FemSolution, d=float("nan"), h=float("nan")):
    mesh, mat = model.mesh, model.material
    E = complex(u0.flat @ (model.K_D @ np.conj(u.flat)))
    lam, mu = element_coefficients(mesh, mat, "full")
    lam_d, mu_d = element_coefficients(mesh, mat, "contrast")
    G0, area = element_gradients(mesh, u0.values)
    energy_d = float(np.sum(_dev_energy(mesh, lam_d + mu_d, mu_d, G0, area)))
    Gw, _, l2w = _w_terms(model, u0, u)
    energy_w = float(np.sum(_dev_energy(mesh, lam + mu, mu, Gw, area)))
    floor = 1e2 * EPS * model.energy_scale(u0)
    return IndicatorSample(d, h, E, abs(E), energy_d, energy_w, l2w, floor)


def indicator_E(mesh: Mesh, material: MaterialConfig, f, model: ForwardModel | None = None) -> IndicatorSample:
    """Indicator sample for boundary data ``f`` on ``mesh``."""
    if model is None:
        model = ForwardModel(mesh, material)
    return model.indicator(f)


def indicator_by_difference(model: ForwardModel, u0: FemSolution, u: FemSolution) -> complex:
    """``energy_form_full(u, u) - energy_form_bg(u0, u0)`` (cancellation-prone route)."""
    from .fem import energy_form

    return energy_form(model.mesh, model.material, "full", u, u) - energy_form(
        model.mesh, model.material, "background", u0, u0
    )


def energy_identity_background(model: ForwardModel, u0: FemSolution, u: FemSolution) -> complex:
    """Inclusion energy of ``u0`` minus the full energy of ``w`` plus ``k^2 |w|^2``."""
    mesh, mat = model.mesh, model.material
    lam, mu = element_coefficients(mesh, mat, "full")
    lam_d, mu_d = element_coefficients(mesh, mat, "contrast")
    G0, area = element_gradients(mesh, u0.values)
    Gw, _, l2w = _w_terms(model, u0, u)
    return complex(
        np.sum(_dev_energy(mesh, lam_d + mu_d, mu_d, G0, area))
        - np.sum(_dev_energy(mesh, lam + mu, mu, Gw, area))
        + l2w
    )


def energy_identity_full(model: ForwardModel, u0: FemSolution, u: FemSolution) -> complex:
    """Inclusion energy of ``u`` plus the background energy of ``w`` minus ``k^2 |w|^2``."""
    mesh, mat = model.mesh, model.material
    lam0, mu0 = element_coefficients(mesh, mat, "background")
    lam_d, mu_d = element_coefficients(mesh, mat, "contrast")
    G, area = element_gradients(mesh, u.values)
    Gw, _, l2w = _w_terms(model, u0, u)
    return complex(
        np.sum(_dev_energy(mesh, lam_d + mu_d, mu_d, G, area))
        + np.sum(_dev_energy(mesh, lam0 + mu0, mu0, Gw, area))
        - l2w
    )


def indicator_bounds(model: ForwardModel, u0: FemSolution, u: FemSolution):
    """Upper and lower bounds of ``E`` in terms of ``u0`` and ``w``."""
    mesh, mat = model.mesh, model.material
    lam, mu = element_coefficients(mesh, mat, "full")
    lam_d, mu_d = element_coefficients(mesh, mat, "contrast")
    G0, area = element_gradients(mesh, u0.values)
    div, _, dev = strain_parts(G0)
    ddiv = np.abs(div) ** 2
    ddev = np.sum(np.abs(dev) ** 2, axis=(1, 2))
    _, _, l2w = _w_terms(model, u0, u)
    upper = float(np.sum(((lam_d + mu_d) * ddiv + 2 * mu_d * ddev) * area)) + l2w
    lo_div = (lam_d + mu_d) * (mat.lambda0 + mat.mu0) / (lam + mu)
    lo_dev = mu_d * mat.mu0 / mu
    lower = float(np.sum((lo_div * ddiv + 2 * lo_dev * ddev) * area)) - l2w
    return upper, lower
