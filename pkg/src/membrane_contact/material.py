"""Isotropic membrane material and pointwise stress/strain kernels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MaterialParams:
    """Young's modulus E, Poisson ratio nu and the derived membrane moduli.

    Only the plane-stress Lame parameter ``lambda0 = E nu / (1 - nu^2)``
    enters the membrane stress, so nu = 0.5 is admissible.
    """

    youngs_modulus: float
    poisson_ratio: float
    shear_modulus: float
    lambda0: float

    @property
    def mu(self) -> float:
        return self.shear_modulus

    def __post_init__(self):
        if not self.youngs_modulus > 0:
            raise ValueError(f"Young's modulus must be positive, got {self.youngs_modulus}")
        if not -1.0 < self.poisson_ratio < 1.0:
            raise ValueError(f"Poisson ratio must lie in (-1, 1), got {self.poisson_ratio}")
        if _moduli(self.youngs_modulus, self.poisson_ratio) != (self.shear_modulus, self.lambda0):
            raise ValueError("shear_modulus/lambda0 inconsistent with (E, nu)")


def _moduli(E, nu):
    return E / (2.0 * (1.0 + nu)), E * nu / (1.0 - nu * nu)


def derive_params(E: float, nu: float) -> MaterialParams:
    E = float(E)
    nu = float(nu)
    if not -1.0 < nu < 1.0:
        raise ValueError(f"Poisson ratio must lie in (-1, 1), got {nu}")
    mu, lam0 = _moduli(E, nu)
    return MaterialParams(E, nu, mu, lam0)


def strain_energy_density(frame, Eu, divu, Ev, divv, params: MaterialParams) -> float:
    """sigma_Gamma(u) : eps_Gamma(v) evaluated from E_Gamma without projecting.

    Uses eps(u):eps(v) = E(u):E(v) - 2 (E(u) n).(E(v) n), valid because
    n.E_Gamma.n = 0 for tangential gradients.
    """
    n = frame.normal
    Eu = np.asarray(Eu)
    Ev = np.asarray(Ev)
    inplane = np.tensordot(Eu, Ev) - 2.0 * (Eu @ n) @ (Ev @ n)
    return 2.0 * params.mu * inplane + params.lambda0 * divu * divv


def sigma_kappa(frame, Eu, divu, params: MaterialParams) -> float:
    """-sigma_Gamma(u) : kappa, the normal component of div sigma_Gamma(u)."""
    kappa = frame.curvature
    return -2.0 * params.mu * np.tensordot(np.asarray(Eu), kappa) - params.lambda0 * divu * np.trace(kappa)


def tangential_strain(grad_u):
    """Symmetric surface strain E_Gamma and divergence from the tangential Jacobian.

    ``grad_u[i, j] = d u_i / d x_j`` along the surface.
    """
    g = np.asarray(grad_u, dtype=float)
    return 0.5 * (g + g.T), float(np.trace(g))
