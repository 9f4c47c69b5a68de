import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from membrane_contact.material import (
    MaterialParams,
    derive_params,
    sigma_kappa,
    strain_energy_density,
    tangential_strain,
)
from membrane_contact.surfcalc import Frame


def make_frame(n, curvature=None):
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    P = np.eye(3) - np.outer(n, n)
    k = np.zeros((3, 3)) if curvature is None else curvature
    return Frame(np.eye(3), np.eye(3), n, P, 1.0, k, float(np.trace(k)))


FLAT = make_frame([0, 0, 1])


@pytest.mark.parametrize(
    "E, nu, mu, lam0",
    [(100.0, 0.5, 33.333333333333336, 66.66666666666667), (2.6, 0.3, 1.0, 0.857142857142857), (7.0, 0.0, 3.5, 0.0)],
)
def test_derive_params(E, nu, mu, lam0):
    p = derive_params(E, nu)
    assert p.mu == pytest.approx(mu, rel=1e-14)
    assert p.lambda0 == pytest.approx(lam0, rel=1e-14, abs=1e-300)


@pytest.mark.parametrize("nu", [-1.0, 1.0, 1.5])
def test_bad_poisson(nu):
    with pytest.raises(ValueError, match="Poisson"):
        derive_params(1.0, nu)


def test_inconsistent_params_rejected():
    with pytest.raises(ValueError):
        MaterialParams(100.0, 0.5, 30.0, 66.0)
    with pytest.raises(ValueError):
        derive_params(-1.0, 0.3)


def test_translation_has_no_energy():
    p = derive_params(100, 0.5)
    E, div = tangential_strain(np.zeros((3, 3)))
    assert strain_energy_density(FLAT, E, div, E, div, p) == 0.0


def test_flat_uniaxial():
    p = derive_params(100, 0.5)
    E = np.diag([1.0, 0.0, 0.0])
    assert strain_energy_density(FLAT, E, 1.0, E, 1.0, p) == pytest.approx(2 * p.mu + p.lambda0)


def test_sphere_inflation_density():
    p = derive_params(100, 0.5)
    r, c = 0.75, 0.01
    f = make_frame([0.3, -0.2, 0.9], curvature=None)
    E = c * f.projector / r
    val = strain_energy_density(f, E, 2 * c / r, E, 2 * c / r, p)
    assert val == pytest.approx((4 * p.mu + 4 * p.lambda0) * (c / r) ** 2, rel=1e-13)
    fk = make_frame(f.normal, curvature=f.projector / r)
    assert sigma_kappa(fk, E, 2 * c / r, p) == pytest.approx(-4 * c * (p.mu + p.lambda0) / r**2, rel=1e-13)


def test_sigma_kappa_trivial():
    p = derive_params(100, 0.5)
    E = np.diag([1.0, 2.0, 0.0])
    assert sigma_kappa(FLAT, E, 3.0, p) == 0.0
    fk = make_frame([0, 0, 1], curvature=np.diag([1.0, 1.0, 0.0]))
    assert sigma_kappa(fk, np.zeros((3, 3)), 0.0, p) == 0.0


def tangential_gradient(g, n):
    P = np.eye(3) - np.outer(n, n)
    return np.asarray(g).reshape(3, 3) @ P


vec3 = st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.1)
mat = st.lists(st.floats(-2, 2), min_size=9, max_size=9)


@settings(max_examples=80, deadline=None)
@given(vec3, mat, mat, mat, st.floats(-3, 3), st.floats(0.01, 0.49))
def test_density_symmetric_bilinear_psd(n, ga, gb, gc, alpha, nu):
    p = derive_params(10.0, nu)
    f = make_frame(n)
    Ea, da = tangential_strain(tangential_gradient(ga, f.normal))
    Eb, db = tangential_strain(tangential_gradient(gb, f.normal))
    Ec, dc = tangential_strain(tangential_gradient(gc, f.normal))
    ab = strain_energy_density(f, Ea, da, Eb, db, p)
    ba = strain_energy_density(f, Eb, db, Ea, da, p)
    scale = 1.0 + abs(ab)
    assert abs(ab - ba) <= 1e-12 * scale
    lin = strain_energy_density(f, Ea + alpha * Ec, da + alpha * dc, Eb, db, p)
    ref = ab + alpha * strain_energy_density(f, Ec, dc, Eb, db, p)
    assert abs(lin - ref) <= 1e-12 * (scale + abs(ref))
    assert strain_energy_density(f, Ea, da, Ea, da, p) >= -1e-12


@settings(max_examples=40, deadline=None)
@given(vec3, mat, mat, st.floats(-3, 3))
def test_sigma_kappa_linear(n, ga, gb, alpha):
    p = derive_params(100, 0.5)
    f0 = make_frame(n)
    f = make_frame(n, curvature=f0.projector / 0.75)
    Ea, da = tangential_strain(tangential_gradient(ga, f.normal))
    Eb, db = tangential_strain(tangential_gradient(gb, f.normal))
    lhs = sigma_kappa(f, Ea + alpha * Eb, da + alpha * db, p)
    rhs = sigma_kappa(f, Ea, da, p) + alpha * sigma_kappa(f, Eb, db, p)
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(rhs))


@settings(max_examples=40, deadline=None)
@given(vec3, mat)
def test_doubledot_identity(n, g):
    # E:E - 2 |E n|^2 equals eps:eps with eps = P E P for tangential gradients
    f = make_frame(n)
    E, _ = tangential_strain(tangential_gradient(g, f.normal))
    eps = f.projector @ E @ f.projector
    lhs = np.tensordot(E, E) - 2 * (E @ f.normal) @ (E @ f.normal)
    assert abs(lhs - np.tensordot(eps, eps)) <= 1e-12 * (1 + np.tensordot(E, E))
