import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from membrane_contact.forms import build_workspace
from membrane_contact.obstacle import Ellipsoid, FloorPlane, gap
from membrane_contact.postprocess import (
    UnconvergedStateError,
    compute_mixed_reaction,
    compute_reaction,
    diagnostics,
    format_table,
    lumped_project,
    lumped_project_vertices,
    mixed_reaction,
    one_ring_match,
    vertex_normals,
)
from membrane_contact.solver import SolverState, solve_gls, solve_mixed

R = 0.75
FLOOR = FloorPlane(-0.74)
DOWN = (0.0, 0.0, -1.0)


@pytest.fixture(scope="module")
def floor_states(sphere_meshes, params):
    m = sphere_meshes(3)
    return solve_gls(m, params, FLOOR, DOWN), solve_mixed(m, params, FLOOR, DOWN)


def test_no_contact_reaction(sphere_meshes, params):
    st = solve_gls(sphere_meshes(2), params, Ellipsoid.oblate(1.5, 0.8))
    rc = compute_reaction(st)
    assert not np.any(rc.raw) and not np.any(rc.resultant) and rc.contact_area == 0.0


def test_floor_reaction_balances_load(floor_states):
    st, _ = floor_states
    rc = compute_reaction(st)
    area = st.workspace.disc.area()
    assert np.all(rc.raw >= 0) and np.all(rc.vertex_values >= 0)
    assert rc.resultant[2] == pytest.approx(area, rel=1e-9)
    assert rc.resultant[2] == pytest.approx(4 * np.pi * R**2, rel=1e-2)
    assert np.abs(rc.resultant[:2]).max() < 1e-9 * area
    assert 0 < rc.contact_area < 0.25 * area
    assert rc.nodal.values.shape == (st.workspace.disc.mesh.node_count,)


def test_mixed_reaction_balances_load(floor_states):
    st, sm = floor_states
    rc = compute_mixed_reaction(sm)
    assert rc.resultant[2] == pytest.approx(st.workspace.disc.area(), rel=1e-9)
    assert np.all(rc.vertex_values >= -1e-8)


def test_unconverged_rejected(floor_states):
    st, _ = floor_states
    bad = SolverState(u=st.u, converged=False, trace=st.trace, gamma=st.gamma, workspace=st.workspace)
    with pytest.raises(UnconvergedStateError):
        compute_reaction(bad)
    with pytest.raises(ValueError):
        mixed_reaction(SolverState(u=st.u, converged=True, trace=st.trace, gamma=st.gamma, workspace=st.workspace))


def test_lumped_constant_and_integral(sphere_disc, rng):
    d = sphere_disc(2)
    np.testing.assert_allclose(lumped_project_vertices(np.full(d.dA.shape, 3.5), d), 3.5, rtol=1e-14)
    samples = np.abs(rng.standard_normal(d.dA.shape))
    p = lumped_project_vertices(samples, d)
    assert np.all(p >= 0)
    assert p @ d.lumped_weights() == pytest.approx(np.sum(d.dA * samples), rel=1e-12)
    field = lumped_project(samples, d, "p_h")
    assert field.name == "p_h" and field.values.shape == (d.mesh.node_count,)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5))
def test_lumped_linear(sphere_disc, seed, alpha):
    d = sphere_disc(1)
    g = np.random.default_rng(seed)
    a, b = g.standard_normal(d.dA.shape), g.standard_normal(d.dA.shape)
    lhs = lumped_project_vertices(a + alpha * b, d)
    rhs = lumped_project_vertices(a, d) + alpha * lumped_project_vertices(b, d)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + abs(alpha)))


def test_mixed_reaction_zero_state(sphere_disc, params):
    d = sphere_disc(2)
    for obs in (Ellipsoid.oblate(1.5, 0.8), FLOOR):
        ws = build_workspace(d, params, obs, None, 1e-4)
        nv = d.mesh.vertex_count
        st = SolverState(u=np.zeros(d.ndof), p=np.zeros(nv), converged=True, trace=[{}], gamma=1e-4, workspace=ws)
        vals = mixed_reaction(st).values[:nv]
        g = gap(obs, d.mesh.vertices, vertex_normals(d))
        hit = g < obs.no_contact_gap
        np.testing.assert_allclose(vals[hit], g[hit] / 1e-4, rtol=1e-14)
        assert np.all(np.isnan(vals[~hit]))
        if obs is FLOOR:
            assert (~hit).any() and np.all(d.mesh.vertices[~hit, 2] > -1e-12)


def test_mixed_reaction_not_clipped(floor_states):
    _, sm = floor_states
    vals = mixed_reaction(sm).values
    finite = vals[np.isfinite(vals)]
    assert (finite < 0).any()


def test_vertex_normals_radial(sphere_disc):
    d = sphere_disc(3)
    n = vertex_normals(d)
    radial = d.mesh.vertices / R
    assert np.abs(np.einsum("ij,ij->i", n, radial) - 1).max() < 1e-4


def test_one_ring_match(sphere_meshes):
    m = sphere_meshes(2)
    south = np.flatnonzero(m.vertices[:, 2] < -0.6)
    e = m.edges()
    ring = np.union1d(south, e[np.isin(e[:, 0], south), 1])
    assert one_ring_match(m, south, south)
    assert one_ring_match(m, south, ring)
    north = np.flatnonzero(m.vertices[:, 2] > 0.6)
    assert not one_ring_match(m, south, north)


def test_diagnostics_table(floor_states):
    st, _ = floor_states
    row = diagnostics("floor", st, compute_reaction(st))
    assert row["iterations"] == st.iterations and row["gamma"] == st.gamma
    text = format_table([row, {"scenario": "x", "extra": -0.0}])
    lines = text.splitlines()
    assert lines[0].split()[0] == "scenario" and set(lines[1]) <= {"-", " "}
    assert "extra" in lines[0] and "-0" not in lines[3].split()
    assert format_table([]) == ""
