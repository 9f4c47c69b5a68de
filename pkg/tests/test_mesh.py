import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from membrane_contact.mesh import (
    MAX_SUBDIVISION_LEVEL,
    VTK_QUADRATIC_TRIANGLE,
    MeshError,
    NodalField,
    SurfaceMesh,
    build_icosphere,
    read_vtk,
    write_vtk,
)


def test_icosahedron():
    m = build_icosphere(0, 1.0)
    assert m.element_count == 20 and m.vertex_count == 12
    assert m.node_count == 12 + 30


def test_level5_mesh_counts(sphere_meshes):
    m = sphere_meshes(5)
    assert m.element_count == 20480
    assert m.vertex_count == 10242


@pytest.mark.parametrize("level", range(0, 5))
def test_icosphere_invariants(level):
    r = 0.75
    m = build_icosphere(level, r)
    m.check()
    assert m.element_count == 20 * 4**level
    assert m.vertex_count == 10 * 4**level + 2
    assert m.euler_characteristic() == 2
    assert np.abs(np.linalg.norm(m.nodes, axis=1) - r).max() <= 1e-12 * r
    assert m.quality().min() >= 0.4
    # outward orientation of every flat vertex triangle
    x = m.nodes[m.triangles]
    nrm = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    assert np.all(np.einsum("ij,ij->i", nrm, x.mean(axis=1)) > 0)


def test_refinement_quadruples():
    counts = [build_icosphere(level).element_count for level in range(4)]
    assert all(b == 4 * a for a, b in zip(counts, counts[1:]))


def test_level_guard():
    with pytest.raises(MeshError, match="level"):
        build_icosphere(MAX_SUBDIVISION_LEVEL + 1)


def test_mesh_is_immutable():
    m = build_icosphere(0)
    with pytest.raises(ValueError):
        m.nodes[0, 0] = 2.0


def test_check_detects_repeated_node():
    m = build_icosphere(0)
    el = m.elements.copy()
    el[0, 1] = el[0, 0]
    with pytest.raises(MeshError):
        SurfaceMesh(m.nodes.copy(), el, m.vertex_count).check()


def test_p1_to_nodes_midpoints():
    m = build_icosphere(1)
    vals = np.arange(m.vertex_count, dtype=float)
    out = m.p1_to_nodes(vals)
    el = m.elements
    np.testing.assert_allclose(out[el[:, 4]], 0.5 * (vals[el[:, 1]] + vals[el[:, 2]]))
    with pytest.raises(MeshError):
        m.p1_to_nodes(vals[:-1])


def test_vtk_level0(tmp_path):
    m = build_icosphere(0)
    path = write_vtk(m, [], tmp_path / "m.vtk")
    text = path.read_text()
    assert "CELLS 20 140" in text
    types = text.split("CELL_TYPES 20\n")[1].split()
    assert types == [str(VTK_QUADRATIC_TRIANGLE)] * 20
    assert "POINT_DATA" not in text


def test_vtk_scalar_block(tmp_path):
    m = build_icosphere(1)
    p = NodalField("p_h", np.linspace(0, 1, m.node_count))
    text = write_vtk(m, [p], tmp_path / "m.vtk").read_text()
    assert text.count("SCALARS") == 1 and "SCALARS p_h double 1" in text


def test_vtk_rejects_bad_field(tmp_path):
    m = build_icosphere(0)
    with pytest.raises(MeshError):
        write_vtk(m, [NodalField("x", np.zeros(5))], tmp_path / "m.vtk")


def test_vtk_io_error_has_path(tmp_path):
    target = tmp_path / "missing" / "m.vtk"
    with pytest.raises(OSError, match="missing"):
        write_vtk(build_icosphere(0), [], target)


def test_vtk_byte_stable(tmp_path):
    m = build_icosphere(2, 0.75)
    f = [NodalField("u", m.nodes * 0.1), NodalField("s", m.nodes[:, 2])]
    a = write_vtk(m, f, tmp_path / "a.vtk").read_bytes()
    b = write_vtk(build_icosphere(2, 0.75), f, tmp_path / "b.vtk").read_bytes()
    assert a == b


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2), st.integers(0, 2**32 - 1))
def test_vtk_round_trip(level, seed):
    import tempfile
    from pathlib import Path

    m = build_icosphere(level, 0.75)
    g = np.random.default_rng(seed)
    fields = [NodalField("vec", g.standard_normal((m.node_count, 3))), NodalField("sc", g.standard_normal(m.node_count))]
    with tempfile.TemporaryDirectory() as d:
        back, got = read_vtk(write_vtk(m, fields, Path(d) / "r.vtk"))
    np.testing.assert_array_equal(back.nodes, m.nodes)
    np.testing.assert_array_equal(back.elements, m.elements)
    assert back.vertex_count == m.vertex_count
    for a, b in zip(fields, got):
        assert a.name == b.name and a.components == b.components
        np.testing.assert_array_equal(a.values, b.values)
