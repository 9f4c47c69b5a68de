"""Quadratic triangle meshes of closed surfaces and legacy VTK I/O.

Nodes are numbered vertices first (``0 .. vertex_count - 1``) followed by
the edge midnodes, so the P1 displacement space lives on the leading block
of node indices.  Element connectivity follows the local ordering documented
in :mod:`membrane_contact.refelem`.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_SUBDIVISION_LEVEL = 8
VTK_QUADRATIC_TRIANGLE = 22

_GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0
_ICOSAHEDRON_VERTICES = np.array(
    [
        [-1, _GOLDEN, 0],
        [1, _GOLDEN, 0],
        [-1, -_GOLDEN, 0],
        [1, -_GOLDEN, 0],
        [0, -1, _GOLDEN],
        [0, 1, _GOLDEN],
        [0, -1, -_GOLDEN],
        [0, 1, -_GOLDEN],
        [_GOLDEN, 0, -1],
        [_GOLDEN, 0, 1],
        [-_GOLDEN, 0, -1],
        [-_GOLDEN, 0, 1],
    ]
)
_ICOSAHEDRON_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
)


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class NodalField:
    """A named nodal field; ``values`` has shape (nodes,) or (nodes, 3)."""

    name: str
    values: np.ndarray

    @property
    def components(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[1]


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Six-node triangle mesh of a closed surface.

    Attributes:
        nodes: (node_count, 3) coordinates; vertices occupy the first
            ``vertex_count`` rows, edge midnodes the rest.
        elements: (element_count, 6) node indices, vertices 0-2 then the
            midnodes of edges (0, 1), (1, 2), (2, 0).
        vertex_count: number of corner nodes.
    """

    nodes: np.ndarray
    elements: np.ndarray
    vertex_count: int

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.elements.setflags(write=False)

    @property
    def element_count(self) -> int:
        return len(self.elements)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def triangles(self) -> np.ndarray:
        """Vertex-only connectivity, (element_count, 3)."""
        return self.elements[:, :3]

    @property
    def vertices(self) -> np.ndarray:
        return self.nodes[: self.vertex_count]

    def edges(self) -> np.ndarray:
        """Unique vertex edges as sorted index pairs."""
        tri = self.triangles
        e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def euler_characteristic(self) -> int:
        return self.vertex_count - len(self.edges()) + self.element_count

    def p1_to_nodes(self, vertex_values) -> np.ndarray:
        """Extend a P1 field from vertices to all nodes by linear interpolation."""
        vals = np.asarray(vertex_values, dtype=float)
        if len(vals) != self.vertex_count:
            raise MeshError(
                f"expected {self.vertex_count} vertex values, got {len(vals)}"
            )
        out = np.empty((self.node_count,) + vals.shape[1:])
        out[: self.vertex_count] = vals
        el = self.elements
        for mid, (a, b) in zip((3, 4, 5), ((0, 1), (1, 2), (2, 0))):
            out[el[:, mid]] = 0.5 * (vals[el[:, a]] + vals[el[:, b]])
        return out

    def quality(self) -> np.ndarray:
        """Inradius over circumradius of each vertex triangle (0.5 if equilateral)."""
        x = self.nodes[self.triangles]
        a = np.linalg.norm(x[:, 1] - x[:, 2], axis=1)
        b = np.linalg.norm(x[:, 2] - x[:, 0], axis=1)
        c = np.linalg.norm(x[:, 0] - x[:, 1], axis=1)
        area = 0.5 * np.linalg.norm(np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]), axis=1)
        s = 0.5 * (a + b + c)
        return (area / s) / (a * b * c / (4.0 * area))

    def check(self) -> None:
        """Raise MeshError if a structural invariant is violated."""
        el = self.elements
        if el.shape[1] != 6:
            raise MeshError("elements must have 6 nodes")
        if el.min() < 0 or el.max() >= self.node_count:
            raise MeshError("element references a node outside the node table")
        srt = np.sort(el, axis=1)
        if np.any(srt[:, 1:] == srt[:, :-1]):
            raise MeshError("element with repeated node index")
        if np.any(el[:, :3] >= self.vertex_count) or np.any(el[:, 3:] < self.vertex_count):
            raise MeshError("vertex/midnode numbering blocks are mixed")
        # every vertex edge carries exactly one midnode, shared by both sides
        pairs = np.concatenate([el[:, [0, 1]], el[:, [1, 2]], el[:, [2, 0]]])
        mids = np.concatenate([el[:, 3], el[:, 4], el[:, 5]])
        key = np.sort(pairs, axis=1)
        _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        if np.any(counts != 2):
            raise MeshError("surface is not closed and conforming (edge valence != 2)")
        first = np.full(len(counts), -1)
        first[inv.ravel()] = mids
        if np.any(first[inv.ravel()] != mids):
            raise MeshError("adjacent elements do not share edge midnodes")


def _midpoint_table(tri):
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    uniq, inv = np.unique(np.sort(e, axis=1), axis=0, return_inverse=True)
    inv = inv.ravel().reshape(3, -1).T
    return uniq, inv


def _project(points, radius):
    return radius * points / np.linalg.norm(points, axis=1)[:, None]


def build_icosphere(subdivision_level: int, radius: float = 1.0) -> SurfaceMesh:
    """Quadratic icosphere with all nodes on the sphere of the given radius.

    Each refinement splits every triangle into four and pushes the new
    vertices radially onto the sphere; the P2 midnodes of the final level
    are projected the same way.
    """
    level = int(subdivision_level)
    if level < 0:
        raise MeshError("subdivision level must be non-negative")
    if level > MAX_SUBDIVISION_LEVEL:
        raise MeshError(
            f"subdivision level {level} exceeds the size guard "
            f"({MAX_SUBDIVISION_LEVEL}; {20 * 4**level} elements requested)"
        )
    if not radius > 0:
        raise MeshError("radius must be positive")

    verts = _project(_ICOSAHEDRON_VERTICES.astype(float), radius)
    tri = _ICOSAHEDRON_FACES.copy()
    for _ in range(level):
        edges, mid = _midpoint_table(tri)
        nv = len(verts)
        new = _project(0.5 * (verts[edges[:, 0]] + verts[edges[:, 1]]), radius)
        verts = np.vstack([verts, new])
        m01, m12, m20 = (mid[:, k] + nv for k in range(3))
        a, b, c = tri.T
        tri = np.concatenate(
            [
                np.column_stack([a, m01, m20]),
                np.column_stack([m01, b, m12]),
                np.column_stack([m20, m12, c]),
                np.column_stack([m01, m12, m20]),
            ]
        )

    x = verts[tri]
    outward = np.einsum("ij,ij->i", np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]), x.sum(axis=1))
    flip = outward < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]

    edges, mid = _midpoint_table(tri)
    nv = len(verts)
    midnodes = _project(0.5 * (verts[edges[:, 0]] + verts[edges[:, 1]]), radius)
    nodes = np.vstack([verts, midnodes])
    elements = np.column_stack([tri, mid + nv]).astype(np.int64)
    return SurfaceMesh(nodes=nodes, elements=elements, vertex_count=nv)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_vtk(mesh: SurfaceMesh, fields, path, title: str = "membrane contact") -> Path:
    """Write a legacy ASCII VTK unstructured grid of quadratic triangles.

    Floats are written with ``repr`` so the file is byte-stable and a
    round trip through :func:`read_vtk` is exact.
    """
    path = Path(path)
    n = mesh.node_count
    lines = [
        "# vtk DataFile Version 4.2",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {n} double",
    ]
    lines += [" ".join(_fmt(c) for c in p) for p in mesh.nodes]
    m = mesh.element_count
    lines.append(f"CELLS {m} {7 * m}")
    lines += ["6 " + " ".join(str(int(i)) for i in el) for el in mesh.elements]
    lines.append(f"CELL_TYPES {m}")
    lines += [str(VTK_QUADRATIC_TRIANGLE)] * m
    fields = list(fields)
    if fields:
        lines.append(f"POINT_DATA {n}")
    for field in fields:
        vals = np.asarray(field.values, dtype=float)
        if vals.shape[0] != n or vals.ndim not in (1, 2):
            raise MeshError(
                f"field {field.name!r} has shape {vals.shape}, expected ({n},) or ({n}, 3)"
            )
        name = field.name.replace(" ", "_")
        if vals.ndim == 1:
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_fmt(v) for v in vals]
        elif vals.shape[1] == 3:
            lines.append(f"VECTORS {name} double")
            lines += [" ".join(_fmt(c) for c in row) for row in vals]
        else:
            raise MeshError(f"field {field.name!r} must have 1 or 3 components")
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc
    return path


def read_vtk(path) -> tuple[SurfaceMesh, list[NodalField]]:
    """Read a file produced by :func:`write_vtk`."""
    path = Path(path)
    try:
        tokens = path.read_text().split("\n")
    except OSError as exc:
        raise OSError(f"cannot read VTK file {path}: {exc}") from exc
    it = iter(tokens)
    nodes = elements = None
    fields = []
    for line in it:
        head = line.split()
        if not head:
            continue
        if head[0] == "POINTS":
            n = int(head[1])
            nodes = np.array([[float(c) for c in next(it).split()] for _ in range(n)])
        elif head[0] == "CELLS":
            m = int(head[1])
            rows = [next(it).split() for _ in range(m)]
            if any(r[0] != "6" for r in rows):
                raise MeshError(f"{path}: only 6-node cells are supported")
            elements = np.array([[int(c) for c in r[1:]] for r in rows], dtype=np.int64)
        elif head[0] == "CELL_TYPES":
            types = {next(it).strip() for _ in range(int(head[1]))}
            if types != {str(VTK_QUADRATIC_TRIANGLE)}:
                raise MeshError(f"{path}: unexpected cell types {sorted(types)}")
        elif head[0] == "SCALARS":
            next(it)  # LOOKUP_TABLE
            fields.append(NodalField(head[1], np.array([float(next(it)) for _ in range(len(nodes))])))
        elif head[0] == "VECTORS":
            vals = np.array([[float(c) for c in next(it).split()] for _ in range(len(nodes))])
            fields.append(NodalField(head[1], vals))
    if nodes is None or elements is None:
        raise MeshError(f"{path}: missing POINTS or CELLS section")
    vertex_count = int(elements[:, :3].max()) + 1
    return SurfaceMesh(nodes=nodes, elements=elements, vertex_count=vertex_count), fields
