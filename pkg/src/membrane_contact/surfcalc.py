"""Discrete surface geometry at quadrature points of a P2 parametric map.

For a curved element x(xi, eta) = sum_i x_i psi_i(xi, eta) the kernels here
produce the tangent vectors, the exact normal of the discrete surface, the
Jacobian J = [x_xi; x_eta; n], physical (tangential) derivatives of scalar
bases through J^-1, and the curvature tensor kappa = grad (x) n obtained from
the Weingarten equations.

Everything is vectorised over a leading ``(elements, points)`` pair of axes;
:func:`compute_frame` is the single-point convenience wrapper.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .refelem import ShapeTable, eval_shapes


class DegenerateElementError(ArithmeticError):
    def __init__(self, element, reason):
        super().__init__(f"degenerate element {element}: {reason}")
        self.element = element


@dataclass(frozen=True)
class Frame:
    """Geometry of the discrete surface at one point.

    ``projector`` is I - n (x) n.  ``area_scale`` converts reference area
    to physical area.  ``curvature`` is kappa = grad (x) n, with
    ``curvature[i, j] = d n_j / d x_i``.
    """

    jacobian: np.ndarray
    jacobian_inv: np.ndarray
    normal: np.ndarray
    projector: np.ndarray
    area_scale: float
    curvature: np.ndarray
    curvature_trace: float


@dataclass(frozen=True)
class FrameBundle:
    """Stacked frames, arrays indexed ``[element, point, ...]``."""

    points: np.ndarray
    jacobian: np.ndarray
    jacobian_inv: np.ndarray
    normal: np.ndarray
    area_scale: np.ndarray
    curvature: np.ndarray

    @property
    def projector(self) -> np.ndarray:
        n = self.normal
        return np.eye(3) - n[..., :, None] * n[..., None, :]

    @property
    def curvature_trace(self) -> np.ndarray:
        return np.trace(self.curvature, axis1=-2, axis2=-1)

    def frame(self, e: int, q: int) -> Frame:
        n = self.normal[e, q]
        k = self.curvature[e, q]
        return Frame(
            jacobian=self.jacobian[e, q],
            jacobian_inv=self.jacobian_inv[e, q],
            normal=n,
            projector=np.eye(3) - np.outer(n, n),
            area_scale=float(self.area_scale[e, q]),
            curvature=k,
            curvature_trace=float(np.trace(k)),
        )


def compute_frames(element_coords, geometry: ShapeTable, element_ids=None) -> FrameBundle:
    """Frames for every element at every point of ``geometry``.

    Args:
        element_coords: (E, 6, 3) node coordinates of P2 elements.
        geometry: degree-2 shape table evaluated at the target points.
        element_ids: global element numbers used in error messages.
    """
    X = np.asarray(element_coords, dtype=float)
    if X.ndim == 2:
        X = X[None]
    g = geometry
    pts = np.einsum("qa,ead->eqd", g.values, X)
    x_xi = np.einsum("qa,ead->eqd", g.dxi, X)
    x_eta = np.einsum("qa,ead->eqd", g.deta, X)
    x_xixi = np.einsum("qa,ead->eqd", g.d2xi, X)
    x_xieta = np.einsum("qa,ead->eqd", g.d2xieta, X)
    x_etaeta = np.einsum("qa,ead->eqd", g.d2eta, X)

    cross = np.cross(x_xi, x_eta)
    area = np.linalg.norm(cross, axis=-1)
    scale = np.maximum(np.linalg.norm(x_xi, axis=-1) * np.linalg.norm(x_eta, axis=-1), 1e-300)
    bad = area <= 1e-12 * scale
    if np.any(bad):
        e = int(np.argwhere(bad)[0, 0])
        eid = e if element_ids is None else int(element_ids[e])
        raise DegenerateElementError(eid, "vanishing tangent cross product (singular J)")
    n = cross / area[..., None]

    J = np.stack([x_xi, x_eta, n], axis=-2)
    Jinv = np.linalg.inv(J)

    T = np.stack([x_xi, x_eta], axis=-2)  # (E, Q, 2, 3)
    G1 = T @ np.swapaxes(T, -1, -2)
    G2 = np.stack(
        [
            np.stack([_dot(n, x_xixi), _dot(n, x_xieta)], axis=-1),
            np.stack([_dot(n, x_xieta), _dot(n, x_etaeta)], axis=-1),
        ],
        axis=-2,
    )
    # Weingarten: rows d n / d xi, d n / d eta = -(G2 G1^-1) T.  n_xi . x_xi
    # = -n . x_xixi fixes this product order; it keeps kappa symmetric.
    dn = -(G2 @ np.linalg.inv(G1)) @ T
    kappa = Jinv[..., :, :2] @ dn
    return FrameBundle(
        points=pts, jacobian=J, jacobian_inv=Jinv, normal=n, area_scale=area, curvature=kappa
    )


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def compute_frame(element_node_coords, point, shape_tables: ShapeTable | None = None) -> Frame:
    """Frame of a single P2 element at one reference point."""
    table = shape_tables if shape_tables is not None else eval_shapes(2, point)
    bundle = compute_frames(np.asarray(element_node_coords, dtype=float)[None], table)
    return bundle.frame(0, 0)


def physical_gradients(frame, reference_derivatives) -> np.ndarray:
    """Map reference derivatives of scalar bases to physical gradients.

    ``reference_derivatives`` is (nbasis, 2) holding (d/dxi, d/deta); the
    result is (nbasis, 3), rows tangential to the discrete surface.
    """
    d = np.asarray(reference_derivatives, dtype=float)
    jinv = frame.jacobian_inv if isinstance(frame, Frame) else frame
    return d @ jinv[:, :2].T


def bundle_gradients(bundle: FrameBundle, table: ShapeTable) -> np.ndarray:
    """Physical gradients of every basis in ``table``: (E, Q, nbasis, 3)."""
    ref = np.stack([table.dxi, table.deta], axis=-1)  # (Q, nb, 2)
    return np.einsum("qbk,eqik->eqbi", ref, bundle.jacobian_inv[..., :, :2])
