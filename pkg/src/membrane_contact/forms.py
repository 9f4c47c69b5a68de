"""Assembly of membrane elasticity, loads and the contact terms.

Displacements are continuous P1 on the vertex nodes, three dofs per vertex
(``dof = 3 * vertex + component``); the geometry is the P2 map of each
element.  All integrals use one quadrature rule whose per-point data are
cached in a :class:`SurfaceDiscretization`.

The contact term of the Galerkin least-squares method is

    b(u; v) = int  1/gamma [u_n - g + gamma (f_n + s(u))]_+ (v_n + gamma s(v))
                 - gamma (f_n + s(u)) s(v)  dGamma_h

with s(u) = -sigma(u) : kappa (:func:`sigma_kappa_vectors`).  The mixed
method keeps a P1 multiplier p and uses [u_n - g - gamma p]_+ instead.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import SurfaceMesh
from .obstacle import NO_CONTACT_GAP
from .obstacle import gap as obstacle_gap
from .refelem import DEFAULT_QUADRATURE_DEGREE, eval_shapes, gauss_rule
from .surfcalc import FrameBundle, bundle_gradients, compute_frames

CHUNK = 4096


def assembly_threads() -> int:
    try:
        return max(1, int(os.environ.get("MEMBRANE_THREADS", "1")))
    except ValueError:
        return 1


def _map_chunks(func, n, chunk=CHUNK):
    """Apply ``func(slice)`` over element chunks; results keep element order."""
    slices = [slice(i, min(i + chunk, n)) for i in range(0, n, chunk)]
    threads = min(assembly_threads(), len(slices))
    if threads <= 1:
        return [func(s) for s in slices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, slices))


class SurfaceDiscretization:
    """Quadrature-point cache for P1 displacements on a P2 surface mesh."""

    def __init__(self, mesh: SurfaceMesh, quadrature_degree: int = DEFAULT_QUADRATURE_DEGREE):
        self.mesh = mesh
        self.rule = gauss_rule(quadrature_degree)
        geo = eval_shapes(2, self.rule.points)
        p1 = eval_shapes(1, self.rule.points)
        ids = np.arange(mesh.element_count)
        bundles = _map_chunks(
            lambda s: compute_frames(mesh.nodes[mesh.elements[s]], geo, element_ids=ids[s]),
            mesh.element_count,
        )
        self.frames = FrameBundle(
            *(np.concatenate([getattr(b, f) for b in bundles]) for f in FrameBundle.__dataclass_fields__)
        )
        self.phi = p1.values  # (Q, 3)
        self.grads = bundle_gradients(self.frames, p1)  # (E, Q, 3, 3)
        self.dA = self.frames.area_scale * self.rule.weights  # (E, Q)
        tri = mesh.triangles
        self.edofs = (3 * tri[:, :, None] + np.arange(3)).reshape(-1, 9)
        self.ndof = 3 * mesh.vertex_count

    @property
    def element_count(self) -> int:
        return self.mesh.element_count

    @property
    def normals(self) -> np.ndarray:
        return self.frames.normal

    @property
    def points(self) -> np.ndarray:
        return self.frames.points

    def dof_map(self) -> np.ndarray:
        """(vertex_count, 3) global dof indices per vertex."""
        return np.arange(self.ndof).reshape(-1, 3)

    def area(self) -> float:
        return float(self.dA.sum())

    def strain_operator(self, s=slice(None)) -> np.ndarray:
        """B with E_Gamma(u)[i, j] = B[..., 3*i + j, :] @ u_e, shape (E, Q, 9, 9)."""
        g = self.grads[s]  # [e, q, a, j]
        E, Q = g.shape[:2]
        B = np.zeros((E, Q, 3, 3, 3, 3))  # [e, q, i, j, a, c]
        for c in range(3):
            B[:, :, c, :, :, c] += 0.5 * np.swapaxes(g, -1, -2)
            B[:, :, :, c, :, c] += 0.5 * np.swapaxes(g, -1, -2)
        return B.reshape(E, Q, 9, 9)

    def normal_vectors(self, s=slice(None)) -> np.ndarray:
        """Row vectors mapping element dofs to u . n^h, shape (E, Q, 9)."""
        n = self.frames.normal[s]
        return np.einsum("qa,eqc->eqac", self.phi, n).reshape(n.shape[0], n.shape[1], 9)

    def interpolate(self, u) -> np.ndarray:
        """Displacement at quadrature points, (E, Q, 3)."""
        ue = np.asarray(u)[self.edofs].reshape(-1, 3, 3)
        return np.einsum("qa,eac->eqc", self.phi, ue)

    def scatter(self, elem_vectors) -> np.ndarray:
        """Sum (E, 9) element vectors into a global dof vector."""
        return np.bincount(self.edofs.ravel(), weights=np.asarray(elem_vectors).ravel(), minlength=self.ndof)

    def scatter_matrix(self, elem_matrices, edofs=None, shape=None) -> sp.csr_matrix:
        edofs = self.edofs if edofs is None else edofs
        k = edofs.shape[1]
        rows = np.repeat(edofs, k, axis=1).ravel()
        cols = np.tile(edofs, (1, k)).ravel()
        shape = (self.ndof, self.ndof) if shape is None else shape
        return sp.coo_matrix((np.asarray(elem_matrices).ravel(), (rows, cols)), shape=shape).tocsr()

    def mass_matrix(self) -> sp.csr_matrix:
        """Scalar P1 mass matrix over the vertices."""
        me = np.einsum("eq,qa,qb->eab", self.dA, self.phi, self.phi)
        return self.scatter_matrix(me, self.mesh.triangles, (self.mesh.vertex_count,) * 2)

    def lumped_weights(self) -> np.ndarray:
        """int phi_i dGamma_h per vertex."""
        we = np.einsum("eq,qa->ea", self.dA, self.phi)
        return np.bincount(self.mesh.triangles.ravel(), weights=we.ravel(), minlength=self.mesh.vertex_count)

    def rigid_modes(self) -> np.ndarray:
        """(ndof, 6) translations e_x, e_y, e_z then rotations e_k x X."""
        x = self.mesh.vertices
        modes = np.zeros((self.mesh.vertex_count, 3, 6))
        for k in range(3):
            modes[:, k, k] = 1.0
            modes[:, :, 3 + k] = np.cross(np.eye(3)[k], x)
        return modes.reshape(self.ndof, 6)

    def l2_norm(self, u) -> float:
        """L2(Gamma_h) norm of a P1 vector field given as a dof vector."""
        uq = self.interpolate(u)
        return float(np.sqrt(np.einsum("eq,eqc,eqc->", self.dA, uq, uq)))


def as_discretization(mesh_or_disc, quadrature=DEFAULT_QUADRATURE_DEGREE) -> SurfaceDiscretization:
    if isinstance(mesh_or_disc, SurfaceDiscretization):
        return mesh_or_disc
    return SurfaceDiscretization(mesh_or_disc, quadrature)


@dataclass
class AssembledSystem:
    stiffness: sp.csr_matrix
    load: np.ndarray
    dof_map: np.ndarray


def _elasticity_chunk(disc, params, s):
    B = disc.strain_operator(s)
    n = disc.frames.normal[s]
    EnB = np.einsum("eqijk,eqj->eqik", B.reshape(B.shape[0], B.shape[1], 3, 3, 9), n)
    divB = B[:, :, [0, 4, 8], :].sum(axis=2)
    w = disc.dA[s]
    mu, lam0 = params.mu, params.lambda0
    return (
        2 * mu * np.einsum("eq,eqik,eqil->ekl", w, B, B)
        - 4 * mu * np.einsum("eq,eqik,eqil->ekl", w, EnB, EnB)
        + lam0 * np.einsum("eq,eqk,eql->ekl", w, divB, divB)
    )


def assemble_elasticity(mesh, params, quadrature=DEFAULT_QUADRATURE_DEGREE, load=None) -> AssembledSystem:
    """Membrane stiffness a_h(u, v) = int sigma_Gamma(u) : eps_Gamma(v)."""
    disc = as_discretization(mesh, quadrature)
    ke = np.concatenate(_map_chunks(lambda s: _elasticity_chunk(disc, params, s), disc.element_count))
    A = disc.scatter_matrix(ke)
    A = 0.5 * (A + A.T)
    F = np.zeros(disc.ndof) if load is None else assemble_load(disc, load)
    return AssembledSystem(stiffness=A.tocsr(), load=F, dof_map=disc.dof_map())


def _eval_load(disc, f):
    x = disc.frames.points
    if callable(f):
        vals = np.asarray(f(x), dtype=float)
        return np.broadcast_to(vals, x.shape)
    return np.broadcast_to(np.asarray(f, dtype=float), x.shape)


def assemble_load(mesh, f, quadrature=DEFAULT_QUADRATURE_DEGREE) -> np.ndarray:
    """L(v) = int f . v dGamma_h for constant or callable f(x) -> (..., 3)."""
    disc = as_discretization(mesh, quadrature)
    fq = _eval_load(disc, f)
    fe = np.einsum("eq,qa,eqc->eac", disc.dA, disc.phi, fq).reshape(-1, 9)
    return disc.scatter(fe)


def sigma_kappa_vectors(disc, params, s=slice(None)) -> np.ndarray:
    """Row vectors with s(u) = -sigma_Gamma(u) : kappa^h = svec @ u_e, (E, Q, 9)."""
    B = disc.strain_operator(s)
    kappa = disc.frames.curvature[s]
    tr = np.trace(kappa, axis1=-2, axis2=-1)
    weight = 2 * params.mu * kappa + params.lambda0 * tr[..., None, None] * np.eye(3)
    return -np.einsum("eqi,eqik->eqk", weight.reshape(weight.shape[0], weight.shape[1], 9), B)


@dataclass
class ContactWorkspace:
    """Per-quadrature-point contact data for one discretization and obstacle."""

    disc: SurfaceDiscretization
    gamma: float
    gap: np.ndarray  # (E, Q)
    normal_load: np.ndarray  # (E, Q), f . n^h
    nvec: np.ndarray  # (E, Q, 9)
    svec: np.ndarray  # (E, Q, 9)
    params: object = None
    load: np.ndarray = field(default=None, repr=False)
    obstacle: object = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def local(self, u):
        return np.asarray(u)[self.disc.edofs]

    def normal_displacement(self, u) -> np.ndarray:
        return np.einsum("eqk,ek->eq", self.nvec, self.local(u))

    def sigma_kappa(self, u) -> np.ndarray:
        return np.einsum("eqk,ek->eq", self.svec, self.local(u))

    def gls_argument(self, u) -> np.ndarray:
        """u_n - g + gamma (f_n + s(u)) at quadrature points."""
        return self.normal_displacement(u) - self.gap + self.gamma * (self.normal_load + self.sigma_kappa(u))


def build_workspace(mesh, params, obstacle, f, gamma, quadrature=DEFAULT_QUADRATURE_DEGREE) -> ContactWorkspace:
    disc = as_discretization(mesh, quadrature)
    x = disc.frames.points
    n = disc.frames.normal
    g = np.full(x.shape[:2], NO_CONTACT_GAP) if obstacle is None else obstacle_gap(obstacle, x, n)
    fq = _eval_load(disc, np.zeros(3) if f is None else f)
    fn = np.einsum("eqc,eqc->eq", fq, n)
    svec = np.concatenate(_map_chunks(lambda s: sigma_kappa_vectors(disc, params, s), disc.element_count))
    return ContactWorkspace(
        disc=disc,
        gamma=float(gamma),
        gap=np.asarray(g, dtype=float),
        normal_load=fn,
        nvec=disc.normal_vectors(),
        svec=svec,
        params=params,
        load=None if f is None else assemble_load(disc, f),
        obstacle=obstacle,
    )


def contact_residual(ws: ContactWorkspace, u) -> np.ndarray:
    """Global vector of b(u; v) for all basis directions v."""
    gam = ws.gamma
    arg = ws.gls_argument(u)
    pos = np.maximum(arg, 0.0)
    sk = ws.sigma_kappa(u)
    coef_w = ws.disc.dA * pos / gam
    coef_s = -ws.disc.dA * gam * (ws.normal_load + sk)
    re = np.einsum("eq,eqk->ek", coef_w, ws.nvec + gam * ws.svec) + np.einsum("eq,eqk->ek", coef_s, ws.svec)
    return ws.disc.scatter(re)


def active_flags(ws: ContactWorkspace, u) -> np.ndarray:
    """Generalized-derivative flag of [.]_+; 0 on the kink."""
    return ws.gls_argument(u) > 0.0


def contact_tangent(ws: ContactWorkspace, u, active=None) -> sp.csr_matrix:
    """Generalized Jacobian of :func:`contact_residual`."""
    gam = ws.gamma
    H = active_flags(ws, u) if active is None else active
    w = ws.nvec + gam * ws.svec
    ke = np.einsum("eq,eqk,eql->ekl", ws.disc.dA * H / gam, w, w)
    ke -= np.einsum("eq,eqk,eql->ekl", ws.disc.dA * gam, ws.svec, ws.svec)
    return ws.disc.scatter_matrix(ke)


def sigma_kappa_matrix(ws: ContactWorkspace) -> sp.csr_matrix:
    """S with u^T S u = ||s(u)||^2 in L2(Gamma_h)."""
    ke = np.einsum("eq,eqk,eql->ekl", ws.disc.dA, ws.svec, ws.svec)
    return ws.disc.scatter_matrix(ke)


def gls_energy(ws: ContactWorkspace, A, F, u) -> float:
    """Discrete functional whose gradient is A u + b(u; .) - F."""
    gam = ws.gamma
    pos = np.maximum(ws.gls_argument(u), 0.0)
    t = ws.normal_load + ws.sigma_kappa(u)
    integrand = pos**2 / (2 * gam) - 0.5 * gam * t**2
    return float(0.5 * u @ (A @ u) + np.sum(ws.disc.dA * integrand) - F @ u)


# -- mixed P1-P1 multiplier method -------------------------------------------


@dataclass
class MixedBlocks:
    """Data for the mixed residual over x = [u (3N), p (N)].

    ``mass`` is the multiplier mass matrix used in gamma int p q; the
    row-sum lumped form keeps every nodal p <= 0.
    """

    ws: ContactWorkspace
    stiffness: sp.csr_matrix
    load: np.ndarray
    mass: sp.csr_matrix

    @property
    def ndof_u(self) -> int:
        return self.ws.disc.ndof

    @property
    def ndof(self) -> int:
        return self.ndof_u + self.ws.disc.mesh.vertex_count

    def split(self, x):
        return x[: self.ndof_u], x[self.ndof_u :]

    def argument(self, x) -> np.ndarray:
        """u_n - g - gamma p at quadrature points."""
        u, p = self.split(x)
        pq = np.einsum("qa,ea->eq", self.ws.disc.phi, p[self.ws.disc.mesh.triangles])
        return self.ws.normal_displacement(u) - self.ws.gap - self.ws.gamma * pq

    def residual(self, x) -> np.ndarray:
        ws, disc, gam = self.ws, self.ws.disc, self.ws.gamma
        u, p = self.split(x)
        pos = np.maximum(self.argument(x), 0.0)
        ru = self.stiffness @ u + disc.scatter(np.einsum("eq,eqk->ek", disc.dA * pos / gam, ws.nvec)) - self.load
        # q-rows: -int [.]_+ q - gamma int p q
        pe = -np.einsum("eq,qa->ea", disc.dA * pos, disc.phi)
        rp = np.bincount(disc.mesh.triangles.ravel(), weights=pe.ravel(), minlength=disc.mesh.vertex_count)
        rp -= gam * (self.mass @ p)
        return np.concatenate([ru, rp])

    def jacobian(self, x, active=None) -> sp.csr_matrix:
        ws, disc, gam = self.ws, self.ws.disc, self.ws.gamma
        H = (self.argument(x) > 0.0) if active is None else active
        nu = self.ndof_u
        # element vectors over [9 displacement dofs, 3 multiplier dofs]
        vec = np.concatenate(
            [ws.nvec, -gam * np.broadcast_to(disc.phi, ws.nvec.shape[:2] + (3,))], axis=-1
        )
        ke = np.einsum("eq,eqk,eql->ekl", disc.dA * H / gam, vec, vec)
        edofs = np.concatenate([disc.edofs, nu + disc.mesh.triangles], axis=1)
        K = disc.scatter_matrix(ke, edofs, (self.ndof, self.ndof))
        blocks = sp.block_diag([self.stiffness, -gam * self.mass], format="csr")
        return (K + blocks).tocsr()


def multiplier_mass(disc: SurfaceDiscretization, kind: str = "lumped") -> sp.csr_matrix:
    if kind == "consistent":
        return disc.mass_matrix()
    if kind == "lumped":
        return sp.diags(disc.lumped_weights(), format="csr")
    raise ValueError(f"unknown multiplier mass {kind!r}; use 'lumped' or 'consistent'")


def assemble_mixed_blocks(
    mesh, params, obstacle=None, f=None, gamma=1.0, quadrature=DEFAULT_QUADRATURE_DEGREE, mass="lumped"
) -> MixedBlocks:
    disc = as_discretization(mesh, quadrature)
    ws = build_workspace(disc, params, obstacle, f, gamma)
    system = assemble_elasticity(disc, params)
    load = np.zeros(disc.ndof) if f is None else ws.load
    return MixedBlocks(ws=ws, stiffness=system.stiffness, load=load, mass=multiplier_mass(disc, mass))
