"""Reaction-force recovery and scalar diagnostics of converged solutions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forms import ContactWorkspace, SurfaceDiscretization
from .mesh import NodalField
from .obstacle import gap as obstacle_gap


@dataclass(frozen=True)
class ReactionField:
    """Contact reaction of a GLS solution.

    ``raw`` is p* per quadrature point (E, Q); ``vertex_values`` its lumped
    projection onto P1; ``resultant`` the force the obstacle exerts on the
    membrane, -int p* n^h.
    """

    raw: np.ndarray
    vertex_values: np.ndarray
    nodal: NodalField
    resultant: np.ndarray
    contact_area: float
    max_penetration: float
    max_complementarity: float


class UnconvergedStateError(ValueError):
    pass


def _require_converged(state):
    if not state.converged:
        raise UnconvergedStateError("post-processing needs a converged solver state")


def lumped_weights(disc: SurfaceDiscretization) -> np.ndarray:
    w = disc.lumped_weights()
    if np.any(w <= 0):
        raise ArithmeticError("non-positive lumped weight; mesh is invalid")
    return w


def lumped_project_vertices(samples, disc: SurfaceDiscretization) -> np.ndarray:
    """p_i = int p phi_i / int phi_i for quadrature samples p (E, Q)."""
    num = np.einsum("eq,eq,qa->ea", disc.dA, np.asarray(samples, dtype=float), disc.phi)
    num = np.bincount(disc.mesh.triangles.ravel(), weights=num.ravel(), minlength=disc.mesh.vertex_count)
    return num / lumped_weights(disc)


def lumped_project(samples, disc: SurfaceDiscretization, name: str = "p_h") -> NodalField:
    """Lumped-mass L2 projection onto P1, extended to every mesh node."""
    return NodalField(name, disc.mesh.p1_to_nodes(lumped_project_vertices(samples, disc)))


def compute_reaction(state, workspace: ContactWorkspace | None = None) -> ReactionField:
    _require_converged(state)
    ws = workspace if workspace is not None else state.workspace
    disc = ws.disc
    u = state.u
    pstar = np.maximum(ws.gls_argument(u), 0.0) / ws.gamma
    pen = ws.normal_displacement(u) - ws.gap
    vertex = lumped_project_vertices(pstar, disc)
    resultant = -np.einsum("eq,eq,eqc->c", disc.dA, pstar, disc.normals)
    area = float(np.sum(disc.dA * (pstar > 0)))
    return ReactionField(
        raw=pstar,
        vertex_values=vertex,
        nodal=NodalField("reaction", disc.mesh.p1_to_nodes(vertex)),
        resultant=resultant,
        contact_area=area,
        max_penetration=float(pen.max()),
        max_complementarity=float(np.abs(pstar * pen).max()),
    )


def compute_mixed_reaction(state) -> ReactionField:
    """Reaction summary of a mixed state.

    ``raw`` is the traction [u_n - g - gamma p^h]_+ / gamma that enters the
    displacement equation, so the resultant balances the load.  The
    multiplier is nonpositive in contact; ``vertex_values`` holds -p^h.
    """
    _require_converged(state)
    if state.p is None:
        raise ValueError("compute_mixed_reaction needs a mixed-method state")
    blocks = state.system
    disc = blocks.ws.disc
    x = np.concatenate([state.u, state.p])
    arg = blocks.argument(x)
    pressure = np.maximum(arg, 0.0) / blocks.ws.gamma
    pen = blocks.ws.normal_displacement(state.u) - blocks.ws.gap
    return ReactionField(
        raw=pressure,
        vertex_values=-state.p,
        nodal=NodalField("reaction", disc.mesh.p1_to_nodes(-state.p)),
        resultant=-np.einsum("eq,eq,eqc->c", disc.dA, pressure, disc.normals),
        contact_area=float(np.sum(disc.dA * (arg > 0))),
        max_penetration=float(pen.max()),
        max_complementarity=float(np.abs(pressure * pen).max()),
    )


def vertex_normals(disc: SurfaceDiscretization) -> np.ndarray:
    """Unit normals at vertices: lumped average of n^h."""
    nv = disc.mesh.vertex_count
    tri = disc.mesh.triangles.ravel()
    acc = np.einsum("eq,qa,eqc->eac", disc.dA, disc.phi, disc.normals).reshape(-1, 3)
    out = np.stack([np.bincount(tri, weights=acc[:, c], minlength=nv) for c in range(3)], axis=1)
    return out / np.linalg.norm(out, axis=1)[:, None]


def mixed_reaction(state, workspace: ContactWorkspace | None = None) -> NodalField:
    """Post-processed multiplier force -(u.n - g - gamma p) / gamma at vertices.

    Evaluated without clipping.  Vertices whose normal ray never meets the
    obstacle have no finite gap and are reported as NaN.
    """
    _require_converged(state)
    if state.p is None:
        raise ValueError("mixed_reaction needs a mixed-method state with a multiplier")
    ws = workspace if workspace is not None else state.workspace
    disc = ws.disc
    n = vertex_normals(disc)
    x = disc.mesh.vertices
    if ws.obstacle is None:
        g = np.full(len(x), np.nan)
    else:
        g = obstacle_gap(ws.obstacle, x, n)
        g = np.where(g >= ws.obstacle.no_contact_gap, np.nan, g)
    un = np.einsum("ic,ic->i", state.u.reshape(-1, 3), n)
    vals = -(un - g - ws.gamma * state.p) / ws.gamma
    return NodalField("p_star_mixed", disc.mesh.p1_to_nodes(vals))


def one_ring_match(mesh, set_a, set_b) -> bool:
    """True if each vertex set lies within one edge ring of the other."""
    a = np.zeros(mesh.vertex_count, dtype=bool)
    b = np.zeros(mesh.vertex_count, dtype=bool)
    a[np.asarray(set_a, dtype=int)] = True
    b[np.asarray(set_b, dtype=int)] = True
    e = mesh.edges()

    def grow(mask):
        out = mask.copy()
        out[e[mask[e[:, 0]], 1]] = True
        out[e[mask[e[:, 1]], 0]] = True
        return out

    return bool(np.all(~a | grow(b)) and np.all(~b | grow(a)))


def diagnostics(scenario: str, state, reaction: ReactionField | None = None) -> dict:
    """Summary row: scenario, gamma, iterations, contact area, resultant, penetration."""
    row = {
        "scenario": scenario,
        "gamma": state.gamma,
        "iterations": state.iterations,
        "converged": state.converged,
        "final_residual": state.trace[-1]["residual"],
    }
    if reaction is not None:
        row.update(
            contact_area=reaction.contact_area,
            resultant_x=float(reaction.resultant[0]),
            resultant_y=float(reaction.resultant[1]),
            resultant_z=float(reaction.resultant[2]),
            max_penetration=reaction.max_penetration,
        )
    return row


def format_table(rows) -> str:
    if not rows:
        return ""
    keys = list(rows[0])
    for r in rows[1:]:
        keys += [k for k in r if k not in keys]

    def cell(v):
        if isinstance(v, float):
            return f"{v + 0.0:.6g}"
        return "" if v is None else str(v)

    cols = [[k] + [cell(r.get(k)) for r in rows] for k in keys]
    widths = [max(len(c) for c in col) for col in cols]
    lines = []
    for i in range(len(rows) + 1):
        lines.append("  ".join(col[i].ljust(w) for col, w in zip(cols, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
