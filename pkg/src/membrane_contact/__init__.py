"""Frictionless contact of a curved elastic membrane with rigid obstacles."""

from .forms import (
    SurfaceDiscretization,
    assemble_elasticity,
    assemble_load,
    assemble_mixed_blocks,
    build_workspace,
    contact_residual,
    contact_tangent,
)
from .material import MaterialParams, derive_params
from .mesh import NodalField, SurfaceMesh, build_icosphere, read_vtk, write_vtk
from .obstacle import Ellipsoid, FloorPlane, gap
from .postprocess import compute_reaction, lumped_project, mixed_reaction
from .refelem import eval_shapes, gauss_rule
from .solver import ConvergenceError, SolverConfig, SolverState, select_gamma, solve_gls, solve_mixed
from .surfcalc import compute_frame, compute_frames

__all__ = [
    "ConvergenceError",
    "Ellipsoid",
    "FloorPlane",
    "MaterialParams",
    "NodalField",
    "SolverConfig",
    "SolverState",
    "SurfaceDiscretization",
    "SurfaceMesh",
    "assemble_elasticity",
    "assemble_load",
    "assemble_mixed_blocks",
    "build_icosphere",
    "build_workspace",
    "compute_frame",
    "compute_frames",
    "compute_reaction",
    "contact_residual",
    "contact_tangent",
    "derive_params",
    "eval_shapes",
    "gap",
    "gauss_rule",
    "lumped_project",
    "mixed_reaction",
    "read_vtk",
    "select_gamma",
    "solve_gls",
    "solve_mixed",
    "write_vtk",
]
