"""Semismooth Newton solvers for the GLS and mixed contact systems."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .forms import (
    ContactWorkspace,
    MixedBlocks,
    SurfaceDiscretization,
    as_discretization,
    assemble_elasticity,
    build_workspace,
    contact_residual,
    contact_tangent,
    gls_energy,
    multiplier_mass,
)
from .material import MaterialParams
from .refelem import DEFAULT_QUADRATURE_DEGREE

log = logging.getLogger(__name__)

RIGID_MODE_NAMES = ("tx", "ty", "tz", "rx", "ry", "rz")
SINGULAR_PIVOT_RATIO = 1e-13


class ConvergenceError(RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class SingularTangentError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Newton and augmentation settings.

    ``gamma_rule`` is ``"material"`` (gamma = gamma_factor / (lambda0 + mu)) or
    ``"curvature"`` (gamma = safety / (2 |kappa|_max^2 (mu + lambda0))).
    ``deflation_modes`` lists rigid modes by index or name (tx, ty, tz, rx,
    ry, rz); ``None`` picks all rotations plus every translation along
    which the load has no net resultant.  ``line_search`` is ``"residual"``
    (backtrack until the residual norm does not grow) or ``"energy"``
    (Armijo backtracking on the GLS functional; mixed solves always use
    the residual norm).
    """

    gamma_rule: str = "material"
    gamma_factor: float = 1e-2
    safety: float = 0.5
    newton_tol: float = 1e-10
    max_iters: int = 50
    damping: float = 0.5
    max_halvings: int = 20
    deflation_modes: tuple | None = None
    quadrature_degree: int = DEFAULT_QUADRATURE_DEGREE
    multiplier_mass: str = "lumped"
    line_search: str = "residual"

    def __post_init__(self):
        if self.gamma_rule not in ("material", "curvature"):
            raise ValueError(f"unknown gamma rule {self.gamma_rule!r}")
        if not (self.newton_tol > 0 and self.gamma_factor > 0):
            raise ValueError("tolerances and gamma factor must be positive")
        if not 0.0 < self.safety < 1.0:
            raise ValueError("curvature safety factor must lie in (0, 1)")
        if self.multiplier_mass not in ("lumped", "consistent"):
            raise ValueError(f"unknown multiplier mass {self.multiplier_mass!r}")
        if self.line_search not in ("residual", "energy"):
            raise ValueError(f"unknown line search {self.line_search!r}")
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping factor must lie in (0, 1)")


@dataclass(frozen=True)
class SolverState:
    u: np.ndarray
    converged: bool
    trace: list
    gamma: float
    p: np.ndarray | None = None
    workspace: ContactWorkspace | None = field(default=None, repr=False)
    system: object = field(default=None, repr=False)

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1


def max_curvature_norm(disc: SurfaceDiscretization) -> float:
    """Largest Frobenius norm of kappa^h over all quadrature points."""
    return float(np.linalg.norm(disc.frames.curvature, axis=(-2, -1)).max())


def select_gamma(config: SolverConfig, params: MaterialParams, mesh_curvature_max: float | None = None) -> float:
    stiff = params.mu + params.lambda0
    if config.gamma_rule == "material":
        return config.gamma_factor / stiff
    if not mesh_curvature_max or mesh_curvature_max <= 0:
        raise ValueError(
            "curvature-bound gamma needs a positive curvature maximum; "
            "use the 'material' rule on flat geometry"
        )
    return config.safety / (2.0 * mesh_curvature_max**2 * stiff)


def resolve_modes(spec, load_resultant=None, load_scale=None) -> list[int]:
    """Indices of the rigid modes to deflate.

    With ``spec=None`` a translation is left free when the load resultant
    along it exceeds 1e-10 of ``load_scale`` (default: the resultant's
    largest component).
    """
    if spec is None:
        free = set()
        if load_resultant is not None:
            res = np.abs(np.asarray(load_resultant, dtype=float))
            scale = res.max() if load_scale is None else load_scale
            free = {k for k in range(3) if res[k] > 1e-10 * scale}
        return [k for k in range(6) if k not in free]
    out = []
    for item in spec:
        k = RIGID_MODE_NAMES.index(item) if isinstance(item, str) else int(item)
        if not 0 <= k < 6:
            raise ValueError(f"rigid mode index out of range: {item}")
        out.append(k)
    return sorted(set(out))


def deflate_rigid_modes(matrix, modes) -> sp.csc_matrix:
    """Saddle-point augmentation [[K, M], [M^T, 0]] constraining M^T x = 0."""
    M = np.asarray(modes, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    k = M.shape[1]
    if k and np.linalg.matrix_rank(M) < k:
        raise ValueError("deflation modes are linearly dependent")
    Ms = sp.csr_matrix(M)
    return sp.bmat([[sp.csr_matrix(matrix), Ms], [Ms.T, None]], format="csc") if k else sp.csc_matrix(matrix)


def solve_deflated(matrix, modes, rhs) -> np.ndarray:
    """Solve K x = rhs on the complement of ``modes`` (M^T x = 0)."""
    M = np.asarray(modes, dtype=float).reshape(len(rhs), -1)
    aug = deflate_rigid_modes(matrix, M)
    b = np.concatenate([rhs, np.zeros(M.shape[1])])
    # symmetric equilibration so small multiplier-block pivots stay on the diagonal
    rowmax = np.asarray(abs(aug).max(axis=1).todense()).ravel()
    d = 1.0 / np.sqrt(np.where(rowmax > 0, rowmax, 1.0))
    D = sp.diags(d)
    try:
        # symmetric ordering keeps fill low; fall back to full pivoting if
        # the restricted pivoting loses accuracy
        lu = spla.splu(
            (D @ aug @ D).tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=1e-3, options={"SymmetricMode": True}
        )
        pivots = np.abs(lu.U.diagonal())
        if pivots.min() <= SINGULAR_PIVOT_RATIO * pivots.max():
            raise RuntimeError(f"pivot ratio {pivots.min() / pivots.max():.1e}")
        sol = d * lu.solve(d * b)
        bn = np.linalg.norm(b)
        if not np.all(np.isfinite(sol)) or np.linalg.norm(aug @ sol - b) > 1e-8 * max(bn, 1e-300):
            sol = spla.splu(aug).solve(b)
    except RuntimeError as exc:
        raise SingularTangentError(
            f"singular tangent after deflating {M.shape[1]} modes; deflate more rigid modes ({exc})"
        ) from exc
    if not np.all(np.isfinite(sol)):
        raise SingularTangentError("non-finite Newton step; deflate more rigid modes")
    return sol[: len(rhs)]


class _Projector:
    """Euclidean projection onto the complement of span(M)."""

    def __init__(self, M):
        self.Q = np.linalg.qr(M)[0] if M.shape[1] else M

    def __call__(self, r):
        return r - self.Q @ (self.Q.T @ r) if self.Q.shape[1] else r


def semismooth_newton(
    residual, jacobian, x0, modes, config: SolverConfig, active_count, load_norm=0.0, label="newton", energy=None
):
    """Damped semismooth Newton with rigid-mode deflation.

    Convergence: ||r_perp|| <= tol * max(||F||, ||r_perp(x0)||), where
    r_perp is the residual with its deflated-mode component removed.
    Steps are halved until ``energy`` satisfies an Armijo decrease when a
    potential is supplied, otherwise until ||r_perp|| does not grow.
    Returns ``(x, trace, converged)``.
    """
    project = _Projector(modes)
    x = np.array(x0, dtype=float)
    r = residual(x)
    rn = float(np.linalg.norm(project(r)))
    ref = max(load_norm, rn)
    target = config.newton_tol * ref if ref > 0 else 1e-14
    trace = [{"iteration": 0, "residual": rn, "relative": rn / ref if ref else 0.0, "active": active_count(x), "step": 0.0}]
    log.info("%s iter=0 residual=%.6e active=%d", label, rn, trace[0]["active"])
    for it in range(1, config.max_iters + 1):
        if rn <= target:
            return x, trace, True
        K = jacobian(x)
        dx = solve_deflated(K, modes, -r)
        t = 1.0
        e0 = energy(x) if energy is not None else None
        slope = float(r @ dx)
        for _ in range(config.max_halvings + 1):
            xt = x + t * dx
            rt = residual(xt)
            rtn = float(np.linalg.norm(project(rt)))
            if e0 is None:
                if rtn <= rn:
                    break
            elif energy(xt) <= e0 + 1e-4 * t * slope or rtn <= rn:
                break
            t *= config.damping
        else:
            raise ConvergenceError(
                f"{label}: no residual decrease after {config.max_halvings} step halvings at iteration {it}",
                trace,
            )
        x, r, rn = xt, rt, rtn
        act = active_count(x)
        trace.append({"iteration": it, "residual": rn, "relative": rn / ref if ref else 0.0, "active": act, "step": t})
        log.info("%s iter=%d residual=%.6e active=%d step=%.3g", label, it, rn, act, t)
    if rn <= target:
        return x, trace, True
    raise ConvergenceError(f"{label}: not converged after {config.max_iters} iterations (residual {rn:.3e})", trace)


def _load_vector(disc, f):
    from .forms import assemble_load

    return np.zeros(disc.ndof) if f is None else assemble_load(disc, f)


def _setup(mesh, params, obstacle, f, config):
    disc = as_discretization(mesh, config.quadrature_degree)
    kappa_max = max_curvature_norm(disc) if config.gamma_rule == "curvature" else None
    gamma = select_gamma(config, params, kappa_max)
    ws = build_workspace(disc, params, obstacle, f, gamma)
    F = _load_vector(disc, f)
    system = assemble_elasticity(disc, params)
    system.load = F
    resultant = F.reshape(-1, 3).sum(axis=0)
    modes = disc.rigid_modes()[:, resolve_modes(config.deflation_modes, resultant, np.abs(F).sum())]
    return disc, ws, system, modes, gamma


def solve_gls(mesh, params, obstacle, f=None, config: SolverConfig | None = None) -> SolverState:
    """Solve a_h(u, v) + b(u; v) = L(v) by semismooth Newton."""
    config = config or SolverConfig()
    disc, ws, system, modes, gamma = _setup(mesh, params, obstacle, f, config)
    A, F = system.stiffness, system.load

    def residual(u):
        return A @ u + contact_residual(ws, u) - F

    def jacobian(u):
        return A + contact_tangent(ws, u)

    def active(u):
        return int(np.count_nonzero(ws.gls_argument(u) > 0))

    u, trace, ok = semismooth_newton(
        residual, jacobian, np.zeros(disc.ndof), modes, config, active, float(np.linalg.norm(F)), "gls",
        energy=(lambda u: gls_energy(ws, A, F, u)) if config.line_search == "energy" else None,
    )
    return SolverState(u=u, converged=ok, trace=trace, gamma=gamma, workspace=ws, system=system)


def solve_mixed(mesh, params, obstacle, f=None, config: SolverConfig | None = None) -> SolverState:
    """Solve the P1-P1 augmented Lagrangian system for (u, p)."""
    config = config or SolverConfig()
    disc, ws, system, modes, gamma = _setup(mesh, params, obstacle, f, config)
    blocks = MixedBlocks(
        ws=ws, stiffness=system.stiffness, load=system.load, mass=multiplier_mass(disc, config.multiplier_mass)
    )
    nv = disc.mesh.vertex_count
    full_modes = np.vstack([modes, np.zeros((nv, modes.shape[1]))])

    def active(x):
        return int(np.count_nonzero(blocks.argument(x) > 0))

    x, trace, ok = semismooth_newton(
        blocks.residual, blocks.jacobian, np.zeros(blocks.ndof), full_modes, config, active,
        float(np.linalg.norm(system.load)), "mixed",
    )
    u, p = blocks.split(x)
    return SolverState(u=u, p=p, converged=ok, trace=trace, gamma=gamma, workspace=ws, system=blocks)
