"""Command-line runner for the sphere-in-ellipsoid and sphere-on-floor scenarios.

Configuration comes from a flat ``key = value`` file (``--config``) and
command-line flags, flags taking precedence.  Every run writes into the
output directory:

    config.txt                resolved configuration
    <tag>_<method>.vtk        mesh with displacement and reaction fields
    <tag>_<method>_trace.txt  Newton iteration history
    summary.txt               diagnostics table (also printed)
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .material import derive_params
from .mesh import MAX_SUBDIVISION_LEVEL, NodalField, build_icosphere, write_vtk
from .obstacle import Ellipsoid, FloorPlane
from .postprocess import (
    compute_mixed_reaction,
    compute_reaction,
    diagnostics,
    format_table,
    mixed_reaction,
    vertex_normals,
)
from .refelem import MAX_RULE_DEGREE
from .solver import RIGID_MODE_NAMES, ConvergenceError, SolverConfig, solve_gls, solve_mixed

log = logging.getLogger(__name__)

SCENARIOS = ("ellipsoid", "floor")
METHODS = ("gls", "mixed", "both")


@dataclass
class ScenarioConfig:
    scenario: str = "ellipsoid"
    rmin: str = "0.74"
    rmax: float = 1.5
    radius: float = 0.75
    floor_z: float = -0.74
    level: int = 5
    E: float = 100.0
    nu: float = 0.5
    load: str = "auto"
    gamma_rule: str = "material"
    gamma_factor: float = 1e-2
    safety: float = 0.5
    method: str = "gls"
    out: str = "membrane_run"
    deflate: str = "auto"
    tol: float = 1e-10
    max_iters: int = 50
    quadrature: int = 4
    multiplier_mass: str = "lumped"
    line_search: str = "residual"

    def rmin_values(self) -> list[float]:
        return [float(v) for v in str(self.rmin).split(",") if v.strip()]

    def load_vector(self):
        """Body load in MPa/m^3, or None when no load is applied."""
        if self.load == "auto":
            return (0.0, 0.0, -1.0) if self.scenario == "floor" else None
        if self.load == "none":
            return None
        return tuple(float(v) for v in self.load.split(","))

    def deflation(self):
        if self.deflate == "auto":
            return None
        if self.deflate == "none":
            return ()
        return tuple(v.strip() for v in self.deflate.split(",") if v.strip())

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            gamma_rule=self.gamma_rule,
            gamma_factor=self.gamma_factor,
            safety=self.safety,
            newton_tol=self.tol,
            max_iters=self.max_iters,
            deflation_modes=self.deflation(),
            quadrature_degree=self.quadrature,
            multiplier_mass=self.multiplier_mass,
            line_search=self.line_search,
        )

    def validate(self) -> list[str]:
        errors = []

        def check(cond, msg):
            if not cond:
                errors.append(msg)

        check(self.scenario in SCENARIOS, f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        check(self.method in METHODS, f"method must be one of {METHODS}, got {self.method!r}")
        check(0 <= self.level <= MAX_SUBDIVISION_LEVEL, f"level must lie in [0, {MAX_SUBDIVISION_LEVEL}]")
        check(self.E > 0, "E must be positive")
        check(-1.0 < self.nu < 1.0, "nu must lie in (-1, 1)")
        check(self.radius > 0, "radius must be positive")
        check(self.gamma_rule in ("material", "curvature"), "gamma_rule must be 'material' or 'curvature'")
        check(self.gamma_factor > 0, "gamma_factor must be positive")
        check(0.0 < self.safety < 1.0, "safety must lie in (0, 1)")
        check(self.tol > 0, "tol must be positive")
        check(self.max_iters > 0, "max_iters must be positive")
        check(1 <= self.quadrature <= MAX_RULE_DEGREE, f"quadrature must lie in [1, {MAX_RULE_DEGREE}]")
        check(self.multiplier_mass in ("lumped", "consistent"), "multiplier_mass must be 'lumped' or 'consistent'")
        check(self.line_search in ("residual", "energy"), "line_search must be 'residual' or 'energy'")
        try:
            rmins = self.rmin_values()
            if self.scenario == "ellipsoid":
                check(rmins, "rmin needs at least one value")
                check(all(r > 0 for r in rmins), "rmin values must be positive")
                check(self.rmax > 0, "rmax must be positive")
        except ValueError:
            errors.append(f"rmin must be a comma-separated list of numbers, got {self.rmin!r}")
        try:
            f = self.load_vector()
            check(f is None or len(f) == 3, "load must have three components")
        except ValueError:
            errors.append(f"load must be 'auto', 'none' or 'fx,fy,fz', got {self.load!r}")
        modes = self.deflation()
        if modes:
            bad = [m for m in modes if m not in RIGID_MODE_NAMES]
            check(not bad, f"unknown deflation modes {bad}; choose from {RIGID_MODE_NAMES}")
        return errors

    def serialize(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def read_config_file(path) -> dict[str, str]:
    out = {}
    known = {f.name for f in fields(ScenarioConfig)}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def build_config(file_values: dict, flag_values: dict) -> tuple[ScenarioConfig, list[str]]:
    """Merge file and flag values (flags win), converting and validating."""
    merged = {**file_values, **{k: v for k, v in flag_values.items() if v is not None}}
    kwargs, errors = {}, []
    for f in fields(ScenarioConfig):
        if f.name not in merged:
            continue
        conv = {"int": int, "float": float, "str": str}[f.type if isinstance(f.type, str) else f.type.__name__]
        try:
            kwargs[f.name] = conv(merged[f.name])
        except ValueError:
            errors.append(f"{f.name}: cannot parse {merged[f.name]!r} as {conv.__name__}")
    # unparseable values keep their defaults so the remaining checks still run
    cfg = ScenarioConfig(**kwargs)
    return cfg, errors + cfg.validate()


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="membrane-contact", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="solve one scenario (or an rmin sweep)")
    run.add_argument("--config", help="flat key = value configuration file")
    run.add_argument("-v", "--verbose", action="store_true", help="log Newton iterations")
    helps = {
        "scenario": "ellipsoid or floor",
        "rmin": "ellipsoid minor semi-axis; comma-separated values run a sweep",
        "level": "icosphere subdivision level",
        "load": "body load 'fx,fy,fz', 'none', or 'auto' (floor: 0,0,-1)",
        "method": "gls, mixed or both",
        "out": "output directory",
        "deflate": "rigid modes to constrain: auto, none, or names from tx,ty,tz,rx,ry,rz",
        "gamma_rule": "material (gamma_factor / (lambda0 + mu)) or curvature",
    }
    for f in fields(ScenarioConfig):
        run.add_argument(_flag(f.name), dest=f.name, default=None, metavar=f.name.upper(),
                         help=f"{helps.get(f.name, f.name)} (default {f.default})")
    return parser


def _obstacle(cfg: ScenarioConfig, rmin: float | None):
    if cfg.scenario == "floor":
        return FloorPlane(cfg.floor_z)
    return Ellipsoid.oblate(cfg.rmax, rmin)


def _write_trace(path: Path, trace) -> None:
    rows = [f"{t['iteration']} {t['residual']:.10e} {t['relative']:.10e} {t['active']} {t['step']:.6g}" for t in trace]
    path.write_text("iteration residual relative active step\n" + "\n".join(rows) + "\n")


def _vector_field(mesh, name, u):
    return NodalField(name, mesh.p1_to_nodes(np.asarray(u).reshape(-1, 3)))


def run(cfg: ScenarioConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.serialize())
    mesh = build_icosphere(cfg.level, cfg.radius)
    params = derive_params(cfg.E, cfg.nu)
    scfg = cfg.solver_config()
    f = cfg.load_vector()
    methods = ("gls", "mixed") if cfg.method == "both" else (cfg.method,)
    cases = [None] if cfg.scenario == "floor" else cfg.rmin_values()
    rows, notes, status = [], [], 0
    for rmin in cases:
        tag = cfg.scenario if rmin is None else f"{cfg.scenario}_rmin{rmin:g}"
        obstacle = _obstacle(cfg, rmin)
        states = {}
        for method in methods:
            solve = solve_gls if method == "gls" else solve_mixed
            try:
                state = solve(mesh, params, obstacle, f, scfg)
            except (ConvergenceError, np.linalg.LinAlgError) as exc:
                print(f"error: {tag} {method}: {exc}", file=sys.stderr)
                if getattr(exc, "trace", None):
                    _write_trace(out / f"{tag}_{method}_trace.txt", exc.trace)
                status = 1
                continue
            states[method] = state
            _write_trace(out / f"{tag}_{method}_trace.txt", state.trace)
            disc = state.workspace.disc
            un = np.einsum("ic,ic->i", state.u.reshape(-1, 3), vertex_normals(disc))
            fields_out = [
                _vector_field(mesh, "displacement", state.u),
                NodalField("normal_displacement", mesh.p1_to_nodes(un)),
            ]
            if method == "gls":
                reaction = compute_reaction(state)
                fields_out.append(reaction.nodal)
            else:
                reaction = compute_mixed_reaction(state)
                fields_out += [reaction.nodal, NodalField("p_h", mesh.p1_to_nodes(state.p)), mixed_reaction(state)]
            write_vtk(mesh, fields_out, out / f"{tag}_{method}.vtk", title=f"{tag} {method}")
            row = {"method": method, **diagnostics(tag, state, reaction)}
            rows.append(row)
        if len(states) == 2:
            disc = states["gls"].workspace.disc
            diff = disc.l2_norm(states["gls"].u - states["mixed"].u)
            ref = disc.l2_norm(states["gls"].u)
            rel = diff / ref if ref > 0 else diff
            notes.append(f"{tag}: L2 displacement difference gls vs mixed = {diff:.6e} (relative {rel:.6e})")
    text = format_table(rows) + "\n" + "".join(n + "\n" for n in notes)
    (out / "summary.txt").write_text(text)
    print(text, end="")
    return status


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    flag_values = {f.name: getattr(args, f.name) for f in fields(ScenarioConfig)}
    try:
        file_values = read_config_file(args.config) if args.config else {}
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    cfg, errors = build_config(file_values, flag_values)
    if errors:
        print("invalid configuration:", file=sys.stderr)
        for e in errors:
            print(f"  - {e}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
