"""Rigid obstacles and the initial normal gap g between membrane and obstacle.

The gap at a membrane point x with outward unit normal n is the signed ray
parameter s for which x + s n hits the obstacle surface.  Negative values
mean initial interpenetration.  Rays that do not meet the obstacle, or only
meet it further behind the point than the point's distance to the origin,
report ``no_contact_gap``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NO_CONTACT_GAP = 1.0e6


@dataclass(frozen=True)
class FloorPlane:
    """Horizontal plane z = z_level."""

    z_level: float
    no_contact_gap: float = NO_CONTACT_GAP

    def ray_hits(self, points, normals):
        nz = normals[..., 2]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            s = (self.z_level - points[..., 2]) / nz
        return np.where(nz != 0.0, s, -np.inf)

    def implicit(self, x):
        return x[..., 2] - self.z_level


@dataclass(frozen=True)
class Ellipsoid:
    """Axis-aligned ellipsoid (x/a)^2 + (y/b)^2 + (z/c)^2 = 1 centred at the origin."""

    semi_axes: tuple[float, float, float]
    no_contact_gap: float = NO_CONTACT_GAP

    def __post_init__(self):
        if len(self.semi_axes) != 3 or min(self.semi_axes) <= 0:
            raise ValueError(f"ellipsoid semi-axes must be three positive lengths, got {self.semi_axes}")

    @classmethod
    def oblate(cls, r_max: float, r_min: float, axis: str = "z", **kw) -> "Ellipsoid":
        """Ellipsoid with the short semi-axis ``r_min`` along ``axis``."""
        k = "xyz".index(axis)
        axes = [r_max] * 3
        axes[k] = r_min
        return cls(tuple(float(a) for a in axes), **kw)

    def ray_hits(self, points, normals):
        inv = 1.0 / np.asarray(self.semi_axes)
        p = points * inv
        d = normals * inv
        a = np.einsum("...i,...i->...", d, d)
        b = 2.0 * np.einsum("...i,...i->...", p, d)
        c = np.einsum("...i,...i->...", p, p) - 1.0
        disc = b * b - 4.0 * a * c
        root = np.sqrt(np.maximum(disc, 0.0))
        # larger root: forward hit from inside, nearest exit from outside;
        # written to avoid cancellation
        q = -0.5 * (b - np.where(b >= 0, 1.0, -1.0) * root)
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = q / a
            r2 = np.where(q != 0.0, c / q, r1)
        s = np.maximum(r1, r2)
        return np.where(disc >= 0.0, s, -np.inf)

    def implicit(self, x):
        return np.einsum("...i,...i->...", x / np.asarray(self.semi_axes), x / np.asarray(self.semi_axes)) - 1.0


def gap(obstacle, point, normal, unit_tol: float = 1e-10):
    """Gap along the outward normal from ``point`` to ``obstacle``.

    Accepts single 3-vectors or stacked arrays (..., 3); returns a float or
    an array of matching leading shape.
    """
    x = np.asarray(point, dtype=float)
    n = np.asarray(normal, dtype=float)
    length = np.linalg.norm(n, axis=-1)
    if np.any(np.abs(length - 1.0) > unit_tol):
        raise ValueError("gap() requires unit normals")
    s = obstacle.ray_hits(x, n)
    limit = -np.linalg.norm(x, axis=-1)
    out = np.where(np.isfinite(s) & (s > limit), s, obstacle.no_contact_gap)
    return float(out) if out.ndim == 0 else out
