"""Exact solutions of mean curvature flow used as ground truth.

Shrinking round spheres and cylinders, stationary planes (optionally with
several coincident sheets), and the self-similar shrinkers at backward time
s, which at s = -1/2 are S^n(sqrt n) and S^m(sqrt m) x R^(n-m).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import meshes
from .immersion import DiscreteImmersion

__all__ = [
    "Kind",
    "ExactSolutionSpec",
    "make_exact",
    "extinction_time",
    "shrinker_at",
    "sphere_radius",
    "icosphere_level",
    "closed_form_density",
]


class Kind(str, Enum):
    SPHERE = "Sphere"
    CYLINDER = "Cylinder"
    PLANE = "Plane"


@dataclass(frozen=True)
class ExactSolutionSpec:
    """Parameters of an exact solution.

    ``resolution`` sets the mesh density. Curves get that many vertices.
    Spheres use the smallest icosphere level L with 5 * 2^L >= resolution
    (80 -> level 4, 2562 vertices); cylinders put ``resolution`` vertices
    around the tube; plane patches use grid spacing 2 * radius0 / resolution,
    with ``radius0`` the patch radius.
    """

    kind: Kind
    n: int
    N: int
    radius0: float = 1.0
    resolution: int = 256
    m: int = 0
    cylinder_length: float | None = None
    multiplicity: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.n not in (1, 2):
            raise ValueError(f"n must be 1 or 2, got {self.n}")
        if self.N < self.n + 1:
            raise ValueError(f"need N >= n + 1, got N={self.N}, n={self.n}")
        if not self.radius0 > 0:
            raise ValueError("radius0 must be positive")
        if self.resolution < 8:
            raise ValueError("resolution must be >= 8")
        if self.kind is Kind.CYLINDER and not 1 <= self.m <= self.n - 1:
            raise ValueError(f"cylinder needs 1 <= m <= n-1, got m={self.m}, n={self.n}")
        if self.multiplicity < 1:
            raise ValueError("multiplicity must be >= 1")

    @property
    def curved_dim(self) -> int:
        """Dimension of the round factor (n for spheres, m for cylinders)."""
        return self.n if self.kind is Kind.SPHERE else self.m


def icosphere_level(resolution: int) -> int:
    level = 0
    while 5 * 2 ** level < resolution:
        level += 1
    return level


def extinction_time(spec: ExactSolutionSpec) -> float:
    """Time at which the round factor shrinks to a point."""
    if spec.kind is Kind.PLANE:
        raise ValueError("a plane is stationary and never becomes extinct")
    return spec.radius0 ** 2 / (2.0 * spec.curved_dim)


def sphere_radius(spec: ExactSolutionSpec, t: float) -> float:
    """Radius of the round factor at time t: sqrt(r0^2 - 2 k t)."""
    T = extinction_time(spec)
    if t >= T:
        raise ValueError(f"t = {t} is not before the extinction time {T}")
    return math.sqrt(spec.radius0 ** 2 - 2.0 * spec.curved_dim * t)


def _round(spec: ExactSolutionSpec, radius: float, half_length: float) -> DiscreteImmersion:
    if spec.kind is Kind.SPHERE:
        if spec.n == 1:
            return meshes.polygon(spec.resolution, radius, spec.N)
        return meshes.icosphere(icosphere_level(spec.resolution), radius, spec.N)
    return meshes.cylinder(radius, half_length, spec.resolution, spec.N)


def _plane(spec: ExactSolutionSpec, scale: float = 1.0) -> DiscreteImmersion:
    R = spec.radius0
    if spec.n == 1:
        sheet = meshes.line_segment(R, spec.resolution, spec.N)
    else:
        sheet = meshes.flat_disk(R, 2.0 * R / spec.resolution, spec.N)
    if scale != 1.0:
        sheet = sheet.transformed(scale)
    return meshes.coincident_copies(sheet, spec.multiplicity)


def make_exact(spec: ExactSolutionSpec, t: float = 0.0) -> DiscreteImmersion:
    """The exact flow at time t, starting from radius ``radius0``.

    Cylinders keep their axial extent (the flat factor does not move); the
    default half-length is six times the initial radius.
    """
    if spec.kind is Kind.PLANE:
        return _plane(spec)
    r = sphere_radius(spec, t)
    L = spec.cylinder_length if spec.cylinder_length is not None else 6.0 * spec.radius0
    return _round(spec, r, L)


def shrinker_at(spec: ExactSolutionSpec, s: float) -> DiscreteImmersion:
    """Self-shrinker at backward time s < 0, centred at the origin.

    Built as sqrt(-2s) times the s = -1/2 mesh, so the self-similarity holds
    exactly on the vertex positions. ``radius0`` is ignored for spheres and
    cylinders (the shrinker fixes the radius); for planes it sets the patch
    size at s = -1/2.
    """
    if not s < 0:
        raise ValueError(f"backward time must be negative, got s={s}")
    if spec.kind is Kind.PLANE:
        base = _plane(spec)
    else:
        k = spec.curved_dim
        L = spec.cylinder_length if spec.cylinder_length is not None else 6.0 * math.sqrt(k)
        base = _round(spec, math.sqrt(k), L)
    if s == -0.5:
        return base
    return base.with_positions(math.sqrt(-2.0 * s) * np.asarray(base.positions))


def closed_form_density(m: int) -> float:
    """Gaussian density of S^m(sqrt m) x R^(n-m), which does not depend on n.

    Equals (2 pi)^(-m/2) |S^m| m^(m/2) e^(-m/2); m = 0 is the plane.
    """
    if m == 0:
        return 1.0
    area = 2.0 * math.pi ** ((m + 1) / 2.0) / math.gamma((m + 1) / 2.0)
    return (2.0 * math.pi) ** (-m / 2.0) * area * m ** (m / 2.0) * math.exp(-m / 2.0)
