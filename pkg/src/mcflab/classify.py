"""Classification of blow-up snapshots as planes, spheres or cylinders.

A snapshot normalised to backward time s = -1/2 is compared with the
shrinkers S^n(sqrt n) and S^m(sqrt m) x R^(n-m) through three invariants:
the shrinker residual, the ratio |h|^2 / |H|^2 (constant 1/n on spheres and
1/m on cylinders, with h parallel), and the Gaussian density, which takes
one value per shrinker and separates them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import oracle
from .blowup import fit_shrinker_center, shrinker_residual
from .geometry import compute_geometry
from .immersion import DiscreteImmersion
from .monotonicity import heat_density, heat_kernel

__all__ = [
    "TableEntry",
    "DensityTable",
    "build_density_table",
    "Thresholds",
    "ShrinkerClassification",
    "classify_shrinker",
    "pinching_filter",
]


@dataclass(frozen=True)
class TableEntry:
    label: str
    n: int
    m: int
    density: float
    quadrature: float


@dataclass(frozen=True)
class DensityTable:
    """Gaussian densities of the plane, the sphere and the cylinders for one n.

    ``density`` is the tabulated value: exactly 1 for the plane, the
    quadrature value otherwise. ``quadrature`` always holds the computed sum.
    """

    n: int
    resolution: int
    entries: List[TableEntry]

    def lookup(self, label: str, m: int = 0) -> TableEntry:
        for e in self.entries:
            if e.label == label and (label != "Cylinder" or e.m == m):
                return e
        raise KeyError(f"no {label} (m={m}) entry for n={self.n}")

    def min_gap(self) -> float:
        d = sorted(e.density for e in self.entries)
        return float(min(b - a for a, b in zip(d, d[1:])))


def _default_resolution(n: int) -> int:
    return 256 if n == 1 else 80


def build_density_table(n: int, resolution: Optional[int] = None) -> DensityTable:
    """Densities by heat-kernel quadrature on the oracle shrinkers at s = -1/2."""
    if n not in (1, 2):
        raise ValueError(f"n must be 1 or 2, got {n}")
    res = _default_resolution(n) if resolution is None else int(resolution)
    N = n + 1
    Spec = oracle.ExactSolutionSpec

    def theta(spec):
        imm = oracle.shrinker_at(spec, -0.5)
        return heat_density(imm, None, -0.5, np.zeros(N), 0.0)

    plane_res = max(res, 16) if n == 2 else res
    entries = [TableEntry("Plane", n, 0, 1.0,
                          theta(Spec("Plane", n, N, radius0=8.0, resolution=plane_res)))]
    q = theta(Spec("Sphere", n, N, resolution=res))
    entries.append(TableEntry("Sphere", n, n, q, q))
    for m in range(1, n):
        q = theta(Spec("Cylinder", n, N, m=m, resolution=res))
        entries.append(TableEntry("Cylinder", n, m, q, q))
    return DensityTable(n, res, entries)


@dataclass(frozen=True)
class Thresholds:
    plane_curvature: float = 1e-3
    multiplicity_tol: float = 0.05
    residual: float = 0.1
    ratio_spread: float = 0.05
    grad_h: float = 0.1
    ratio_match: float = 0.02
    density_match: float = 0.02
    core_weight: float = 1e-3


@dataclass(frozen=True)
class ShrinkerClassification:
    """Verdict with the evidence it rests on.

    ``verdict`` is one of "Plane", "Sphere", "Cylinder", "Unknown";
    ``multiplicity`` is set for planes and ``m`` for cylinders. ``center``
    and ``s`` describe the shrinker normalisation that was used.
    """

    verdict: str
    multiplicity: Optional[int]
    m: Optional[int]
    shrinker_residual: float
    ratio_mean: float
    ratio_spread: float
    grad_h_norm: float
    density_measured: float
    density_expected: float
    pinching_satisfied: bool
    center: np.ndarray = field(default_factory=lambda: np.zeros(0))
    s: float = -0.5
    reason: str = ""

    @property
    def label(self) -> str:
        if self.verdict == "Plane":
            return f"Plane{{multiplicity={self.multiplicity}}}"
        if self.verdict == "Cylinder":
            return f"Cylinder{{m={self.m}}}"
        return self.verdict


def classify_shrinker(imm: DiscreteImmersion, table: DensityTable, s: float = -0.5,
                      center=None, fit_center: bool = False,
                      thresholds: Thresholds = Thresholds()) -> ShrinkerClassification:
    """Match a blow-up snapshot against the plane, sphere and cylinders.

    The snapshot is first normalised to s = -1/2 about ``center`` (origin by
    default); with ``fit_center`` the centre and backward time are fitted
    instead, which is needed for snapshots centred on a surface point. The
    decision quantities are evaluated on the core: interior vertices whose
    Gaussian weight is at least ``core_weight`` times the largest one.
    Steps: flat core -> plane with multiplicity round(density); residual too
    large -> Unknown; ratio not constant or h not parallel -> Unknown;
    otherwise the ratio and the density must both point to the same entry.
    """
    th = thresholds
    n = imm.intrinsic_dim
    N = imm.ambient_dim
    c = np.zeros(N) if center is None else np.asarray(center, float)
    if fit_center:
        g0 = compute_geometry(imm, gradients=False)
        if g0.norm_h_sq[~g0.boundary].max() * (-2.0 * s) >= th.plane_curvature:
            c, s = fit_shrinker_center(imm, g0, s0=s, center0=c)
    if not s < 0:
        raise ValueError(f"backward time must be negative, got s={s}")
    norm = imm.transformed(1.0 / math.sqrt(-2.0 * s), c)
    geom = compute_geometry(norm)
    zero = np.zeros(N)
    w = heat_kernel(norm.positions, -0.5, zero, 0.0, n) * geom.vertex_measure
    density = float(np.sum(w))
    core = (~geom.boundary) & (w >= th.core_weight * w.max())
    wc = w[core]

    def result(verdict, reason, mult=None, m=None, residual=math.nan, rmean=math.nan,
               rspread=math.nan, gnorm=math.nan, expected=math.nan, pinch=True):
        return ShrinkerClassification(verdict, mult, m, residual, rmean, rspread, gnorm,
                                      density, expected, pinch, c, s, reason)

    hsq = geom.norm_h_sq[core]
    Hsq = geom.norm_H_sq[core]
    pinch = bool(np.all(hsq <= 4.0 / (3.0 * n) * Hsq * 1.02 + 1e-12))
    if hsq.max() < th.plane_curvature:
        mult = int(round(density))
        if mult >= 1 and abs(density - mult) <= th.multiplicity_tol * mult:
            return result("Plane", "flat core", mult=mult, rmean=0.0, rspread=0.0,
                          expected=float(mult), pinch=True)
        return result("Unknown", f"flat core but density {density:.4f} is not an integer",
                      pinch=True)

    residual = shrinker_residual(norm, geom, -0.5)
    ratio = hsq / Hsq
    rmean = float(np.sum(wc * ratio) / np.sum(wc))
    rspread = float(ratio.max() - ratio.min())
    gnorm = float(np.sqrt(np.sum(wc * geom.grad_h_sq[core]) / np.sum(wc)))
    common = dict(residual=residual, rmean=rmean, rspread=rspread, gnorm=gnorm, pinch=pinch)
    if residual > th.residual:
        return result("Unknown", f"shrinker residual {residual:.3g} > {th.residual}", **common)
    if rspread > th.ratio_spread or gnorm > th.grad_h:
        return result("Unknown", f"ratio spread {rspread:.3g} or |grad h| {gnorm:.3g} too large",
                      **common)

    candidates = [("Sphere", n)] + [("Cylinder", m) for m in range(1, n)]
    for label, k in candidates:
        if abs(rmean - 1.0 / k) > th.ratio_match:
            continue
        entry = table.lookup(label, k)
        if abs(density - entry.density) <= th.density_match * entry.density:
            return result(label, "ratio and density agree", m=(k if label == "Cylinder" else None),
                          expected=entry.density, **common)
        return result("Unknown", f"ratio matches {label} but density {density:.4f} "
                      f"differs from {entry.density:.4f}", expected=entry.density, **common)
    return result("Unknown", f"ratio {rmean:.4f} matches no shrinker", **common)


def pinching_filter(classification: ShrinkerClassification, n: int) -> bool:
    """Whether the matched shrinker is compatible with |h|^2 <= 4/(3n) |H|^2."""
    r = 0.0 if classification.verdict == "Plane" else classification.ratio_mean
    return bool(r <= 4.0 / (3.0 * n) + 0.02)
