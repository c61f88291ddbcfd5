"""Mesh generators: polygons, icospheres, cylinders, flat patches and test shapes.

All generators return :class:`~mcflab.immersion.DiscreteImmersion` objects
embedded in the first few coordinates of R^N.
"""
from __future__ import annotations

import numpy as np

from .immersion import DiscreteImmersion, disjoint_union


def _embed(points: np.ndarray, N: int) -> np.ndarray:
    if N < points.shape[1]:
        raise ValueError(f"ambient dimension {N} < {points.shape[1]}")
    out = np.zeros((points.shape[0], N))
    out[:, : points.shape[1]] = points
    return out


def _cycle_cells(M: int) -> np.ndarray:
    i = np.arange(M)
    return np.stack([i, (i + 1) % M], axis=1)


def polygon(M: int, radius: float = 1.0, N: int = 2, phase: float = 0.0) -> DiscreteImmersion:
    """Regular M-gon inscribed in the circle of given radius."""
    th = phase + 2.0 * np.pi * np.arange(M) / M
    pts = radius * np.stack([np.cos(th), np.sin(th)], axis=1)
    return DiscreteImmersion(_embed(pts, N), _cycle_cells(M), 1, True)


def closed_curve(points: np.ndarray, N: int | None = None) -> DiscreteImmersion:
    """Closed polyline through the given points in order."""
    points = np.asarray(points, float)
    N = points.shape[1] if N is None else N
    return DiscreteImmersion(_embed(points, N), _cycle_cells(len(points)), 1, True)


def _arclength_resample(curve_fn, M: int, fine: int = 20000) -> np.ndarray:
    u = np.linspace(0.0, 2.0 * np.pi, fine + 1)
    p = curve_fn(u)
    seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    target = s[-1] * np.arange(M) / M
    ut = np.interp(target, s, u)
    return curve_fn(ut)


def ellipse(a: float, b: float, M: int = 256, N: int = 2) -> DiscreteImmersion:
    """Ellipse with semi-axes (a, b), vertices equally spaced in arclength."""
    pts = _arclength_resample(lambda u: np.stack([a * np.cos(u), b * np.sin(u)], 1), M)
    return closed_curve(pts, N)


def figure_eight(M: int = 256, N: int = 2) -> DiscreteImmersion:
    """Lemniscate of Gerono: an immersed curve crossing itself at the origin."""
    pts = _arclength_resample(lambda u: np.stack([np.cos(u), np.sin(u) * np.cos(u)], 1), M)
    return closed_curve(pts, N)


def peanut(M: int = 256, gap: float = 0.1, N: int = 2) -> DiscreteImmersion:
    """Embedded two-lobed curve with waist half-width ``gap``.

    As ``gap -> 0`` the image converges to the figure-eight of
    :func:`figure_eight` (the waist closes up at the origin).
    """
    def fn(u):
        return np.stack([np.cos(u), np.sin(u) * np.sqrt(np.cos(u) ** 2 + gap ** 2)], 1)

    return closed_curve(_arclength_resample(fn, M), N)


def line_segment(half_length: float, M: int, N: int = 2) -> DiscreteImmersion:
    """Open straight segment along the first axis (the n = 1 plane)."""
    x = np.linspace(-half_length, half_length, M + 1)
    pts = np.zeros((M + 1, 2))
    pts[:, 0] = x
    i = np.arange(M)
    return DiscreteImmersion(_embed(pts, N), np.stack([i, i + 1], 1), 1, False)


_ICO_CACHE: dict = {}


def _icosphere_unit(level: int):
    if level in _ICO_CACHE:
        return _ICO_CACHE[level]
    t = (1.0 + 5 ** 0.5) / 2.0
    v = np.array(
        [[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
         [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
         [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    f = np.array(
        [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
         [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
         [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
         [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]], dtype=np.int64)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    for _ in range(level):
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        key = np.sort(e, axis=1)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.ravel()
        mid = v[uniq[:, 0]] + v[uniq[:, 1]]
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        m = len(v) + inv.reshape(3, -1).T  # midpoints of edges 01, 12, 20
        v = np.concatenate([v, mid])
        a, b, c = f[:, 0], f[:, 1], f[:, 2]
        ab, bc, ca = m[:, 0], m[:, 1], m[:, 2]
        f = np.concatenate([
            np.stack([a, ab, ca], 1), np.stack([b, bc, ab], 1),
            np.stack([c, ca, bc], 1), np.stack([ab, bc, ca], 1)])
    _ICO_CACHE[level] = (v, f)
    return v, f


def icosphere(level: int = 4, radius: float = 1.0, N: int = 3) -> DiscreteImmersion:
    """Subdivided icosahedron projected to the sphere (10*4^level + 2 vertices)."""
    v, f = _icosphere_unit(level)
    return DiscreteImmersion(_embed(radius * v, N), f, 2, True)


def ellipsoid(axes=(1.5, 1.0, 1.0), level: int = 4, N: int = 3) -> DiscreteImmersion:
    """Icosphere stretched along the coordinate axes."""
    v, f = _icosphere_unit(level)
    return DiscreteImmersion(_embed(v * np.asarray(axes, float), N), f, 2, True)


def cylinder(radius: float, half_length: float, M: int, N: int = 3) -> DiscreteImmersion:
    """Open tube S^1(radius) x [-L, L] along the third axis, near-equilateral cells."""
    h = 2.0 * np.pi * radius / M
    K = max(1, int(np.ceil(2.0 * half_length / (h * np.sqrt(3) / 2))))
    z = np.linspace(-half_length, half_length, K + 1)
    th = 2.0 * np.pi * np.arange(M) / M
    pts = []
    for k, zk in enumerate(z):
        shift = 0.5 * (k % 2) * 2.0 * np.pi / M  # staggered rows
        pts.append(np.stack([radius * np.cos(th + shift), radius * np.sin(th + shift),
                             np.full(M, zk)], 1))
    pts = np.concatenate(pts)
    cells = []
    for k in range(K):
        r0, r1 = k * M, (k + 1) * M
        i = np.arange(M)
        j = (i + 1) % M
        if k % 2 == 0:
            cells.append(np.stack([r0 + i, r0 + j, r1 + i], 1))
            cells.append(np.stack([r0 + j, r1 + j, r1 + i], 1))
        else:
            cells.append(np.stack([r0 + i, r1 + j, r1 + i], 1))
            cells.append(np.stack([r0 + i, r0 + j, r1 + j], 1))
    return DiscreteImmersion(_embed(pts, N), np.concatenate(cells), 2, False)


def flat_disk(radius: float, spacing: float, N: int = 3) -> DiscreteImmersion:
    """Triangulated square grid clipped to a disk in the first two coordinates."""
    K = int(np.ceil(radius / spacing))
    x = spacing * np.arange(-K, K + 1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    n1 = len(x)
    idx = np.arange(n1 * n1).reshape(n1, n1)
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    cells = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    pts = np.stack([X.ravel(), Y.ravel()], 1)
    inside = np.linalg.norm(pts, axis=1) <= radius + 1e-12
    cells = cells[inside[cells].all(axis=1)]
    used = np.unique(cells)
    remap = -np.ones(len(pts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return DiscreteImmersion(_embed(pts[used], N), remap[cells], 2, False)


def coincident_copies(imm: DiscreteImmersion, multiplicity: int) -> DiscreteImmersion:
    """``multiplicity`` coincident sheets as disjoint components."""
    if multiplicity < 1:
        raise ValueError("multiplicity must be >= 1")
    return disjoint_union(*([imm] * multiplicity))


def surface_of_revolution(x: np.ndarray, r: np.ndarray, M: int = 64,
                          N: int = 3) -> DiscreteImmersion:
    """Revolve a profile (x, r) about the first axis.

    Endpoints with ``r == 0`` become poles; interior points must have r > 0.
    """
    x = np.asarray(x, float)
    r = np.asarray(r, float)
    start_pole = r[0] == 0.0
    end_pole = r[-1] == 0.0
    ring_idx = np.arange(int(start_pole), len(x) - int(end_pole))
    th = 2.0 * np.pi * np.arange(M) / M
    pts = []
    if start_pole:
        pts.append([[x[0], 0.0, 0.0]])
    for k in ring_idx:
        pts.append(np.stack([np.full(M, x[k]), r[k] * np.cos(th), r[k] * np.sin(th)], 1))
    base = int(start_pole)
    if end_pole:
        pts.append([[x[-1], 0.0, 0.0]])
    pts = np.concatenate([np.asarray(p, float) for p in pts])
    i = np.arange(M)
    j = (i + 1) % M
    cells = []
    R = len(ring_idx)
    for q in range(R - 1):
        r0, r1 = base + q * M, base + (q + 1) * M
        cells.append(np.stack([r0 + i, r1 + i, r1 + j], 1))
        cells.append(np.stack([r0 + i, r1 + j, r0 + j], 1))
    if start_pole:
        cells.append(np.stack([np.zeros(M, np.int64), base + i, base + j], 1))
    if end_pole:
        last = base + (R - 1) * M
        pole = len(pts) - 1
        cells.append(np.stack([np.full(M, pole), last + j, last + i], 1))
    return DiscreteImmersion(_embed(pts, N), np.concatenate(cells), 2)


def dumbbell_profile(bulb_radius: float = 1.0, neck_radius: float = 0.35,
                     neck_half_length: float = 1.2, points: int = 401,
                     neck_curvature: float = 0.0, transition: float = 0.6):
    """Profile (x, r) of a rotationally symmetric dumbbell with poles at both ends.

    Two spherical bulbs of radius ``bulb_radius`` are joined by a neck whose
    radius is ``neck_radius`` at x = 0 and grows like
    ``neck_radius + neck_curvature * x^2``. Past ``neck_half_length`` the
    neck blends into the bulbs with a quintic smoothstep of width
    ``transition``, which keeps the junction curvature moderate.
    """
    R = bulb_radius
    c = neck_half_length + R  # bulb centres at +-c
    x_end = c + R
    s = np.linspace(0.0, np.pi, points)
    x = -x_end * np.cos(s)  # cluster points near the poles
    ax = np.abs(x)
    b = np.sqrt(np.clip(R ** 2 - (ax - c) ** 2, 0.0, None))
    neck = neck_radius + neck_curvature * x ** 2
    u = np.clip((ax - neck_half_length - 0.1 * R) / transition, 0.0, 1.0)
    w = u ** 3 * (10.0 - 15.0 * u + 6.0 * u ** 2)
    r = (1.0 - w) * neck + w * b
    r[0] = r[-1] = 0.0
    return x, r


def smooth_noise(points: np.ndarray, amplitude: float = 0.01, waves: int = 6,
                 seed: int = 0) -> np.ndarray:
    """Seeded smooth scalar field on ``points``: a sum of random plane waves.

    Scaled so its largest magnitude is ``amplitude``. Adding it to an unused
    coordinate bends a surface into a genuine higher-codimension one.
    """
    P = np.asarray(points, float)
    rng = np.random.default_rng(seed)
    f = np.zeros(len(P))
    for _ in range(waves):
        k = 2.0 * rng.normal(size=P.shape[1])
        f += np.cos(P @ k + rng.uniform(0.0, 2.0 * np.pi))
    return amplitude * f / np.abs(f).max()


def lift_with_noise(imm: DiscreteImmersion, axis: int, amplitude: float = 0.01,
                    seed: int = 0) -> DiscreteImmersion:
    """Copy of ``imm`` with smooth noise written into coordinate ``axis``."""
    X = np.array(imm.positions, float)
    X[:, axis] = smooth_noise(X[:, :axis], amplitude, seed=seed)
    return imm.with_positions(X)
