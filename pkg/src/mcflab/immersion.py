"""Discrete immersions of curves and surfaces in R^N and the NDOFF mesh format.

A :class:`DiscreteImmersion` stores vertex positions in R^N together with
polyline segments (n = 1) or oriented triangles (n = 2). Instances are
immutable: arrays are flagged read-only and every transformation returns a
new object.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from typing import List, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

__all__ = [
    "DiscreteImmersion",
    "ValidationReport",
    "NDOFFError",
    "load_immersion",
    "save_immersion",
    "validate",
    "disjoint_union",
]


class NDOFFError(ValueError):
    """Raised for malformed NDOFF input."""


_TOPOLOGY_CACHES = ("edges", "adjacency", "boundary_vertices", "component_labels")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteImmersion:
    """Vertices in R^N with polyline or triangle connectivity.

    ``closed`` defaults to the topological answer (every vertex of a polyline
    has two incident edges, every mesh edge bounds two triangles).
    """

    positions: np.ndarray
    cells: np.ndarray
    intrinsic_dim: int
    closed: bool = None  # type: ignore[assignment]

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2:
            raise ValueError("positions must be a (V, N) array")
        n = int(self.intrinsic_dim)
        if n not in (1, 2):
            raise ValueError(f"intrinsic dimension must be 1 or 2, got {n}")
        cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, n + 1)
        if pos.shape[1] < n + 1:
            raise ValueError(f"ambient dimension {pos.shape[1]} too small for n={n}")
        object.__setattr__(self, "positions", _frozen(pos, float))
        object.__setattr__(self, "cells", _frozen(cells, np.int64))
        object.__setattr__(self, "intrinsic_dim", n)
        if self.closed is None:
            object.__setattr__(self, "closed", self._topologically_closed())
        else:
            object.__setattr__(self, "closed", bool(self.closed))

    @property
    def ambient_dim(self) -> int:
        return self.positions.shape[1]

    @property
    def num_vertices(self) -> int:
        return self.positions.shape[0]

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    def with_positions(self, positions) -> "DiscreteImmersion":
        """Same connectivity, new vertex positions."""
        positions = np.asarray(positions, dtype=float)
        if positions.shape != self.positions.shape:
            raise ValueError(
                f"position array shape {positions.shape} != {self.positions.shape}"
            )
        out = DiscreteImmersion(positions, self.cells, self.intrinsic_dim, self.closed)
        # connectivity caches depend only on the cells
        for key in _TOPOLOGY_CACHES:
            if key in self.__dict__:
                out.__dict__[key] = self.__dict__[key]
        return out

    def transformed(self, scale=1.0, center=None) -> "DiscreteImmersion":
        """Return ``scale * (F - center)``."""
        c = np.zeros(self.ambient_dim) if center is None else np.asarray(center, float)
        return self.with_positions(scale * (self.positions - c))

    # -- connectivity -------------------------------------------------------
    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as a sorted (E, 2) array."""
        c = self.cells
        if self.intrinsic_dim == 1:
            e = c
        else:
            e = np.concatenate([c[:, [0, 1]], c[:, [1, 2]], c[:, [2, 0]]])
        e = np.sort(e, axis=1)
        e = e[e[:, 0] != e[:, 1]]
        return np.unique(e, axis=0)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        V = self.num_vertices
        e = self.edges
        data = np.ones(2 * len(e))
        A = sp.coo_matrix(
            (data, (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(V, V)
        ).tocsr()
        A.data[:] = 1.0
        return A

    def neighbors(self, i: int) -> np.ndarray:
        A = self.adjacency
        return A.indices[A.indptr[i] : A.indptr[i + 1]]

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        """Boolean mask of vertices on the boundary of M."""
        V = self.num_vertices
        mask = np.zeros(V, dtype=bool)
        if self.intrinsic_dim == 1:
            deg = np.bincount(self.edges.ravel(), minlength=V)
            mask[deg < 2] = True
            return mask
        c = self.cells
        e = np.sort(np.concatenate([c[:, [0, 1]], c[:, [1, 2]], c[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        mask[uniq[counts == 1].ravel()] = True
        return mask

    @cached_property
    def component_labels(self) -> np.ndarray:
        _, labels = connected_components(self.adjacency, directed=False)
        return labels

    def _topologically_closed(self) -> bool:
        if self.num_cells == 0:
            return False
        used = np.zeros(self.num_vertices, dtype=bool)
        cells = self.cells
        if cells.min() < 0 or cells.max() >= self.num_vertices:
            return False
        used[cells.ravel()] = True
        return bool(used.all() and not self.boundary_vertices.any())


@dataclass(frozen=True)
class ValidationReport:
    is_manifold: bool
    is_closed: bool
    min_cell_measure: float
    defects: List[Tuple[int, str]]


def cell_measures(positions: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Edge lengths (n=1) or triangle areas (n=2), valid in any R^N."""
    if cells.shape[1] == 2:
        return np.linalg.norm(positions[cells[:, 1]] - positions[cells[:, 0]], axis=1)
    a = positions[cells[:, 1]] - positions[cells[:, 0]]
    b = positions[cells[:, 2]] - positions[cells[:, 0]]
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    ab = np.einsum("ij,ij->i", a, b)
    return 0.5 * np.sqrt(np.maximum(aa * bb - ab * ab, 0.0))


def validate(imm: DiscreteImmersion) -> ValidationReport:
    """Check indices, degeneracy, manifoldness and orientation; never raises."""
    V = imm.num_vertices
    cells = np.asarray(imm.cells)
    n = imm.intrinsic_dim
    defects: List[Tuple[int, str]] = []

    bad_index = np.any((cells < 0) | (cells >= V), axis=1)
    defects += [(int(i), "index_out_of_range") for i in np.flatnonzero(bad_index)]
    ok = ~bad_index
    safe = np.where(ok[:, None], cells, 0)
    repeated = np.zeros(len(cells), dtype=bool)
    for a in range(n + 1):
        for b in range(a + 1, n + 1):
            repeated |= safe[:, a] == safe[:, b]
    repeated &= ok
    defects += [(int(i), "repeated_vertex") for i in np.flatnonzero(repeated)]

    measures = cell_measures(imm.positions, safe) if len(cells) else np.zeros(0)
    measures = np.where(ok, measures, 0.0)
    zero = ok & ~repeated & (measures <= 0.0)
    defects += [(int(i), "zero_measure") for i in np.flatnonzero(zero)]
    min_measure = float(measures.min()) if len(measures) else 0.0

    good = ok & ~repeated
    gc = safe[good]
    gidx = np.flatnonzero(good)
    closed = True
    if n == 1:
        deg = np.bincount(gc.ravel(), minlength=V)
        over = np.flatnonzero(deg > 2)
        if len(over):
            for i in gidx[np.any(np.isin(gc, over), axis=1)]:
                defects.append((int(i), "nonmanifold_vertex"))
        closed = bool(np.all(deg == 2))
        if len(gc):
            # consistent orientation: each vertex is a head once and a tail once
            heads = np.bincount(gc[:, 1], minlength=V)
            tails = np.bincount(gc[:, 0], minlength=V)
            mixed = np.flatnonzero((deg == 2) & ((heads != 1) | (tails != 1)))
            for i in gidx[np.any(np.isin(gc, mixed), axis=1)]:
                defects.append((int(i), "inconsistent_orientation"))
    else:
        directed = np.concatenate([gc[:, [0, 1]], gc[:, [1, 2]], gc[:, [2, 0]]])
        owner = np.tile(gidx, 3)
        key = np.sort(directed, axis=1)
        uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inv = inv.ravel()
        for e in np.flatnonzero(counts > 2):
            for i in np.unique(owner[inv == e]):
                defects.append((int(i), "nonmanifold_edge"))
        # interior edges must be traversed once in each direction
        forward = directed[:, 0] < directed[:, 1]
        fcount = np.bincount(inv, weights=forward, minlength=len(uniq))
        two = counts == 2
        badori = np.flatnonzero(two & (fcount != 1))
        for e in badori:
            for i in np.unique(owner[inv == e]):
                defects.append((int(i), "inconsistent_orientation"))
        closed = bool(np.all(counts == 2)) and len(uniq) > 0
        used = np.zeros(V, dtype=bool)
        used[gc.ravel()] = True
        closed = closed and bool(used.all())

    defects = sorted(set(defects))
    return ValidationReport(
        is_manifold=not defects,
        is_closed=bool(closed and not defects),
        min_cell_measure=min_measure,
        defects=defects,
    )


def disjoint_union(*parts: DiscreteImmersion) -> DiscreteImmersion:
    """Concatenate immersions into one with several components."""
    n = parts[0].intrinsic_dim
    if any(p.intrinsic_dim != n or p.ambient_dim != parts[0].ambient_dim for p in parts):
        raise ValueError("all parts must share intrinsic and ambient dimension")
    pos, cells, off = [], [], 0
    for p in parts:
        pos.append(p.positions)
        cells.append(p.cells + off)
        off += p.num_vertices
    return DiscreteImmersion(
        np.concatenate(pos), np.concatenate(cells), n, all(p.closed for p in parts)
    )


# -- NDOFF -----------------------------------------------------------------

def _data_lines(text: str):
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def load_immersion(path) -> DiscreteImmersion:
    """Read an NDOFF file.

    Layout: ``NDOFF <N> <n>``, then ``<num_vertices> <num_cells>``, then the
    coordinate rows, then one ``<n+1> i j [k]`` row per cell.
    """
    with open(path, "r") as f:
        text = f.read()
    lines = _data_lines(text)
    try:
        lineno, head = next(lines)
    except StopIteration:
        raise NDOFFError(f"{path}: empty file") from None
    if len(head) != 3 or head[0] != "NDOFF":
        raise NDOFFError(f"{path}:{lineno}: expected 'NDOFF <N> <n>' header")
    try:
        N, n = int(head[1]), int(head[2])
        lineno, counts = next(lines)
        nv, nc = int(counts[0]), int(counts[1])
        if len(counts) != 2:
            raise ValueError
    except (ValueError, IndexError, StopIteration):
        raise NDOFFError(f"{path}: malformed header or count line") from None
    if n not in (1, 2) or N < n + 1:
        raise NDOFFError(f"{path}: unsupported dimensions N={N}, n={n}")

    pos = np.empty((nv, N))
    for v in range(nv):
        try:
            lineno, row = next(lines)
        except StopIteration:
            raise NDOFFError(f"{path}: expected {nv} vertex rows, got {v}") from None
        if len(row) != N:
            raise NDOFFError(
                f"{path}:{lineno}: dimension mismatch, vertex row has {len(row)} "
                f"coordinates but header declares N={N}"
            )
        try:
            pos[v] = [float(x) for x in row]
        except ValueError:
            raise NDOFFError(f"{path}:{lineno}: non-numeric coordinate") from None

    cells = np.empty((nc, n + 1), dtype=np.int64)
    for c in range(nc):
        try:
            lineno, row = next(lines)
        except StopIteration:
            raise NDOFFError(f"{path}: expected {nc} cell rows, got {c}") from None
        try:
            k = int(row[0])
            idx = [int(x) for x in row[1:]]
        except ValueError:
            raise NDOFFError(f"{path}:{lineno}: non-integer cell row") from None
        if k != n + 1 or len(idx) != k:
            raise NDOFFError(f"{path}:{lineno}: cell row must be '{n + 1} ...' for n={n}")
        if min(idx) < 0 or max(idx) >= nv:
            raise NDOFFError(f"{path}:{lineno}: vertex index out of range [0, {nv})")
        cells[c] = idx
    for lineno, row in lines:
        raise NDOFFError(f"{path}:{lineno}: trailing data after cell rows")
    return DiscreteImmersion(pos, cells, n)


def save_immersion(imm: DiscreteImmersion, path) -> None:
    """Write an NDOFF file with 17 significant digits (round-trip exact)."""
    n = imm.intrinsic_dim
    out = [f"NDOFF {imm.ambient_dim} {n}", f"{imm.num_vertices} {imm.num_cells}"]
    out += [" ".join("%.17g" % x for x in row) for row in imm.positions]
    out += [f"{n + 1} " + " ".join(str(int(i)) for i in row) for row in imm.cells]
    tmp = os.fspath(path)
    with open(tmp, "w", newline="\n") as f:
        f.write("\n".join(out) + "\n")
