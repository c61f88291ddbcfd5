"""Parabolic blow-up sequences of a singular flow.

Type I blow-ups zoom in on a fixed spacetime point (q, T) with scales
lambda_k = 1 / sqrt(2 (T - t_k)) at dyadic times t_k = T (1 - 2^-k). Each
snapshot at backward time s is lambda_k (F(., T + s / lambda_k^2) - q); the
snapshots of a type I flow converge to a self-shrinker.

Type II blow-ups follow the curvature maximum instead: at time t_k the scale
is |H| at the point p_k of largest mean curvature and the picture is centred
on F(p_k, t_k), so the rescaled |H| at p_k is exactly 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .flow import FlowTrajectory, SingularityReport, TypeVerdict
from .geometry import GeometrySnapshot, compute_geometry
from .immersion import DiscreteImmersion
from .monotonicity import heat_kernel

__all__ = [
    "CenterKind",
    "RescalingSequence",
    "make_rescaled_sequence",
    "make_type2_sequence",
    "shrinker_residual",
    "fit_shrinker_center",
    "stabilization_check",
    "stabilization_profile",
]


class CenterKind(str, Enum):
    FIXED_POINT = "FixedPoint"
    MOVING_POINTS = "MovingPoints"
    CURVATURE_MAX = "CurvatureMax"


@dataclass(frozen=True, eq=False)
class RescalingSequence:
    """Rescaled snapshots indexed by scale k and backward time s.

    For curvature-maximum sequences ``curvature_bound_check`` holds the
    rescaled max|h|^2 of each snapshot (the s-weighted bound is vacuous at
    s = 0).
    """

    center_kind: CenterKind
    centers: List[np.ndarray]
    times: List[float]
    scales: List[float]
    snapshots: List[List[Tuple[float, DiscreteImmersion]]]
    shrinker_residuals: List[List[float]]
    curvature_bound_check: List[List[float]]
    horizon: float = math.nan
    C0_hat: float = math.nan
    peak_vertices: List[int] = field(default_factory=list)

    def at(self, s: float) -> List[DiscreteImmersion]:
        """Snapshots at backward time s, one per scale."""
        out = []
        for row in self.snapshots:
            for si, imm in row:
                if si == s:
                    out.append(imm)
        return out


def shrinker_residual(imm: DiscreteImmersion, geom: Optional[GeometrySnapshot], s: float,
                      center=None) -> float:
    """Gaussian-weighted L2 norm of H - F^perp / (2 s).

    This vanishes exactly on shrinkers H = F^perp / (2 s), s < 0, the
    equality case of the monotonicity formula. The weight is the backwards
    heat kernel at backward time s centred at ``center`` (default the
    origin), normalised by its total; boundary vertices of open meshes are
    left out.
    """
    if not s < 0:
        raise ValueError(f"backward time must be negative, got s={s}")
    if geom is None:
        geom = compute_geometry(imm, gradients=False)
    c = np.zeros(imm.ambient_dim) if center is None else np.asarray(center, float)
    F = np.asarray(imm.positions) - c
    r = geom.mean_curvature - geom.normal_part(F) / (2.0 * s)
    w = heat_kernel(imm.positions, s, c, 0.0, imm.intrinsic_dim) * geom.vertex_measure
    w = np.where(geom.boundary, 0.0, w)
    return float(np.sqrt(np.sum(w * np.sum(r * r, axis=1)) / np.sum(w)))


def fit_shrinker_center(imm: DiscreteImmersion, geom: Optional[GeometrySnapshot] = None,
                        s0: float = -0.5, center0=None, iterations: int = 12):
    """Centre c and backward time s of the shrinker best matching ``imm``.

    Solves P_N (F - c) = 2 s H in weighted least squares, re-weighting
    with the heat kernel of the current estimate. Directions in which the
    snapshot is translation invariant are resolved towards ``center0``.
    """
    if geom is None:
        geom = compute_geometry(imm, gradients=False)
    X = np.asarray(imm.positions)
    V, N = X.shape
    c = np.zeros(N) if center0 is None else np.asarray(center0, float).copy()
    s = float(s0)
    E = geom.tangent_frame
    Pn = np.eye(N)[None] - np.einsum("vaN,vaM->vNM", E, E)
    H = geom.mean_curvature
    inner = ~geom.boundary
    for _ in range(iterations):
        w = heat_kernel(X, s, c, 0.0, imm.intrinsic_dim) * geom.vertex_measure * inner
        sw = np.sqrt(w / w.sum())
        A = np.concatenate([Pn, 2.0 * H[:, :, None]], axis=2)  # (V, N, N+1)
        b = np.einsum("vNM,vM->vN", Pn, X - c)
        A = (sw[:, None, None] * A).reshape(V * N, N + 1)
        b = (sw[:, None] * b).reshape(V * N)
        z, *_ = np.linalg.lstsq(A, b, rcond=1e-8)
        c_new, s_new = c + z[:N], float(z[N])
        if not s_new < 0:
            break
        done = np.linalg.norm(c_new - c) < 1e-12 and abs(s_new - s) < 1e-12
        c, s = c_new, s_new
        if done:
            break
    return c, s


def _snapshot(traj: FlowTrajectory, t: float, scale: float, center) -> DiscreteImmersion:
    return traj.state_at(t).transformed(scale, center)


def make_rescaled_sequence(traj: FlowTrajectory, report: SingularityReport,
                           num_scales: int = 8, s_samples: Sequence[float] = (-0.5,),
                           first_scale: int = 1, with_residuals: bool = True) -> RescalingSequence:
    """Dyadic type I blow-up about (q_hat, T_hat) of a singularity report."""
    if report.type_verdict is not TypeVerdict.TYPE_I:
        raise ValueError(f"type I blow-up needs a type I report, got {report.type_verdict.value}")
    T = report.T_hat
    q = np.asarray(report.q_hat, float)
    ts = traj.times
    s_samples = [float(s) for s in s_samples]
    if any(not s < 0 for s in s_samples):
        raise ValueError("backward times must be negative")
    times, scales, snaps, res, bounds, centers = [], [], [], [], [], []
    for k in range(first_scale, first_scale + num_scales):
        tk = T * (1.0 - 2.0 ** (-k))
        lam = 1.0 / math.sqrt(2.0 * (T - tk))
        row, rrow, brow = [], [], []
        for s in s_samples:
            t = T + s / lam ** 2
            eps = 1e-12 * max(1.0, abs(T))  # roundoff in T + s / lam^2
            if t < ts[0] - eps or t > ts[-1] + eps:
                raise ValueError(
                    f"s = {s} at scale k={k} needs t = {t:.6g}, outside the stored "
                    f"range [{ts[0]:.6g}, {ts[-1]:.6g}]")
            t = min(max(t, ts[0]), ts[-1])
            imm = _snapshot(traj, t, lam, q)
            row.append((s, imm))
            if with_residuals:
                g = compute_geometry(imm, gradients=False)
                rrow.append(shrinker_residual(imm, g, s))
                brow.append(float(g.norm_h_sq.max()) * (-2.0 * s) / report.C0_hat)
        times.append(tk)
        scales.append(lam)
        snaps.append(row)
        res.append(rrow)
        bounds.append(brow)
        centers.append(q)
    return RescalingSequence(CenterKind.FIXED_POINT, centers, times, scales, snaps, res,
                             bounds, horizon=T, C0_hat=report.C0_hat)


def make_type2_sequence(traj: FlowTrajectory, num_scales: int = 4,
                        s_samples: Sequence[float] = (0.0,),
                        with_residuals: bool = False) -> RescalingSequence:
    """Curvature-maximum blow-up at stored states spaced by factors of 4 in max|h|^2.

    Snapshots at s = 0 are the stored states themselves, rescaled; s < 0
    interpolates between stored states (which needs fixed connectivity).
    """
    mh = traj.trace["max_h_sq"][traj.state_steps]
    if len(mh) < num_scales:
        raise ValueError(f"trajectory stores {len(mh)} states, fewer than {num_scales}")
    picks = []
    for j in range(num_scales - 1, -1, -1):
        target = mh[-1] / 4.0 ** j
        k = int(np.argmin(np.abs(np.log(mh / target))))
        if picks and k <= picks[-1]:
            k = picks[-1] + 1
        picks.append(min(k, len(mh) - 1))
    picks = sorted(set(picks))
    times, scales, snaps, res, bounds, centers, peaks = [], [], [], [], [], [], []
    for k in picks:
        tk, imm = traj.states[k]
        g = compute_geometry(imm, gradients=False)
        absH = np.sqrt(g.norm_H_sq)
        absH[g.boundary] = 0.0
        p = int(np.argmax(absH))
        lam = float(absH[p])
        c = np.asarray(imm.positions[p], float).copy()
        row, rrow, brow = [], [], []
        for s in s_samples:
            s = float(s)
            if s > 0:
                raise ValueError("backward times must be <= 0")
            src = imm if s == 0.0 else traj.state_at(tk + s / lam ** 2)
            snap = src.transformed(lam, c)
            row.append((s, snap))
            if with_residuals and s < 0:
                rrow.append(shrinker_residual(snap, None, s))
            gs = compute_geometry(snap, gradients=False)
            brow.append(float(gs.norm_h_sq[~gs.boundary].max()))
        times.append(float(tk))
        scales.append(lam)
        snaps.append(row)
        res.append(rrow)
        bounds.append(brow)
        centers.append(c)
        peaks.append(p)
    return RescalingSequence(CenterKind.CURVATURE_MAX, centers, times, scales, snaps, res,
                             bounds, peak_vertices=peaks)


def _one_sided(a: DiscreteImmersion, b: DiscreteImmersion, R: float) -> float:
    A = np.asarray(a.positions)
    A = A[np.linalg.norm(A, axis=1) <= R]
    if len(A) == 0:
        return 0.0
    d, _ = cKDTree(np.asarray(b.positions)).query(A)
    return float(d.max())


def stabilization_profile(seq: RescalingSequence, s: float, R: float) -> List[float]:
    """One-sided Hausdorff distances between consecutive snapshots at s within B_R."""
    snaps = seq.at(s)
    if len(snaps) < 2:
        raise ValueError(f"need at least 2 snapshots at s={s}, have {len(snaps)}")
    return [_one_sided(snaps[k + 1], snaps[k], R) for k in range(len(snaps) - 1)]


def stabilization_check(seq: RescalingSequence, s: float, R: float) -> float:
    """Distance from the last snapshot at s (inside B_R) to the one before it."""
    return stabilization_profile(seq, s, R)[-1]
