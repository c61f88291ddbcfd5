"""Mean curvature flow of discrete immersions.

The flow moves every vertex by its discrete mean curvature vector. Steps
are sized by the curvature, dt = dt_safety / max|h|^2, so a type I
singularity is approached with roughly log-uniform spacing in T - t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra
from scipy.sparse.linalg import splu
from scipy.spatial import cKDTree

from .geometry import (
    DegenerateGeometryError,
    GeometrySnapshot,
    compute_geometry,
    laplace_beltrami,
    pinching_gap,
)
from .immersion import DiscreteImmersion, cell_measures, validate

__all__ = [
    "Integrator",
    "FlowConfig",
    "FlowTrajectory",
    "FlowError",
    "InsufficientDataError",
    "TypeVerdict",
    "SingularityReport",
    "TRACE_COLUMNS",
    "step",
    "run",
    "normalized_run",
    "estimate_singular_time",
    "embeddedness_gap",
    "axisymmetric_run",
]

TRACE_COLUMNS = (
    "t",
    "max_h_sq",
    "max_ratio",
    "min_H_sq",
    "total_measure",
    "pinching_gap",
    "embed_gap",
    "max_traceless_sq",
    "max_grad_h_sq",
)


class Integrator(str, Enum):
    EXPLICIT_EULER = "ExplicitEuler"
    SEMI_IMPLICIT = "SemiImplicit"
    EXTRAPOLATED = "Extrapolated"


class FlowError(ArithmeticError):
    """The linear solve of a semi-implicit step failed."""


class InsufficientDataError(ValueError):
    """A trajectory is too short or too flat for the requested analysis."""


@dataclass(frozen=True)
class FlowConfig:
    """Run parameters.

    The default ``dt_safety`` is small because the frozen-coefficient step
    is first order: the discrete extinction time of a circle is off by a
    factor (1 + s)^2 / (1 + s/2) for safety factor s. ``tangential_sweeps``
    umbrella relaxation sweeps along the surface follow every surface step;
    they keep triangles from degenerating where the flow shrinks area
    fastest and do not change the geometric flow.
    """

    dt_safety: float = 0.005
    stop_curvature: float = 1e4
    t_max: float = math.inf
    integrator: Integrator = Integrator.SEMI_IMPLICIT
    record_every: int = 10
    pinching_c: Optional[float] = None
    pinching_a: float = 0.0
    monitor_embeddedness: bool = False
    axisymmetric: bool = False
    track_gradients: bool = False
    max_steps: int = 200_000
    tangential_sweeps: int = 4

    def __post_init__(self):
        object.__setattr__(self, "integrator", Integrator(self.integrator))
        if not 0.0 < self.dt_safety <= 0.5:
            raise ValueError(f"dt_safety must lie in (0, 0.5], got {self.dt_safety}")
        if not self.stop_curvature > 0:
            raise ValueError("stop_curvature must be positive")
        if self.tangential_sweeps < 0:
            raise ValueError("tangential_sweeps must be >= 0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.pinching_c is not None and self.pinching_c <= 0:
            raise ValueError("pinching_c must be positive")
        if self.pinching_a < 0:
            raise ValueError("pinching_a must be >= 0")


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    """Stored states plus a per-step diagnostic trace.

    ``trace`` maps each name in :data:`TRACE_COLUMNS` to an array with one
    entry per step. ``embed_gap`` and ``max_grad_h_sq`` are only evaluated
    at stored states (NaN elsewhere), the latter only when gradients are
    tracked.
    For normalized runs ``t`` is the normalized time and
    ``unnormalized_t`` holds the original time axis. Axisymmetric runs also
    keep every stored profile (t, x, r) of the n-dimensional hypersurface
    (``profile_dim`` = n), revolved into ``ring`` segments on demand.
    """

    states: List[Tuple[float, DiscreteImmersion]]
    trace: Dict[str, np.ndarray]
    config: FlowConfig
    state_steps: np.ndarray
    error: Optional[str] = None
    events: List[dict] = field(default_factory=list)
    unnormalized_t: Optional[np.ndarray] = None
    profiles: Optional[List[Tuple[float, np.ndarray, np.ndarray]]] = None
    profile_dim: Optional[int] = None
    ring: int = 64

    @property
    def times(self) -> np.ndarray:
        """Times of the stored states."""
        if self.profiles is not None:
            return np.array([p[0] for p in self.profiles])
        return np.array([t for t, _ in self.states])

    @property
    def final_time(self) -> float:
        return float(self.trace["t"][-1])

    def state_at(self, t: float) -> DiscreteImmersion:
        """Linear interpolation of positions between the bracketing states."""
        ts = self.times
        if t < ts[0] - 1e-15 or t > ts[-1] + 1e-15:
            raise ValueError(f"t = {t} outside the stored range [{ts[0]}, {ts[-1]}]")
        k = int(np.searchsorted(ts, t, side="right")) - 1
        k = min(max(k, 0), len(ts) - 1)
        if k == len(ts) - 1 or ts[k] == t:
            return self.states[k][1]
        t0, a = self.states[k]
        t1, b = self.states[k + 1]
        w = (t - t0) / (t1 - t0)
        return a.with_positions((1.0 - w) * a.positions + w * b.positions)


class TypeVerdict(str, Enum):
    TYPE_I = "TypeI"
    TYPE_II = "TypeII"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class SingularityReport:
    T_hat: float
    fit_residual: float
    type_verdict: TypeVerdict
    C0_hat: float
    ratio_trend: List[Tuple[float, float]]
    singular_vertex: int
    q_hat: np.ndarray
    delta_hat: float


# -- stepping -------------------------------------------------------------------

def _tangential_relax(imm: DiscreteImmersion, X: np.ndarray, geom: GeometrySnapshot,
                      sweeps: int) -> np.ndarray:
    """Slide interior surface vertices towards their neighbours' centroid.

    Each sweep moves a vertex by the tangential part u of its umbrella vector
    and adds h(u, u) / 2, so it stays on the locally fitted quadric instead
    of leaving a curved surface along its tangent plane.
    """
    A = imm.adjacency
    deg = np.asarray(A.sum(axis=1)).ravel()
    E = geom.tangent_frame
    h = geom.second_form
    inner = ~geom.boundary
    for _ in range(sweeps):
        U = (A @ X) / deg[:, None] - X
        u = np.einsum("vaN,vN->va", E, U)
        u[~inner] = 0.0
        X = X + np.einsum("vaN,va->vN", E, u) + 0.5 * np.einsum("va,vb,vabN->vN", u, u, h)
    return X


def step(imm: DiscreteImmersion, dt: float,
         integrator: Integrator = Integrator.SEMI_IMPLICIT,
         geom: Optional[GeometrySnapshot] = None,
         tangential_sweeps: int = 0) -> DiscreteImmersion:
    """One time step of size ``dt``.

    The semi-implicit step solves (M - dt L) X = M X_old with the stiffness L
    and lumped measures M of the current state. Boundary vertices of open
    meshes are moved explicitly with their fitted mean curvature. For
    surfaces, ``tangential_sweeps`` > 0 then slides vertices along the
    surface towards the centroid of their neighbours. The extrapolated
    integrator combines one full and two half semi-implicit steps as
    2 * half - full, which cancels the first-order time error.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    integrator = Integrator(integrator)
    if geom is None:
        geom = compute_geometry(imm, gradients=False)
    X = np.asarray(imm.positions)
    if integrator is Integrator.EXPLICIT_EULER:
        Xn = X + dt * geom.mean_curvature
        if tangential_sweeps > 0 and imm.intrinsic_dim >= 2:
            Xn = _tangential_relax(imm, Xn, geom, tangential_sweeps)
        return imm.with_positions(Xn)

    if integrator is Integrator.EXTRAPOLATED:
        full = _semi_implicit(X, dt, geom)
        half = _semi_implicit(X, 0.5 * dt, geom)
        mid = compute_geometry(imm.with_positions(half), gradients=False)
        Xn = 2.0 * _semi_implicit(half, 0.5 * dt, mid) - full
    else:
        Xn = _semi_implicit(X, dt, geom)
    if tangential_sweeps > 0 and imm.intrinsic_dim >= 2:
        Xn = _tangential_relax(imm, Xn, geom, tangential_sweeps)
    return imm.with_positions(Xn)


def _semi_implicit(X: np.ndarray, dt: float, geom: GeometrySnapshot) -> np.ndarray:
    M = geom.vertex_measure
    A = (sp.diags(M) - dt * geom.stiffness).tocsr()
    rhs = M[:, None] * X
    b = np.flatnonzero(geom.boundary)
    if len(b):
        A = A.tolil()
        A[b, :] = 0.0
        A[b, b] = 1.0
        rhs[b] = X[b] + dt * geom.mean_curvature[b]
    try:
        Xn = splu(A.tocsc()).solve(rhs)
    except RuntimeError as exc:
        raise FlowError(f"semi-implicit solve failed: {exc}") from exc
    if not np.all(np.isfinite(Xn)):
        raise FlowError("semi-implicit solve produced non-finite positions")
    return Xn


def _core_ratio(geom: GeometrySnapshot) -> float:
    r = geom.ratio[~geom.boundary]
    r = r[np.isfinite(r)]
    return float(r.max()) if len(r) else math.nan


class _Recorder:
    def __init__(self, cfg: FlowConfig):
        self.cfg = cfg
        self.rows = {k: [] for k in TRACE_COLUMNS}
        self.states: List[Tuple[float, DiscreteImmersion]] = []
        self.state_steps: List[int] = []

    def row(self, t, imm, geom, store):
        cfg = self.cfg
        r = self.rows
        r["t"].append(t)
        r["max_h_sq"].append(float(geom.norm_h_sq.max()))
        r["max_ratio"].append(_core_ratio(geom))
        r["min_H_sq"].append(float(geom.norm_H_sq.min()))
        r["total_measure"].append(geom.total_measure)
        if cfg.pinching_c is not None:
            r["pinching_gap"].append(pinching_gap(geom, cfg.pinching_c, cfg.pinching_a))
        else:
            r["pinching_gap"].append(math.nan)
        if store and cfg.monitor_embeddedness:
            r["embed_gap"].append(embeddedness_gap(imm, geom))
        else:
            r["embed_gap"].append(math.nan)
        r["max_traceless_sq"].append(float(geom.traceless_sq.max()))
        r["max_grad_h_sq"].append(float(np.max(geom.grad_h_sq)) if store else math.nan)
        if store:
            self.states.append((t, imm))
            self.state_steps.append(len(r["t"]) - 1)

    def finish(self, imm, t, geom, **kw) -> FlowTrajectory:
        if self.states and self.state_steps[-1] != len(self.rows["t"]) - 1 and geom is not None:
            if self.cfg.monitor_embeddedness:
                self.rows["embed_gap"][-1] = embeddedness_gap(imm, geom)
            if self.cfg.track_gradients:
                g = compute_geometry(imm, gradients=True)
                self.rows["max_grad_h_sq"][-1] = float(np.max(g.grad_h_sq))
            self.states.append((t, imm))
            self.state_steps.append(len(self.rows["t"]) - 1)
        trace = {k: np.asarray(v, float) for k, v in self.rows.items()}
        return FlowTrajectory(self.states, trace, self.cfg,
                              np.asarray(self.state_steps, dtype=np.int64), **kw)


def _check_start(imm: DiscreteImmersion):
    rep = validate(imm)
    if not rep.is_manifold:
        raise ValueError(f"initial immersion is not a valid manifold mesh: {rep.defects[:5]}")


def run(imm: DiscreteImmersion, cfg: FlowConfig = FlowConfig()) -> FlowTrajectory:
    """Flow until max|h|^2 >= stop_curvature, t >= t_max or a failure.

    A collapsing mesh ends the run early; the trajectory then carries the
    error message in ``error``.
    """
    if cfg.axisymmetric:
        raise ValueError("use axisymmetric_run for rotationally symmetric profiles")
    _check_start(imm)
    rec = _Recorder(cfg)
    t = 0.0
    geom = None
    error = None
    for k in range(cfg.max_steps + 1):
        try:
            geom = compute_geometry(imm, gradients=cfg.track_gradients and k % cfg.record_every == 0)
        except DegenerateGeometryError as exc:
            error = str(exc)
            geom = None
            break
        mh = float(geom.norm_h_sq.max())
        done = mh >= cfg.stop_curvature or t >= cfg.t_max or k == cfg.max_steps
        rec.row(t, imm, geom, store=(k % cfg.record_every == 0))
        if done:
            break
        if mh <= 0.0:
            # flat: nothing moves, jump to the end
            dt = cfg.t_max - t if math.isfinite(cfg.t_max) else math.inf
            if not math.isfinite(dt):
                break
        else:
            dt = min(cfg.dt_safety / mh, cfg.t_max - t)
        try:
            nxt = step(imm, dt, cfg.integrator, geom, cfg.tangential_sweeps)
            if cell_measures(nxt.positions, nxt.cells).min() <= 0.0:
                raise DegenerateGeometryError(0, "a cell collapsed during the step")
        except (DegenerateGeometryError, FlowError) as exc:
            error = str(exc)
            break
        imm = nxt
        t += dt
    return rec.finish(imm, t, geom, error=error)


def normalized_run(imm: DiscreteImmersion, cfg: FlowConfig = FlowConfig()) -> FlowTrajectory:
    """Flow rescaled after every step to keep the total measure fixed.

    Each step is taken on the normalized state and then scaled about the
    measure-weighted centroid; the normalized time advances by the step
    size, and the unnormalized time by step / (accumulated scale)^2.
    Gradients of h are always tracked at the stored states.
    """
    cfg = replace(cfg, track_gradients=True)
    _check_start(imm)
    n = imm.intrinsic_dim
    rec = _Recorder(cfg)
    t = 0.0
    t_un = 0.0
    scale = 1.0
    un_times = []
    geom = compute_geometry(imm, gradients=True)
    target = geom.total_measure
    error = None
    for k in range(cfg.max_steps + 1):
        mh = float(geom.norm_h_sq.max())
        done = mh >= cfg.stop_curvature or t >= cfg.t_max or k == cfg.max_steps
        rec.row(t, imm, geom, store=(k % cfg.record_every == 0))
        un_times.append(t_un)
        if done:
            break
        dt = min(cfg.dt_safety / mh, cfg.t_max - t)
        try:
            moved = step(imm, dt, cfg.integrator, geom, cfg.tangential_sweeps)
            m = laplace_beltrami(moved)[1]
            lam = (target / m.sum()) ** (1.0 / n)
            c = (m[:, None] * moved.positions).sum(0) / m.sum()
            imm = moved.transformed(lam, c)
            geom = compute_geometry(imm, gradients=(k + 1) % cfg.record_every == 0)
        except (DegenerateGeometryError, FlowError) as exc:
            error = str(exc)
            geom = None
            break
        t_un += dt / scale ** 2
        scale *= lam
        t += dt
    traj = rec.finish(imm, t, geom, error=error, unnormalized_t=np.asarray(un_times))
    return traj


# -- singular time ----------------------------------------------------------------

def _extrapolate_center(traj: FlowTrajectory, vertex: int, T_hat: float, count: int = 4):
    """Limit position of a vertex, linear in sqrt(T - t) over the last states."""
    pts = [(t, imm.positions[vertex]) for t, imm in traj.states[-count:]]
    if len(pts) < 2:
        return np.array(pts[-1][1], float)
    w = np.sqrt(np.maximum(T_hat - np.array([p[0] for p in pts]), 0.0))
    Y = np.stack([p[1] for p in pts])
    A = np.stack([np.ones_like(w), w], 1)
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    return coef[0]


def _profile_singular_point(traj: FlowTrajectory, T_hat: float, t_start: float,
                            count: int = 4):
    """Singular point of an axisymmetric run from its stored profiles.

    The blow-up point lies on the axis. Its x position is extrapolated from
    the profile points closest to the final curvature peak, which is also
    the point ``delta`` follows.
    """
    from .axisym import profile_curvatures, revolved_index

    n = traj.profile_dim
    peaks = []
    for t, x, r in traj.profiles:
        k1, k2 = profile_curvatures(x, r, n)[:2]
        hsq = k1 ** 2 + (n - 1) * k2 ** 2
        i = int(np.argmax(hsq))
        peaks.append((t, x[i], r[i], hsq))
    t_last, x_last, r_last, _ = peaks[-1]
    tail = traj.profiles[-count:]
    w = np.sqrt(np.maximum(T_hat - np.array([p[0] for p in tail]), 0.0))
    xs = np.array([x[np.argmin((x - x_last) ** 2 + (r - r_last) ** 2)] for _, x, r in tail])
    if len(tail) >= 2:
        coef, *_ = np.linalg.lstsq(np.stack([np.ones_like(w), w], 1), xs, rcond=None)
        qx = float(coef[0])
    else:
        qx = float(xs[-1])
    q_hat = np.zeros(n + 1)
    q_hat[0] = qx
    deltas = []
    for (t, x, r), (_, _, _, hsq) in zip(traj.profiles, peaks):
        if t_start <= t < T_hat:
            j = int(np.argmin((x - x_last) ** 2 + (r - r_last) ** 2))
            deltas.append(2.0 * (T_hat - t) * hsq[j])
    _, x, r = traj.profiles[-1]
    sv = revolved_index(r, int(np.argmax(peaks[-1][3])), traj.ring)
    return sv, q_hat, (float(min(deltas)) if deltas else math.nan)


def estimate_singular_time(traj: FlowTrajectory, window: float = 0.5,
                           tol: float = 0.1, C_cap: float = 100.0) -> SingularityReport:
    """Fit 1/(2 max|h|^2) linearly in t over the trailing window.

    The root of the fit is the singular time estimate T_hat. The run is
    type I if 2(T_hat - t) max|h|^2 stays in [1 - tol, C_cap] over the window,
    type II if it keeps growing past C_cap, and undetermined otherwise.
    The blow-up point ``q_hat`` is the singular vertex's position
    extrapolated linearly in sqrt(T_hat - t) over the last stored states.
    """
    t = traj.trace["t"]
    mh = traj.trace["max_h_sq"]
    if len(mh) < 2 or not mh[-1] >= 10.0 * mh[0]:
        raise InsufficientDataError("curvature did not grow by 10x; no singularity to fit")
    start = int(math.floor((1.0 - window) * len(t)))
    tw, yw = t[start:], 0.5 / mh[start:]
    if len(tw) < 10:
        raise InsufficientDataError(f"only {len(tw)} samples in the fit window (need 10)")
    A = np.stack([np.ones_like(tw), tw], 1)
    (a, b), *_ = np.linalg.lstsq(A, yw, rcond=None)
    if not b < 0:
        raise InsufficientDataError("reciprocal curvature is not decreasing")
    T_hat = -a / b
    resid = yw - (a + b * tw)
    fit_residual = float(np.sqrt(np.mean(resid ** 2)) / (yw.max() - yw.min()))
    q = 2.0 * (T_hat - tw) * mh[start:]
    C0 = float(q.max())
    if np.all(q >= 1.0 - tol) and C0 <= C_cap:
        verdict = TypeVerdict.TYPE_I
    elif q[-1] > C_cap and np.all(np.diff(q[len(q) // 2:]) >= 0):
        verdict = TypeVerdict.TYPE_II
    else:
        verdict = TypeVerdict.UNDETERMINED

    if traj.profiles is not None:
        sv, q_hat, delta = _profile_singular_point(traj, T_hat, tw[0])
    else:
        last = traj.states[-1][1]
        geom = compute_geometry(last, gradients=False)
        sv = int(np.argmax(geom.norm_h_sq))
        q_hat = _extrapolate_center(traj, sv, T_hat)
        deltas = []
        for ts, imm in traj.states:
            if ts >= tw[0] and ts < T_hat:
                g = compute_geometry(imm, gradients=False)
                deltas.append(2.0 * (T_hat - ts) * g.norm_h_sq[sv])
        delta = float(min(deltas)) if deltas else math.nan
    return SingularityReport(
        T_hat=float(T_hat), fit_residual=fit_residual, type_verdict=verdict,
        C0_hat=C0, ratio_trend=list(zip(tw.tolist(), q.tolist())),
        singular_vertex=sv, q_hat=q_hat, delta_hat=delta)


# -- embeddedness -------------------------------------------------------------------

def _edge_graph(imm: DiscreteImmersion) -> sp.csr_matrix:
    e = imm.edges
    X = imm.positions
    w = np.linalg.norm(X[e[:, 1]] - X[e[:, 0]], axis=1)
    V = imm.num_vertices
    return sp.coo_matrix((np.r_[w, w], (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                         shape=(V, V)).tocsr()


def embeddedness_gap(imm: DiscreteImmersion, geom: Optional[GeometrySnapshot] = None,
                     chunk: int = 512) -> float:
    """Smallest extrinsic distance between points at least 1/(2 C) apart intrinsically.

    C = max sqrt|h|^2. Intrinsic distances are shortest paths along mesh
    edges; the level set d = 1/(2C) is resolved by interpolating along the
    edges that cross it, so the answer does not jump with the mesh spacing.
    Pairs on different components count as infinitely far apart
    intrinsically. Returns +inf when no pair qualifies.
    """
    if geom is None:
        geom = compute_geometry(imm, gradients=False)
    C = math.sqrt(float(geom.norm_h_sq.max()))
    X = np.asarray(imm.positions)
    V = len(X)
    G = _edge_graph(imm)
    d0 = 0.5 / C if C > 0 else math.inf
    e = imm.edges
    elen = np.asarray(G[e[:, 0], e[:, 1]]).ravel()
    best = math.inf
    far_limit = d0 if math.isfinite(d0) else None
    # level-set crossings: points on edges at intrinsic distance exactly d0
    if math.isfinite(d0):
        for s0 in range(0, V, chunk):
            src = np.arange(s0, min(V, s0 + chunk))
            D = dijkstra(G, directed=False, indices=src, limit=far_limit)
            for a, b in ((0, 1), (1, 0)):
                d1 = D[:, e[:, a]]
                d2 = np.minimum(D[:, e[:, b]], d1 + elen[None, :])
                cross = (d1 < d0) & (d2 >= d0)
                pi, ei = np.nonzero(cross)
                if len(pi) == 0:
                    continue
                lam = (d0 - d1[pi, ei]) / (d2[pi, ei] - d1[pi, ei])
                P = X[e[ei, a]] + lam[:, None] * (X[e[ei, b]] - X[e[ei, a]])
                dist = np.linalg.norm(P - X[src[pi]], axis=1)
                best = min(best, float(dist.min()))
    # vertex pairs beyond the level set, searched only within the current bound
    tree = cKDTree(X)
    radius = best if math.isfinite(best) else None
    if radius is None:
        pairs = np.array([(i, j) for i in range(V) for j in range(i + 1, V)], dtype=np.int64)
    else:
        pairs = tree.query_pairs(radius * (1 + 1e-12) + 1e-300, output_type="ndarray")
    if len(pairs):
        dist = np.linalg.norm(X[pairs[:, 0]] - X[pairs[:, 1]], axis=1)
        order = np.argsort(dist, kind="stable")
        pairs, dist = pairs[order], dist[order]
        srcs = np.unique(pairs[:, 0])
        far = np.zeros(len(pairs), dtype=bool)
        for s0 in range(0, len(srcs), chunk):
            src = srcs[s0:s0 + chunk]
            D = dijkstra(G, directed=False, indices=src, limit=far_limit)
            sel = np.flatnonzero(np.isin(pairs[:, 0], src))
            row = np.searchsorted(src, pairs[sel, 0])
            far[sel] = D[row, pairs[sel, 1]] >= d0
        if far.any():
            best = min(best, float(dist[np.argmax(far)]))
    return best


from .axisym import axisymmetric_run  # noqa: E402  (re-export)
