"""Rotationally symmetric hypersurfaces evolved through their profile curve.

A hypersurface of revolution about the first axis of R^(n+1) is described by
a planar profile (x, r), r > 0 away from the axis. Its mean curvature vector
is the profile's curvature vector plus (n - 1) copies of the rotational
curvature -<nu, e_r>/r along the profile normal nu. Poles, where the profile
meets the axis, are umbilic with mean curvature n times the profile
curvature.

Profiles are resampled with spacing proportional to the local curvature
radius, so a pinching neck keeps its resolution without remeshing a surface.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from collections.abc import Sequence
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import splu
from scipy.special import gamma

from .meshes import surface_of_revolution

__all__ = ["axisymmetric_run", "profile_curvatures", "revolved_index"]


def _sphere_area(k: int) -> float:
    """Measure of the unit sphere S^k."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / gamma((k + 1) / 2.0)


class _Profile:
    """Profile points with ghost neighbours for poles and periodic ends."""

    def __init__(self, x, r, periodic: bool, period: float):
        self.x = np.asarray(x, float)
        self.r = np.asarray(r, float)
        self.periodic = periodic
        self.period = period
        self.pole0 = (not periodic) and self.r[0] == 0.0
        self.pole1 = (not periodic) and self.r[-1] == 0.0

    @property
    def P(self):
        return np.stack([self.x, self.r], 1)

    def neighbours(self):
        """Previous and next points of every vertex (ghosts at the ends)."""
        P = self.P
        prev = np.roll(P, 1, axis=0)
        nxt = np.roll(P, -1, axis=0)
        if self.periodic:
            prev[0, 0] -= self.period
            nxt[-1, 0] += self.period
        else:
            # reflect through the axis at poles; open ends mirror themselves
            prev[0] = [P[1, 0], -P[1, 1]] if self.pole0 else 2 * P[0] - P[1]
            nxt[-1] = [P[-2, 0], -P[-2, 1]] if self.pole1 else 2 * P[-1] - P[-2]
        return prev, nxt


def profile_curvatures(x, r, n: int, periodic: bool = False, period: float = 0.0):
    """Signed principal curvatures (k1 along the profile, k2 rotational) and normals.

    The normal is the tangent turned by +90 degrees; with x increasing along
    the upper half-plane it points away from the axis. H = (k1 + (n-1) k2) nu.
    """
    prof = _Profile(x, r, periodic, period)
    P = prof.P
    prev, nxt = prof.neighbours()
    a = np.linalg.norm(P - prev, axis=1)
    b = np.linalg.norm(nxt - P, axis=1)
    u_in = (P - prev) / a[:, None]
    u_out = (nxt - P) / b[:, None]
    kvec = 2.0 * (u_out - u_in) / (a + b)[:, None]
    T = u_in + u_out
    T /= np.linalg.norm(T, axis=1, keepdims=True)
    nu = np.stack([-T[:, 1], T[:, 0]], 1)
    k1 = np.einsum("ij,ij->i", kvec, nu)
    with np.errstate(divide="ignore", invalid="ignore"):
        k2 = -nu[:, 1] / prof.r
    for end, pole in ((0, prof.pole0), (-1, prof.pole1)):
        if pole:
            k2[end] = k1[end]
    return k1, k2, nu, a, b


def _density(k1, k2, alpha, floor):
    return np.maximum(np.maximum(np.abs(k1), np.abs(k2)), floor) / alpha


def _resample(prof: _Profile, n, alpha, floor):
    k1, k2, _, _, _ = profile_curvatures(prof.x, prof.r, n)
    P = prof.P
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    rho = _density(k1, k2, alpha, floor)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * seg)])
    count = max(int(math.ceil(cum[-1])), 16)
    target = np.interp(np.linspace(0.0, cum[-1], count + 1), cum, s)
    xs = CubicSpline(s, prof.x)(target)
    rs = CubicSpline(s, prof.r)(target)
    xs[0], xs[-1] = prof.x[0], prof.x[-1]
    if prof.pole0:
        rs[0] = 0.0
    if prof.pole1:
        rs[-1] = 0.0
    return _Profile(xs, rs, False, 0.0)


def _needs_resample(prof: _Profile, n, alpha, floor):
    k1, k2, _, a, b = profile_curvatures(prof.x, prof.r, n)
    rho = _density(k1, k2, alpha, floor)
    seg = b[:-1]
    want = 2.0 / (rho[1:] + rho[:-1])
    q = seg / want
    return bool(q.max() > 1.6 or q.min() < 0.4)


def _semi_implicit(prof: _Profile, n: int, dt: float):
    """Curve-shortening part implicit, rotational part explicit."""
    x, r = prof.x, prof.r
    K = len(x)
    k1, k2, nu, a, b = profile_curvatures(x, r, n, prof.periodic, prof.period)
    rot = ((n - 1) * k2)[:, None] * nu
    ca = 2.0 / (a * (a + b))
    cb = 2.0 / (b * (a + b))
    i = np.arange(K)
    rows = [i, i, i]
    cols = [(i - 1) % K, i, (i + 1) % K]
    vals = [-dt * ca, 1.0 + dt * (ca + cb), -dt * cb]
    rhs = np.stack([x, r], 1) + dt * rot
    if prof.periodic:
        rhs_shift = np.zeros((K, 2))
        rhs_shift[0, 0] = -dt * ca[0] * prof.period
        rhs_shift[-1, 0] = dt * cb[-1] * prof.period
        rhs = rhs + rhs_shift
        A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(K, K)).tocsc()
        sol = splu(A).solve(rhs)
        return _Profile(sol[:, 0], sol[:, 1], True, prof.period)
    # open profile: the pole rows move only along the axis with speed n * k1
    vals[0][0] = vals[2][-1] = 0.0
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(K, K)).tolil()
    Ax = A.copy()
    for end, nb, pole in ((0, 1, prof.pole0), (K - 1, K - 2, prof.pole1)):
        Ax[end, :] = 0.0
        A[end, :] = 0.0
        A[end, end] = 1.0
        if pole:
            c = 2.0 * n / (a[end] if end == 0 else b[end]) ** 2
            Ax[end, end] = 1.0 + dt * c
            Ax[end, nb] = -dt * c
            rhs[end] = [x[end], 0.0]
        else:
            Ax[end, end] = 1.0
            rhs[end] = [x[end], r[end]]
    xs = splu(Ax.tocsc()).solve(rhs[:, 0])
    rs = splu(A.tocsc()).solve(rhs[:, 1])
    return _Profile(xs, rs, False, 0.0)


def _interior_minima(r):
    """Indices of interior local minima of r (not the monotone approach to a pole)."""
    i = np.arange(1, len(r) - 1)
    m = (r[i] <= r[i - 1]) & (r[i] <= r[i + 1])
    return i[m]


def revolved_index(r, i: int, ring: int) -> int:
    """Vertex of the revolved mesh that profile point i maps to at angle 0."""
    start_pole = r[0] == 0.0
    if start_pole and i == 0:
        return 0
    if r[-1] == 0.0 and i == len(r) - 1:
        return int(start_pole) + (len(r) - 1 - int(start_pole)) * ring
    return int(start_pole) + (i - int(start_pole)) * ring


class RevolvedStates(Sequence):
    """Stored profiles presented as (t, revolved triangle mesh) pairs.

    Meshes are built on access and the most recent ones cached, since a
    finely resolved neck revolves to tens of thousands of vertices.
    """

    def __init__(self, profiles, ring: int, cache: int = 8):
        self._profiles = profiles
        self._ring = ring
        self._cache: "OrderedDict[int, tuple]" = OrderedDict()
        self._size = cache

    def __len__(self):
        return len(self._profiles)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(len(self)))]
        k = range(len(self))[k]
        if k not in self._cache:
            t, x, r = self._profiles[k]
            self._cache[k] = (t, surface_of_revolution(x, r, self._ring))
            if len(self._cache) > self._size:
                self._cache.popitem(last=False)
        return self._cache[k]


def axisymmetric_run(profile, n: int = 2, cfg=None, *, periodic: bool = False,
                     period: Optional[float] = None, ring: int = 64,
                     alpha: float = 0.1, stop_radius: float = 1e-3):
    """Evolve a rotationally symmetric hypersurface in R^(n+1).

    ``profile`` is a (K, 2) array of (x, r) points. Endpoints with r = 0 are
    poles. With ``periodic=True`` the profile is one period of an x-periodic
    graph (the endpoint at x + period is implied) and is not resampled.
    Stored states are revolved triangle meshes (only for n = 2; every state's
    profile is kept in ``profiles``). The run stops at ``cfg.stop_curvature``,
    ``cfg.t_max``, or when an interior minimum of r drops below
    ``stop_radius``; a stop whose curvature maximum sits at an interior
    minimum of r is reported as a ``neck`` event.
    """
    from .flow import FlowConfig, FlowTrajectory, TRACE_COLUMNS  # circular import guard

    cfg = FlowConfig() if cfg is None else cfg
    if n < 2:
        raise ValueError("the axisymmetric reduction needs n >= 2")
    P = np.asarray(profile, float)
    if P.ndim != 2 or P.shape[1] != 2:
        raise ValueError("profile must be a (K, 2) array of (x, r)")
    if periodic:
        if period is None:
            raise ValueError("periodic profiles need a period")
        if np.any(P[:, 1] <= 0):
            raise ValueError("periodic profiles need r > 0 everywhere")
    elif np.any(P[1:-1, 1] <= 0):
        raise ValueError("profile radius must be positive away from the endpoints")
    prof = _Profile(P[:, 0], P[:, 1], periodic, period or 0.0)
    length = float(np.sum(np.linalg.norm(np.diff(prof.P, axis=0), axis=1)))
    floor = 20.0 / max(length, 1e-12) * alpha
    if not periodic:
        prof = _resample(prof, n, alpha, floor)

    rows = {k: [] for k in TRACE_COLUMNS}
    profiles = []
    steps = []
    events = []
    error = None
    t = 0.0
    sphere = _sphere_area(n - 1)
    for k in range(cfg.max_steps + 1):
        k1, k2, nu, a, b = profile_curvatures(prof.x, prof.r, n, prof.periodic, prof.period)
        hsq = k1 ** 2 + (n - 1) * k2 ** 2
        Hsq = (k1 + (n - 1) * k2) ** 2
        if not np.all(np.isfinite(hsq)):
            error = "non-finite curvature on the profile"
            break
        mh = float(hsq.max())
        seg = b if prof.periodic else b[:-1]
        rmid = 0.5 * (prof.r + np.roll(prof.r, -1)) if prof.periodic else 0.5 * (prof.r[1:] + prof.r[:-1])
        measure = float(sphere * np.sum(rmid ** (n - 1) * seg))
        mins = _interior_minima(prof.r) if not prof.periodic else np.array([], int)
        neck = mins[prof.r[mins] < stop_radius] if len(mins) else mins
        done = mh >= cfg.stop_curvature or t >= cfg.t_max or len(neck) > 0 or k == cfg.max_steps
        store = k % cfg.record_every == 0 or done
        rows["t"].append(t)
        rows["max_h_sq"].append(mh)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(Hsq > 0, hsq / Hsq, np.inf)
        rows["max_ratio"].append(float(ratio.max()))
        rows["min_H_sq"].append(float(Hsq.min()))
        rows["total_measure"].append(measure)
        gap = (float(np.max(hsq + cfg.pinching_a - cfg.pinching_c * Hsq))
               if cfg.pinching_c is not None else math.nan)
        rows["pinching_gap"].append(gap)
        rows["embed_gap"].append(math.nan)
        rows["max_traceless_sq"].append(float(np.max(hsq - Hsq / n)))
        rows["max_grad_h_sq"].append(math.nan)
        if store:
            profiles.append((t, prof.x.copy(), prof.r.copy()))
            steps.append(k)
        if done:
            imax = int(np.argmax(hsq))
            if len(mins) and imax in set(mins.tolist()) | set((mins + 1).tolist()) | set((mins - 1).tolist()):
                j = int(mins[np.argmin(prof.r[mins])])
                events.append({"kind": "neck", "t": t, "x": float(prof.x[j]),
                               "r": float(prof.r[j]), "index": j})
            break
        dt = min(cfg.dt_safety / mh, cfg.t_max - t)
        nxt = _semi_implicit(prof, n, dt)
        if not np.all(np.isfinite(nxt.x)) or not np.all(np.isfinite(nxt.r)):
            error = "semi-implicit profile solve failed"
            break
        inner = nxt.r if nxt.periodic else nxt.r[1:-1]
        if np.any(inner <= 0):
            j = int(np.argmin(inner)) + (0 if nxt.periodic else 1)
            events.append({"kind": "neck", "t": t + dt, "x": float(nxt.x[j]), "r": 0.0, "index": j})
            error = f"profile touched the axis at x={nxt.x[j]:.6g}"
            break
        if (nxt.pole0 and nxt.x[1] <= nxt.x[0]) or (nxt.pole1 and nxt.x[-1] <= nxt.x[-2]):
            error = "pole overtaken by its neighbour"
            break
        prof = nxt
        if not prof.periodic and _needs_resample(prof, n, alpha, floor):
            prof = _resample(prof, n, alpha, floor)
        t += dt

    trace = {k_: np.asarray(v, float) for k_, v in rows.items()}
    states = RevolvedStates(profiles, ring) if n == 2 and not periodic else []
    return FlowTrajectory(states, trace, cfg, np.asarray(steps, np.int64), error=error,
                          events=events, profiles=profiles, profile_dim=n, ring=ring)
