"""Backwards heat kernel, Gaussian heat density and its monotone trace.

For a flow of n-dimensional submanifolds the heat density about a spacetime
point (x0, t0) is the integral of

    rho(x, t) = (4 pi (t0 - t))^(-n/2) exp(-|x - x0|^2 / (4 (t0 - t)))

against the induced measure. It is non-increasing along the flow, constant
exactly on self-shrinkers centred at (x0, t0), and unchanged by parabolic
rescaling about that point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .geometry import GeometrySnapshot, laplace_beltrami
from .immersion import DiscreteImmersion

__all__ = [
    "heat_kernel",
    "heat_density",
    "DensityTrace",
    "density_trace",
    "rescaling_invariance_check",
    "tail_mass",
]


def heat_kernel(x, t: float, center, horizon: float, n: int):
    """Backwards heat kernel at points ``x`` (shape (..., N)) and time t."""
    tau = horizon - t
    if not tau > 0:
        raise ValueError(f"kernel needs t < horizon (t={t}, horizon={horizon})")
    d = np.asarray(x, float) - np.asarray(center, float)
    r2 = np.sum(d * d, axis=-1)
    return (4.0 * math.pi * tau) ** (-n / 2.0) * np.exp(-r2 / (4.0 * tau))


def _measures(imm: DiscreteImmersion, geom: Optional[GeometrySnapshot]) -> np.ndarray:
    if geom is not None:
        return geom.vertex_measure
    return laplace_beltrami(imm)[1]


def _weights(imm, geom, t, center, horizon):
    rho = heat_kernel(imm.positions, t, center, horizon, imm.intrinsic_dim)
    return rho * _measures(imm, geom)


def heat_density(imm: DiscreteImmersion, geom: Optional[GeometrySnapshot], t: float,
                 center, horizon: float) -> float:
    """Vertex-lumped quadrature of the kernel against the induced measure."""
    return float(np.sum(_weights(imm, geom, t, center, horizon)))


def tail_mass(imm: DiscreteImmersion, geom: Optional[GeometrySnapshot], t: float,
              center, horizon: float, R: float) -> float:
    """Weighted mass of the vertices at distance R or more from the centre."""
    w = _weights(imm, geom, t, center, horizon)
    far = np.linalg.norm(imm.positions - np.asarray(center, float), axis=1) >= R
    return float(np.sum(w[far]))


@dataclass(frozen=True)
class DensityTrace:
    center: np.ndarray
    horizon: float
    samples: List[Tuple[float, float]]
    theta_limit: float
    extrapolation_residual: float
    violations: List[int]
    slack: float

    @property
    def times(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    @property
    def thetas(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples])


def density_trace(traj, center, horizon: float, slack: float = 1e-3) -> DensityTrace:
    """Heat density at every stored state of a trajectory.

    ``violations`` lists sample indices k where theta_k exceeds
    (1 + slack) theta_(k-1). The limit estimate is the last sample, reported
    with the change over the final interval rather than extrapolated.
    """
    samples = []
    for t, imm in traj.states:
        if t >= horizon:
            break
        samples.append((float(t), heat_density(imm, None, t, center, horizon)))
    if not samples:
        raise ValueError("no stored state precedes the horizon")
    th = np.array([s[1] for s in samples])
    bad = [k for k in range(1, len(th)) if th[k] > th[k - 1] * (1.0 + slack)]
    resid = abs(th[-1] - th[-2]) if len(th) > 1 else math.nan
    return DensityTrace(np.asarray(center, float), float(horizon), samples, float(th[-1]),
                        float(resid), bad, slack)


def rescaling_invariance_check(traj, center, horizon: float, scale: float,
                               s: float) -> Tuple[float, float]:
    """Density before and after the parabolic rescaling x -> scale (x - center).

    The original state is taken at t = horizon + s / scale^2; the rescaled
    copy is evaluated at backward time s with the kernel centred at (0, 0).
    """
    t = horizon + s / scale ** 2
    imm = traj.state_at(t)
    orig = heat_density(imm, None, t, center, horizon)
    resc = imm.transformed(scale, center)
    return orig, heat_density(resc, None, s, np.zeros(imm.ambient_dim), 0.0)
