"""Joint sweeps comparing oracle and surrogate mass-point trajectories.

Both derivative series are forward differences over the same sweep grid, so
their step-to-step jumps are directly comparable: a kink in the oracle path
(attach/detach) shows up as an O(1) jump, while the smooth surrogate's jumps
shrink with the grid spacing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..paths import Anchor
from ..skeleton import Skeleton
from .cylinder import WrapCylinder, wrap_batch
from .surrogate import SurrogateEvaluator, surface_endpoints


@dataclass
class ContinuityReport:
    theta: np.ndarray  # (S,) sweep parameter
    alphas: np.ndarray  # (m,)
    x_oracle: np.ndarray  # (S, m, 3) world
    x_network: np.ndarray  # (S, m, 3) world
    wrapped_len: np.ndarray  # (S,) oracle l
    total_len: np.ndarray  # (S,) oracle L

    @property
    def dx_oracle(self) -> np.ndarray:
        return _forward_diff(self.x_oracle, self.theta)

    @property
    def dx_network(self) -> np.ndarray:
        return _forward_diff(self.x_network, self.theta)

    @property
    def max_jump_oracle(self) -> float:
        return _max_jump(self.dx_oracle)

    @property
    def max_jump_network(self) -> float:
        return _max_jump(self.dx_network)

    def outside_band(self, threshold: float = 0.01) -> np.ndarray:
        """Samples away from the discard band: ``l = 0`` or ``l/L > 2 * threshold``."""
        ratio = self.wrapped_len / self.total_len
        return (self.wrapped_len == 0.0) | (ratio > 2.0 * threshold)

    def position_error(self, mask=None) -> np.ndarray:
        """Per-sample RMS position error over mass points, relative to the oracle path length."""
        err = np.sqrt(np.mean(np.sum((self.x_network - self.x_oracle) ** 2, axis=2), axis=1))
        rel = err / self.total_len
        return rel if mask is None else rel[mask]

    def relative_rmse(self, threshold: float = 0.01) -> float:
        e = self.position_error(self.outside_band(threshold))
        return float(np.sqrt(np.mean(e**2))) if e.size else float("nan")

    def write_csv(self, path, component: int = 0) -> None:
        """Aligned series of one position component: oracle, network and their derivatives."""
        dxo, dxn = self.dx_oracle, self.dx_network
        S, m = self.x_oracle.shape[:2]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["theta", "wrapped_len", "total_len"]
            for j in range(m):
                head += [f"x_oracle_{j}", f"x_network_{j}", f"dx_oracle_{j}", f"dx_network_{j}"]
            w.writerow(head)
            for k in range(S):
                row = [repr(float(self.theta[k])), repr(float(self.wrapped_len[k])), repr(float(self.total_len[k]))]
                for j in range(m):
                    d_o = dxo[k, j, component] if k < S - 1 else np.nan
                    d_n = dxn[k, j, component] if k < S - 1 else np.nan
                    row += [repr(float(v)) for v in (self.x_oracle[k, j, component],
                                                     self.x_network[k, j, component], d_o, d_n)]
                w.writerow(row)


def _forward_diff(x, theta):
    dt = np.diff(theta)
    return np.diff(x, axis=0) / dt[:, None, None]


def _max_jump(d) -> float:
    if len(d) < 2:
        return 0.0
    return float(np.max(np.linalg.norm(np.diff(d, axis=0), axis=2)))


def continuity_report(cylinder: WrapCylinder, weights, origin: Anchor, insertion: Anchor,
                      skeleton: Skeleton, joint_sweep, theta=None, alphas=(0.1, 0.3, 0.5, 0.7, 0.9)):
    """Evaluate oracle and surrogate along a sweep of configurations ``joint_sweep`` (S, dof).

    ``theta`` parameterizes the sweep for differencing; defaults to the sample index.
    """
    qs = np.atleast_2d(np.asarray(joint_sweep, dtype=float))
    S = len(qs)
    theta = np.arange(S, dtype=float) if theta is None else np.asarray(theta, dtype=float)
    if theta.shape != (S,):
        raise ValueError("theta must have one entry per sweep configuration")
    alphas = np.asarray(alphas, dtype=float)
    m = len(alphas)
    ev = weights if isinstance(weights, SurrogateEvaluator) else SurrogateEvaluator(cylinder, weights)

    x_or = np.empty((S, m, 3))
    x_nn = np.empty((S, m, 3))
    wl = np.empty(S)
    tl = np.empty(S)
    for k, q in enumerate(qs):
        kin = skeleton.kinematics(q)
        xo, xi, T_WS = surface_endpoints(cylinder, origin, insertion, kin)
        xa, l, L = wrap_batch(np.repeat(xo[None], m, 0), np.repeat(xi[None], m, 0),
                              cylinder.radius, cylinder.wrap_side, alphas)
        x_or[k] = T_WS.apply(xa)
        x_nn[k] = T_WS.apply(ev.positions(xo, xi, alphas))
        wl[k], tl[k] = l[0], L[0]
    return ContinuityReport(theta, alphas, x_or, x_nn, wl, tl)
