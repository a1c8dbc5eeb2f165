"""Analytic shortest path over an infinite cylinder (obstacle-set construction).

The cylinder axis is the surface frame's z axis. A path wraps only when its
straight cross-section chord cuts the circle and the chosen wrap side agrees
with the chord's orientation about the axis; otherwise it stays straight.
A wrapped path is straight segment -> helix -> straight segment, which unrolls
to a straight line, so height varies linearly with projected arc length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..spatial import Transform

TWO_PI = 2.0 * np.pi


class WrapGeometryError(ValueError):
    """An endpoint lies on or inside the cylinder."""


@dataclass
class WrapCylinder:
    body: int
    surf_transform: Transform = field(default_factory=Transform.identity)
    radius: float = 0.05
    wrap_side: int = 1  # +1 wraps counter-clockwise about +z, -1 clockwise

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError("cylinder radius must be positive")
        if self.wrap_side not in (1, -1):
            raise ValueError("wrap_side must be +1 or -1")
        if not self.surf_transform.is_valid():
            raise ValueError("invalid surface transform")


def parse_side(side) -> int:
    if side in (1, "positive", "+", "pos"):
        return 1
    if side in (-1, "negative", "-", "neg"):
        return -1
    raise ValueError(f"wrap side must be positive or negative, got {side!r}")


def wrap_batch(P, Q, radius, side, alpha, check: bool = True):
    """Vectorized oracle.

    ``P``, ``Q`` are (M, 3) surface-frame endpoints, ``radius``/``side``/``alpha``
    broadcast to (M,). Returns ``(x_alpha (M,3), wrapped_len (M,), total_len (M,))``.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float)).copy()
    Q = np.atleast_2d(np.asarray(Q, dtype=float)).copy()
    M = len(P)
    r = np.broadcast_to(np.asarray(radius, dtype=float), (M,))
    sgn = np.broadcast_to(np.asarray(side, dtype=float), (M,))
    a = np.broadcast_to(np.asarray(alpha, dtype=float), (M,))
    if check:
        if np.any((a < 0.0) | (a > 1.0)):
            raise ValueError("alpha must lie in [0, 1]")
    # mirror negative-side problems onto the positive side
    P[:, 1] *= sgn
    Q[:, 1] *= sgn

    rhoP = np.hypot(P[:, 0], P[:, 1])
    rhoQ = np.hypot(Q[:, 0], Q[:, 1])
    if check and (np.any(rhoP <= r) or np.any(rhoQ <= r)):
        raise WrapGeometryError("wrap endpoint inside or on the cylinder")

    d = Q[:, :2] - P[:, :2]
    dd = np.einsum("ij,ij->i", d, d)
    t = np.clip(-np.einsum("ij,ij->i", P[:, :2], d) / np.where(dd > 0.0, dd, 1.0), 0.0, 1.0)
    closest = P[:, :2] + t[:, None] * d
    cuts = np.hypot(closest[:, 0], closest[:, 1]) < r
    cross = P[:, 0] * Q[:, 1] - P[:, 1] * Q[:, 0]
    wrapped = cuts & (cross >= 0.0)

    x = (1.0 - a)[:, None] * P + a[:, None] * Q
    total = np.linalg.norm(Q - P, axis=1)
    wlen = np.zeros(M)

    if np.any(wrapped):
        w = wrapped
        Pw, Qw, rw, aw = P[w], Q[w], r[w], a[w]
        rp, rq = rhoP[w], rhoQ[w]
        th1 = np.arctan2(Pw[:, 1], Pw[:, 0]) + np.arccos(rw / rp)
        th2 = np.arctan2(Qw[:, 1], Qw[:, 0]) - np.arccos(rw / rq)
        dth = np.mod(th2 - th1, TWO_PI)
        t1 = np.sqrt(rp**2 - rw**2)
        t2 = np.sqrt(rq**2 - rw**2)
        arc = rw * dth
        D = t1 + arc + t2
        dz = Qw[:, 2] - Pw[:, 2]
        L = np.hypot(D, dz)
        T1 = rw[:, None] * np.stack([np.cos(th1), np.sin(th1)], axis=1)
        T2 = rw[:, None] * np.stack([np.cos(th2), np.sin(th2)], axis=1)

        u = aw * D
        xy = np.empty((len(aw), 2))
        s1 = u <= t1
        s3 = u >= t1 + arc
        s2 = ~(s1 | s3)
        f1 = np.where(t1 > 0.0, u / np.where(t1 > 0.0, t1, 1.0), 0.0)
        xy[s1] = Pw[s1, :2] + f1[s1, None] * (T1[s1] - Pw[s1, :2])
        ang = th1 + (u - t1) / rw
        xy[s2] = rw[s2, None] * np.stack([np.cos(ang[s2]), np.sin(ang[s2])], axis=1)
        f3 = (u - t1 - arc) / t2
        xy[s3] = T2[s3] + f3[s3, None] * (Qw[s3, :2] - T2[s3])
        xw = np.column_stack([xy, Pw[:, 2] + aw * dz])
        x[w] = xw
        total[w] = L
        wlen[w] = arc * L / D

    x[:, 1] *= sgn
    return x, wlen, total


def analytic_wrap(x_ori_S, x_ins_S, radius: float, wrap_side, alpha: float):
    """Single-sample oracle: ``(x_alpha_S, wrapped_len, total_len)``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    x, l, L = wrap_batch(
        np.asarray(x_ori_S, dtype=float)[None],
        np.asarray(x_ins_S, dtype=float)[None],
        radius,
        parse_side(wrap_side),
        alpha,
    )
    return x[0], float(l[0]), float(L[0])


def tangent_points(x_ori_S, x_ins_S, radius: float, wrap_side):
    """Tangent points ``(T1, T2)`` of a wrapped path, or ``None`` if it runs straight."""
    side = parse_side(wrap_side)
    P = np.array(x_ori_S, dtype=float)
    Q = np.array(x_ins_S, dtype=float)
    _, l, _ = wrap_batch(P[None], Q[None], radius, side, 0.0)
    if l[0] == 0.0:
        return None
    P[1] *= side
    Q[1] *= side
    rp, rq = np.hypot(P[0], P[1]), np.hypot(Q[0], Q[1])
    th1 = np.arctan2(P[1], P[0]) + np.arccos(radius / rp)
    th2 = np.arctan2(Q[1], Q[0]) - np.arccos(radius / rq)
    dth = np.mod(th2 - th1, TWO_PI)
    t1, t2 = np.sqrt(rp**2 - radius**2), np.sqrt(rq**2 - radius**2)
    D = t1 + radius * dth + t2
    dz = Q[2] - P[2]
    T1 = np.array([radius * np.cos(th1), side * radius * np.sin(th1), P[2] + dz * t1 / D])
    T2 = np.array([radius * np.cos(th2), side * radius * np.sin(th2), Q[2] - dz * t2 / D])
    return T1, T2
