"""Training data for the wrap surrogate, drawn from the analytic oracle.

Samples whose wrapped fraction ``l/L`` lies in the open band ``(0, threshold)``
sit next to the attach/detach discontinuity and are dropped; fully detached
samples (``l == 0``) are kept.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .cylinder import wrap_batch

COLUMNS = (
    "x_ori_x", "x_ori_y", "x_ori_z",
    "x_ins_x", "x_ins_y", "x_ins_z",
    "alpha", "radius",
    "x_alpha_x", "x_alpha_y", "x_alpha_z",
    "wrapped_len", "total_len", "wrap_side",
)
MAX_REDRAWS = 1000


class SamplingError(RuntimeError):
    pass


FRAMES = ("cartesian", "cylindrical")


def to_cylindrical(X) -> np.ndarray:
    """Surface-frame points (..., 3) to ``(rho, phi, z)`` with ``phi`` in (-pi, pi]."""
    X = np.asarray(X, dtype=float)
    return np.stack([np.hypot(X[..., 0], X[..., 1]), np.arctan2(X[..., 1], X[..., 0]), X[..., 2]], axis=-1)


def from_cylindrical(C) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    return np.stack([C[..., 0] * np.cos(C[..., 1]), C[..., 0] * np.sin(C[..., 1]), C[..., 2]], axis=-1)


@dataclass
class SamplingRanges:
    """Uniform per-component bounds on the endpoints in the surface frame.

    With ``frame="cylindrical"`` the endpoint bounds are ``(rho, phi, z)``
    (radians for ``phi``); this keeps a sampled region clear of the
    configurations where origin, axis and insertion line up, which a
    Cartesian box around a swinging joint cannot avoid.
    """

    x_ori_lo: tuple
    x_ori_hi: tuple
    x_ins_lo: tuple
    x_ins_hi: tuple
    radius: tuple = (0.05, 0.05)
    alpha: tuple = (0.0, 1.0)
    wrap_side: int = 1
    frame: str = "cartesian"

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}")
        if self.wrap_side not in (1, -1):
            raise ValueError("wrap_side must be +1 or -1")
        for name in ("x_ori_lo", "x_ori_hi", "x_ins_lo", "x_ins_hi", "radius", "alpha"):
            v = tuple(float(x) for x in getattr(self, name))
            if len(v) != (2 if name in ("radius", "alpha") else 3):
                raise ValueError(f"{name} has the wrong length")
            setattr(self, name, v)
        for lo, hi in ((self.x_ori_lo, self.x_ori_hi), (self.x_ins_lo, self.x_ins_hi),
                       (self.radius[:1], self.radius[1:]), (self.alpha[:1], self.alpha[1:])):
            if any(a > b for a, b in zip(lo, hi)):
                raise ValueError("lower bound exceeds upper bound")
        if self.radius[0] <= 0.0 or not (0.0 <= self.alpha[0] and self.alpha[1] <= 1.0):
            raise ValueError("radius must be positive and alpha within [0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> SamplingRanges:
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    def contains(self, inputs, slack: float = 0.0) -> np.ndarray:
        """Mask of network inputs (m, 8) inside the sampled box, widened by ``slack``."""
        lo = np.r_[self.x_ori_lo, self.x_ins_lo, self.alpha[0], self.radius[0]]
        hi = np.r_[self.x_ori_hi, self.x_ins_hi, self.alpha[1], self.radius[1]]
        pad = slack * (hi - lo)
        x = np.array(np.atleast_2d(inputs), dtype=float)
        if self.frame == "cylindrical":
            x[:, 0:3] = to_cylindrical(x[:, 0:3])
            x[:, 3:6] = to_cylindrical(x[:, 3:6])
        return np.all((x >= lo - pad) & (x <= hi + pad), axis=1)


@dataclass(frozen=True)
class WrapSample:
    x_ori_S: np.ndarray
    x_ins_S: np.ndarray
    alpha: float
    radius: float
    x_alpha_S: np.ndarray
    wrapped_len: float
    total_len: float


@dataclass
class WrapDataset:
    data: np.ndarray  # (K, 14), columns as COLUMNS
    ranges: SamplingRanges | None = None
    threshold: float = 0.01
    n_candidates: int = 0
    n_discarded: int = 0
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.data)

    def __iter__(self):
        for row in self.data:
            yield WrapSample(row[0:3], row[3:6], row[6], row[7], row[8:11], row[11], row[12])

    @property
    def inputs(self) -> np.ndarray:
        return self.data[:, 0:8]

    @property
    def targets(self) -> np.ndarray:
        return self.data[:, 8:11]

    @property
    def wrapped_len(self) -> np.ndarray:
        return self.data[:, 11]

    @property
    def total_len(self) -> np.ndarray:
        return self.data[:, 12]

    @property
    def retained_fraction(self) -> float:
        return len(self) / self.n_candidates if self.n_candidates else 1.0

    def split(self, holdout: float = 0.1, seed: int = 0):
        """Deterministic (train, test) split."""
        rng = np.random.default_rng(seed)
        perm = rng.permutation(len(self))
        k = int(round(holdout * len(self)))
        test, train = perm[:k], perm[k:]
        return self._subset(train), self._subset(test)

    def _subset(self, idx) -> WrapDataset:
        return WrapDataset(self.data[idx], self.ranges, self.threshold, len(idx), 0, self.seed, dict(self.meta))

    def save(self, path) -> None:
        header = {
            "threshold": self.threshold,
            "n_candidates": self.n_candidates,
            "n_discarded": self.n_discarded,
            "seed": self.seed,
            "ranges": self.ranges.to_dict() if self.ranges else None,
        }
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("# " + json.dumps(header) + "\n")
            fh.write(",".join(COLUMNS) + "\n")
            for row in self.data:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def load(cls, path) -> WrapDataset:
        header = {}
        rows = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#"):
                    header = json.loads(line[1:])
                    continue
                if line.startswith("x_ori_x"):
                    if tuple(line.strip().split(",")) != COLUMNS:
                        raise ValueError("unexpected dataset columns")
                    continue
                if line.strip():
                    rows.append([float(v) for v in line.split(",")])
        data = np.array(rows, dtype=float).reshape(-1, len(COLUMNS))
        ranges = header.get("ranges")
        return cls(
            data,
            SamplingRanges.from_dict(ranges) if ranges else None,
            header.get("threshold", 0.01),
            header.get("n_candidates", len(data)),
            header.get("n_discarded", 0),
            header.get("seed"),
        )


def draw_candidates(ranges: SamplingRanges, count: int, seed: int):
    """Uniform draws with both endpoints outside the cylinder.

    Returns ``(P, Q, alpha, radius)``; draws landing inside are redrawn.
    """
    rng = np.random.default_rng(seed)

    def draw(n):
        P = rng.uniform(ranges.x_ori_lo, ranges.x_ori_hi, size=(n, 3))
        Q = rng.uniform(ranges.x_ins_lo, ranges.x_ins_hi, size=(n, 3))
        if ranges.frame == "cylindrical":
            P, Q = from_cylindrical(P), from_cylindrical(Q)
        a = rng.uniform(ranges.alpha[0], ranges.alpha[1], size=n)
        r = rng.uniform(ranges.radius[0], ranges.radius[1], size=n)
        return P, Q, a, r

    P, Q, a, r = draw(count)
    for _ in range(MAX_REDRAWS):
        bad = (np.hypot(P[:, 0], P[:, 1]) <= r) | (np.hypot(Q[:, 0], Q[:, 1]) <= r)
        nb = int(bad.sum())
        if nb == 0:
            return P, Q, a, r
        P[bad], Q[bad], a[bad], r[bad] = draw(nb)
    raise SamplingError("sampling ranges keep placing endpoints inside the cylinder")


def discard_mask(wrapped_len, total_len, threshold: float) -> np.ndarray:
    frac = np.asarray(wrapped_len) / np.asarray(total_len)
    return (np.asarray(wrapped_len) > 0.0) & (frac < threshold)


def generate_dataset(ranges: SamplingRanges, count: int, threshold: float = 0.01,
                     seed: int = 0) -> WrapDataset:
    if count <= 0:
        raise SamplingError("sample count must be positive")
    if not 0.0 < threshold <= 0.1:
        raise ValueError("threshold must lie in (0, 0.1]")
    P, Q, a, r = draw_candidates(ranges, count, seed)
    x, l, L = wrap_batch(P, Q, r, ranges.wrap_side, a)
    drop = discard_mask(l, L, threshold)
    keep = ~drop
    if not keep.any():
        raise SamplingError("every sample fell inside the discard band")
    side = np.full(count, float(ranges.wrap_side))
    data = np.column_stack([P, Q, a, r, x, l, L, side])[keep]
    return WrapDataset(data, ranges, threshold, count, int(drop.sum()), seed)
