"""CSV readers and writers. Floats are written with ``repr`` so files round-trip exactly."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import TrajectoryRecord


def _fmt(x) -> str:
    return repr(float(x))


def write_table(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_table(path):
    """``(header, float array (rows, cols))``."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        try:
            header = next(r)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV file") from None
        rows = []
        for lineno, row in enumerate(r, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field") from None
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


@dataclass
class TrajectoryTable:
    coord_names: list[str]
    muscle_names: list[str]
    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    e_kin: np.ndarray
    e_pot: np.ndarray
    lengths: np.ndarray
    torques: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def e_tot(self) -> np.ndarray:
        return self.e_kin + self.e_pot


def trajectory_header(coord_names, muscle_names, with_torques: bool) -> list[str]:
    h = ["t"] + [f"q_{c}" for c in coord_names] + [f"qdot_{c}" for c in coord_names]
    h += ["E_kin", "E_pot", "E_tot"] + [f"length_{m}" for m in muscle_names]
    if with_torques:
        h += [f"tau_{c}" for c in coord_names]
    return h


def write_trajectory(path, rec: TrajectoryRecord, coord_names) -> None:
    coord_names = list(coord_names)
    with_tau = bool(rec.torques) and len(rec.torques) == len(rec.t)
    header = trajectory_header(coord_names, rec.muscle_names, with_tau)
    rows = []
    for k in range(len(rec.t)):
        row = [rec.t[k], *rec.q[k], *rec.qdot[k], rec.e_kin[k], rec.e_pot[k],
               rec.e_kin[k] + rec.e_pot[k], *rec.lengths[k]]
        if with_tau:
            row += list(rec.torques[k])
        rows.append([float(v) for v in row])
    write_table(path, header, rows)


def read_trajectory(path) -> TrajectoryTable:
    header, data = read_table(path)
    if not header or header[0] != "t":
        raise ValueError(f"{path}: first column must be 't'")
    coords = [h[2:] for h in header if h.startswith("q_")]
    n = len(coords)
    expect_q = [f"qdot_{c}" for c in coords]
    if header[1 + n : 1 + 2 * n] != expect_q:
        raise ValueError(f"{path}: qdot columns do not match q columns")
    k = 1 + 2 * n
    if header[k : k + 3] != ["E_kin", "E_pot", "E_tot"]:
        raise ValueError(f"{path}: missing energy columns")
    rest = header[k + 3 :]
    muscles = [h[len("length_"):] for h in rest if h.startswith("length_")]
    taus = [h for h in rest if h.startswith("tau_")]
    if taus and taus != [f"tau_{c}" for c in coords]:
        raise ValueError(f"{path}: torque columns do not match coordinates")
    nm = len(muscles)
    t = data[:, 0]
    if len(t) > 1 and not np.all(np.diff(t) > 0.0):
        raise ValueError(f"{path}: times must be strictly increasing")
    return TrajectoryTable(
        coord_names=coords,
        muscle_names=muscles,
        t=t,
        q=data[:, 1 : 1 + n],
        qdot=data[:, 1 + n : 1 + 2 * n],
        e_kin=data[:, k],
        e_pot=data[:, k + 1],
        lengths=data[:, k + 3 : k + 3 + nm],
        torques=data[:, k + 3 + nm :] if taus else None,
    )
