"""Time-series containers, the SSE metric and their CSV forms."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


def _fmt(x: float) -> str:
    # repr is the shortest string that round-trips exactly
    return repr(float(x))


@dataclass
class Dataset:
    dt: float
    times: np.ndarray
    y: np.ndarray
    v: np.ndarray
    x: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.y = _as_2d(self.y)
        self.v = _as_2d(self.v)
        N = self.times.shape[0]
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if N >= 2 and not np.allclose(np.diff(self.times), self.dt, rtol=1e-9, atol=1e-12):
            raise ValueError("time grid is not uniform with spacing dt")
        for name in ("y", "v", "x", "w", "z"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = _as_2d(arr)
            setattr(self, name, arr)
            if arr.shape[0] != N:
                raise ValueError(f"{name} has {arr.shape[0]} rows, expected {N}")
        if (self.x is None) != (self.w is None) or (self.x is None) != (self.z is None):
            raise ValueError("truth arrays x, w, z must be given together")

    @property
    def N(self) -> int:
        return self.times.shape[0]

    @property
    def m(self) -> int:
        return self.y.shape[1]

    @property
    def r(self) -> int:
        return self.v.shape[1]

    @property
    def n(self) -> Optional[int]:
        return None if self.x is None else self.x.shape[1]

    @property
    def has_truth(self) -> bool:
        return self.x is not None

    def equals(self, other: "Dataset") -> bool:
        if self.dt != other.dt or self.has_truth != other.has_truth:
            return False
        names = ("times", "y", "v") + (("x", "w", "z") if self.has_truth else ())
        return all(np.array_equal(getattr(self, a), getattr(other, a)) for a in names)


def _as_2d(a):
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


@dataclass
class TrialResult:
    estimates: np.ndarray
    s_traj: Optional[np.ndarray] = None
    F_traj: Optional[np.ndarray] = None
    sse: float = float("nan")
    method: str = ""


def sse(estimates, truth) -> float:
    """Sum of squared estimation errors over time and state components."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {tru.shape}")
    return float(np.sum((est - tru) ** 2))


def dataset_header(m: int, r: int, n: Optional[int]) -> list[str]:
    cols = ["t"] + [f"y{i + 1}" for i in range(m)] + [f"v{i + 1}" for i in range(r)]
    if n is not None:
        cols += [f"x{i + 1}" for i in range(n)] + [f"w{i + 1}" for i in range(n)]
        cols += [f"z{i + 1}" for i in range(m)]
    return cols


def dataset_to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(dataset_header(ds.m, ds.r, ds.n))
    blocks = [ds.times[:, None], ds.y, ds.v]
    if ds.has_truth:
        blocks += [ds.x, ds.w, ds.z]
    for row in np.hstack(blocks):
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_dataset(ds: Dataset, path) -> None:
    Path(path).write_text(dataset_to_csv(ds), encoding="utf-8")


def read_dataset(path, meta: Optional[dict] = None, dt: Optional[float] = None) -> Dataset:
    """Load a dataset CSV; column groups are recognised by their header prefix.

    The sample time is inferred from the time column unless ``dt`` is given,
    in which case it must agree with the column to 1e-9 relative.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header[0] != "t":
        raise ValueError(f"{path}: first column must be 't'")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:] if row], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if data.shape[0] < 2:
        raise ValueError(f"{path}: need at least two samples")

    def cols(prefix):
        idx = [i for i, h in enumerate(header) if h[:1] == prefix and h[1:].isdigit()]
        return data[:, idx] if idx else None

    times = data[:, 0]
    y, v = cols("y"), cols("v")
    if y is None:
        raise ValueError(f"{path}: no output columns y1..ym")
    if v is None:
        v = np.zeros((times.size, 0))
    spacing = float((times[-1] - times[0]) / (times.size - 1))
    if dt is None:
        dt = spacing
    elif not np.isclose(dt, spacing, rtol=1e-9, atol=0.0):
        raise ValueError(f"{path}: time column has spacing {spacing!r}, expected dt={dt!r}")
    return Dataset(dt, times, y, v, cols("x"), cols("w"), cols("z"), dict(meta or {}))


def estimates_to_csv(times, result: TrialResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    n = result.estimates.shape[1]
    header = ["t"] + [f"xhat{i + 1}" for i in range(n)]
    if result.s_traj is not None:
        header.append("s")
    if result.F_traj is not None:
        header.append("F")
    writer.writerow(header)
    for k, t in enumerate(times):
        row = [_fmt(t)] + [_fmt(v) for v in result.estimates[k]]
        if result.s_traj is not None:
            row.append(_fmt(result.s_traj[k]))
        if result.F_traj is not None:
            row.append(_fmt(result.F_traj[k]))
        writer.writerow(row)
    return buf.getvalue()
