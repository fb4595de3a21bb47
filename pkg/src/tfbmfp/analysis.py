"""Moments, mean squared displacement and particle clouds from solved fields."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DomainError, MassError
from .mesh import Field, SpatialMesh

# relative size of negative values tolerated as linear-solver noise
NEGATIVITY_TOL = 1e-8


def normalize(field: Field, neg_tol: float = NEGATIVITY_TOL) -> np.ndarray:
    """Discrete probabilities ``U / sum(U)`` over all nodes, storage layout.

    Negative entries smaller than ``neg_tol * max|U|`` are solver noise and
    are clipped to zero; anything larger raises :class:`MassError`.
    """
    v = field.values
    peak = float(np.max(np.abs(v))) if v.size else 0.0
    if peak == 0.0 or not math.isfinite(peak):
        raise MassError("field has zero (or non-finite) mass")
    low = float(v.min())
    if low < -neg_tol * peak:
        raise MassError(f"field has negative values down to {low:.3g} (peak {peak:.3g})")
    p = np.clip(v, 0.0, None)
    total = math.fsum(p.ravel())
    if total <= 0.0:
        raise MassError("field has zero mass")
    return p / total


class Moments(NamedTuple):
    mass: float
    mean_x: float
    mean_y: float
    msd: float
    msd_uncentered: float


def moments(field: Field, mesh: SpatialMesh) -> Moments:
    """Mass, means, centred MSD and the uncentred sum of (x^2 + y^2) Pr."""
    pr = normalize(field)
    X, Y = mesh.coordinates()
    mean_x = float(np.sum(X * pr))
    mean_y = float(np.sum(Y * pr))
    centred = float(np.sum(((X - mean_x) ** 2 + (Y - mean_y) ** 2) * pr))
    raw = float(np.sum((X**2 + Y**2) * pr))
    return Moments(math.fsum(field.values.ravel()), mean_x, mean_y, centred, raw)


def msd(field: Field, mesh: SpatialMesh) -> tuple[float, float, float]:
    """``(mean_x, mean_y, msd)`` with msd centred on the means."""
    m = moments(field, mesh)
    return m.mean_x, m.mean_y, m.msd


@dataclass
class MsdSeries:
    """MSD diagnostics, one entry per recorded time node."""

    times: list[float] = field(default_factory=list)
    mass: list[float] = field(default_factory=list)
    mean_x: list[float] = field(default_factory=list)
    mean_y: list[float] = field(default_factory=list)
    msd: list[float] = field(default_factory=list)
    msd_uncentered: list[float] = field(default_factory=list)
    plateau_estimate: float | None = None

    def append(self, t: float, m: Moments) -> None:
        self.times.append(t)
        self.mass.append(m.mass)
        self.mean_x.append(m.mean_x)
        self.mean_y.append(m.mean_y)
        self.msd.append(m.msd)
        self.msd_uncentered.append(m.msd_uncentered)

    def __len__(self) -> int:
        return len(self.times)

    def truncated(self, T: float) -> "MsdSeries":
        """Series cut at ``T``, with a final row linearly interpolated at ``T``."""
        t = np.asarray(self.times)
        keep = int(np.searchsorted(t, T, side="right"))
        out = MsdSeries(plateau_estimate=self.plateau_estimate)
        cols = ("mass", "mean_x", "mean_y", "msd", "msd_uncentered")
        out.times = list(self.times[:keep])
        for c in cols:
            setattr(out, c, list(getattr(self, c)[:keep]))
        if keep < len(t) and keep > 0 and t[keep - 1] < T:
            w = (T - t[keep - 1]) / (t[keep] - t[keep - 1])
            out.times.append(float(T))
            for c in cols:
                a, b = getattr(self, c)[keep - 1], getattr(self, c)[keep]
                getattr(out, c).append((1.0 - w) * a + w * b)
        return out

    def write_csv(self, path: str | Path) -> None:
        """Header ``t,mass,mean_x,mean_y,msd``; 17 significant digits."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "mass", "mean_x", "mean_y", "msd"])
            for row in zip(self.times, self.mass, self.mean_x, self.mean_y, self.msd):
                w.writerow([f"{v:.17g}" for v in row])


class MsdRecorder:
    """Sink for :func:`tfbmfp.scheme.run` that accumulates an :class:`MsdSeries`."""

    def __init__(self, mesh: SpatialMesh):
        self.mesh = mesh
        self.series = MsdSeries()

    def __call__(self, k: int, t: float, field: Field) -> None:
        self.series.append(t, moments(field, self.mesh))


def detect_plateau(series: MsdSeries, window: float = 0.5, rel_tol: float = 0.02) -> float | None:
    """Mean MSD over the final ``window`` fraction of the horizon, if flat.

    Flat means ``(max - min) / mean <= rel_tol`` within the window. Returns
    ``None`` otherwise, or when the window holds fewer than two samples.
    """
    if not 0.0 < window <= 1.0:
        raise DomainError(f"window must be a fraction in (0, 1]; got {window!r}")
    t = np.asarray(series.times, dtype=float)
    y = np.asarray(series.msd, dtype=float)
    if t.size < 2:
        return None
    start = t[0] + (1.0 - window) * (t[-1] - t[0])
    tail = y[t >= start]
    if tail.size < 2:
        return None
    mean = float(np.mean(tail))
    if mean <= 0.0:
        return None
    if (float(tail.max()) - float(tail.min())) / mean > rel_tol:
        return None
    return mean


def onset_time(series: MsdSeries, fraction: float = 0.95, reference: float | None = None) -> float:
    """First recorded time at which the MSD reaches ``fraction * reference``.

    ``reference`` defaults to the last recorded MSD.
    """
    y = np.asarray(series.msd, dtype=float)
    ref = y[-1] if reference is None else reference
    hit = np.nonzero(y >= fraction * ref)[0]
    if hit.size == 0:
        return math.inf
    return float(series.times[hit[0]])


def sample_particles(field: Field, mesh: SpatialMesh, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` positions from the normalised field, shape ``(count, 2)``.

    Nodes are picked by inverse CDF over the flattened probabilities and the
    point is jittered uniformly within the node's ``h x l`` cell.
    """
    if count < 1:
        raise DomainError(f"count must be positive; got {count!r}")
    pr = normalize(field).ravel()
    cdf = np.cumsum(pr)
    cdf /= cdf[-1]
    rng = np.random.default_rng(seed)
    u = rng.random(count)
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), pr.size - 1)
    n_idx, m_idx = np.divmod(idx, mesh.M + 2)
    jitter = rng.random((count, 2)) - 0.5
    xs = mesh.x[m_idx] + jitter[:, 0] * mesh.h
    ys = mesh.y[n_idx] + jitter[:, 1] * mesh.l
    return np.column_stack([xs, ys])


def write_particles_csv(path: str | Path, points: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in points:
            w.writerow([f"{x:.17g}", f"{y:.17g}"])
