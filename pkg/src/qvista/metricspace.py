"""Finite bounded metric spaces: validation, separated nets, and geometry probes.

A space is a point set {0..n-1} with a dense symmetric distance matrix.  All
probes work directly on the matrix; nothing here assumes coordinates exist.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TRIANGLE_SLACK = 1e-9  # additive slack absorbing float noise in generated matrices


@dataclass(frozen=True)
class FiniteMetricSpace:
    """A finite metric space (S, d) given by its distance matrix.

    ``coords`` is optional bookkeeping (plane / sphere coordinates, etc.) used
    to generate ``dist``; it never enters any computation here.
    """

    dist: np.ndarray
    coords: np.ndarray | None = None
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError(f"distance matrix must be square, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("distance matrix must have finite entries")
        d = d.copy()
        d.flags.writeable = False
        object.__setattr__(self, "dist", d)
        if self.coords is not None:
            c = np.asarray(self.coords)
            c.flags.writeable = False
            object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def points(self) -> range:
        return range(self.n)

    def diameter(self) -> float:
        return float(self.dist.max()) if self.n else 0.0

    def min_positive_distance(self) -> float:
        if self.n < 2:
            return 0.0
        off = self.dist[~np.eye(self.n, dtype=bool)]
        pos = off[off > 0]
        return float(pos.min()) if pos.size else 0.0

    def max_nearest_neighbor_distance(self) -> float:
        """Largest distance from a point to its nearest distinct point."""
        if self.n < 2:
            return 0.0
        d = self.dist + np.diag(np.full(self.n, np.inf))
        return float(d.min(axis=1).max())

    def set_diam(self, members: Sequence[int]) -> float:
        idx = np.fromiter(members, dtype=int)
        if idx.size <= 1:
            return 0.0
        return float(self.dist[np.ix_(idx, idx)].max())

    def set_dist(self, a: Sequence[int], b: Sequence[int]) -> float:
        ia = np.fromiter(a, dtype=int)
        ib = np.fromiter(b, dtype=int)
        return float(self.dist[np.ix_(ia, ib)].min())

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        out: dict = {"n": self.n, "dist": [[float(v) for v in row] for row in self.dist]}
        if self.coords is not None:
            out["coords"] = np.asarray(self.coords).tolist()
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FiniteMetricSpace":
        dist = np.asarray(data["dist"], dtype=float)
        if dist.shape != (data["n"], data["n"]):
            raise ValueError("dist shape does not match declared n")
        coords = np.asarray(data["coords"]) if data.get("coords") is not None else None
        labels = tuple(data["labels"]) if data.get("labels") is not None else None
        return cls(dist=dist, coords=coords, labels=labels)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "FiniteMetricSpace":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class ValidationResult:
    """Outcome of a metric-axiom scan: ok, or the first violation found."""

    ok: bool
    violation: str | None = None  # NonSymmetric | ZeroOffDiagonal | TriangleViolation | ...
    witness: tuple[int, ...] | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violation": self.violation,
            "witness": list(self.witness) if self.witness else None,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class Net:
    """A delta-separated subset of the point set."""

    delta: float
    members: tuple[int, ...]
    maximal: bool = True


def validate_metric(space: FiniteMetricSpace) -> ValidationResult:
    """Scan the distance matrix for the first violated metric axiom.

    Scan order: diagonal, negativity, symmetry, zero off-diagonal, triangle
    inequality (by pivot k, then row-major).  Triangle checks tolerate an
    additive slack of 1e-9.
    """
    d = space.dist
    n = space.n
    diag = np.abs(np.diag(d))
    if np.any(diag > 0):
        i = int(np.argmax(diag > 0))
        return ValidationResult(False, "NonZeroDiagonal", (i,), f"d({i},{i})={d[i, i]!r}")
    if np.any(d < 0):
        i, j = map(int, np.unravel_index(int(np.argmax(d < 0)), d.shape))
        return ValidationResult(False, "NegativeEntry", (i, j), f"d({i},{j})={d[i, j]!r}")
    asym = np.abs(d - d.T)
    if np.any(asym > 0):
        i, j = map(int, np.unravel_index(int(np.argmax(asym > 0)), d.shape))
        return ValidationResult(
            False, "NonSymmetric", (i, j), f"d({i},{j})={d[i, j]!r} != d({j},{i})={d[j, i]!r}"
        )
    zero = (d == 0) & ~np.eye(n, dtype=bool)
    if np.any(zero):
        i, j = map(int, np.unravel_index(int(np.argmax(zero)), d.shape))
        return ValidationResult(False, "ZeroOffDiagonal", (i, j), f"d({i},{j})=0 with i!=j")
    for k in range(n):
        bad = d > d[:, k][:, None] + d[k, :][None, :] + TRIANGLE_SLACK
        if np.any(bad):
            i, j = map(int, np.unravel_index(int(np.argmax(bad)), bad.shape))
            return ValidationResult(
                False,
                "TriangleViolation",
                (i, j, k),
                f"d({i},{j})={d[i, j]!r} > d({i},{k})+d({k},{j})={d[i, k] + d[k, j]!r}",
            )
    return ValidationResult(True)


def maximal_separated_net(space: FiniteMetricSpace, delta: float) -> Net:
    """Greedy maximal delta-separated subset, scanning points in index order.

    Determinism matters more than cardinality here: reruns must reproduce the
    same net bit for bit.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    members: list[int] = []
    d = space.dist
    for i in range(space.n):
        if all(d[i, m] >= delta for m in members):
            members.append(i)
    return Net(delta=float(delta), members=tuple(members), maximal=True)


def separated_count_in_ball(
    space: FiniteMetricSpace, center: int, radius: float, lam: float
) -> int:
    """Greedy count of a lam*radius-separated subset of the open ball B(center, radius)."""
    d = space.dist
    ball = np.flatnonzero(d[center] < radius)
    sep = lam * radius
    chosen: list[int] = []
    for i in ball:
        if all(d[i, c] >= sep for c in chosen):
            chosen.append(int(i))
    return len(chosen)


def _dyadic_radii(space: FiniteMetricSpace) -> list[float]:
    diam = space.diameter()
    floor = space.min_positive_distance()
    if diam <= 0:
        return []
    radii = []
    r = diam
    while r >= max(floor, diam * 1e-12):
        radii.append(r)
        r /= 2.0
    return radii


def doubling_probe(
    space: FiniteMetricSpace,
    lam: float,
    sample_balls: int | None = None,
    seed: int = 0,
) -> int:
    """Max size of a greedy lam*r-separated subset over sampled balls B(x, r).

    With ``sample_balls=None`` the scan is exhaustive over all centers and a
    dyadic radius grid.  Otherwise a seeded prefix of a fixed shuffle of that
    grid is used, so the result is monotone non-decreasing in ``sample_balls``.
    A bounded return value (independent of scale) is evidence of doubling;
    growth with depth flags a non-doubling space.
    """
    if not 0 < lam < 1:
        raise ValueError("lam must lie in (0,1)")
    if space.n <= 1:
        return min(space.n, 1)
    radii = _dyadic_radii(space)
    balls = [(c, r) for r in radii for c in range(space.n)]
    if sample_balls is not None:
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(balls))
        balls = [balls[i] for i in order[: max(1, sample_balls)]]
    best = 1
    for center, radius in balls:
        best = max(best, separated_count_in_ball(space, center, radius, lam))
    return best


@dataclass(frozen=True)
class PerfectnessProbe:
    """Largest annulus constant certified on a finite radius grid.

    ``lambda_up`` is the supremum of constants for which every annulus
    {y : lam*r < d(x,y) <= r} over the scanned grid is non-empty.  The grid
    itself is part of the result; nothing is claimed below ``r_lo``.
    """

    lambda_up: float
    r_lo: float
    r_hi: float
    grid: tuple[float, ...]
    witness: tuple[int, float] | None = None  # (center, radius) attaining the minimum

    def to_dict(self) -> dict:
        return {
            "lambda_up": self.lambda_up,
            "r_lo": self.r_lo,
            "r_hi": self.r_hi,
            "grid_size": len(self.grid),
            "witness": list(self.witness) if self.witness else None,
        }


def uniform_perfectness_probe(
    space: FiniteMetricSpace, ratio: float = 1.1
) -> PerfectnessProbe:
    """Scan annuli over a geometric radius grid (default ratio 1.1).

    The outer ball is taken closed so that the probe is meaningful at sample
    scale (at r = diam the extreme point itself witnesses the annulus), and
    per center the scan stops at the center's eccentricity, where the ball
    saturates.  The grid starts at the largest nearest-neighbor distance:
    below that radius some ball is a singleton and no finite sample can
    certify anything.
    """
    if space.n < 2:
        raise ValueError("need at least 2 points")
    d = space.dist
    r_lo = space.max_nearest_neighbor_distance()
    r_hi = space.diameter()
    grid = []
    r = r_lo
    while r < r_hi:
        grid.append(r)
        r *= ratio
    grid.append(r_hi)
    rows = np.sort(d, axis=1)  # row-sorted distances, rows[i][0] = 0
    ecc = rows[:, -1]
    best = np.inf
    witness = None
    for r in grid:
        # largest distance <= r per center
        pos = (rows <= r).sum(axis=1) - 1
        vals = rows[np.arange(space.n), pos]
        with np.errstate(invalid="ignore"):
            lam_max = np.where(ecc >= r, vals / r, np.inf)
        i = int(np.argmin(lam_max))
        if lam_max[i] < best:
            best = float(lam_max[i])
            witness = (i, float(r))
    return PerfectnessProbe(
        lambda_up=best, r_lo=float(r_lo), r_hi=float(r_hi), grid=tuple(grid), witness=witness
    )
