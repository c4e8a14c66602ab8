"""Level-truncated boundary at infinity of a tile graph.

Every point of the space is represented by a natural geodesic: a
tile-per-level ray through the tiles containing it.  The truncated boundary
distance of two points is L^-(product of the deepest ray tiles); pairs whose
product reaches the truncation depth are not yet separated and get distance 0
(they are excluded from all regularity fits).  No genuine limit object exists
at a finite truncation and reports say so.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covers import CoverSequence
from .errors import CoverGap
from .metricspace import FiniteMetricSpace
from .proximity import PowerDistortion, fit_power_quasisymmetry, snowflake_check
from .tilegraph import TileGraph

BOUNDARY_NOTE = (
    "level-N approximation: the boundary is truncated at the cover depth, "
    "completeness of the sample is vacuous, surjectivity not certifiable"
)


@dataclass(frozen=True)
class NaturalGeodesic:
    """A tile-per-level ray through the tiles containing one point."""

    point: int
    tiles: tuple[tuple[int, int], ...]  # (level, index) per level 0..N


@dataclass
class BoundaryMetricApprox:
    """Truncated boundary distances d(x,y) = L^-(X_x^N . X_y^N)."""

    dist: np.ndarray
    lam: float
    truncation: int
    products2: np.ndarray  # doubled Gromov products of the deepest ray tiles
    diam_comparability: float  # max ratio between diam(X u Y) and L^-(X.Y)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def unresolved(self) -> np.ndarray:
        """Mask of distinct pairs not separated within the truncation."""
        off = ~np.eye(self.n, dtype=bool)
        return off & (self.dist == 0)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "lambda": self.lam,
            "truncation": self.truncation,
            "dist": self.dist.tolist(),
            "diam_comparability": self.diam_comparability,
            "note": BOUNDARY_NOTE,
        }


def natural_geodesic(
    cover: CoverSequence, x: int, tie_break: str = "low"
) -> NaturalGeodesic:
    """Pick one tile containing x per level (lowest tile index by default)."""
    tiles = []
    for lev in range(cover.depth + 1):
        mem = cover.membership(lev)
        holding = np.flatnonzero(mem[:, x])
        if holding.size == 0:
            raise CoverGap(f"level {lev} misses point {x}")
        idx = int(holding[0]) if tie_break == "low" else int(holding[-1])
        tiles.append((lev, idx))
    return NaturalGeodesic(point=int(x), tiles=tuple(tiles))


def boundary_metric(
    cover: CoverSequence,
    graph: TileGraph,
    lam: float,
    tie_break: str = "low",
) -> BoundaryMetricApprox:
    """Matrix of truncated boundary distances over all sample points.

    Also re-verifies the product against geometry: the reported
    ``diam_comparability`` is the worst ratio between diam(X u Y) under the
    cover's metric and L^-(X.Y), over deepest-ray-tile pairs (resolved pairs
    only); it is bounded when the cover is visual for that metric at
    parameter L.
    """
    n = cover.n_points
    depth = cover.depth
    deepest = np.empty(n, dtype=np.int64)
    for x in range(n):
        lev, idx = natural_geodesic(cover, x, tie_break).tiles[depth]
        deepest[x] = graph.vertex((lev, idx))
    g2 = graph.gromov2()
    prod2 = g2[np.ix_(deepest, deepest)]
    dist = float(lam) ** (-prod2 / 2.0)
    resolved = prod2 < 2 * depth
    dist = np.where(resolved, dist, 0.0)
    np.fill_diagonal(dist, 0.0)

    d = cover.space.dist
    worst = 1.0
    members = [np.fromiter(graph.members_of(int(v)), dtype=int) for v in np.unique(deepest)]
    vmap = {int(v): k for k, v in enumerate(np.unique(deepest))}
    for x in range(n):
        ix = members[vmap[int(deepest[x])]]
        for y in range(x + 1, n):
            if not resolved[x, y]:
                continue
            iy = members[vmap[int(deepest[y])]]
            # diam(X u Y) ~ sup of cross distances, within a factor 2
            cross = float(d[np.ix_(ix, iy)].max())
            scale = float(lam) ** (-prod2[x, y] / 2.0)
            if cross > 0:
                worst = max(worst, cross / scale, scale / cross)
    return BoundaryMetricApprox(
        dist=dist,
        lam=float(lam),
        truncation=depth,
        products2=prod2,
        diam_comparability=worst,
    )


def phi_injectivity_check(boundary: BoundaryMetricApprox) -> tuple[bool, dict]:
    """Truncated injectivity: every distinct pair has positive boundary distance.

    Surjectivity onto a genuine boundary at infinity is not certifiable at a
    finite truncation and is reported as not applicable.
    """
    bad = boundary.unresolved()
    if bad.any():
        i, j = map(int, np.unravel_index(int(np.argmax(bad)), bad.shape))
        return False, {"witness": [i, j], "surjectivity": "not applicable"}
    return True, {"surjectivity": "not applicable"}


SNOWFLAKE_THRESHOLD_FACTOR = 0.6  # in units of log(lambda), the quantization step


def phi_regularity_check(
    space: FiniteMetricSpace,
    boundary: BoundaryMetricApprox,
    snowflake_threshold: float | None = None,
) -> dict:
    """Classify the identification map: snowflake if possible, else power
    quasisymmetry, else FAIL.  Unresolved pairs are excluded via distance 0.

    Boundary distances quantize in steps of the base, so the snowflake
    residual is compared against a threshold proportional to log(lambda):
    genuine snowflakes stay within the quantization scatter, while mixed-scale
    covers exceed it.
    """
    if snowflake_threshold is None:
        snowflake_threshold = SNOWFLAKE_THRESHOLD_FACTOR * np.log(boundary.lam)
    dinf = FiniteMetricSpace(dist=boundary.dist)
    snow = snowflake_check(space, dinf, residual_threshold=snowflake_threshold)
    if snow is not None:
        return {"kind": "snowflake", "alpha": snow[0], "C": snow[1]}
    masked = _mask_unresolved(space, boundary)
    qs = fit_power_quasisymmetry(masked, dinf)
    if qs is not None:
        return {"kind": "quasisymmetry", "K": qs.K, "nu": qs.nu}
    return {"kind": "FAIL"}


def _mask_unresolved(space: FiniteMetricSpace, boundary: BoundaryMetricApprox) -> FiniteMetricSpace:
    """Zero out original distances on unresolved pairs so fitters skip them."""
    d = space.dist.copy()
    d[boundary.unresolved()] = 0.0
    return FiniteMetricSpace(dist=d)
