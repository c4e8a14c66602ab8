"""Cover sequences {X^n} over a finite metric space and their verification.

Two verifiers are provided: ``verify_visual`` checks absolute-scale decay
diam(X) ~ L^-n together with metric separation of combinatorially separated
same-level tiles, and ``verify_quasi_visual`` checks the scale-free variant
where every bound is relative to tile diameters.  Both extract the best
empirical constants over the finite truncation and compare them against user
thresholds; no verdict ever claims more than the truncation depth certifies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyTile, FitFailure, MissingLambda, UnknownTile
from .metricspace import FiniteMetricSpace

DEFAULT_THRESHOLD = 64.0
DEFAULT_SHRINK_LAMBDA = 0.95  # target contraction for the condition-(iv) search

FINITE_COVER_NOTE = (
    "finite truncation: all families are finite and every 'for all n' claim "
    "is certified only up to the stated truncation depth"
)


@dataclass(frozen=True)
class Tile:
    """A tile: a non-empty subset of the point set, living at a level."""

    level: int
    index: int
    members: frozenset[int]

    @property
    def id(self) -> tuple[int, int]:
        return (self.level, self.index)

    def sorted_members(self) -> tuple[int, ...]:
        return tuple(sorted(self.members))


class CoverSequence:
    """A truncated sequence of covers X^0..X^N of a finite metric space.

    Invariants enforced at construction: X^0 is the single whole-space tile,
    every tile is non-empty, and each level covers the point set.
    """

    def __init__(
        self,
        space: FiniteMetricSpace,
        levels: Sequence[Sequence[Iterable[int]]],
        width: int = 0,
        visual_parameter: float | None = None,
    ):
        if width < 0:
            raise ValueError("width must be a non-negative integer")
        if visual_parameter is not None and visual_parameter <= 1:
            raise ValueError("visual parameter must exceed 1")
        self.space = space
        self.width = int(width)
        self.visual_parameter = float(visual_parameter) if visual_parameter else None
        n = space.n
        all_points = frozenset(range(n))
        self.levels: list[list[Tile]] = []
        for lev, fam in enumerate(levels):
            tiles = []
            union: set[int] = set()
            for idx, members in enumerate(fam):
                ms = frozenset(int(i) for i in members)
                if not ms:
                    raise EmptyTile(f"empty tile at level {lev}, index {idx}")
                if not ms <= all_points:
                    raise ValueError(f"tile at level {lev} references unknown points")
                tiles.append(Tile(level=lev, index=idx, members=ms))
                union |= ms
            if union != all_points:
                missing = sorted(all_points - union)[:5]
                raise ValueError(f"level {lev} is not a cover; misses points {missing}")
            self.levels.append(tiles)
        if not self.levels:
            raise ValueError("need at least level 0")
        if len(self.levels[0]) != 1 or self.levels[0][0].members != all_points:
            raise ValueError("level 0 must consist of the single whole-space tile")
        self._membership: dict[int, np.ndarray] = {}
        self._diams: dict[int, np.ndarray] = {}

    # -- basic accessors ---------------------------------------------------

    @property
    def depth(self) -> int:
        """Truncation depth N (largest level present)."""
        return len(self.levels) - 1

    @property
    def n_points(self) -> int:
        return self.space.n

    def tile(self, level: int, index: int) -> Tile:
        if not (0 <= level < len(self.levels) and 0 <= index < len(self.levels[level])):
            raise UnknownTile(f"no tile ({level},{index})")
        return self.levels[level][index]

    def membership(self, level: int) -> np.ndarray:
        """Boolean (n_tiles, n_points) membership matrix for one level."""
        if level not in self._membership:
            fam = self.levels[level]
            m = np.zeros((len(fam), self.n_points), dtype=bool)
            for t in fam:
                m[t.index, list(t.members)] = True
            self._membership[level] = m
        return self._membership[level]

    def diams(self, level: int) -> np.ndarray:
        """Tile diameters at one level, under the bound space's metric."""
        if level not in self._diams:
            d = self.space.dist
            fam = self.levels[level]
            out = np.empty(len(fam))
            for t in fam:
                idx = np.fromiter(t.members, dtype=int)
                out[t.index] = d[np.ix_(idx, idx)].max() if idx.size > 1 else 0.0
            self._diams[level] = out
        return self._diams[level]

    def adjacency(self, level: int) -> np.ndarray:
        """Same-level intersection graph (diagonal True)."""
        m = self.membership(level)
        return (m.astype(np.int32) @ m.astype(np.int32).T) > 0

    def reach_within(self, level: int, length: int) -> np.ndarray:
        """Tile pairs joined by a chain of at most ``length`` same-level tiles."""
        adj = self.adjacency(level)
        reach = np.eye(adj.shape[0], dtype=bool)
        for _ in range(length):
            reach = reach | (reach.astype(np.int32) @ adj.astype(np.int32) > 0)
        return reach

    def pair_distances(self, level: int) -> np.ndarray:
        """Matrix of set distances dist(X, Y) between same-level tiles."""
        d = self.space.dist
        fam = self.levels[level]
        members = [np.fromiter(t.members, dtype=int) for t in fam]
        k = len(fam)
        # point-to-tile minima, then reduce over the second tile's members
        p2t = np.empty((k, self.n_points))
        for i, idx in enumerate(members):
            p2t[i] = d[idx].min(axis=0)
        out = np.empty((k, k))
        for j, idx in enumerate(members):
            out[:, j] = p2t[:, idx].min(axis=1)
        return out

    def with_space(self, space: FiniteMetricSpace) -> "CoverSequence":
        """Rebind the same combinatorial cover to another metric on the same points."""
        if space.n != self.n_points:
            raise ValueError("point counts differ")
        return CoverSequence(
            space,
            [[t.sorted_members() for t in fam] for fam in self.levels],
            width=self.width,
            visual_parameter=self.visual_parameter,
        )

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n_points,
            "width": self.width,
            "lambda": self.visual_parameter,
            "levels": [
                [list(t.sorted_members()) for t in fam] for fam in self.levels
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, space: FiniteMetricSpace) -> "CoverSequence":
        if data.get("n") is not None and data["n"] != space.n:
            raise ValueError("cover was built for a different point count")
        return cls(
            space,
            data["levels"],
            width=data.get("width", 0),
            visual_parameter=data.get("lambda"),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path, space: FiniteMetricSpace) -> "CoverSequence":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), space)


def u_w_neighborhood(cover: CoverSequence, tile: Tile | tuple[int, int], w: int) -> list[Tile]:
    """Tiles reachable from ``tile`` by a same-level chain of length <= w.

    U_0(X) = {X}; the family is non-decreasing in w.
    """
    if isinstance(tile, tuple):
        tile = cover.tile(*tile)
    else:
        cover.tile(tile.level, tile.index)  # raises UnknownTile if foreign
    reach = cover.reach_within(tile.level, w)[tile.index]
    return [cover.levels[tile.level][i] for i in np.flatnonzero(reach)]


# -- reports ---------------------------------------------------------------


@dataclass
class ConditionRecord:
    condition: str
    constant: float | None
    threshold: float | None
    verdict: str  # PASS | FAIL | NA
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "constant": self.constant,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "witness": self.witness,
            "details": self.details,
        }


@dataclass
class VerificationReport:
    """Per-condition empirical constants with verdicts against thresholds."""

    mode: str
    width: int
    truncation: int
    conditions: list[ConditionRecord]
    params: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=lambda: [FINITE_COVER_NOTE])

    @property
    def passed(self) -> bool:
        return all(c.verdict != "FAIL" for c in self.conditions)

    def condition(self, name: str) -> ConditionRecord:
        for c in self.conditions:
            if c.condition == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "width": self.width,
            "truncation": self.truncation,
            "passed": self.passed,
            "conditions": [c.to_dict() for c in self.conditions],
            "params": self.params,
            "notes": self.notes,
        }


def _threshold(thresholds: dict | None, key: str, default: float = DEFAULT_THRESHOLD) -> float:
    if thresholds and key in thresholds:
        return float(thresholds[key])
    return default


def _ratio_record(
    name: str,
    best: float,
    witness: dict | None,
    threshold: float,
    details: dict | None = None,
) -> ConditionRecord:
    if not np.isfinite(best):
        verdict = "FAIL"
    else:
        verdict = "PASS" if best <= threshold else "FAIL"
    return ConditionRecord(
        condition=name,
        constant=None if not np.isfinite(best) else float(best),
        threshold=threshold,
        verdict=verdict,
        witness=witness,
        details=details or {},
    )


def verify_visual(
    cover: CoverSequence,
    thresholds: dict | None = None,
    space: FiniteMetricSpace | None = None,
) -> VerificationReport:
    """Check diam(X) ~ L^-n and separation dist(X,Y) >~ L^-n of U_w-separated pairs.

    Reports the exact best constants over the truncation:
      C1 = max over tiles of max(diam(X) L^n, L^-n / diam(X)),
      C2 = max over U_w-separated same-level pairs of L^-n / dist(X, Y).
    """
    if cover.visual_parameter is None:
        raise MissingLambda("visual verification requires the cover's visual parameter")
    lam = cover.visual_parameter
    if space is not None:
        cover = cover.with_space(space)
    w = cover.width
    c1_best, c1_wit = 0.0, None
    c2_best, c2_wit = 0.0, None
    for lev, fam in enumerate(cover.levels):
        scale = lam ** (-lev)
        diams = cover.diams(lev)
        for t in fam:
            dm = diams[t.index]
            c = np.inf if dm == 0 else max(dm / scale, scale / dm)
            if c > c1_best:
                c1_best, c1_wit = c, {"tile": list(t.id), "diam": float(dm)}
            if not np.isfinite(c1_best):
                break
        if len(fam) > 1:
            sep = ~cover.reach_within(lev, 2 * w + 1)
            if sep.any():
                dists = cover.pair_distances(lev)
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(sep, scale / dists, 0.0)
                i, j = map(int, np.unravel_index(int(np.argmax(ratio)), ratio.shape))
                if ratio[i, j] > c2_best:
                    c2_best = float(ratio[i, j])
                    c2_wit = {
                        "tiles": [[lev, i], [lev, j]],
                        "dist": float(dists[i, j]),
                    }
    t1 = _threshold(thresholds, "visual.diam")
    t2 = _threshold(thresholds, "visual.separation")
    report = VerificationReport(
        mode="visual",
        width=w,
        truncation=cover.depth,
        conditions=[
            _ratio_record("visual.diam", c1_best, c1_wit, t1),
            _ratio_record("visual.separation", c2_best, c2_wit, t2),
        ],
        params={"lambda": lam, "n_points": cover.n_points},
    )
    return report


def verify_quasi_visual(
    cover: CoverSequence,
    thresholds: dict | None = None,
    space: FiniteMetricSpace | None = None,
    shrink_lambda: float = DEFAULT_SHRINK_LAMBDA,
) -> VerificationReport:
    """Check the four scale-free cover conditions and extract best constants.

    (i)   diam(X) ~ diam(Y) for intersecting same-level pairs;
    (ii)  dist(X,Y) >~ diam(X) for U_w-separated same-level pairs;
    (iii) diam comparability across consecutive levels for intersecting tiles;
    (iv)  the smallest k0 with max diam(Y)/diam(X) <= shrink_lambda over
          intersecting pairs X in X^n, Y in X^{n+k0}.
    """
    if space is not None:
        cover = cover.with_space(space)
    w = cover.width
    c1_best, c1_wit = 1.0, None
    c2_best, c2_wit = 0.0, None
    c3_best, c3_wit = 1.0, None
    c3_by_pair: dict[str, float] = {}
    for lev, fam in enumerate(cover.levels):
        diams = cover.diams(lev)
        if len(fam) > 1:
            adj = cover.adjacency(lev)
            np.fill_diagonal(adj, False)
            if adj.any():
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(adj, diams[:, None] / diams[None, :], 0.0)
                    ratio = np.where(adj & (diams[None, :] == 0),
                                     np.where(diams[:, None] == 0, 1.0, np.inf), ratio)
                i, j = map(int, np.unravel_index(int(np.argmax(ratio)), ratio.shape))
                if ratio[i, j] > c1_best:
                    c1_best = float(ratio[i, j])
                    c1_wit = {"tiles": [[lev, i], [lev, j]], "ratio": float(ratio[i, j])}
            sep = ~cover.reach_within(lev, 2 * w + 1)
            if sep.any():
                dists = cover.pair_distances(lev)
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(sep, diams[:, None] / dists, 0.0)
                i, j = map(int, np.unravel_index(int(np.argmax(ratio)), ratio.shape))
                if ratio[i, j] > c2_best:
                    c2_best = float(ratio[i, j])
                    c2_wit = {"tiles": [[lev, i], [lev, j]], "ratio": float(ratio[i, j])}
        if lev + 1 <= cover.depth:
            up = cover.membership(lev).astype(np.int32)
            dn = cover.membership(lev + 1).astype(np.int32)
            inter = (up @ dn.T) > 0
            if inter.any():
                d_up, d_dn = diams, cover.diams(lev + 1)
                with np.errstate(divide="ignore", invalid="ignore"):
                    r1 = np.where(inter, d_up[:, None] / d_dn[None, :], 0.0)
                    r1 = np.where(inter & (d_dn[None, :] == 0),
                                  np.where(d_up[:, None] == 0, 1.0, np.inf), r1)
                    r2 = np.where(inter, d_dn[None, :] / d_up[:, None], 0.0)
                    r2 = np.where(inter & (d_up[:, None] == 0),
                                  np.where(d_dn[None, :] == 0, 1.0, np.inf), r2)
                ratio = np.maximum(r1, r2)
                i, j = map(int, np.unravel_index(int(np.argmax(ratio)), ratio.shape))
                c3_by_pair[f"{lev},{lev + 1}"] = float(ratio[i, j])
                if ratio[i, j] > c3_best:
                    c3_best = float(ratio[i, j])
                    c3_wit = {
                        "tiles": [[lev, i], [lev + 1, j]],
                        "ratio": float(ratio[i, j]),
                        "level_pair": [lev, lev + 1],
                    }
    # condition (iv): smallest k0 with contraction <= shrink_lambda
    gap_max = _cross_level_gap_ratios(cover)[0]
    k0 = None
    achieved = None
    for k in range(1, cover.depth + 1):
        if k in gap_max and gap_max[k] <= shrink_lambda:
            k0, achieved = k, gap_max[k]
            break
    t = {  # thresholds per condition
        "i": _threshold(thresholds, "qv.i"),
        "ii": _threshold(thresholds, "qv.ii"),
        "iii": _threshold(thresholds, "qv.iii"),
    }
    cond_iv = ConditionRecord(
        condition="qv.iv",
        constant=achieved,
        threshold=shrink_lambda,
        verdict="PASS" if k0 is not None else "FAIL",
        witness=None if k0 is not None else {"gap_ratios": {str(k): v for k, v in gap_max.items()}},
        details={"k0": k0, "lambda": achieved},
    )
    report = VerificationReport(
        mode="quasi-visual",
        width=w,
        truncation=cover.depth,
        conditions=[
            _ratio_record("qv.i", c1_best, c1_wit, t["i"]),
            _ratio_record("qv.ii", c2_best, c2_wit, t["ii"]),
            _ratio_record("qv.iii", c3_best, c3_wit, t["iii"],
                          details={"by_level_pair": c3_by_pair}),
            cond_iv,
        ],
        params={"n_points": cover.n_points},
    )
    return report


def _cross_level_gap_ratios(
    cover: CoverSequence, resolved: list[np.ndarray] | None = None
) -> tuple[dict[int, float], dict[int, float]]:
    """Per level-gap k, the max and min of diam(Y)/diam(X) over intersecting
    pairs X in X^n, Y in X^{n+k} with diam(X) > 0.  With ``resolved`` masks,
    only pairs of resolved tiles enter."""
    gap_max: dict[int, float] = {}
    gap_min: dict[int, float] = {}
    for n in range(cover.depth + 1):
        up = cover.membership(n).astype(np.int32)
        d_up = cover.diams(n)
        for m in range(n + 1, cover.depth + 1):
            k = m - n
            dn = cover.membership(m).astype(np.int32)
            inter = (up @ dn.T) > 0
            ok = inter & (d_up[:, None] > 0)
            if resolved is not None:
                ok &= resolved[n][:, None] & resolved[m][None, :]
            if not ok.any():
                continue
            d_dn = cover.diams(m)
            ratio = d_dn[None, :] / np.where(d_up[:, None] > 0, d_up[:, None], 1.0)
            vals = ratio[ok]
            gap_max[k] = max(gap_max.get(k, 0.0), float(vals.max()))
            gap_min[k] = min(gap_min.get(k, np.inf), float(vals.min()))
    return gap_max, gap_min


@dataclass(frozen=True)
class DecayRates:
    """Fitted geometric decay of tile diameters along nested levels.

    rho bounds shrinkage from above (diam Y <= C rho^k diam X), tau from below
    (diam Y >= tau^k diam X), and nu = log(1/rho)/log(1/tau) in (0,1].
    """

    rho: float
    tau: float
    nu: float
    C: float

    def to_dict(self) -> dict:
        return {"rho": self.rho, "tau": self.tau, "nu": self.nu, "C": self.C}


def _log_slope(ks: np.ndarray, logs: np.ndarray) -> float:
    if ks.size == 1:
        return float(logs[0] / ks[0])
    a, _b = np.polyfit(ks, logs, 1)
    return float(a)


RESOLUTION_FLOOR_NN = 3.0


def _resolved_tile_masks(cover: CoverSequence) -> list[np.ndarray]:
    """Per level, the tiles usable for rate fits: diameter at least a few
    local nearest-neighbor distances of their members, so that the measured
    diameter is not dominated by discretization error.  Level 0 is always
    excluded (the root carries the global diameter, not a scale rung)."""
    d = cover.space.dist
    n = cover.space.n
    local_nn = (d + np.diag(np.full(n, np.inf))).min(axis=1) if n > 1 else np.zeros(n)
    masks = []
    for lev in range(cover.depth + 1):
        diams = cover.diams(lev)
        ok = np.zeros(len(cover.levels[lev]), dtype=bool)
        if lev > 0:
            for t in cover.levels[lev]:
                idx = np.fromiter(t.members, dtype=int)
                ok[t.index] = (
                    idx.size >= 2
                    and diams[t.index] >= RESOLUTION_FLOOR_NN * float(local_nn[idx].max())
                )
        masks.append(ok)
    return masks


def derive_rho_tau_nu(cover: CoverSequence) -> DecayRates:
    """Fit the per-level-gap diameter decay envelopes by log-linear regression.

    The slope of the max envelope gives rho, of the min envelope tau; C is the
    smallest constant making the rho-bound hold over all observed gaps.  The
    slopes are the asymptotic decay rates, so constant offsets (and the
    resolution-limited tiles, which are dropped) land in C rather than in rho.
    """
    masks = _resolved_tile_masks(cover)
    gap_max, gap_min = _cross_level_gap_ratios(cover, resolved=masks)
    if not gap_max:
        gap_max, gap_min = _cross_level_gap_ratios(cover)
    if not gap_max:
        raise FitFailure("no intersecting cross-level pairs with positive diameter")
    ks = np.array(sorted(gap_max), dtype=float)
    log_max = np.log([gap_max[int(k)] for k in ks])
    log_min = np.log([max(gap_min[int(k)], 1e-300) for k in ks])
    rho = float(np.exp(_log_slope(ks, log_max)))
    tau = float(np.exp(_log_slope(ks, log_min)))
    if rho >= 1.0 - 1e-9:
        raise FitFailure(f"no decay rate below 1 within truncation (rho fit {rho!r})")
    tau = min(tau, rho)  # 0 < tau <= rho < 1 by theory; clamp fit noise
    C = max(1.0, float(np.exp(np.max(log_max - ks * np.log(rho)))))
    nu = np.log(1.0 / rho) / np.log(1.0 / tau) if tau < 1.0 else 1.0
    nu = min(max(nu, 1e-9), 1.0)
    return DecayRates(rho=rho, tau=tau, nu=float(nu), C=C)


def quasiball_check(cover: CoverSequence) -> tuple[float, float]:
    """Largest r0 and smallest R0 with B(x, r0 diam X) <= U_{2w+1}(X) <= B(x, R0 diam X).

    Scanned over every tile X and member x.  When no inner constraint exists
    anywhere (U_{2w+1}(X) is the whole space for every tile), the vacuous
    inner inclusion collapses to the outer constant.
    """
    d = cover.space.dist
    w = cover.width
    r0 = np.inf
    R0 = 0.0
    for lev, fam in enumerate(cover.levels):
        diams = cover.diams(lev)
        reach = cover.reach_within(lev, 2 * w + 1)
        mem = cover.membership(lev)
        for t in fam:
            dm = diams[t.index]
            if dm == 0:
                continue  # degenerate tile; reported by the visual verifier
            hood = np.zeros(cover.n_points, dtype=bool)
            for j in np.flatnonzero(reach[t.index]):
                hood |= mem[j]
            outside = ~hood
            idx = np.fromiter(t.members, dtype=int)
            inside_max = d[np.ix_(idx, np.flatnonzero(hood))].max(axis=1)
            R0 = max(R0, float(inside_max.max()) / dm)
            if outside.any():
                outside_min = d[np.ix_(idx, np.flatnonzero(outside))].min(axis=1)
                r0 = min(r0, float(outside_min.min()) / dm)
    if not np.isfinite(r0):
        r0 = R0
    return float(r0), float(R0)


def ball_tile_comparability(cover: CoverSequence, R: float) -> float:
    """Best constant C(R) with diam(X) ~ diam(Y) whenever Y meets B(x, R diam X)."""
    d = cover.space.dist
    best = 1.0
    for lev, fam in enumerate(cover.levels):
        diams = cover.diams(lev)
        mem = cover.membership(lev)
        for t in fam:
            dm = diams[t.index]
            if dm == 0:
                continue
            idx = np.fromiter(t.members, dtype=int)
            near = (d[idx] < R * dm).any(axis=0)  # points inside some B(x, R diam X)
            meets = (mem & near[None, :]).any(axis=1)
            for j in np.flatnonzero(meets):
                dj = diams[j]
                if dj == 0:
                    return np.inf
                best = max(best, dm / dj, dj / dm)
    return float(best)
