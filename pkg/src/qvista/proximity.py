"""The proximity function of a cover sequence and metrics synthesized from it.

The proximity of two points is the last level at which they occupy tiles
whose width-w neighborhoods still meet.  On a finite truncation, equal points
and pairs still proximate at the top level receive a sentinel value of N+1:
"not separated within certification".  Wherever a number is unavoidable the
sentinel enters as N+1, consistently across this module, so that derived
constants remain valid bounds for the certified range.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse.csgraph import floyd_warshall

from .covers import CoverSequence, VerificationReport, verify_visual
from .errors import KTooLarge, LambdaTooLarge, MapNotClosed
from .metricspace import FiniteMetricSpace

NU_GRID = tuple(round(0.05 * k, 2) for k in range(1, 21))  # 0.05 .. 1.00
K_CAP = 1e6


@dataclass(frozen=True)
class ProximityTable:
    """Symmetric matrix of proximity levels with sentinel N+1."""

    m: np.ndarray  # int matrix
    width: int
    truncation: int

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.int64)
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    @property
    def sentinel(self) -> int:
        return self.truncation + 1

    @property
    def n(self) -> int:
        return self.m.shape[0]

    def certified(self) -> np.ndarray:
        """Boolean mask of pairs separated within the truncation."""
        return self.m <= self.truncation

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "width": self.width,
            "truncation": self.truncation,
            "sentinel": self.sentinel,
            "m": self.m.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProximityTable":
        return cls(
            m=np.asarray(data["m"], dtype=np.int64),
            width=data["width"],
            truncation=data["truncation"],
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")


@dataclass(frozen=True)
class QuasiMetric:
    """Symmetric q with q(x,y)=0 iff x=y and a relaxed ultratriangle constant K."""

    q: np.ndarray
    K: float

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        q.flags.writeable = False
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True)
class PowerDistortion:
    """Distortion eta(t) = K * max(t^nu, t^(1/nu))."""

    K: float
    nu: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.K * np.maximum(t ** self.nu, t ** (1.0 / self.nu))

    def to_dict(self) -> dict:
        return {"K": self.K, "nu": self.nu}


def _point_proximity_at_level(cover: CoverSequence, level: int) -> np.ndarray:
    """Boolean matrix: pairs occupying tiles X, Y with U_w(X) meeting U_w(Y)."""
    mem = cover.membership(level).astype(np.int32)
    near = cover.reach_within(level, 2 * cover.width + 1).astype(np.int32)
    return (mem.T @ near @ mem) > 0


def compute_proximity(cover: CoverSequence) -> ProximityTable:
    """Largest level at which two points are still width-w proximate.

    Pairs proximate at the truncation depth N (in particular every diagonal
    entry) receive the sentinel N+1.
    """
    n = cover.n_points
    depth = cover.depth
    m = np.zeros((n, n), dtype=np.int64)
    for lev in range(1, depth + 1):
        prox = _point_proximity_at_level(cover, lev)
        m[prox] = lev
    m[m == depth] = depth + 1
    np.fill_diagonal(m, depth + 1)
    return ProximityTable(m=m, width=cover.width, truncation=depth)


def infimum_proximity(cover: CoverSequence) -> np.ndarray:
    """The infimum variant m': first level at which some tiles of the two
    points are already width-w separated (sentinel N+1 when none is).

    Exposed read-only; satisfies m' <= m + 1.
    """
    n = cover.n_points
    depth = cover.depth
    out = np.full((n, n), depth + 1, dtype=np.int64)
    for lev in range(depth, 0, -1):
        mem = cover.membership(lev).astype(np.int32)
        near = cover.reach_within(lev, 2 * cover.width + 1)
        far = (~near).astype(np.int32)
        sep = (mem.T @ far @ mem) > 0
        out[sep] = lev
    np.fill_diagonal(out, depth + 1)
    return out


@dataclass
class CombinatorialCheck:
    """Constants for the four combinatorial conditions on the proximity function.

    ``C`` is the max of the per-condition constants, matching how downstream
    arguments consume them.  Condition (i) is informational at a finite
    truncation: distinct pairs still proximate at the top level are counted,
    not failed.  Tiles whose member pairs are all unresolved (every within-tile
    proximity is sentinel; in particular all top-level tiles) do not enter the
    condition-(ii) constant and are counted separately.
    """

    C_ii: float
    C_iii: float
    C_iv: float
    unresolved_pairs: int
    unresolved_tiles: int
    table: ProximityTable
    witnesses: dict = field(default_factory=dict)

    @property
    def C(self) -> float:
        return max(self.C_ii, self.C_iii, self.C_iv)

    @property
    def passed(self) -> bool:
        return np.isfinite(self.C)

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "C_ii": self.C_ii,
            "C_iii": self.C_iii,
            "C_iv": self.C_iv,
            "unresolved_pairs": self.unresolved_pairs,
            "unresolved_tiles": self.unresolved_tiles,
            "witnesses": self.witnesses,
        }


def check_combinatorially_visual(
    cover: CoverSequence, table: ProximityTable | None = None
) -> CombinatorialCheck:
    """Extract the smallest constants for the combinatorial cover conditions.

    (ii)  every resolved tile X^n contains a pair with m <= n + C;
    (iii) width-w separated same-level pairs have m <= n + C across all
          member pairs;
    (iv)  m(x,y) >= min(m(x,z), m(z,y)) - C over all triples, with the
          sentinel entering as the number N+1.
    """
    if table is None:
        table = compute_proximity(cover)
    m = table.m
    sentinel = table.sentinel
    witnesses: dict = {}
    off = ~np.eye(table.n, dtype=bool)
    unresolved_pairs = int(np.count_nonzero((m == sentinel) & off) // 2)

    c_ii = 0.0
    unresolved_tiles = 0
    wit_ii = None
    for lev, fam in enumerate(cover.levels):
        for t in fam:
            idx = np.fromiter(t.members, dtype=int)
            sub = m[np.ix_(idx, idx)].copy()
            np.fill_diagonal(sub, sentinel)
            best = int(sub.min()) if idx.size > 1 else sentinel
            if best >= sentinel:
                unresolved_tiles += 1
                continue
            if best - lev > c_ii:
                c_ii = float(best - lev)
                wit_ii = {"tile": list(t.id), "min_m": best}
    if wit_ii:
        witnesses["ii"] = wit_ii

    c_iii = 0.0
    wit_iii = None
    for lev in range(cover.depth + 1):
        fam = cover.levels[lev]
        if len(fam) < 2:
            continue
        sep = ~cover.reach_within(lev, 2 * cover.width + 1)
        if not sep.any():
            continue
        mem = cover.membership(lev)
        for a in range(len(fam)):
            bs = np.flatnonzero(sep[a])
            bs = bs[bs > a]
            if not bs.size:
                continue
            ia = np.flatnonzero(mem[a])
            for b in bs:
                ib = np.flatnonzero(mem[b])
                worst = int(m[np.ix_(ia, ib)].max())
                if worst - lev > c_iii:
                    c_iii = float(worst - lev)
                    wit_iii = {"tiles": [[lev, a], [lev, int(b)]], "max_m": worst}
    if wit_iii:
        witnesses["iii"] = wit_iii

    c_iv = 0.0
    wit_iv = None
    mf = m.astype(float)
    for z in range(table.n):
        need = np.minimum.outer(mf[:, z], mf[z, :]) - mf
        i, j = map(int, np.unravel_index(int(np.argmax(need)), need.shape))
        if need[i, j] > c_iv:
            c_iv = float(need[i, j])
            wit_iv = {"triple": [i, j, z]}
    if wit_iv:
        witnesses["iv"] = wit_iv

    return CombinatorialCheck(
        C_ii=c_ii,
        C_iii=c_iii,
        C_iv=c_iv,
        unresolved_pairs=unresolved_pairs,
        unresolved_tiles=unresolved_tiles,
        table=table,
        witnesses=witnesses,
    )


def quasi_metric_from_m(
    table: ProximityTable, lam: float, check: CombinatorialCheck | None = None,
    cover: CoverSequence | None = None,
) -> QuasiMetric:
    """q(x,y) = lam^-m(x,y) with the sentinel entering as N+1; K = lam^C.

    C is the combinatorial constant when a check (or the cover) is supplied;
    from the table alone only the triple condition is computable, which is
    exactly what the quasi-metric inequality consumes.  The relaxed
    ultratriangle inequality with K is re-verified exhaustively; by
    construction of the triple constant it cannot fail.
    """
    if check is None and cover is not None:
        check = check_combinatorially_visual(cover, table)
    if check is not None:
        C = check.C
    else:
        mf = table.m.astype(float)
        C = 0.0
        for z in range(table.n):
            need = np.minimum.outer(mf[:, z], mf[z, :]) - mf
            C = max(C, float(need.max()))
    K = float(lam) ** C
    if K > 2.0:
        raise LambdaTooLarge(
            f"lam^C = {K!r} exceeds 2; shrink lam below {2 ** (1 / max(C, 1e-9))!r}"
        )
    mf = table.m.astype(float)
    q = float(lam) ** (-mf)
    np.fill_diagonal(q, 0.0)
    qm = QuasiMetric(q=q, K=max(K, 1.0))
    emp = empirical_quasi_constant(qm)
    if emp > qm.K * (1 + 1e-12):
        raise AssertionError(f"triple re-verification found K={emp!r} > {qm.K!r}")
    return qm


def empirical_quasi_constant(qm: QuasiMetric) -> float:
    """Smallest K with q(x,y) <= K max(q(x,z), q(z,y)) over all triples."""
    q = qm.q
    n = qm.n
    worst = 1.0
    for z in range(n):
        denom = np.maximum.outer(q[:, z], q[z, :])
        np.fill_diagonal(denom, 1.0)  # x == y gives q = 0; skip
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(denom > 0, q / denom, np.inf)
        ratio[np.arange(n), np.arange(n)] = 0.0
        ratio[:, z] = 0.0
        ratio[z, :] = 0.0
        worst = max(worst, float(ratio.max()))
    return worst


def chain_metrize(qm: QuasiMetric) -> FiniteMetricSpace:
    """Shortest-path metrization: d = min over chains of the sum of q-steps.

    Requires K <= 2; then the chain metric satisfies q/(2K) <= d <= q
    entrywise (verified exhaustively here).
    """
    if qm.K > 2.0:
        raise KTooLarge(f"quasi-metric constant {qm.K!r} exceeds 2")
    d = floyd_warshall(qm.q, directed=False)
    lower = qm.q / (2.0 * qm.K)
    if not np.all(d <= qm.q * (1 + 1e-12)):
        raise AssertionError("chain metric exceeds q somewhere")
    if not np.all(d >= lower * (1 - 1e-12)):
        raise AssertionError("chain metric dips below q/(2K) somewhere")
    return FiniteMetricSpace(dist=d)


def synthesize_visual_metric(
    cover: CoverSequence, lam: float, thresholds: dict | None = None
) -> tuple[FiniteMetricSpace, VerificationReport]:
    """proximity -> quasi-metric -> chain metric, then verify the cover is a
    visual approximation of the synthesized metric at parameter lam."""
    table = compute_proximity(cover)
    check = check_combinatorially_visual(cover, table)
    qm = quasi_metric_from_m(table, lam, check)
    space = chain_metrize(qm)
    bound = cover.with_space(space)
    bound.visual_parameter = float(lam)
    report = verify_visual(bound, thresholds=thresholds)
    return space, report


def visual_characterization_check(
    cover: CoverSequence,
    space_metric: FiniteMetricSpace,
    lam: float,
    threshold: float = 64.0,
) -> tuple[float, bool]:
    """Best comparability constant between d(x,y) and lam^-m(x,y).

    Pairs unresolved at the truncation are excluded.  Given quasi-visuality,
    a bounded constant here is the criterion for the cover being visual for
    d with parameter lam.
    """
    table = compute_proximity(cover)
    m = table.m
    d = space_metric.dist
    mask = table.certified() & ~np.eye(table.n, dtype=bool)
    if not mask.any():
        return np.inf, False
    scale = float(lam) ** (-m[mask].astype(float))
    vals = d[mask]
    if np.any(vals <= 0):
        return np.inf, False
    ratio = np.maximum(vals / scale, scale / vals)
    best = float(ratio.max())
    return best, best <= threshold


def fit_power_quasisymmetry(
    space_d1: FiniteMetricSpace,
    space_d2: FiniteMetricSpace,
    nu_grid=NU_GRID,
    cap: float = K_CAP,
) -> PowerDistortion | None:
    """Fit eta(t) = K max(t^nu, t^(1/nu)) certifying the identity map as a
    quasisymmetry between the two metrics; None when K exceeds the cap for
    every nu in both directions."""
    best = None
    for forward in (True, False):
        a = space_d1.dist if forward else space_d2.dist
        b = space_d2.dist if forward else space_d1.dist
        k_dir = None
        # descending nu: among equal K the least-distortion certificate wins
        for nu in sorted(nu_grid, reverse=True):
            k = _min_k_for_nu(a, b, nu)
            if k <= cap and (k_dir is None or k < k_dir[0] * (1 - 1e-9)):
                k_dir = (k, nu)
        if k_dir is None:
            return None
        if forward:
            best = k_dir
    return PowerDistortion(K=float(best[0]), nu=float(best[1]))


def _min_k_for_nu(d1: np.ndarray, d2: np.ndarray, nu: float) -> float:
    """Smallest K with d2(x,y) <= eta(d1(x,y)/d1(x,z)) d2(x,z) over all triples."""
    n = d1.shape[0]
    worst = 1.0
    for x in range(n):
        r1 = d1[x]
        r2 = d2[x]
        ok = r1 > 0  # z != x
        t = np.where(ok[None, :], r1[:, None] / np.where(ok, r1, 1.0)[None, :], 0.0)
        eta = np.maximum(t ** nu, t ** (1.0 / nu))
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = eta * r2[None, :]
            ratio = np.where(
                denom > 0,
                r2[:, None] / np.where(denom > 0, denom, 1.0),
                np.where(r2[:, None] > 0, np.inf, 0.0),
            )
        ratio = np.where(ok[None, :], ratio, 0.0)
        ratio = np.where(np.isfinite(ratio), ratio, np.inf)
        worst = max(worst, float(ratio.max()))
        if worst > K_CAP * 1e6:
            break
    return worst


def snowflake_check(
    space_d1: FiniteMetricSpace,
    space_d2: FiniteMetricSpace,
    residual_threshold: float = np.log(8.0),
) -> tuple[float, float] | None:
    """Fit d2 ~ C^{+-1} d1^alpha by Chebyshev regression in log-log space.

    Returns (alpha, C) or None when the best max-residual exceeds the
    threshold.  Pairs with a zero distance in either metric are excluded.
    """
    mask = ~np.eye(space_d1.n, dtype=bool) & (space_d1.dist > 0) & (space_d2.dist > 0)
    if not mask.any():
        return None
    x = np.log(space_d1.dist[mask])
    y = np.log(space_d2.dist[mask])

    def residual(alpha: float) -> float:
        r = y - alpha * x
        return 0.5 * float(r.max() - r.min())

    lo, hi = 1e-3, 1e3
    for _ in range(200):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if residual(m1) <= residual(m2):
            hi = m2
        else:
            lo = m1
    alpha = 0.5 * (lo + hi)
    res = residual(alpha)
    if res > residual_threshold:
        return None
    return float(alpha), float(np.exp(res))


@dataclass
class DynamicalReport:
    """Results of the three dynamical cover checks."""

    shift_ok: bool
    shift_violations: list
    proximity_ok: bool
    proximity_violations: list
    distortion_C: float
    nu: float

    @property
    def passed(self) -> bool:
        return self.shift_ok and self.proximity_ok

    def to_dict(self) -> dict:
        return {
            "shift_ok": self.shift_ok,
            "shift_violations": self.shift_violations[:5],
            "proximity_ok": self.proximity_ok,
            "proximity_violations": self.proximity_violations[:5],
            "distortion_C": self.distortion_C,
            "nu": self.nu,
        }


def dynamical_checks(
    cover: CoverSequence,
    point_map: np.ndarray,
    nu: float | None = None,
    shift_tolerance: float = 0.0,
    exact_image: bool = False,
    ball_factor: float = 2.0,
) -> DynamicalReport:
    """Verify the level-shift property, proximity decay, and distortion bound.

    ``point_map`` is the self-map of the sample as an index array.  The shift
    check asks each (n+1)-tile's image point set to lie in a single n-tile,
    within ``shift_tolerance`` in the space's metric (0 = exact containment);
    ``exact_image`` additionally requires the image set's containing tile to
    be unique per spec of the generating dynamics.  The distortion check fits
    the smallest C with d(g^n x, g^n y) <= C (d(x,y)/diam Z)^nu over pairs in
    balls B(z0, ball_factor * diam Z) around members of (n+1)-tiles Z.
    """
    g = np.asarray(point_map, dtype=np.int64)
    n_pts = cover.n_points
    if g.shape != (n_pts,) or g.min() < 0 or g.max() >= n_pts:
        raise MapNotClosed("point map must be a self-map of the sample index set")
    d = cover.space.dist
    depth = cover.depth

    shift_violations = []
    for lev in range(1, depth):
        mem_up = cover.membership(lev)
        for t in cover.levels[lev + 1]:
            img = np.unique(g[np.fromiter(t.members, dtype=int)])
            contained = mem_up[:, img].all(axis=1)
            if contained.any():
                if exact_image and not any(
                    frozenset(int(i) for i in img) == cover.levels[lev][a].members
                    for a in np.flatnonzero(contained)
                ):
                    shift_violations.append({"tile": list(t.id), "reason": "not exact image"})
                continue
            # nearest-tile slack: how far the image set sticks out of its best host
            best = np.inf
            for a in range(mem_up.shape[0]):
                ia = np.flatnonzero(mem_up[a])
                gap = float(d[np.ix_(img, ia)].min(axis=1).max())
                best = min(best, gap)
            if best > shift_tolerance:
                shift_violations.append({"tile": list(t.id), "excess": best})

    table = compute_proximity(cover)
    m = table.m
    # sentinel pairs certify proximity only up to the truncation depth
    rhs = np.minimum(m, depth)
    prox_violations = []
    gn = np.arange(n_pts)
    for k in range(1, depth + 1):
        gn = g[gn]
        lhs = m[np.ix_(gn, gn)]
        bad = lhs < rhs - k
        if bad.any():
            i, j = map(int, np.unravel_index(int(np.argmax(bad)), bad.shape))
            prox_violations.append(
                {"n": k, "pair": [i, j], "m": int(m[i, j]), "m_image": int(lhs[i, j])}
            )

    if nu is None:
        nu = 1.0
    dist_C = 0.0
    gn = np.arange(n_pts)
    for k in range(1, depth):
        gn = g[gn]
        diams = cover.diams(k + 1)
        for t in cover.levels[k + 1]:
            dm = diams[t.index]
            if dm == 0:
                continue
            z0 = min(t.members)
            ball = np.flatnonzero(d[z0] < ball_factor * dm)
            if ball.size < 2:
                continue
            sub = d[np.ix_(ball, ball)]
            img = d[np.ix_(gn[ball], gn[ball])]
            with np.errstate(divide="ignore", invalid="ignore"):
                bound = (sub / dm) ** nu
                ratio = np.where(bound > 0, img / bound, 0.0)
            dist_C = max(dist_C, float(ratio.max()))

    return DynamicalReport(
        shift_ok=not shift_violations,
        shift_violations=shift_violations,
        proximity_ok=not prox_violations,
        proximity_violations=prox_violations,
        distortion_C=dist_C,
        nu=float(nu),
    )
