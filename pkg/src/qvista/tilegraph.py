"""The tile graph of a cover sequence and its Gromov-product geometry.

Vertices are all tiles across all levels (as a formal disjoint union); two
distinct tiles are adjacent when they intersect and their levels differ by at
most one.  Gromov products are taken with respect to the unique level-0 tile
and stored as doubled integers to keep half-integers exact.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass, field
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .covers import CoverSequence
from .errors import TripleBudgetExceeded, UnknownVertex
from .proximity import ProximityTable

EXACT_TRIPLE_VERTEX_CAP = 400


@dataclass
class TileGraph:
    """Leveled intersection graph over all tiles with cached BFS distances."""

    cover: CoverSequence
    vertex_ids: list[tuple[int, int]] = field(init=False)
    levels: np.ndarray = field(init=False)
    dist: np.ndarray = field(init=False)

    def __post_init__(self):
        cover = self.cover
        self.vertex_ids = [
            (lev, t.index) for lev, fam in enumerate(cover.levels) for t in fam
        ]
        self._vindex = {vid: i for i, vid in enumerate(self.vertex_ids)}
        self.levels = np.array([lev for lev, _ in self.vertex_ids], dtype=np.int64)
        n = len(self.vertex_ids)
        rows, cols = [], []
        for lev in range(cover.depth + 1):
            base = self._vindex[(lev, 0)]
            adj = cover.adjacency(lev)
            np.fill_diagonal(adj, False)
            r, c = np.nonzero(adj)
            rows.extend(base + r)
            cols.extend(base + c)
            if lev < cover.depth:
                base2 = self._vindex[(lev + 1, 0)]
                up = cover.membership(lev).astype(np.int32)
                dn = cover.membership(lev + 1).astype(np.int32)
                inter = (up @ dn.T) > 0
                r, c = np.nonzero(inter)
                rows.extend(base + r)
                cols.extend(base2 + c)
                rows.extend(base2 + c)
                cols.extend(base + r)
        graph = csr_matrix(
            (np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n)
        )
        d = shortest_path(graph, method="D", unweighted=True, directed=False)
        if np.isinf(d).any():
            raise ValueError("tile graph is disconnected; some level misses the root chain")
        self.dist = d.astype(np.int64)

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_ids)

    def vertex(self, vid: tuple[int, int]) -> int:
        try:
            return self._vindex[tuple(vid)]
        except KeyError:
            raise UnknownVertex(f"no vertex {vid!r}") from None

    def members_of(self, i: int) -> frozenset[int]:
        lev, idx = self.vertex_ids[i]
        return self.cover.levels[lev][idx].members

    def gromov2(self) -> np.ndarray:
        """Doubled Gromov products 2 (X . Y) = |X| + |Y| - |X - Y|, base = root."""
        return self.levels[:, None] + self.levels[None, :] - self.dist

    def to_dict(self) -> dict:
        rows, cols = np.nonzero(self.dist == 1)
        edges = sorted((int(a), int(b)) for a, b in zip(rows, cols) if a < b)
        return {
            "vertices": [{"level": int(l), "tile": int(t)} for l, t in self.vertex_ids],
            "edges": [list(e) for e in edges],
        }


def build_tile_graph(cover: CoverSequence) -> TileGraph:
    return TileGraph(cover)


def gromov_product(graph: TileGraph, x: tuple[int, int], y: tuple[int, int]) -> float:
    """Gromov product of two tiles with respect to the root tile."""
    i, j = graph.vertex(x), graph.vertex(y)
    return 0.5 * float(graph.levels[i] + graph.levels[j] - graph.dist[i, j])


def hyperbolicity_constant(
    graph: TileGraph,
    mode: str = "exact",
    sample_triples: int = 200_000,
    seed: int = 0,
) -> float:
    """Smallest C with (X.Y) >= min((X.Z), (Z.Y)) - C over vertex triples.

    Exact mode scans all triples and is capped at 400 vertices; sampled mode
    scans a seeded uniform subset and returns a lower bound on the constant.
    """
    n = graph.n_vertices
    g2 = graph.gromov2()
    if mode == "exact":
        if n > EXACT_TRIPLE_VERTEX_CAP:
            raise TripleBudgetExceeded(
                f"{n} vertices exceed the exact-mode cap {EXACT_TRIPLE_VERTEX_CAP}"
            )
        worst = 0
        for z in range(n):
            need = np.minimum.outer(g2[:, z], g2[z, :]) - g2
            worst = max(worst, int(need.max()))
        return worst / 2.0
    if mode == "sampled":
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, n, size=(sample_triples, 3))
        x, y, z = idx[:, 0], idx[:, 1], idx[:, 2]
        need = np.minimum(g2[x, z], g2[z, y]) - g2[x, y]
        return float(need.max()) / 2.0
    raise ValueError("mode must be 'exact' or 'sampled'")


def extended_proximity(
    graph: TileGraph, table: ProximityTable, x: tuple[int, int], y: tuple[int, int]
) -> int:
    """m(X, Y) = min over member pairs of the point proximity (sentinel-capped)."""
    i, j = graph.vertex(x), graph.vertex(y)
    ia = np.fromiter(graph.members_of(i), dtype=int)
    ib = np.fromiter(graph.members_of(j), dtype=int)
    return int(table.m[np.ix_(ia, ib)].min())


def extended_proximity_matrix(graph: TileGraph, table: ProximityTable) -> np.ndarray:
    """All-pairs extended proximity over graph vertices."""
    n = graph.n_vertices
    members = [np.fromiter(graph.members_of(i), dtype=int) for i in range(n)]
    t2v = np.empty((n, table.n), dtype=np.int64)
    for i, idx in enumerate(members):
        t2v[i] = table.m[idx].min(axis=0)
    out = np.empty((n, n), dtype=np.int64)
    for j, idx in enumerate(members):
        out[:, j] = t2v[:, idx].min(axis=1)
    return out


@dataclass
class GromovComparison:
    """Additive comparison of Gromov products with extended proximity."""

    C_product: float  # max |(X.Y) - m(X,Y)| over resolved pairs
    C_levgr: float  # max | |X-Y| - (|X|+|Y|-2m) |, the distance form
    excluded_pairs: int
    witness: dict | None = None

    def to_dict(self) -> dict:
        return {
            "C_product": self.C_product,
            "C_levgr": self.C_levgr,
            "excluded_pairs": self.excluded_pairs,
            "witness": self.witness,
        }


def compare_m_gromov(graph: TileGraph, table: ProximityTable) -> GromovComparison:
    """Max additive gap between the Gromov product and extended proximity.

    Pairs whose extended proximity is unresolved at the truncation (all member
    pairs sentinel) are excluded.
    """
    g2 = graph.gromov2()
    m = extended_proximity_matrix(graph, table)
    mask = m <= table.truncation
    excluded = int(np.count_nonzero(~mask))
    if not mask.any():
        return GromovComparison(C_product=0.0, C_levgr=0.0, excluded_pairs=excluded)
    diff2 = np.abs(g2 - 2 * m)
    diff2 = np.where(mask, diff2, -1)
    i, j = map(int, np.unravel_index(int(np.argmax(diff2)), diff2.shape))
    c2 = int(diff2[i, j])
    witness = {
        "vertices": [list(graph.vertex_ids[i]), list(graph.vertex_ids[j])],
        "gromov2": int(g2[i, j]),
        "m": int(m[i, j]),
    }
    levgr = np.abs(graph.dist - (graph.levels[:, None] + graph.levels[None, :] - 2 * m))
    c_lev = int(np.where(mask, levgr, 0).max())
    return GromovComparison(
        C_product=c2 / 2.0, C_levgr=float(c_lev), excluded_pairs=excluded, witness=witness
    )


def cluster(graph: TileGraph, x: tuple[int, int], r: int) -> frozenset[int]:
    """Neighborhood cluster V_r(X): union of members of tiles within distance r."""
    i = graph.vertex(x)
    near = np.flatnonzero(graph.dist[i] <= r)
    out: set[int] = set()
    for j in near:
        out |= graph.members_of(int(j))
    return frozenset(out)


def cluster_cover_sequence(graph: TileGraph, r: int, width: int = 1) -> CoverSequence:
    """Per-level families of clusters V^n = {V_r(X) : X in X^n}.

    The family is formal: one cluster per source tile, kept in source order,
    even when two sources produce the same point set (collapsing duplicates
    would break the rough-similarity bounds of the cluster map).  Width
    defaults to 1, matching the verification the clusters are meant for.
    """
    cover = graph.cover
    levels: list[list[tuple[int, ...]]] = []
    for lev, fam in enumerate(cover.levels):
        levels.append(
            [tuple(sorted(cluster(graph, (lev, t.index), r))) for t in fam]
        )
    return CoverSequence(
        cover.space, levels, width=width, visual_parameter=cover.visual_parameter
    )


@dataclass
class ClusterGraph:
    """The graph of radius-r neighborhood clusters, one vertex per source tile.

    Two clusters are joined when their source tiles lie within 2r+1 of each
    other in the source graph: a cluster spans 2r+1 levels worth of tiles, so
    this is the incidence at the cluster scale.  For r = 0 it coincides with
    the source tile graph.  (Joining clusters by bare point-set intersection
    instead would over-connect through the low-level clusters that already
    swallow the whole space, and under-connect across levels; neither variant
    satisfies the rough-similarity bounds this graph is built to realize.)
    """

    source: TileGraph
    r: int
    dist: np.ndarray = field(init=False)

    def __post_init__(self):
        adj = (self.source.dist <= 2 * self.r + 1).astype(np.int8)
        np.fill_diagonal(adj, 0)
        d = shortest_path(csr_matrix(adj), method="D", unweighted=True, directed=False)
        self.dist = d.astype(np.int64)

    @property
    def vertex_ids(self):
        return self.source.vertex_ids


def cluster_tile_graph(graph: TileGraph, r: int) -> ClusterGraph:
    return ClusterGraph(source=graph, r=r)


def graph_map_check(
    graph_x: TileGraph, graph_v: ClusterGraph, r: int
) -> tuple[bool, list]:
    """Exact integer check of the rough-similarity bounds for X -> V_r(X):

        |X - Y| <= (2r+1) |V(X) - V(Y)|  and  (2r+1) |V(X) - V(Y)| <= |X - Y| + (2r+1).
    """
    if graph_v.r != r or graph_v.source is not graph_x:
        raise ValueError("cluster graph does not belong to the source graph at this radius")
    dx = graph_x.dist
    dv = graph_v.dist
    q = 2 * r + 1
    bad_lower = dx > q * dv
    bad_upper = q * dv > dx + q
    violations = []
    for name, bad in (("lower", bad_lower), ("upper", bad_upper)):
        if bad.any():
            i, j = map(int, np.unravel_index(int(np.argmax(bad)), bad.shape))
            violations.append(
                {
                    "bound": name,
                    "vertices": [list(graph_x.vertex_ids[i]), list(graph_x.vertex_ids[j])],
                    "dist_x": int(dx[i, j]),
                    "dist_v": int(dv[i, j]),
                }
            )
    return not violations, violations
