"""Julia sets of rational maps: sampling, dynamical pull-back covers, probes.

The sample is produced by inverse iteration from a repelling fixed point, so
it is a subset of the Julia set that is exactly forward invariant.  Ambient
covers live on the two-chart sphere raster: a level-1 family of spherical
balls around a net of the sample is pulled back one step at a time by marking
cells whose image lands in the parent region and splitting into connected
components.  Preimage components are never computed by factoring iterates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy

from .covers import CoverSequence
from .errors import (
    EmptyLevel,
    ResolutionInsufficient,
    RootFindFailure,
    SeedNotRepelling,
)
from .metricspace import FiniteMetricSpace
from .sphere import sphere_from_complex_array, spherical_dist_matrix
from .spheregrid import SphereGrid

MAX_PREIMAGE_COUNT = 4096
ROOT_CLUSTER_TOL = 1e-7


def _strip_leading(c: np.ndarray, tol: float = 0.0) -> np.ndarray:
    scale = np.abs(c).max()
    if scale == 0:
        return c[-1:]
    keep = np.flatnonzero(np.abs(c) > tol * scale)
    return c[keep[0]:] if keep.size else c[-1:]


@dataclass
class RationalMap:
    """A rational map p/q on the sphere, coefficients highest power first."""

    p: np.ndarray
    q: np.ndarray
    text: str = ""
    _img_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.p = _strip_leading(np.asarray(self.p, dtype=complex))
        self.q = _strip_leading(np.asarray(self.q, dtype=complex))
        if self.degree < 2:
            raise ValueError("rational map must have degree >= 2")

    @property
    def degree(self) -> int:
        return max(self.p.size, self.q.size) - 1

    @classmethod
    def parse(cls, text: str) -> "RationalMap":
        """Parse e.g. "z^2 - 2", "(z^2+1)/(z^2-1)", complex coeffs "(1+2i)*z^3"."""
        z = sympy.Symbol("z")
        normalized = re.sub(r"(\d(?:\.\d*)?)\s*i\b", r"\1*I", text.replace("^", "**"))
        expr = sympy.sympify(
            normalized, locals={"z": z, "i": sympy.I, "I": sympy.I}
        )
        num, den = sympy.fraction(sympy.cancel(sympy.together(expr)))
        p = [complex(c) for c in sympy.Poly(num, z).all_coeffs()]
        qq = sympy.Poly(den, z).all_coeffs() if den.has(z) else [den]
        q = [complex(c) for c in qq]
        return cls(p=np.array(p), q=np.array(q), text=text)

    def _padded(self) -> tuple[np.ndarray, np.ndarray]:
        d = self.degree + 1
        p = np.concatenate([np.zeros(d - self.p.size, dtype=complex), self.p])
        q = np.concatenate([np.zeros(d - self.q.size, dtype=complex), self.q])
        return p, q

    def eval(self, z: np.ndarray) -> np.ndarray:
        """Evaluate on sphere points in the z-chart; inf in, inf out supported."""
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape, dtype=complex)
        az = np.abs(z)
        near = np.isfinite(z) & (az <= 1.0)
        far = ~near
        if near.any():
            zn = z[near]
            num = np.polyval(self.p, zn)
            den = np.polyval(self.q, zn)
            out[near] = _safe_div(num, den)
        if far.any():
            p, q = self._padded()
            with np.errstate(divide="ignore", invalid="ignore"):
                u = np.where(np.isfinite(z[far]), 1.0 / z[far], 0.0)
            num = np.polyval(p[::-1], u)
            den = np.polyval(q[::-1], u)
            out[far] = _safe_div(num, den)
        return out

    def derivative(self, z: complex) -> complex:
        dp = np.polyder(self.p) if self.p.size > 1 else np.zeros(1, dtype=complex)
        dq = np.polyder(self.q) if self.q.size > 1 else np.zeros(1, dtype=complex)
        num = np.polyval(dp, z) * np.polyval(self.q, z) - np.polyval(self.p, z) * np.polyval(dq, z)
        den = np.polyval(self.q, z) ** 2
        return complex(num / den) if den != 0 else complex(np.inf)

    def preimages(self, w: complex) -> tuple[np.ndarray, np.ndarray]:
        """Solutions of g(z) = w with multiplicities (clustered); finite w.

        Missing degree (leading-coefficient cancellation) is attributed to a
        preimage at infinity when g(inf) matches w; otherwise it is an error.
        """
        if not np.isfinite(complex(w)):
            raise RootFindFailure("preimages of infinity not supported here")
        p, q = self._padded()
        c = p - complex(w) * q
        c = _strip_leading(c, tol=1e-13)
        roots = np.roots(c) if c.size > 1 else np.empty(0, dtype=complex)
        pts, mult = _cluster_roots(roots, ROOT_CLUSTER_TOL)
        missing = self.degree - int(mult.sum())
        if missing > 0:
            g_inf = self.eval(np.array([np.inf + 0j]))[0]
            if np.isfinite(g_inf) and abs(g_inf - complex(w)) > 1e-6:
                raise RootFindFailure(
                    f"lost {missing} roots solving g(z)={w!r} and g(inf) does not match"
                )
            pts = np.append(pts, np.inf + 0j)
            mult = np.append(mult, missing)
        return pts, mult

    def image_cells(self, grid: SphereGrid) -> np.ndarray:
        """Per grid cell, the canonical cell of the image of its center (cached)."""
        key = (grid.K, grid.H)
        if key not in self._img_cache:
            flat = np.arange(grid.n_cells, dtype=np.int64)
            z = grid.cell_centers_z(flat)
            self._img_cache[key] = grid.canonical_flat(self.eval(z)).astype(np.int64)
        return self._img_cache[key]

    def fixed_points(self) -> list[tuple[complex, complex]]:
        """Finite fixed points with their multipliers."""
        p, q = self._padded()
        c = np.polysub(p, np.polymul(q, np.array([1.0, 0.0], dtype=complex)))
        c = _strip_leading(np.asarray(c, dtype=complex), tol=1e-13)
        if c.size <= 1:
            return []
        roots, _ = _cluster_roots(np.roots(c), 1e-9)
        return [(complex(r), self.derivative(complex(r))) for r in roots]

    def repelling_fixed_point(self) -> complex:
        best = None
        for z0, mult in self.fixed_points():
            if abs(mult) > 1.0 + 1e-9 and (best is None or abs(mult) > best[1]):
                best = (z0, abs(mult))
        if best is None:
            raise SeedNotRepelling("no finite repelling fixed point found")
        return best[0]


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.empty(num.shape, dtype=complex)
    zero = den == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~zero] = num[~zero] / den[~zero]
    out[zero] = np.inf
    return out


def _cluster_roots(roots: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    pts: list[complex] = []
    mult: list[int] = []
    for r in roots:
        for i, p in enumerate(pts):
            if abs(r - p) <= tol * max(1.0, abs(p)):
                mult[i] += 1
                break
        else:
            pts.append(complex(r))
            mult.append(1)
    return np.array(pts, dtype=complex), np.array(mult, dtype=np.int64)


@dataclass
class JuliaSample:
    """Inverse-iteration sample of a Julia set, stored on the sphere."""

    map: RationalMap
    z: np.ndarray  # complex chart values (inf allowed)
    vecs: np.ndarray  # unit 3-vectors
    depth: int
    seed: int
    mesh: float  # max nearest-neighbor spherical distance

    @property
    def n(self) -> int:
        return self.z.shape[0]

    def space(self) -> FiniteMetricSpace:
        return FiniteMetricSpace(dist=spherical_dist_matrix(self.vecs), coords=self.vecs)

    def self_map_indices(self) -> np.ndarray:
        """Nearest-sample projection of g, as an index self-map."""
        img = self.map.eval(self.z)
        iv = _vecs_of(img)
        return np.argmax(iv @ self.vecs.T, axis=1)

    def projection_error(self) -> float:
        img = self.map.eval(self.z)
        iv = _vecs_of(img)
        dots = np.clip((iv * self.vecs[self.self_map_indices()]).sum(axis=1), -1, 1)
        return float(np.arccos(dots).max())


def _vecs_of(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    finite = np.isfinite(z)
    out = np.empty(z.shape + (3,))
    out[finite] = sphere_from_complex_array(z[finite])
    out[~finite] = np.array([0.0, 0.0, 1.0])
    return out


def julia_sample(
    map_: RationalMap, depth: int, seed: int = 0, target_count: int = MAX_PREIMAGE_COUNT
) -> JuliaSample:
    """Inverse iteration from a repelling fixed point, pruned to a target count.

    The seed is a fixed point, so preimage generations are nested and the
    final set is forward invariant up to root-finding error.
    """
    z0 = map_.repelling_fixed_point()
    pts = np.array([z0], dtype=complex)
    rng = np.random.default_rng(seed)
    for _ in range(depth):
        collected = [
            map_.preimages(w)[0] for w in pts if np.isfinite(w)
        ]
        pts = _dedupe_sphere(np.concatenate(collected)) if collected else pts
        if pts.size > 4 * target_count:
            pts = _farthest_point_prune(pts, 2 * target_count)
    if pts.size > target_count:
        pts = _farthest_point_prune(pts, target_count)
    vecs = _vecs_of(pts)
    d = spherical_dist_matrix(vecs)
    mesh = float((d + np.diag(np.full(pts.size, np.inf))).min(axis=1).max()) if pts.size > 1 else 0.0
    sample = JuliaSample(map=map_, z=pts, vecs=vecs, depth=depth, seed=seed, mesh=mesh)
    img = map_.eval(pts)
    iv = _vecs_of(img)
    gaps = np.arccos(np.clip(iv @ vecs.T, -1, 1)).min(axis=1)
    if pts.size > 1 and float(gaps.max()) > 2.0 * max(mesh, 1e-9):
        raise RootFindFailure(
            f"forward invariance violated: image strays {gaps.max()!r} from the sample"
        )
    return sample


def _dedupe_sphere(pts: np.ndarray) -> np.ndarray:
    vecs = _vecs_of(pts)
    keys = np.round(vecs / 1e-9).astype(np.int64)
    _uniq, idx = np.unique(keys, axis=0, return_index=True)
    return pts[np.sort(idx)]


def _farthest_point_prune(pts: np.ndarray, target: int) -> np.ndarray:
    vecs = _vecs_of(pts)
    n = pts.shape[0]
    chosen = [0]
    mind = np.arccos(np.clip(vecs @ vecs[0], -1, 1))
    for _ in range(1, target):
        nxt = int(np.argmax(mind))
        chosen.append(nxt)
        mind = np.minimum(mind, np.arccos(np.clip(vecs @ vecs[nxt], -1, 1)))
    chosen_arr = np.sort(np.array(chosen))
    return pts[chosen_arr]


# -- ambient regions and pull-backs -----------------------------------------


@dataclass
class AmbientRegion:
    """A connected raster region on the sphere at one pull-back level."""

    level: int
    rid: int
    cells: np.ndarray  # sorted flat cell ids
    parent: int  # rid in the previous level, -1 at level 1
    v1_index: int  # root ancestor in the level-1 family
    sample_points: tuple[int, ...] = ()
    degree_estimate: int | None = None

    def diam(self, grid: SphereGrid, cap: int = 256) -> float:
        cells = self.cells
        if cells.size > cap:
            cells = cells[np.linspace(0, cells.size - 1, cap).astype(int)]
        v = grid.cell_unit_vectors(cells)
        dots = np.clip(v @ v.T, -1, 1)
        return float(np.arccos(dots).max())


@dataclass
class PullbackCover:
    """Per-level families of ambient regions V^1..V^N plus the raster context."""

    map: RationalMap
    grid: SphereGrid
    sample: JuliaSample
    families: list[list[AmbientRegion]]  # families[0] = V^1

    @property
    def n_levels(self) -> int:
        return len(self.families)


def admissible_cover(
    map_: RationalMap, sample: JuliaSample, radius: float, grid: SphereGrid | None = None
) -> PullbackCover:
    """Level-1 family: spherical balls of the given radius around a maximal
    radius-net of the sample, rasterized to grid regions."""
    grid = grid or SphereGrid()
    d = spherical_dist_matrix(sample.vecs)
    centers: list[int] = []
    for i in range(sample.n):
        if all(d[i, c] >= radius for c in centers):
            centers.append(i)
    regions = []
    for k, c in enumerate(centers):
        cells = grid.raster_spherical_ball(sample.vecs[c], radius)
        inside = np.flatnonzero(d[c] < radius)
        regions.append(
            AmbientRegion(
                level=1,
                rid=k,
                cells=np.unique(cells),
                parent=-1,
                v1_index=k,
                sample_points=tuple(int(i) for i in inside),
            )
        )
    return PullbackCover(map=map_, grid=grid, sample=sample, families=[regions])


def _sample_cells(grid: SphereGrid, sample: JuliaSample) -> tuple[np.ndarray, np.ndarray]:
    primary = grid.canonical_flat(sample.z)
    twin = grid.twin_flat()[primary]
    return primary, twin


def pullback_cover(
    pull: PullbackCover,
    n_levels: int,
    min_cells: int = 1,
    keep_all: bool = False,
) -> PullbackCover:
    """Extend the family chain to ``n_levels`` by one-step pull-backs.

    Cells whose g-image lands in a parent region are marked, split into
    sphere components, and kept when they meet the sample (always kept with
    ``keep_all``).  With ``min_cells`` above 1, a sample-meeting component
    thinner than that raises ResolutionInsufficient (caller should double the
    grid); by default thin components are kept, since tile membership is
    decided by the dynamics and the raster only locates siblings.
    """
    grid, map_, sample = pull.grid, pull.map, pull.sample
    img = map_.image_cells(grid)
    prim, twin = _sample_cells(grid, sample)
    while pull.n_levels < n_levels:
        parents = pull.families[-1]
        level = pull.n_levels + 1
        pc = np.concatenate([r.cells for r in parents])
        pr = np.concatenate([np.full(r.cells.size, r.rid, dtype=np.int64) for r in parents])
        order = np.argsort(pc, kind="stable")
        pc, pr = pc[order], pr[order]
        lo = np.searchsorted(pc, img, side="left")
        hi = np.searchsorted(pc, img, side="right")
        counts = hi - lo
        hits = np.flatnonzero(counts > 0)
        reps = counts[hits]
        cells_rep = np.repeat(hits, reps)
        offs = np.repeat(lo[hits], reps) + _ranges(reps)
        parent_of = pr[offs]
        by_parent = np.argsort(parent_of, kind="stable")
        cells_rep, parent_of = cells_rep[by_parent], parent_of[by_parent]
        bounds = np.searchsorted(parent_of, np.arange(len(parents) + 1))
        regions: list[AmbientRegion] = []
        for pid in range(len(parents)):
            chunk = cells_rep[bounds[pid]:bounds[pid + 1]]
            if not chunk.size:
                continue
            for comp in grid.components(chunk):
                pts = _points_in_cells(prim, twin, comp)
                if not keep_all and not pts.size:
                    continue
                if pts.size and comp.size < min_cells:
                    raise ResolutionInsufficient(
                        f"component of {comp.size} cells at level {level}; double the grid"
                    )
                regions.append(
                    AmbientRegion(
                        level=level,
                        rid=len(regions),
                        cells=comp,
                        parent=pid,
                        v1_index=parents[pid].v1_index,
                        sample_points=tuple(int(i) for i in pts),
                    )
                )
        if not regions:
            raise EmptyLevel(f"no admissible regions at level {level}")
        pull.families.append(regions)
    return pull


def _ranges(reps: np.ndarray) -> np.ndarray:
    if not reps.size:
        return np.empty(0, dtype=np.int64)
    total = int(reps.sum())
    starts = np.repeat(np.cumsum(reps) - reps, reps)
    return np.arange(total, dtype=np.int64) - starts


def _points_in_cells(prim: np.ndarray, twin: np.ndarray, cells: np.ndarray) -> np.ndarray:
    inside = np.isin(prim, cells) | ((twin >= 0) & np.isin(twin, cells))
    return np.flatnonzero(inside)


def induce_tiles(pull: PullbackCover) -> CoverSequence:
    """Tiles X^n = region-and-sample intersections, X^0 = the whole sample.

    Membership below level 1 is dynamics-exact: a point joins a region's tile
    only when its projected image lies in the parent region's tile, and every
    such candidate is attached to the geometrically nearest child region when
    raster jitter leaves it outside all of them.  This makes the level shift
    g(X^{n+1}) <= X^n exact at the index level, which the proximity-decay law
    needs; the raster only decides which sibling a point belongs to.
    """
    sample = pull.sample
    grid = pull.grid
    space = sample.space()
    g_idx = sample.self_map_indices()
    levels: list[list[tuple[int, ...]]] = [[tuple(range(sample.n))]]
    d_all = space.dist
    local_nn = (d_all + np.diag(np.full(sample.n, np.inf))).min(axis=1)
    prev_tiles: list[set[int]] = []
    for fam in pull.families:
        tiles: list[set[int]] = []
        if fam[0].level == 1:
            tiles = [set(r.sample_points) for r in fam]
            uncovered = set(range(sample.n)) - set().union(*tiles)
            for p in uncovered:
                rid = _nearest_region(grid, sample.vecs[p], fam)
                if rid is None:
                    raise ResolutionInsufficient(
                        f"sample point {p} lies in no level-1 region"
                    )
                tiles[rid].add(p)
        else:
            for parent_members in prev_tiles:
                if not parent_members:
                    continue
                in_parent = np.zeros(sample.n, dtype=bool)
                in_parent[list(parent_members)] = True
                candidates = np.flatnonzero(in_parent[g_idx])
                # sample traces of the components of the parent's preimage:
                # within one parent, branches are far apart while the sample
                # is locally dense, so local-scale clustering separates them
                for group in _cluster_points_local(d_all, local_nn, candidates):
                    tiles.append(set(int(p) for p in group))
            # one-point traces at component edges are raster- and
            # candidate-boundary artifacts; drop them when covered elsewhere
            count = np.zeros(sample.n, dtype=np.int64)
            for v in tiles:
                count[list(v)] += 1
            tiles = [
                v
                for v in tiles
                if not (len(v) == 1 and count[next(iter(v))] > 1)
            ]
        covered = set().union(*tiles) if tiles else set()
        if len(covered) < sample.n:
            missing = sorted(set(range(sample.n)) - covered)
            raise ResolutionInsufficient(
                f"{len(missing)} sample points uncovered at level {fam[0].level}"
            )
        prev_tiles = tiles
        fam_tiles = [tuple(sorted(v)) for v in tiles if v]
        if not fam_tiles:
            raise EmptyLevel(f"level {fam[0].level} induced no tiles")
        levels.append(fam_tiles)
    return CoverSequence(space, levels, width=1, visual_parameter=None)


def _cluster_points_local(
    dist: np.ndarray, local_nn: np.ndarray, idx: np.ndarray, factor: float = 3.0
) -> list[np.ndarray]:
    """Single-linkage clusters linking points within ``factor`` local
    nearest-neighbor distances of each other."""
    if idx.size == 0:
        return []
    d = dist[np.ix_(idx, idx)]
    gap = factor * np.maximum.outer(local_nn[idx], local_nn[idx])
    parent = np.arange(idx.size)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    rows, cols = np.nonzero(d <= gap)
    for a, b in zip(rows, cols):
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[rb] = ra
    groups: dict[int, list[int]] = {}
    for k in range(idx.size):
        groups.setdefault(find(k), []).append(int(idx[k]))
    return [np.array(g, dtype=np.int64) for g in groups.values()]


def _nearest_region(grid: SphereGrid, vec: np.ndarray, fam: list[AmbientRegion]):
    best, best_d = None, np.inf
    for r in fam:
        cells = r.cells
        if cells.size > 128:
            cells = cells[np.linspace(0, cells.size - 1, 128).astype(int)]
        v = grid.cell_unit_vectors(cells)
        dd = float(np.arccos(np.clip(v @ vec, -1, 1)).min())
        if dd < best_d:
            best, best_d = r.rid, dd
    # a region counts as "near" within a few cells of raster jitter
    if best_d <= 8.0 * grid.step:
        return best
    return None


def verify_dynamical_qv(
    pull: PullbackCover,
    cover: CoverSequence | None = None,
    thresholds: dict | None = None,
) -> dict:
    """Quasi-visual verification at width 1 plus the dynamical checks.

    The sample self-map is the nearest-sample projection of g; the tile shift
    is allowed raster slack of a few grid cells plus the projection error.
    """
    from .covers import derive_rho_tau_nu, verify_quasi_visual
    from .proximity import dynamical_checks

    if cover is None:
        cover = induce_tiles(pull)
    qv = verify_quasi_visual(cover, thresholds=thresholds)
    rates = derive_rho_tau_nu(cover)
    g_idx = pull.sample.self_map_indices()
    slack = 4.0 * pull.grid.step + 2.0 * pull.sample.mesh + pull.sample.projection_error()
    dyn = dynamical_checks(cover, g_idx, nu=rates.nu, shift_tolerance=slack)
    return {
        "qv": qv,
        "dynamical": dyn,
        "rates": rates,
        "projection_error": pull.sample.projection_error(),
        "passed": qv.passed and dyn.passed,
    }


# -- probes ------------------------------------------------------------------


def degree_probe(
    map_: RationalMap,
    w0: complex,
    r0: float,
    n_max: int,
    cluster_tol: float = 1e-6,
) -> list[int]:
    """Max degree of g^n on components of g^-n(B(w0, r0)) for n = 1..n_max.

    A generic test value w* inside the ball is pulled back one root-solving
    step at a time alongside the anchor w0, each test preimage matched to the
    nearest anchor preimage of its own parent.  Test preimages whose anchors
    coincide lie in one component (branches of g^n merge exactly at critical
    preimages of the anchor), so the degree of a component is the number of
    matched test preimages per anchor cluster, counted with multiplicity.
    """
    if map_.degree ** n_max > MAX_PREIMAGE_COUNT:
        raise ValueError("preimage count would exceed the enumerable cap")
    if not isinstance(w0, complex):
        w0 = complex(w0)
    if r0 >= np.pi:
        # the ball is the whole sphere: a single component of full degree
        return [map_.degree ** n for n in range(1, n_max + 1)]
    w_star = _offset_on_chart(w0, 0.3 * r0)
    # pairs (anchor point, test point, multiplicity of the test branch)
    pairs: list[tuple[complex, complex, int]] = [(w0, w_star, 1)]
    maxima: list[int] = []
    for _n in range(1, n_max + 1):
        nxt: list[tuple[complex, complex, int]] = []
        for anchor, probe, m in pairs:
            if not (np.isfinite(anchor) and np.isfinite(probe)):
                raise RootFindFailure("probe branch escaped to infinity")
            a_roots, _a_mult = map_.preimages(anchor)
            p_roots, p_mult = map_.preimages(probe)
            a_fin = a_roots[np.isfinite(a_roots)]
            if not a_fin.size:
                raise RootFindFailure("anchor preimages all at infinity")
            for w, mu in zip(p_roots, p_mult):
                if not np.isfinite(w):
                    continue
                a = a_fin[np.argmin(np.abs(a_fin - w))]
                nxt.append((complex(a), complex(w), int(m * mu)))
        pairs = nxt
        anchors = np.array([a for a, _w, _m in pairs])
        mults = np.array([m for _a, _w, m in pairs], dtype=np.int64)
        groups = _cluster_complex(anchors, cluster_tol)
        maxima.append(int(max(mults[g].sum() for g in groups)))
    return maxima


def _cluster_complex(pts: np.ndarray, tol: float) -> list[np.ndarray]:
    """Greedy clusters of complex points at relative tolerance ``tol``."""
    reps: list[complex] = []
    groups: list[list[int]] = []
    for i, z in enumerate(pts):
        for k, r in enumerate(reps):
            if abs(z - r) <= tol * max(1.0, abs(r)):
                groups[k].append(i)
                break
        else:
            reps.append(complex(z))
            groups.append([i])
    return [np.array(g, dtype=np.int64) for g in groups]


def _cells_mapping_into(img: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Grid cells whose image cell belongs to the sorted unique ``cells``."""
    lo = np.searchsorted(cells, img)
    inside = (lo < cells.size) & (cells[np.minimum(lo, cells.size - 1)] == img)
    return np.flatnonzero(inside)


def _offset_on_chart(w0: complex, ds: float) -> complex:
    # move ds along the sphere in a fixed direction, via the chart factor
    factor = (1.0 + abs(w0) ** 2) / 2.0
    return w0 + ds * factor * np.exp(0.7j)


def _locate_in_regions(grid: SphereGrid, w: complex, fam: list[AmbientRegion]):
    if not np.isfinite(w):
        w = np.inf + 0j
    cell = int(grid.canonical_flat(np.array([w]))[0])
    twin = int(grid.twin_flat()[cell])
    for r in fam:
        if np.searchsorted(r.cells, cell) < r.cells.size and r.cells[
            np.searchsorted(r.cells, cell)
        ] == cell:
            return r.rid
        if twin >= 0:
            k = np.searchsorted(r.cells, twin)
            if k < r.cells.size and r.cells[k] == twin:
                return r.rid
    # ring-search fallback: nearest region within a few cells
    best, best_d = None, np.inf
    vec = _vecs_of(np.array([w]))[0]
    for r in fam:
        cells = r.cells
        if cells.size > 256:
            cells = cells[np.linspace(0, cells.size - 1, 256).astype(int)]
        v = grid.cell_unit_vectors(cells)
        dd = float(np.arccos(np.clip(v @ vec, -1, 1)).min())
        if dd < best_d:
            best, best_d = r.rid, dd
    if best_d <= 4.0 * grid.step:
        return best
    return None


def distortion_probe(
    map_: RationalMap,
    sample: JuliaSample,
    n_configs: int = 8,
    n_level: int = 3,
    r0: float = 0.3,
    fractions=(0.2, 0.4, 0.6, 0.8, 1.0),
    seed: int = 0,
    grid: SphereGrid | None = None,
) -> dict:
    """Tabulate diam ratios of nested pull-back components against the image scale.

    For seeded sample centers w0, the component of g^-n(B(w0, s*r0/2))
    containing a tracked preimage of w0 is compared against the component for
    s = 1; the envelope of ratios over the image-scale bins must be
    non-decreasing and vanish at 0 within binning noise.
    """
    grid = grid or SphereGrid(K=1024)
    rng = np.random.default_rng(seed)
    img = map_.image_cells(grid)
    rows = []
    centers = rng.choice(sample.n, size=min(n_configs, sample.n), replace=False)
    for ci in centers:
        w0 = sample.z[ci]
        if not np.isfinite(w0):
            continue
        # track one preimage branch of w0 for n_level steps
        branch = [complex(w0)]
        for _ in range(n_level):
            roots, _m = map_.preimages(branch[-1])
            finite = roots[np.isfinite(roots)]
            if not finite.size:
                break
            branch.append(complex(finite[np.argmin(np.abs(finite))]))
        if len(branch) < n_level + 1:
            continue
        diams = {}
        for s in fractions:
            radius = 0.5 * s * r0
            cells = np.unique(grid.raster_spherical_ball(sample.vecs[ci], radius))
            comp_cells = cells
            found = True
            for k in range(n_level):
                chunk = _cells_mapping_into(img, comp_cells)
                comps = grid.components(chunk)
                holding = None
                for comp in comps:
                    region = AmbientRegion(level=0, rid=0, cells=comp, parent=-1, v1_index=0)
                    if _locate_in_regions(grid, branch[k + 1], [region]) is not None:
                        holding = comp
                        break
                if holding is None:
                    found = False
                    break
                comp_cells = holding
            if found:
                region = AmbientRegion(level=0, rid=0, cells=comp_cells, parent=-1, v1_index=0)
                diams[s] = region.diam(grid)
        if 1.0 not in diams or diams[1.0] == 0:
            continue
        for s, dm in diams.items():
            rows.append({"t": float(s), "ratio": float(dm / diams[1.0])})
    bins: dict[float, float] = {}
    for row in rows:
        bins[row["t"]] = max(bins.get(row["t"], 0.0), row["ratio"])
    ts = sorted(bins)
    envelope = [bins[t] for t in ts]
    monotone = all(
        envelope[i + 1] >= envelope[i] * 0.75 for i in range(len(envelope) - 1)
    )
    return {"rows": rows, "envelope": dict(zip(map(str, ts), envelope)), "monotone": monotone}
