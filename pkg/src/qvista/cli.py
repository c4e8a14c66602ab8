"""Command-line entry points for every pipeline.

Exit codes: 0 on PASS/OK, 1 on a verification FAIL (the report is still
written), 2 on usage or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import fixtures
from .builder import build_visual_width0, build_visual_width1
from .covers import CoverSequence, verify_quasi_visual, verify_visual
from .errors import QvistaError
from .metricspace import FiniteMetricSpace
from .proximity import (
    compute_proximity,
    fit_power_quasisymmetry,
    snowflake_check,
    synthesize_visual_metric,
)
from .reporting import RunManifest, default_seed, file_sha256, write_report
from .tilegraph import (
    build_tile_graph,
    cluster_cover_sequence,
    compare_m_gromov,
    hyperbolicity_constant,
)
from .boundary import boundary_metric, phi_injectivity_check, phi_regularity_check
from .julia import (
    RationalMap,
    admissible_cover,
    degree_probe,
    induce_tiles,
    julia_sample,
    pullback_cover,
    verify_dynamical_qv,
)
from .spheregrid import SphereGrid


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qvista")
    ap.add_argument("--threads", type=int, default=None,
                    help="cap internal parallelism (advisory; computation is vectorized)")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("fixture", help="emit a canonical space and cover")
    p.add_argument("name", choices=fixtures.FIXTURE_NAMES)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--sample-depth", type=int, default=None)
    p.add_argument("--out-space", required=True)
    p.add_argument("--out-cover", required=True)

    p = sub.add_parser("build", help="build a visual approximation from nets")
    p.add_argument("--space", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--width", type=int, choices=(0, 1), default=1)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify", help="verify visual or quasi-visual conditions")
    p.add_argument("--space", required=True)
    p.add_argument("--cover", required=True)
    p.add_argument("--mode", choices=("visual", "quasi"), default="visual")
    p.add_argument("--thresholds", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "text"), default="json")

    p = sub.add_parser("proximity", help="compute the proximity table of a cover")
    p.add_argument("--cover", required=True)
    p.add_argument("--space", default=None, help="optional; proximity is combinatorial")
    p.add_argument("--out", required=True)

    p = sub.add_parser("synthesize", help="synthesize a visual metric from a cover")
    p.add_argument("--cover", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)

    p = sub.add_parser("qscheck", help="fit snowflake / power quasisymmetry between metrics")
    p.add_argument("--d1", required=True)
    p.add_argument("--d2", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("tilegraph", help="tile graph, hyperbolicity, clusters")
    p.add_argument("--cover", required=True)
    p.add_argument("--space", default=None)
    p.add_argument("--hyperbolicity", choices=("exact", "sampled"), default="exact")
    p.add_argument("--cluster-r", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("boundary", help="truncated boundary metric and regularity")
    p.add_argument("--cover", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--check", choices=("snowflake", "qs", "both"), default="both")

    p = sub.add_parser("julia", help="dynamical cover of a Julia set, end to end")
    p.add_argument("--map", dest="map_text", required=True)
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--cover-radius", type=float, default=0.25)
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--grid", type=int, default=2048)
    p.add_argument("--target-count", type=int, default=4096)
    p.add_argument("--degree-probes", type=int, default=0)
    p.add_argument("--out", required=True)
    return ap


def _load_space(path) -> FiniteMetricSpace:
    return FiniteMetricSpace.load(path)


def _load_cover(path, space) -> CoverSequence:
    return CoverSequence.load(path, space)


def _combinatorial_space(path) -> FiniteMetricSpace:
    """Zero-metric placeholder when only the combinatorics matter."""
    with open(path) as fh:
        n = json.load(fh)["n"]
    # all-distinct placeholder distances keep the constructor happy
    d = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :]).astype(float)
    return FiniteMetricSpace(dist=d)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    seed = default_seed()
    try:
        return _dispatch(args, seed)
    except (QvistaError, OSError, ValueError, KeyError) as exc:
        print(f"qvista: error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args, seed: int) -> int:
    cmd = args.cmd
    if cmd == "fixture":
        params = {}
        if args.depth is not None:
            params["depth"] = args.depth
        if args.sample_depth is not None:
            if args.name in ("cantor", "sierpinski_gasket"):
                params["sample_depth"] = args.sample_depth
            elif args.name in ("interval_dyadic",):
                params["sample_exp"] = args.sample_depth
            elif args.name == "dyadic_interleaved":
                params["sample_exp"] = args.sample_depth
        if args.name == "dyadic_interleaved" and "depth" in params:
            params["k_max"] = params.pop("depth")
        space, cover = fixtures.fixture(args.name, **params)
        space.save(args.out_space)
        cover.save(args.out_cover)
        return 0

    if cmd == "build":
        space = _load_space(args.space)
        build = build_visual_width1 if args.width == 1 else build_visual_width0
        cover = build(space, args.lam, args.depth)
        cover.save(args.out)
        return 0

    if cmd == "verify":
        space = _load_space(args.space)
        cover = _load_cover(args.cover, space)
        thresholds = None
        if args.thresholds:
            with open(args.thresholds) as fh:
                thresholds = json.load(fh)
        if args.mode == "visual":
            report = verify_visual(cover, thresholds=thresholds)
        else:
            report = verify_quasi_visual(cover, thresholds=thresholds)
        manifest = RunManifest(
            command="verify",
            inputs={args.space: file_sha256(args.space), args.cover: file_sha256(args.cover)},
            parameters={"mode": args.mode, "thresholds": thresholds},
            seed=seed,
        )
        if args.out:
            write_report(report, args.out, manifest, fmt=args.format)
        else:
            from .reporting import report_render, _plain
            data = _plain(report)
            data["manifest"] = _plain(manifest.to_dict())
            sys.stdout.write(report_render(data, args.format).decode())
        return 0 if report.passed else 1

    if cmd == "proximity":
        space = _load_space(args.space) if args.space else _combinatorial_space(args.cover)
        cover = _load_cover(args.cover, space)
        table = compute_proximity(cover)
        table.save(args.out)
        return 0

    if cmd == "synthesize":
        space = _combinatorial_space(args.cover)
        cover = _load_cover(args.cover, space)
        metric, report = synthesize_visual_metric(cover, args.lam)
        metric.save(args.out)
        if args.report:
            manifest = RunManifest(
                command="synthesize",
                inputs={args.cover: file_sha256(args.cover)},
                parameters={"lambda": args.lam},
                seed=seed,
            )
            write_report(report, args.report, manifest)
        return 0 if report.passed else 1

    if cmd == "qscheck":
        d1 = _load_space(args.d1)
        d2 = _load_space(args.d2)
        snow = snowflake_check(d1, d2)
        qs = fit_power_quasisymmetry(d1, d2)
        result = {
            "snowflake": {"alpha": snow[0], "C": snow[1]} if snow else None,
            "quasisymmetry": qs.to_dict() if qs else None,
        }
        manifest = RunManifest(
            command="qscheck",
            inputs={args.d1: file_sha256(args.d1), args.d2: file_sha256(args.d2)},
            seed=seed,
        )
        if args.out:
            write_report(result, args.out, manifest)
        else:
            print(json.dumps(result, sort_keys=True))
        return 0 if (snow or qs) else 1

    if cmd == "tilegraph":
        space = _load_space(args.space) if args.space else _combinatorial_space(args.cover)
        cover = _load_cover(args.cover, space)
        graph = build_tile_graph(cover)
        table = compute_proximity(cover)
        comparison = compare_m_gromov(graph, table)
        result = {
            "graph": graph.to_dict(),
            "hyperbolicity": hyperbolicity_constant(graph, mode=args.hyperbolicity, seed=seed),
            "hyperbolicity_mode": args.hyperbolicity
            + ("" if args.hyperbolicity == "exact" else " (lower bound only)"),
            "gromov_vs_m": comparison.to_dict(),
        }
        if args.cluster_r is not None:
            if args.space is None:
                raise ValueError("--cluster-r verification requires --space")
            clustered = cluster_cover_sequence(graph, args.cluster_r)
            result["cluster_r"] = args.cluster_r
            result["cluster_quasi_visual"] = verify_quasi_visual(clustered).to_dict()
        manifest = RunManifest(
            command="tilegraph",
            inputs={args.cover: file_sha256(args.cover)},
            parameters={"hyperbolicity": args.hyperbolicity, "cluster_r": args.cluster_r},
            seed=seed,
        )
        write_report(result, args.out, manifest)
        return 0

    if cmd == "boundary":
        space = _load_space(args.space)
        cover = _load_cover(args.cover, space)
        graph = build_tile_graph(cover)
        bnd = boundary_metric(cover, graph, args.lam)
        ok, inj = phi_injectivity_check(bnd)
        result = {"boundary": bnd.to_dict(), "injectivity": {"ok": ok, **inj}}
        if args.check in ("snowflake", "both"):
            snow = snowflake_check(space, FiniteMetricSpace(dist=bnd.dist))
            result["snowflake"] = {"alpha": snow[0], "C": snow[1]} if snow else None
        if args.check in ("qs", "both"):
            result["regularity"] = phi_regularity_check(space, bnd)
        manifest = RunManifest(
            command="boundary",
            inputs={args.space: file_sha256(args.space), args.cover: file_sha256(args.cover)},
            parameters={"lambda": args.lam, "check": args.check},
            seed=seed,
        )
        write_report(result, args.out, manifest)
        return 0 if ok else 1

    if cmd == "julia":
        map_ = RationalMap.parse(args.map_text)
        sample = julia_sample(map_, args.depth, seed=seed, target_count=args.target_count)
        grid = SphereGrid(K=args.grid)
        pull = admissible_cover(map_, sample, args.cover_radius, grid=grid)
        pull = pullback_cover(pull, args.levels)
        cover = induce_tiles(pull)
        outcome = verify_dynamical_qv(pull, cover)
        result = {
            "map": args.map_text,
            "sample_size": sample.n,
            "mesh": sample.mesh,
            "passed": outcome["passed"],
            "qv": outcome["qv"].to_dict(),
            "dynamical": outcome["dynamical"].to_dict(),
            "rates": outcome["rates"].to_dict(),
            "projection_error": outcome["projection_error"],
        }
        if args.degree_probes:
            rng = np.random.default_rng(seed)
            picks = rng.choice(sample.n, size=min(args.degree_probes, sample.n), replace=False)
            probes = []
            for ci in picks:
                w0 = sample.z[ci]
                if not np.isfinite(w0):
                    continue
                probes.append(degree_probe(map_, complex(w0), 0.5 * args.cover_radius, 4,
                                           grid=SphereGrid(K=1024)))
            result["degree_probes"] = probes
        manifest = RunManifest(
            command="julia",
            parameters={
                "map": args.map_text,
                "depth": args.depth,
                "cover_radius": args.cover_radius,
                "levels": args.levels,
                "grid": args.grid,
            },
            seed=seed,
        )
        write_report(result, args.out, manifest)
        return 0 if outcome["passed"] else 1

    raise ValueError(f"unknown command {cmd!r}")


if __name__ == "__main__":
    sys.exit(main())
