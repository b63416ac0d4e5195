"""Batch commands: generate, solve, evaluate, stats.

Every command is deterministic given its inputs and seeds.  Exit codes:
0 success, 1 failure, 3 partial success (some instances skipped).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import bookshelf, lite, metrics, prime, sa
from .distributions import (
    GenConfig,
    TargetDistributions,
    load_config,
    load_distributions,
    wasserstein_1d,
)
from .layout import LayoutInstance

log = logging.getLogger("floorgen")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_PARTIAL = 3

SOLUTIONS_SCHEMA = "floorset-solutions v1"

REPORT_HEADER = (
    "index,area,b2b_wl,t2b_wl,viol_shape,viol_boundary,viol_grouping,"
    "viol_preplacement,viol_multi_inst,rel_area,rel_b2b_wl,rel_t2b_wl,abs_flags"
)


def _gen_worker(args) -> tuple[int, LayoutInstance | None]:
    config, targets, index = args
    if config.dataset_mode == "Prime":
        return index, prime.generate_prime_one(config, targets, index)
    return index, lite.generate_lite_one(config, targets, index)


def generate_dataset(
    config: GenConfig, targets: TargetDistributions, jobs: int = 1
) -> tuple[list[LayoutInstance], list[int]]:
    """All instances in index order plus the list of skipped indices."""
    indices = list(range(config.num_layouts))
    results: dict[int, LayoutInstance | None] = {}
    if jobs <= 1:
        for i in indices:
            results[i] = _gen_worker((config, targets, i))[1]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, inst in pool.map(
                _gen_worker, [(config, targets, i) for i in indices], chunksize=4
            ):
                results[i] = inst
    instances = [results[i] for i in indices if results[i] is not None]
    skipped = [i for i in indices if results[i] is None]
    return instances, skipped


def cmd_generate(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = GenConfig.from_json({**config.to_json(), "seed": args.seed})
    targets = load_distributions(args.dist)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    instances, skipped = generate_dataset(config, targets, jobs=args.jobs)
    log.info("generated %d/%d instances", len(instances), config.num_layouts)

    if args.format in ("container", "both"):
        bookshelf.write_dataset(instances, out / "dataset.fsd")
        log.info("wrote %s", out / "dataset.fsd")
    if args.format in ("bookshelf", "both"):
        for inst in instances:
            stem = f"{inst.provenance.mode.lower()}_{inst.provenance.index:06d}"
            bookshelf.write_bookshelf_dir(inst, out / "bookshelf", stem)
        log.info("wrote bookshelf files under %s", out / "bookshelf")
    for i in skipped:
        log.warning("instance %d was skipped", i)
    return EXIT_PARTIAL if skipped else EXIT_OK


def _solution_record(index: int, seed: int, result: sa.AnnealResult) -> dict:
    br = result.best.breakdown
    return {
        "index": index,
        "seed": seed,
        "blocks": [[b.id, b.x, b.y, b.w, b.h] for b in result.best.blocks],
        "bbox": list(result.best.bbox),
        "cost": result.best.cost,
        "breakdown": {
            "area_term": br.area_term,
            "wl_term": br.wl_term,
            "b2b_wl": br.b2b_wl,
            "t2b_wl": br.t2b_wl,
            "violation_count": br.violation_count,
            "overflow_term": br.overflow_term,
        },
    }


def _solve_worker(args) -> dict:
    inst, params = args
    result = sa.solve_baseline(inst, params)
    return _solution_record(inst.provenance.index, params.seed, result)


def _params_dict(params: sa.SAParams) -> dict:
    d = params.to_json()
    d.pop("schema")
    d["freeze_blocks"] = tuple(d["freeze_blocks"])
    return d


def solve_dataset(
    instances: list[LayoutInstance], params: sa.SAParams, jobs: int = 1
) -> list[dict]:
    tasks = []
    for inst in instances:
        seed = int(
            np.random.SeedSequence((params.seed, inst.provenance.index)).generate_state(1)[0]
        )
        tasks.append((inst, sa.SAParams(**dict(_params_dict(params), seed=seed))))
    if jobs <= 1:
        return [_solve_worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_solve_worker, tasks, chunksize=1))


def cmd_solve(args) -> int:
    instances = bookshelf.read_dataset(args.dataset)
    params = sa.load_sa_params(args.sa_params) if args.sa_params else sa.SAParams()
    if args.seed is not None:
        params = sa.SAParams(**dict(_params_dict(params), seed=args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    solutions = solve_dataset(instances, params, jobs=args.jobs)
    payload = {"schema": SOLUTIONS_SCHEMA, "solutions": solutions}
    sol_path = out / "solutions.json"
    sol_path.write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")
    log.info("wrote %s", sol_path)
    report = evaluate_solutions(instances, solutions)
    (out / "report.csv").write_text(report)
    log.info("wrote %s", out / "report.csv")
    return EXIT_OK


def _solution_metrics(inst: LayoutInstance, sol: dict):
    blocks = {
        int(b[0]): metrics.BlockGeom.from_rect(b[1], b[2], b[3], b[4])
        for b in sol["blocks"]
    }
    counts = metrics.count_violations(blocks, inst.constraints, inst.outline)
    xs1 = [g.x1 for g in blocks.values()]
    ys1 = [g.y1 for g in blocks.values()]
    xs2 = [g.x2 for g in blocks.values()]
    ys2 = [g.y2 for g in blocks.values()]
    area = (max(xs2) - min(xs1)) * (max(ys2) - min(ys1))
    centers = {pid: ((g.x1 + g.x2) / 2.0, (g.y1 + g.y2) / 2.0) for pid, g in blocks.items()}
    term_xy = {t.id: (t.x, t.y) for t in inst.terminals}
    b2b = 0.0
    t2b = 0.0
    for net in inst.nets:
        if net.kind == "b2b":
            (ax, ay), (bx, by) = centers[net.a], centers[net.b]
            b2b += net.weight * (abs(ax - bx) + abs(ay - by))
        else:
            (ax, ay), (bx, by) = term_xy[net.a], centers[net.b]
            t2b += net.weight * (abs(ax - bx) + abs(ay - by))
    return area, b2b, t2b, counts


def _report_row(index, area, b2b, t2b, counts, rel) -> str:
    flags = "".join("1" if f else "0" for f in rel.absolute_flags)
    return (
        f"{index},{area:.6g},{b2b:.6g},{t2b:.6g},"
        f"{counts.shape},{counts.boundary},{counts.grouping},"
        f"{counts.preplacement},{counts.multi_inst},"
        f"{rel.rel_area:.6g},{rel.rel_b2b_wl:.6g},{rel.rel_t2b_wl:.6g},{flags}"
    )


def evaluate_solutions(instances: list[LayoutInstance], solutions: list[dict]) -> str:
    """Relative metrics and violation counts, one row per instance plus a
    trailing mean row."""
    by_index = {inst.provenance.index: inst for inst in instances}
    rows = [REPORT_HEADER]
    acc = np.zeros(11)
    for sol in solutions:
        idx = sol["index"]
        if idx not in by_index:
            raise ValueError(f"solution index {idx} not present in the dataset")
        inst = by_index[idx]
        if inst.labels is None:
            raise ValueError(f"instance {idx} has no labels")
        area, b2b, t2b, counts = _solution_metrics(inst, sol)
        rel = metrics.relative_metrics(area, b2b, t2b, inst.labels)
        rows.append(_report_row(idx, area, b2b, t2b, counts, rel))
        acc += np.array(
            [
                area,
                b2b,
                t2b,
                counts.shape,
                counts.boundary,
                counts.grouping,
                counts.preplacement,
                counts.multi_inst,
                rel.rel_area,
                rel.rel_b2b_wl,
                rel.rel_t2b_wl,
            ]
        )
    if solutions:
        m = acc / len(solutions)
        rows.append(
            "mean," + ",".join(f"{v:.6g}" for v in m[:3])
            + "," + ",".join(f"{v:.6g}" for v in m[3:8])
            + "," + ",".join(f"{v:.6g}" for v in m[8:]) + ",000"
        )
    return "\n".join(rows) + "\n"


def evaluate_golden(instances: list[LayoutInstance]) -> str:
    """Evaluate golden layouts against their own labels (all ratios 1)."""
    rows = [REPORT_HEADER]
    for inst in instances:
        counts = metrics.count_layout_violations(inst)
        area, b2b, t2b = inst.labels
        rel = metrics.relative_metrics(area, b2b, t2b, inst.labels)
        rows.append(_report_row(inst.provenance.index, area, b2b, t2b, counts, rel))
    return "\n".join(rows) + "\n"


def cmd_evaluate(args) -> int:
    instances = bookshelf.read_dataset(args.dataset)
    if args.solutions == "golden":
        report = evaluate_golden(instances)
    else:
        payload = json.loads(Path(args.solutions).read_text())
        if payload.get("schema") != SOLUTIONS_SCHEMA:
            raise ValueError(f"expected schema {SOLUTIONS_SCHEMA!r}")
        report = evaluate_solutions(instances, payload["solutions"])
    Path(args.out).write_text(report)
    log.info("wrote %s", args.out)
    return EXIT_OK


def dataset_stats(instances: list[LayoutInstance], targets: TargetDistributions):
    """Aspect and normalized-net-length PDFs plus summary scalars."""
    aspects = []
    netlens = []
    for inst in instances:
        centers = {p.id: p.center for p in inst.partitions}
        perim = inst.outline.perimeter
        aspects.extend(p.aspect for p in inst.partitions)
        for n in inst.nets:
            if n.kind == "b2b":
                (ax, ay), (bx, by) = centers[n.a], centers[n.b]
                netlens.append((abs(ax - bx) + abs(ay - by)) / perim)
    aspects = np.asarray(aspects)
    netlens = np.asarray(netlens)

    ref_rng = np.random.default_rng(np.random.SeedSequence(20240))
    reference = targets.aspect_ratio.sample_many(ref_rng, 20000)
    w1_aspect = wasserstein_1d(aspects, reference)

    a_hist, a_edges = np.histogram(
        aspects, bins=40, range=(0.0, max(4.0, float(aspects.max()))), density=True
    )
    n_hist, n_edges = np.histogram(netlens, bins=40, range=(0.0, 1.0), density=True) if netlens.size else (np.zeros(40), np.linspace(0, 1, 41))

    initial_w1 = [
        inst.diag["w1_initial"] for inst in instances if "w1_initial" in inst.diag
    ]
    summary = {
        "n_instances": len(instances),
        "n_partitions": int(aspects.size),
        "n_b2b_nets": int(netlens.size),
        "w1_aspect_to_target": w1_aspect,
        "mean_initial_w1": float(np.mean(initial_w1)) if initial_w1 else float("nan"),
        "netlen_min": float(netlens.min()) if netlens.size else float("nan"),
        "netlen_max": float(netlens.max()) if netlens.size else float("nan"),
    }
    return (a_hist, a_edges), (n_hist, n_edges), summary


def _write_hist(path: Path, hist, edges) -> None:
    rows = ["bin_lo,bin_hi,density"]
    for lo, hi, d in zip(edges[:-1], edges[1:], hist):
        rows.append(f"{lo:.6g},{hi:.6g},{d:.6g}")
    path.write_text("\n".join(rows) + "\n")


def cmd_stats(args) -> int:
    instances = bookshelf.read_dataset(args.dataset)
    if not instances:
        log.error("dataset is empty")
        return EXIT_FAIL
    targets = load_distributions(args.dist)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (a_hist, a_edges), (n_hist, n_edges), summary = dataset_stats(instances, targets)
    _write_hist(out / "aspect_pdf.csv", a_hist, a_edges)
    _write_hist(out / "netlen_pdf.csv", n_hist, n_edges)
    rows = ["metric,value"] + [f"{k},{v:.6g}" if isinstance(v, float) else f"{k},{v}" for k, v in summary.items()]
    (out / "summary.csv").write_text("\n".join(rows) + "\n")
    log.info("wrote stats to %s", out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="floorgen",
        description="Synthetic fixed-outline floorplan benchmark tool",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a dataset from a config file")
    g.add_argument("--config", required=True, help="floorset-config v1 JSON file")
    g.add_argument("--dist", default=None, help="floorset-dist v1 JSON (default: built-ins)")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, default=None, help="override the config seed")
    g.add_argument("--format", choices=("container", "bookshelf", "both"), default="container")
    g.add_argument("--jobs", type=int, default=1, help="parallel instance generation")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run the constraint-penalty SA baseline")
    s.add_argument("--dataset", required=True, help="dataset container (.fsd)")
    s.add_argument("--sa-params", default=None, help="floorset-sa v1 JSON file")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, default=None, help="override the SA seed")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("evaluate", help="score solutions against golden labels")
    e.add_argument("--dataset", required=True)
    e.add_argument("--solutions", required=True, help="solutions JSON, or 'golden'")
    e.add_argument("--out", required=True, help="report CSV path")
    e.set_defaults(func=cmd_evaluate)

    t = sub.add_parser("stats", help="emit aspect / net-length PDFs for a dataset")
    t.add_argument("--dataset", required=True)
    t.add_argument("--dist", default=None)
    t.add_argument("--out", required=True, help="output directory")
    t.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("FLOORGEN_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:  # deliberate: CLI boundary
        log.error("%s", e)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
