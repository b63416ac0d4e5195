"""Zero-whitespace layout generation: mesh, distribution-matched merging,
then terminal / net / constraint annotation.

The annotation steps are shared with the packing-based pipeline, which calls
them on its own rectangular layouts.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import metrics
from .distributions import (
    GenConfig,
    TargetDistributions,
    instance_rng,
    sample_net_weight,
    wasserstein_1d,
)
from .geometry import (
    FixedOutline,
    MergeError,
    Partition,
    RectilinearPolygon,
    Terminal,
    congruence_key,
    congruence_orientation,
    manhattan_centroid_distance,
    polygon_from_cells,
)
from .layout import CORNERS, ConstraintSet, LayoutInstance, Net, Provenance
from .mesh import MeshError, PartitionGrid, create_mesh

log = logging.getLogger(__name__)

# Exponent applied to the (1 - d/maxd) similarity before net sampling; higher
# values concentrate connectivity on abutted pairs.
SIMILARITY_SHARPNESS = 2.0

Cell = tuple[int, int]


class GenerationError(RuntimeError):
    """One instance attempt failed; the caller may retry with fresh samples."""


@dataclass
class MergeReport:
    initial_w1: float
    final_w1: float
    accepted_w1: list[float] = field(default_factory=list)
    fallback_steps: list[int] = field(default_factory=list)
    abutment: dict[int, set[int]] = field(default_factory=dict)

    @property
    def n_fallbacks(self) -> int:
        return len(self.fallback_steps)


def _cells_bbox(cells: set[Cell]) -> tuple[int, int, int, int]:
    is_ = [i for i, _ in cells]
    js = [j for _, j in cells]
    return (min(is_), min(js), max(is_), max(js))


def _union_pinched(small: set[Cell], union: set[Cell]) -> bool:
    """Pinch test at corners of the smaller operand (see merge notes)."""
    for (i, j) in small:
        for vi, vj in ((i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)):
            c00 = (vi - 1, vj - 1) in union
            c10 = (vi, vj - 1) in union
            c01 = (vi - 1, vj) in union
            c11 = (vi, vj) in union
            if (c00 and c11 and not c10 and not c01) or (
                c10 and c01 and not c00 and not c11
            ):
                return True
    return False


def _cells_have_hole(cells: set[Cell]) -> bool:
    from .geometry import _cells_have_hole as impl

    return impl(cells)


class _MergeState:
    """Partitions as grid-cell sets with adjacency and aspect bookkeeping."""

    def __init__(self, grid: PartitionGrid):
        self.grid = grid
        self.cells: dict[int, set[Cell]] = {}
        self.bbox: dict[int, tuple[int, int, int, int]] = {}
        self.neighbors: dict[int, dict[int, int]] = {}
        cell_owner = {}
        for k, (i, j) in enumerate(grid.cells()):
            self.cells[k] = {(i, j)}
            self.bbox[k] = (i, j, i, j)
            cell_owner[(i, j)] = k
        for k in self.cells:
            self.neighbors[k] = {}
        for (a_cell, b_cell) in grid.adjacent_pairs():
            a, b = cell_owner[a_cell], cell_owner[b_cell]
            shared = self._cell_shared(a_cell, b_cell)
            self.neighbors[a][b] = self.neighbors[a].get(b, 0) + shared
            self.neighbors[b][a] = self.neighbors[b].get(a, 0) + shared

    def _cell_shared(self, c1: Cell, c2: Cell) -> int:
        (i1, j1), (i2, j2) = c1, c2
        if j1 == j2:  # horizontal neighbors share a vertical wall
            return self.grid.ys[j1 + 1] - self.grid.ys[j1]
        return self.grid.xs[i1 + 1] - self.grid.xs[i1]

    def aspect(self, k: int) -> float:
        i1, j1, i2, j2 = self.bbox[k]
        w = self.grid.xs[i2 + 1] - self.grid.xs[i1]
        h = self.grid.ys[j2 + 1] - self.grid.ys[j1]
        return w / h

    def merged_bbox(self, a: int, b: int) -> tuple[int, int, int, int]:
        ai1, aj1, ai2, aj2 = self.bbox[a]
        bi1, bj1, bi2, bj2 = self.bbox[b]
        return (min(ai1, bi1), min(aj1, bj1), max(ai2, bi2), max(aj2, bj2))

    def merged_aspect(self, a: int, b: int) -> float:
        i1, j1, i2, j2 = self.merged_bbox(a, b)
        w = self.grid.xs[i2 + 1] - self.grid.xs[i1]
        h = self.grid.ys[j2 + 1] - self.grid.ys[j1]
        return w / h

    def candidate_ok(self, a: int, b: int, rectangles_only: bool) -> bool:
        """Gate: rectangle-only mode needs a full index rectangle; otherwise
        the union must stay simply connected (no hole, no pinch)."""
        union = self.cells[a] | self.cells[b]
        if rectangles_only:
            i1, j1, i2, j2 = self.merged_bbox(a, b)
            return len(union) == (i2 - i1 + 1) * (j2 - j1 + 1)
        small = self.cells[a] if len(self.cells[a]) <= len(self.cells[b]) else self.cells[b]
        if _union_pinched(small, union):
            return False
        if _cells_have_hole(union):
            return False
        return True

    def merge(self, a: int, b: int) -> None:
        self.cells[a] |= self.cells.pop(b)
        self.bbox[a] = self.merged_bbox(a, b)
        nb = self.neighbors.pop(b)
        na = self.neighbors[a]
        na.pop(b, None)
        for x, length in nb.items():
            if x == a:
                continue
            self.neighbors[x].pop(b, None)
            na[x] = na.get(x, 0) + length
            self.neighbors[x][a] = na[x]

    def pair_list(self) -> list[tuple[int, int]]:
        return sorted(
            (a, b) for a in self.neighbors for b in self.neighbors[a] if a < b
        )

    def part_ids(self) -> list[int]:
        return sorted(self.cells)


def merge_partitions(
    grid: PartitionGrid,
    n_parts: int,
    aspect_target,
    rectilinear_flag: int,
    rng: np.random.Generator,
    *,
    stall_limit: int = 50,
    gate_limit: int = 200,
) -> tuple[list[Partition], MergeReport]:
    """Merge adjacent grid cells down to ``n_parts`` partitions.

    A random adjacent pair is merged when it moves the empirical bbox-aspect
    multiset closer (in W1) to ``aspect_target``; after ``stall_limit``
    consecutive W1 rejections the least-regressing legal merge is forced so
    the loop always reaches ``n_parts``.
    """
    if grid.n_cells < n_parts:
        raise GenerationError(
            f"grid has {grid.n_cells} cells, fewer than {n_parts} partitions"
        )
    target = np.sort(np.asarray(aspect_target, dtype=float))
    rect_only = rectilinear_flag == 0
    state = _MergeState(grid)
    aspects = {k: state.aspect(k) for k in state.cells}

    def w1_with(replaced: dict[int, float], removed: set[int]) -> float:
        vals = [v for k, v in aspects.items() if k not in removed]
        vals.extend(replaced.values())
        return wasserstein_1d(vals, target)

    current_w1 = wasserstein_1d(list(aspects.values()), target)
    report = MergeReport(initial_w1=current_w1, final_w1=current_w1)
    reject_streak = 0
    gate_streak = 0

    def legal_pairs() -> list[tuple[int, int]]:
        return [
            (a, b)
            for a, b in state.pair_list()
            if state.candidate_ok(a, b, rect_only)
        ]

    def accept(a: int, b: int, new_w1: float, fallback: bool) -> None:
        nonlocal current_w1, reject_streak, gate_streak
        state.merge(a, b)
        aspects.pop(b)
        aspects[a] = state.aspect(a)
        current_w1 = new_w1
        report.accepted_w1.append(new_w1)
        if fallback:
            report.fallback_steps.append(len(report.accepted_w1) - 1)
        reject_streak = 0
        gate_streak = 0

    while len(state.cells) > n_parts:
        if reject_streak >= stall_limit or gate_streak >= gate_limit:
            candidates = legal_pairs()
            if not candidates:
                raise GenerationError("no legal merge candidate remains")
            scored = [
                (w1_with({a: state.merged_aspect(a, b)}, {a, b}), a, b)
                for a, b in candidates
            ]
            new_w1, a, b = min(scored)
            accept(a, b, new_w1, fallback=new_w1 >= current_w1)
            continue

        pairs = state.pair_list()
        a, b = pairs[int(rng.integers(0, len(pairs)))]
        if not state.candidate_ok(a, b, rect_only):
            gate_streak += 1
            continue
        gate_streak = 0
        new_w1 = w1_with({a: state.merged_aspect(a, b)}, {a, b})
        if new_w1 < current_w1:
            accept(a, b, new_w1, fallback=False)
        else:
            reject_streak += 1

    report.final_w1 = current_w1

    # Freeze partitions in lower-left order and trace their polygons.
    keys = sorted(
        state.cells,
        key=lambda k: (state.bbox[k][1], state.bbox[k][0], k),
    )
    parts = []
    key_to_id = {k: i for i, k in enumerate(keys)}
    for i, k in enumerate(keys):
        poly = polygon_from_cells(state.cells[k], grid.xs, grid.ys)
        parts.append(Partition(id=i, shape=poly))
        report.abutment[i] = {key_to_id[x] for x in state.neighbors[k]}
    return parts, report


def annotate_terminals(
    layout: LayoutInstance,
    terminal_ratio: float,
    rng: np.random.Generator,
    *,
    pitch_slack: float = 0.5,
    attempt_factor: int = 200,
) -> LayoutInstance:
    """Place ``round(n_parts * terminal_ratio)`` pins on the outline perimeter.

    Pins live at half-grid positions; any two must be at least
    ``pitch_slack * 2(W+H)/n_terms`` apart along the perimeter.  When the
    attempt budget runs out the spacing requirement is halved and placement
    restarts (counted in ``diag`` via the return path).
    """
    outline = layout.outline
    n_parts = layout.n_parts
    n_terms = max(1, round(n_parts * terminal_ratio))
    perim = outline.perimeter
    n_slots = 2 * perim  # half-grid resolution
    if n_terms > n_slots:
        raise GenerationError(f"cannot host {n_terms} terminals on perimeter {perim}")
    pitch = 2.0 * (outline.width + outline.height) / n_terms
    min_dist = pitch_slack * pitch
    relaxations = 0

    while True:
        placed: list[float] = []
        budget = attempt_factor * n_terms
        while len(placed) < n_terms and budget > 0:
            budget -= 1
            s = float(rng.integers(0, n_slots)) / 2.0
            ok = all(
                min(abs(s - t), perim - abs(s - t)) >= min_dist for t in placed
            )
            if ok:
                placed.append(s)
        if len(placed) == n_terms:
            break
        relaxations += 1
        min_dist /= 2.0
        log.warning(
            "terminal pitch unsatisfiable, relaxing spacing to %.3f (attempt %d)",
            min_dist,
            relaxations,
        )
        if relaxations > 8:
            raise GenerationError("terminal placement failed even after relaxation")

    placed.sort()
    layout.terminals = [
        Terminal(id=i, x=outline.perimeter_point(s)[0], y=outline.perimeter_point(s)[1])
        for i, s in enumerate(placed)
    ]
    layout.diag["terminal_relaxations"] = relaxations
    layout.diag["n_terms"] = n_terms
    return layout


def _weighted_sample_without_replacement(
    n_items: int, weights: np.ndarray, k: int, rng: np.random.Generator
) -> list[int]:
    """Draw ``k`` distinct indices with probability proportional to weight.

    Zero-weight items become reachable (uniformly) only once every remaining
    weight is zero, so the requested count is always met.
    """
    remaining = list(range(n_items))
    w = np.asarray(weights, dtype=float).copy()
    out: list[int] = []
    for _ in range(k):
        wr = w[remaining]
        total = wr.sum()
        if total > 0:
            p = wr / total
            pick = int(rng.choice(len(remaining), p=p))
        else:
            pick = int(rng.integers(0, len(remaining)))
        out.append(remaining.pop(pick))
    return out


def annotate_nets(
    layout: LayoutInstance,
    b2b_density: float,
    t2b_density: float,
    net_weight,
    rng: np.random.Generator,
) -> LayoutInstance:
    """Sample weighted 2-pin nets with probability rising with proximity.

    Net counts follow the matrix-density reading: ``round(density * entries)``
    over the upper triangle (block pairs) and the full terminal-block matrix.
    """
    parts = layout.partitions
    terms = layout.terminals
    n, m = len(parts), len(terms)
    perim = float(layout.outline.perimeter)

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    pair_dist = np.array(
        [manhattan_centroid_distance(parts[i], parts[j]) for i, j in pairs]
    )
    n_b2b = round(b2b_density * n * (n - 1) / 2)
    if n_b2b > len(pairs):
        log.warning("clamping b2b net count %d to %d available pairs", n_b2b, len(pairs))
        n_b2b = len(pairs)
    maxd = pair_dist.max() if len(pairs) else 0.0
    sims = (1.0 - pair_dist / maxd) ** SIMILARITY_SHARPNESS if maxd > 0 else np.ones(len(pairs))
    nets: list[Net] = []
    for idx in _weighted_sample_without_replacement(len(pairs), sims, n_b2b, rng):
        i, j = pairs[idx]
        norm_len = pair_dist[idx] / perim
        w = sample_net_weight(net_weight, norm_len, rng)
        nets.append(Net(kind="b2b", a=parts[i].id, b=parts[j].id, weight=w))

    tp = [(t, p) for t in range(m) for p in range(n)]
    tp_dist = np.array(
        [manhattan_centroid_distance(terms[t], parts[p]) for t, p in tp]
    )
    n_t2b = round(t2b_density * n * m)
    if n_t2b > len(tp):
        log.warning("clamping t2b net count %d to %d available pairs", n_t2b, len(tp))
        n_t2b = len(tp)
    maxd = tp_dist.max() if tp else 0.0
    sims = 1.0 - tp_dist / maxd if maxd > 0 else np.ones(len(tp))
    for idx in _weighted_sample_without_replacement(len(tp), sims, n_t2b, rng):
        t, p = tp[idx]
        nets.append(Net(kind="t2b", a=terms[t].id, b=parts[p].id, weight=1.0))

    layout.nets = nets
    layout.sort_nets()
    return layout


def _touched_edges(bbox, outline: FixedOutline) -> tuple[str, ...]:
    x1, y1, x2, y2 = bbox
    touched = []
    if x1 == 0:
        touched.append("LEFT")
    if x2 == outline.width:
        touched.append("RIGHT")
    if y2 == outline.height:
        touched.append("TOP")
    if y1 == 0:
        touched.append("BOTTOM")
    return tuple(touched)


def annotate_constraints(
    layout: LayoutInstance,
    boundary_frac: float,
    cluster_frac: float,
    n_clusters: int,
    preplaced_frac: float,
    multi_inst_frac: float,
    rng: np.random.Generator,
    abutment: dict[int, set[int]],
) -> LayoutInstance:
    """Annotate hard constraints consistent with the realized geometry.

    Boundary tags go to connectivity-heavy edge partitions, pre-placement
    favors the periphery, clusters grow along realized abutments, and
    shape-sharing groups are drawn from congruence classes; everything is
    satisfied by construction.
    """
    parts = layout.partitions
    outline = layout.outline
    n = len(parts)
    cs = layout.constraints

    n_boundary = round(n * boundary_frac)
    n_clustered = round(n * cluster_frac)
    n_preplaced = round(n * preplaced_frac)
    n_multi = round(n * multi_inst_frac)

    # Boundary: sample edge-touching partitions, weighted by incident nets.
    edge_parts = [p for p in parts if _touched_edges(p.bbox, outline)]
    incident = {p.id: 0.0 for p in parts}
    for net in layout.nets:
        if net.kind == "b2b":
            incident[net.a] += net.weight
        incident[net.b] += net.weight
    if edge_parts:
        k = min(n_boundary, len(edge_parts))
        weights = np.array([incident[p.id] for p in edge_parts])
        for idx in _weighted_sample_without_replacement(len(edge_parts), weights, k, rng):
            p = edge_parts[idx]
            touched = _touched_edges(p.bbox, outline)
            corners = [c for c in CORNERS if c[0] in touched and c[1] in touched]
            if corners:
                tag = corners[int(rng.integers(0, len(corners)))]
            else:
                tag = (touched[int(rng.integers(0, len(touched)))],)
            cs.boundary[p.id] = tag

    # Pre-placement: periphery-biased, anchored at the realized lower-left.
    edge_dist = np.array(
        [
            min(p.bbox[0], p.bbox[1], outline.width - p.bbox[2], outline.height - p.bbox[3])
            for p in parts
        ],
        dtype=float,
    )
    scores = 1.0 / (1.0 + edge_dist)
    for idx in _weighted_sample_without_replacement(n, scores, min(n_preplaced, n), rng):
        p = parts[idx]
        cs.preplaced[p.id] = (p.bbox[0], p.bbox[1])

    # Clusters: grow connected groups from unconstrained seeds.
    if n_clustered >= 2 and n_clusters >= 1:
        unconstrained = [
            p.id for p in parts if p.id not in cs.boundary and p.id not in cs.preplaced
        ]
        k = min(n_clusters, len(unconstrained))
        if k >= 1:
            target_size = math.ceil(n_clustered / k)
            seed_idx = _weighted_sample_without_replacement(
                len(unconstrained), np.ones(len(unconstrained)), k, rng
            )
            taken: set[int] = set()
            clusters = []
            for si in seed_idx:
                seed = unconstrained[si]
                if seed in taken:
                    continue
                group = [seed]
                taken.add(seed)
                while len(group) < target_size:
                    frontier = sorted(
                        {nb for g in group for nb in abutment[g]} - taken
                    )
                    if not frontier:
                        break
                    pick = frontier[int(rng.integers(0, len(frontier)))]
                    group.append(pick)
                    taken.add(pick)
                if len(group) >= 2:
                    clusters.append(tuple(sorted(group)))
            cs.clusters = sorted(clusters)

    # Multi-instantiation: groups drawn from shape congruence classes.
    realized_multi = 0
    if n_multi >= 2:
        classes: dict[tuple, list[int]] = {}
        for p in parts:
            classes.setdefault(congruence_key(p.shape), []).append(p.id)
        eligible = sorted(
            (ids for ids in classes.values() if len(ids) >= 2),
            key=lambda ids: ids[0],
        )
        order = list(rng.permutation(len(eligible))) if eligible else []
        groups = []
        remaining = n_multi
        for oi in order:
            if remaining < 2:
                break
            members = eligible[oi]
            take = min(len(members), remaining)
            if take < 2:
                continue
            chosen = sorted(
                members[i]
                for i in _weighted_sample_without_replacement(
                    len(members), np.ones(len(members)), take, rng
                )
            )
            groups.append(tuple(chosen))
            remaining -= take
        cs.multi_inst = sorted(groups)
        realized_multi = n_multi - remaining if groups else 0
        if realized_multi < n_multi:
            log.info(
                "multi-instantiation quota reduced from %d to %d (no congruent shapes)",
                n_multi,
                realized_multi,
            )
        orientations = []
        by_id = {p.id: p for p in parts}
        for g in cs.multi_inst:
            master = by_id[g[0]].shape
            orientations.append(
                [congruence_orientation(by_id[pid].shape, master) for pid in g]
            )
        layout.diag["multi_inst_orientations"] = orientations

    layout.diag["multi_inst_quota"] = n_multi
    layout.diag["multi_inst_realized"] = realized_multi
    cs.validate()
    return layout


def annotate_shape_ranges(layout: LayoutInstance, slack: float = 0.25) -> LayoutInstance:
    """Aspect-ratio range enclosing each realized ratio with +-``slack``."""
    for p in layout.partitions:
        r = p.aspect
        layout.constraints.shape_range[p.id] = (r / (1.0 + slack), r * (1.0 + slack))
    return layout


def annotate_shared(
    layout: LayoutInstance,
    config: GenConfig,
    targets: TargetDistributions,
    rng: np.random.Generator,
    abutment: dict[int, set[int]],
) -> LayoutInstance:
    """Terminal, net, and constraint annotation common to both pipelines."""
    sampled = {
        "terminal_ratio": targets.terminal_ratio.sample(rng),
        "b2b_density": targets.b2b_density.sample(rng),
        "t2b_density": targets.t2b_density.sample(rng),
    }
    annotate_terminals(
        layout,
        sampled["terminal_ratio"],
        rng,
        pitch_slack=config.terminal_pitch_slack,
    )
    annotate_nets(
        layout, sampled["b2b_density"], sampled["t2b_density"], targets.net_weight, rng
    )
    annotate_shape_ranges(layout)
    if config.placement_constraints_flag == 1:
        sampled.update(
            {
                "boundary_frac": targets.boundary_frac.sample(rng),
                "cluster_frac": targets.cluster_frac.sample(rng),
                "cluster_count": targets.cluster_count.sample(rng),
                "preplaced_frac": targets.preplaced_frac.sample(rng),
                "multi_inst_frac": targets.multi_inst_frac.sample(rng),
            }
        )
        annotate_constraints(
            layout,
            sampled["boundary_frac"],
            sampled["cluster_frac"],
            sampled["cluster_count"],
            sampled["preplaced_frac"],
            sampled["multi_inst_frac"],
            rng,
            abutment,
        )
    layout.diag["params"] = sampled
    layout.labels = metrics.labels(layout)
    return layout


def build_prime_instance(
    config: GenConfig,
    targets: TargetDistributions,
    rng: np.random.Generator,
    index: int,
) -> LayoutInstance:
    w, h = config.foutline_shape.sample(rng)
    n_parts = config.num_partitions.sample(rng)
    if n_parts < 2:
        raise GenerationError(f"num_partitions sample {n_parts} < 2")
    outline = FixedOutline(w, h)
    grid = create_mesh(n_parts, w, h, rng)
    target_sample = targets.aspect_ratio.sample_many(rng, config.aspect_target_samples)
    parts, report = merge_partitions(
        grid, n_parts, target_sample, config.rectilinear_flag, rng
    )
    layout = LayoutInstance(
        outline=outline,
        partitions=parts,
        terminals=[],
        nets=[],
        constraints=ConstraintSet(),
        provenance=Provenance(seed=config.seed, index=index, mode="Prime"),
    )
    layout.diag.update(
        {
            "w1_initial": report.initial_w1,
            "w1_final": report.final_w1,
            "merge_fallbacks": report.n_fallbacks,
            "vertex_max": max(len(p.shape.vertices) for p in parts),
        }
    )
    annotate_shared(layout, config, targets, rng, report.abutment)
    assert sum(p.area for p in parts) == outline.area
    return layout


def generate_prime_one(
    config: GenConfig, targets: TargetDistributions, index: int
) -> LayoutInstance | None:
    """Build instance ``index`` with retries; None when the budget runs out."""
    rng = instance_rng(config.seed, index)
    for attempt in range(config.retry_budget):
        try:
            return build_prime_instance(config, targets, rng, index)
        except (GenerationError, MeshError, MergeError) as e:
            log.debug("index %d attempt %d failed: %s", index, attempt, e)
    return None


def generate_prime(
    config: GenConfig, targets: TargetDistributions
) -> Iterator[LayoutInstance]:
    """Yield ``num_layouts`` zero-whitespace instances, deterministic per
    (seed, index); failed indices are skipped after the retry budget."""
    if config.dataset_mode != "Prime":
        raise GenerationError("config.dataset_mode must be 'Prime'")
    for index in range(config.num_layouts):
        inst = generate_prime_one(config, targets, index)
        if inst is None:
            log.warning("skipping index %d after %d attempts", index, config.retry_budget)
            continue
        yield inst
