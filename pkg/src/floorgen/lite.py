"""Rectangle-packing layout generation: annealed packing under the outline,
then the shared annotation steps."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

from .distributions import GenConfig, TargetDistributions, instance_rng
from .geometry import FixedOutline, Partition, RectilinearPolygon
from .layout import ConstraintSet, LayoutInstance, Provenance
from .prime import GenerationError, annotate_shared
from .sa import CostBreakdown, SAParams, SkylinePacker, SoftBlock, anneal

log = logging.getLogger(__name__)

MIN_AREA = 4


@dataclass(frozen=True)
class RectSpec:
    """Packing input: exact area plus an aspect-ratio window."""

    id: int
    area: int
    ar_range: tuple[float, float]
    init_w: int
    init_h: int

    def __post_init__(self):
        lo, hi = self.ar_range
        if self.area <= 0 or not 0 < lo <= hi:
            raise ValueError("bad rectangle spec")
        if self.init_w * self.init_h != self.area:
            raise ValueError("initial dims do not multiply to the area")


def _divisor_variants(area: int, lo: float, hi: float) -> list[tuple[int, int]]:
    out = set()
    for w in range(1, math.isqrt(area) + 1):
        if area % w == 0:
            for ww in (w, area // w):
                if lo - 1e-9 <= (ww * ww) / area <= hi + 1e-9:
                    out.add((ww, area // ww))
    return sorted(out)


def _smooth_area(a0: float, lo: float, hi: float, span: float = 0.05) -> int:
    """Nearby integer area with the richest exact-dimension menu."""
    best = None
    lo_a = max(MIN_AREA, math.floor(a0 * (1 - span)))
    hi_a = max(lo_a, math.ceil(a0 * (1 + span)))
    for a in range(lo_a, hi_a + 1):
        score = (len(_divisor_variants(a, lo, hi)), -abs(a - a0))
        if best is None or score > best[0]:
            best = (score, a)
    return best[1]


def make_rect_specs(
    n_parts: int,
    w: int,
    h: int,
    aspect_dist,
    rng: np.random.Generator,
    *,
    fill_target: float = 0.955,
    ar_slack: float = 0.5,
) -> list[RectSpec]:
    """Dirichlet area split of ``fill_target * W * H`` as integer rectangles.

    Areas are nudged to nearby highly-divisible values so each rectangle has
    several exact integer shapes inside its (rotation-inclusive) ratio
    window; the total always lands in (0.95, fill_target] x W x H.
    """
    if n_parts < 2:
        raise GenerationError("need at least 2 rectangles")
    total = w * h
    budget = fill_target * total
    if budget < n_parts * MIN_AREA:
        raise GenerationError(f"outline {w}x{h} too small for {n_parts} rectangles")
    shares = rng.dirichlet(np.full(n_parts, 4.0))

    windows: list[tuple[float, float]] = []
    areas: list[int] = []
    for i in range(n_parts):
        r = float(aspect_dist.sample(rng))
        lo = min(r, 1.0 / r) / (1.0 + ar_slack)
        hi = max(r, 1.0 / r) * (1.0 + ar_slack)
        windows.append((lo, hi))
        areas.append(_smooth_area(max(MIN_AREA, shares[i] * budget), lo, hi))

    lo_sum = 0.952 * total
    for _ in range(8 * n_parts):
        s = sum(areas)
        if s > budget:
            i = int(np.argmax(areas))
            areas[i] = _smooth_area(areas[i] * 0.94, *windows[i], span=0.04)
        elif s <= lo_sum:
            i = int(np.argmin(areas))
            areas[i] = _smooth_area(areas[i] * 1.08 + 2, *windows[i], span=0.04)
        else:
            break
    if not lo_sum < sum(areas) <= budget:
        raise GenerationError("could not meet the fill band with integer areas")

    specs = []
    for i in range(n_parts):
        variants = _divisor_variants(areas[i], *windows[i])
        if not variants:
            side = max(1, round(math.sqrt(areas[i])))
            while areas[i] % side:
                side -= 1
            variants = [(side, areas[i] // side)]
            lo = min(v[0] / v[1] for v in variants)
            hi = max(v[0] / v[1] for v in variants)
            windows[i] = (min(windows[i][0], lo), max(windows[i][1], hi))
        init_w, init_h = variants[len(variants) // 2]
        specs.append(
            RectSpec(
                id=i,
                area=areas[i],
                ar_range=windows[i],
                init_w=init_w,
                init_h=init_h,
            )
        )
    return specs


# Cold start: the greedy height-descending initial sequence is already good,
# so the annealer refines instead of randomizing it.
PACK_PARAMS = SAParams(
    initial_temperature=0.01,
    cooling_ratio=0.93,
    moves_per_temperature=None,  # resolved to 30 * n
    stop_temperature=1.0e-5,
    w_area=1.0,
    w_outline=10.0,
)


def pack_rectangles(
    specs: list[RectSpec],
    w: int,
    h: int,
    sa_params: SAParams,
    rng: np.random.Generator,
):
    """Anneal the rectangles into the outline; cost is outline overrun plus
    whitespace.  Returns (placed, fitted) where placed maps spec id to an
    integer (x, y, w, h) tuple and fitted says whether everything is inside."""
    if sum(s.area for s in specs) > w * h:
        raise GenerationError("rectangle areas exceed the outline")
    blocks = []
    for s in specs:
        variants = _divisor_variants(s.area, *s.ar_range)
        if (s.init_w, s.init_h) not in variants:
            variants = sorted(set(variants) | {(s.init_w, s.init_h)})
        blocks.append(
            SoftBlock(
                id=s.id,
                area=float(s.area),
                widths=tuple(v[0] for v in variants),
                heights=tuple(float(v[1]) for v in variants),
                init_idx=variants.index((s.init_w, s.init_h)),
            )
        )
    total_area = float(sum(s.area for s in specs))
    outline_area = float(w * h)

    def cost(pl):
        over = max(0.0, pl.bw - w) / w + max(0.0, pl.bh - h) / h
        white = max(0.0, pl.bw * pl.bh - total_area) / outline_area
        return CostBreakdown(area_term=white, overflow_term=over)

    run = sa_params
    if run.moves_per_temperature is None:
        run = replace(run, moves_per_temperature=30 * len(specs))
    packer = SkylinePacker(blocks, w)
    result = anneal(
        blocks,
        packer.initial(),
        cost,
        run,
        rng,
        decode_fn=packer.decode,
        perturb_fn=packer.perturb,
        stop=lambda br: br.overflow_term == 0.0,
    )
    placed = {}
    for b in result.best.blocks:
        placed[b.id] = (int(round(b.x)), int(round(b.y)), int(round(b.w)), int(round(b.h)))
    fitted = result.best.breakdown.overflow_term == 0.0
    return placed, fitted


def _rect_abutment(rects: dict[int, tuple[int, int, int, int]]) -> dict[int, set[int]]:
    out: dict[int, set[int]] = {i: set() for i in rects}
    items = sorted(rects.items())
    for i, (ia, (xa, ya, wa, ha)) in enumerate(items):
        for ib, (xb, yb, wb, hb) in items[i + 1 :]:
            x_meet = xa + wa == xb or xb + wb == xa
            y_meet = ya + ha == yb or yb + hb == ya
            y_olap = min(ya + ha, yb + hb) - max(ya, yb)
            x_olap = min(xa + wa, xb + wb) - max(xa, xb)
            if (x_meet and y_olap > 0) or (y_meet and x_olap > 0):
                out[ia].add(ib)
                out[ib].add(ia)
    return out


def build_lite_instance(
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

    placed = None
    attempts = 0
    for attempt in range(3):
        attempts += 1
        specs = make_rect_specs(
            n_parts, w, h, targets.aspect_ratio, rng, fill_target=config.fill_target
        )
        candidate, fitted = pack_rectangles(specs, w, h, PACK_PARAMS, rng)
        if fitted:
            placed = candidate
            break
    if placed is None:
        raise GenerationError("packing failed to fit the outline")

    # Freeze ids in lower-left order.
    order = sorted(placed, key=lambda i: (placed[i][1], placed[i][0], i))
    partitions = []
    rects = {}
    for new_id, old_id in enumerate(order):
        x, y, bw, bh = placed[old_id]
        poly = RectilinearPolygon.from_rect(x, y, x + bw, y + bh)
        partitions.append(Partition(id=new_id, shape=poly))
        rects[new_id] = (x, y, bw, bh)

    total_area = sum(p.area for p in partitions)
    whitespace = 1.0 - total_area / outline.area
    if not whitespace < 0.05:
        raise GenerationError(f"whitespace {whitespace:.3f} exceeds the 5% bound")

    layout = LayoutInstance(
        outline=outline,
        partitions=partitions,
        terminals=[],
        nets=[],
        constraints=ConstraintSet(),
        provenance=Provenance(seed=config.seed, index=index, mode="Lite"),
    )
    layout.diag.update({"whitespace": whitespace, "pack_attempts": attempts})
    annotate_shared(layout, config, targets, rng, _rect_abutment(rects))
    return layout


def generate_lite_one(
    config: GenConfig, targets: TargetDistributions, index: int
) -> LayoutInstance | None:
    """Build instance ``index`` with retries; None when the budget runs out."""
    rng = instance_rng(config.seed, index)
    for attempt in range(config.retry_budget):
        try:
            return build_lite_instance(config, targets, rng, index)
        except GenerationError as e:
            log.debug("index %d attempt %d failed: %s", index, attempt, e)
    return None


def generate_lite(
    config: GenConfig, targets: TargetDistributions
) -> Iterator[LayoutInstance]:
    """Yield packed rectangular instances with < 5% whitespace."""
    if config.dataset_mode != "Lite":
        raise GenerationError("config.dataset_mode must be 'Lite'")
    for index in range(config.num_layouts):
        inst = generate_lite_one(config, targets, index)
        if inst is None:
            log.warning("skipping index %d after %d attempts", index, config.retry_budget)
            continue
        yield inst
