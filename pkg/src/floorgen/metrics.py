"""Labels, violation counting, and relative metrics against golden layouts."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

from .geometry import (
    GeometryError,
    RectilinearPolygon,
    bbox_aspect,
    congruence_key,
    shared_edge,
)
from .layout import ConstraintSet, LayoutInstance

EPS = 1e-9


class MetricsError(ValueError):
    pass


def labels(layout: LayoutInstance) -> tuple[float, float, float]:
    """[area, inter-partition wirelength, terminal-partition wirelength].

    Area is the outline area (golden layouts cover it up to whitespace).
    Wirelengths sum weight x Manhattan distance over nets in canonical
    order, so a recomputation from serialized form reproduces them exactly.
    """
    if layout.nets is None:
        raise MetricsError("layout has no net annotation")
    area = float(layout.outline.area)
    centers = {p.id: p.center for p in layout.partitions}
    term_xy = {t.id: (t.x, t.y) for t in layout.terminals}
    b2b = 0.0
    t2b = 0.0
    for net in layout.nets:
        if net.kind == "b2b":
            (ax, ay), (bx, by) = centers[net.a], centers[net.b]
            b2b += net.weight * (abs(ax - bx) + abs(ay - by))
        else:
            (ax, ay), (bx, by) = term_xy[net.a], centers[net.b]
            t2b += net.weight * (abs(ax - bx) + abs(ay - by))
    return (area, b2b, t2b)


@dataclass(frozen=True)
class ViolationCounts:
    shape: int = 0
    boundary: int = 0
    grouping: int = 0
    preplacement: int = 0
    multi_inst: int = 0
    overflow: bool = False

    def total(self) -> int:
        return (
            self.shape + self.boundary + self.grouping + self.preplacement + self.multi_inst
        )

    def as_dict(self) -> dict:
        return {
            "shape": self.shape,
            "boundary": self.boundary,
            "grouping": self.grouping,
            "preplacement": self.preplacement,
            "multi_inst": self.multi_inst,
            "overflow": self.overflow,
        }


@dataclass(frozen=True)
class BlockGeom:
    """Geometry view used by violation counting.

    Either an exact polygon (golden layouts) or a float rectangle
    (solver output); the two kinds are never mixed within one solution.
    """

    x1: float
    y1: float
    x2: float
    y2: float
    poly: Union[RectilinearPolygon, None] = None

    @classmethod
    def from_polygon(cls, poly: RectilinearPolygon) -> "BlockGeom":
        x1, y1, x2, y2 = poly.bbox
        return cls(float(x1), float(y1), float(x2), float(y2), poly)

    @classmethod
    def from_rect(cls, x: float, y: float, w: float, h: float) -> "BlockGeom":
        if w <= 0 or h <= 0:
            raise MetricsError("block needs positive extent")
        return cls(x, y, x + w, y + h, None)

    @property
    def ratio(self) -> float:
        return (self.x2 - self.x1) / (self.y2 - self.y1)

    def abutted(self, other: "BlockGeom") -> bool:
        if self.poly is not None and other.poly is not None:
            return shared_edge(self.poly, other.poly) > 0
        # Rectangles: positive-length wall contact; overlapping rectangles
        # (invalid solutions) do not count as abutted.
        x_meet = abs(self.x2 - other.x1) < EPS or abs(other.x2 - self.x1) < EPS
        y_meet = abs(self.y2 - other.y1) < EPS or abs(other.y2 - self.y1) < EPS
        y_olap = min(self.y2, other.y2) - max(self.y1, other.y1)
        x_olap = min(self.x2, other.x2) - max(self.x1, other.x1)
        return (x_meet and y_olap > EPS) or (y_meet and x_olap > EPS)

    def congruence_signature(self):
        if self.poly is not None:
            return congruence_key(self.poly)
        w = round(self.x2 - self.x1, 6)
        h = round(self.y2 - self.y1, 6)
        return (min(w, h), max(w, h))


def count_violations(
    blocks: Mapping[int, BlockGeom],
    constraints: ConstraintSet,
    outline,
) -> ViolationCounts:
    """Per-family violation counts plus an outline-overflow flag."""

    def geom(pid: int) -> BlockGeom:
        try:
            return blocks[pid]
        except KeyError:
            raise MetricsError(f"constraint references unknown block id {pid}")

    shape = 0
    for pid, (lo, hi) in constraints.shape_range.items():
        r = geom(pid).ratio
        if r < lo - EPS or r > hi + EPS:
            shape += 1

    boundary = 0
    for pid, edges in constraints.boundary.items():
        g = geom(pid)
        ok = True
        for e in edges:
            if e == "LEFT":
                ok &= abs(g.x1) < EPS
            elif e == "RIGHT":
                ok &= abs(g.x2 - outline.width) < EPS
            elif e == "BOTTOM":
                ok &= abs(g.y1) < EPS
            elif e == "TOP":
                ok &= abs(g.y2 - outline.height) < EPS
        if not ok:
            boundary += 1

    grouping = 0
    for cluster in constraints.clusters:
        members = [geom(pid) for pid in cluster]
        parent = list(range(len(members)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                if members[i].abutted(members[j]):
                    parent[find(i)] = find(j)
        if len({find(i) for i in range(len(members))}) > 1:
            grouping += 1

    preplacement = 0
    for pid, (px, py) in constraints.preplaced.items():
        g = geom(pid)
        if abs(g.x1 - px) > EPS or abs(g.y1 - py) > EPS:
            preplacement += 1

    multi_inst = 0
    for group in constraints.multi_inst:
        sigs = {geom(pid).congruence_signature() for pid in group}
        if len(sigs) > 1:
            multi_inst += 1

    overflow = any(
        g.x1 < -EPS or g.y1 < -EPS or g.x2 > outline.width + EPS or g.y2 > outline.height + EPS
        for g in blocks.values()
    )

    return ViolationCounts(
        shape=shape,
        boundary=boundary,
        grouping=grouping,
        preplacement=preplacement,
        multi_inst=multi_inst,
        overflow=overflow,
    )


def layout_blocks(layout: LayoutInstance) -> dict[int, BlockGeom]:
    return {p.id: BlockGeom.from_polygon(p.shape) for p in layout.partitions}


def count_layout_violations(layout: LayoutInstance) -> ViolationCounts:
    """Violations of a golden layout against its own constraints."""
    return count_violations(layout_blocks(layout), layout.constraints, layout.outline)


@dataclass(frozen=True)
class RelativeMetrics:
    rel_area: float
    rel_b2b_wl: float
    rel_t2b_wl: float
    # Flags set when a golden component is zero; the ratio slot then holds
    # the absolute solution value instead.
    absolute_flags: tuple[bool, bool, bool] = (False, False, False)


def relative_metrics(
    solution_area: float,
    solution_b2b_wl: float,
    solution_t2b_wl: float,
    golden_labels: tuple[float, float, float],
) -> RelativeMetrics:
    """Componentwise solution/golden ratios; golden vs itself is (1, 1, 1)."""
    vals = []
    flags = []
    for sol, gold in zip(
        (solution_area, solution_b2b_wl, solution_t2b_wl), golden_labels
    ):
        if gold == 0:
            vals.append(sol)
            flags.append(True)
        else:
            vals.append(sol / gold)
            flags.append(False)
    return RelativeMetrics(vals[0], vals[1], vals[2], tuple(flags))
