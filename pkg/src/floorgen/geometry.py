"""Exact rectilinear geometry on a non-negative integer grid.

Polygons are simple, hole-free, axis-aligned, counter-clockwise rings with
integer vertices.  Everything here is exact (integer / half-integer
arithmetic only), so area accounting and abutment tests never drift.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

Vertex = tuple[int, int]
Rect = tuple[int, int, int, int]  # x1, y1, x2, y2 with x1 < x2, y1 < y2


class GeometryError(ValueError):
    """A polygon or operation input breaks a structural invariant."""


class MergeError(GeometryError):
    """Two polygons cannot be merged into a simple, hole-free polygon."""


def _as_int(v) -> int:
    i = int(v)
    if i != v:
        raise GeometryError(f"coordinate {v!r} is not an integer")
    return i


def _normalize_ring(raw: Iterable[Sequence[int]]) -> tuple[Vertex, ...]:
    """Dedup, drop straight-through vertices, orient CCW, canonical start."""
    pts = [( _as_int(p[0]), _as_int(p[1]) ) for p in raw]
    if len(pts) >= 2 and pts[0] == pts[-1]:
        pts.pop()
    out: list[Vertex] = []
    for p in pts:
        if not out or p != out[-1]:
            out.append(p)
    if len(out) >= 2 and out[0] == out[-1]:
        out.pop()
    if len(out) < 4:
        raise GeometryError("polygon needs at least 4 distinct vertices")

    # Drop straight-through vertices; a spike (reversal) is malformed input.
    changed = True
    while changed:
        changed = False
        n = len(out)
        for i in range(n):
            a, b, c = out[i - 1], out[i], out[(i + 1) % n]
            if a[0] == b[0] == c[0] or a[1] == b[1] == c[1]:
                fwd = (b[0] - a[0], b[1] - a[1])
                nxt = (c[0] - b[0], c[1] - b[1])
                if fwd[0] * nxt[0] + fwd[1] * nxt[1] < 0:
                    raise GeometryError("degenerate spike vertex")
                del out[i]
                changed = True
                break
        if len(out) < 4:
            raise GeometryError("polygon degenerates to fewer than 4 vertices")

    # Orientation: make signed area positive (counter-clockwise).
    twice_area = 0
    n = len(out)
    for i in range(n):
        x1, y1 = out[i]
        x2, y2 = out[(i + 1) % n]
        twice_area += x1 * y2 - x2 * y1
    if twice_area == 0:
        raise GeometryError("polygon has zero area")
    if twice_area < 0:
        out.reverse()

    start = min(range(len(out)), key=lambda i: out[i])
    return tuple(out[start:] + out[:start])


@dataclass(frozen=True)
class RectilinearPolygon:
    """Simple hole-free axis-aligned polygon, canonical CCW vertex ring."""

    vertices: tuple[Vertex, ...]

    def __post_init__(self):
        verts = _normalize_ring(self.vertices)
        object.__setattr__(self, "vertices", verts)
        n = len(verts)
        if n % 2 != 0:
            raise GeometryError("rectilinear polygon needs an even vertex count")
        for i in range(n):
            x1, y1 = verts[i]
            x2, y2 = verts[(i + 1) % n]
            if (x1 == x2) == (y1 == y2):
                raise GeometryError("edges must be axis-aligned")
            if x1 < 0 or y1 < 0:
                raise GeometryError("coordinates must be non-negative")
        self._check_simple()

    def _check_simple(self) -> None:
        edges = self.edges()
        n = len(edges)
        for i in range(n):
            for j in range(i + 1, n):
                adjacent = j == i + 1 or (i == 0 and j == n - 1)
                if _segments_touch(edges[i], edges[j], allow_endpoint=adjacent):
                    raise GeometryError("polygon is self-intersecting")

    def edges(self) -> list[tuple[Vertex, Vertex]]:
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    @property
    def area(self) -> int:
        twice = 0
        v = self.vertices
        for i in range(len(v)):
            x1, y1 = v[i]
            x2, y2 = v[(i + 1) % len(v)]
            twice += x1 * y2 - x2 * y1
        assert twice > 0 and twice % 2 == 0
        return twice // 2

    @property
    def bbox(self) -> Rect:
        xs = [x for x, _ in self.vertices]
        ys = [y for _, y in self.vertices]
        return (min(xs), min(ys), max(xs), max(ys))

    @property
    def bbox_center(self) -> tuple[float, float]:
        x1, y1, x2, y2 = self.bbox
        return ((x1 + x2) / 2.0, (y1 + y2) / 2.0)

    def translate(self, dx: int, dy: int) -> "RectilinearPolygon":
        return RectilinearPolygon(tuple((x + dx, y + dy) for x, y in self.vertices))

    def transpose(self) -> "RectilinearPolygon":
        return RectilinearPolygon(tuple((y, x) for x, y in self.vertices))

    def contains_point(self, px: float, py: float) -> bool:
        """Strict interior test; point must not lie on any edge."""
        inside = False
        for (x1, y1), (x2, y2) in self.edges():
            if x1 == x2:  # vertical edge: crossing test on a leftward ray
                lo, hi = min(y1, y2), max(y1, y2)
                if lo < py < hi and px > x1:
                    inside = not inside
        return inside

    @classmethod
    def from_rect(cls, x1: int, y1: int, x2: int, y2: int) -> "RectilinearPolygon":
        if x2 <= x1 or y2 <= y1:
            raise GeometryError("rectangle needs positive extent")
        return cls(((x1, y1), (x2, y1), (x2, y2), (x1, y2)))


def _segments_touch(e1, e2, allow_endpoint: bool) -> bool:
    """Exact axis-aligned segment intersection; endpoint contact optionally ok."""
    (ax1, ay1), (ax2, ay2) = e1
    (bx1, by1), (bx2, by2) = e2
    a_lox, a_hix = min(ax1, ax2), max(ax1, ax2)
    a_loy, a_hiy = min(ay1, ay2), max(ay1, ay2)
    b_lox, b_hix = min(bx1, bx2), max(bx1, bx2)
    b_loy, b_hiy = min(by1, by2), max(by1, by2)
    if a_lox > b_hix or b_lox > a_hix or a_loy > b_hiy or b_loy > a_hiy:
        return False
    # Overlapping boxes of axis-aligned segments always share at least a point.
    if not allow_endpoint:
        return True
    ox1, ox2 = max(a_lox, b_lox), min(a_hix, b_hix)
    oy1, oy2 = max(a_loy, b_loy), min(a_hiy, b_hiy)
    if ox1 == ox2 and oy1 == oy2:
        p = (ox1, oy1)
        return p not in (e1[0], e1[1]) or p not in (e2[0], e2[1])
    return True


def polygon_area(poly: RectilinearPolygon) -> int:
    """Exact area in grid units squared."""
    return poly.area


def bbox_aspect(poly: RectilinearPolygon) -> float:
    """Bounding-box width over height."""
    x1, y1, x2, y2 = poly.bbox
    return (x2 - x1) / (y2 - y1)


def is_rectangle(poly: RectilinearPolygon) -> bool:
    return len(poly.vertices) == 4


def decompose_rects(poly: RectilinearPolygon) -> list[Rect]:
    """Slab decomposition into interior-disjoint rectangles covering the polygon."""
    xs = sorted({x for x, _ in poly.vertices})
    horizontal = [
        (min(x1, x2), max(x1, x2), y1)
        for (x1, y1), (x2, y2) in poly.edges()
        if y1 == y2
    ]
    rects: list[Rect] = []
    for xa, xb in zip(xs, xs[1:]):
        mid = (xa + xb) / 2.0
        cuts = sorted(y for lo, hi, y in horizontal if lo < mid < hi)
        assert len(cuts) % 2 == 0
        for y1, y2 in zip(cuts[::2], cuts[1::2]):
            rects.append((xa, y1, xb, y2))
    return rects


def _rects_interior_overlap(ra: Sequence[Rect], rb: Sequence[Rect]) -> bool:
    for ax1, ay1, ax2, ay2 in ra:
        for bx1, by1, bx2, by2 in rb:
            if ax1 < bx2 and bx1 < ax2 and ay1 < by2 and by1 < ay2:
                return True
    return False


def interiors_overlap(a: RectilinearPolygon, b: RectilinearPolygon) -> bool:
    ax1, ay1, ax2, ay2 = a.bbox
    bx1, by1, bx2, by2 = b.bbox
    if ax1 >= bx2 or bx1 >= ax2 or ay1 >= by2 or by1 >= ay2:
        return False
    return _rects_interior_overlap(decompose_rects(a), decompose_rects(b))


def _directed_boundary(poly: RectilinearPolygon):
    """Edges split by orientation: horizontal -> (y, xlo, xhi, interior_above)."""
    hor = []
    ver = []
    for (x1, y1), (x2, y2) in poly.edges():
        if y1 == y2:
            hor.append((y1, min(x1, x2), max(x1, x2), x2 > x1))
        else:
            ver.append((x1, min(y1, y2), max(y1, y2), y2 < y1))
    return hor, ver


def shared_edge(a: RectilinearPolygon, b: RectilinearPolygon) -> int:
    """Total boundary length shared by two interior-disjoint polygons.

    Positive length defines abutment; corner contact contributes zero.
    """
    if interiors_overlap(a, b):
        raise GeometryError("polygons have overlapping interiors")
    ha, va = _directed_boundary(a)
    hb, vb = _directed_boundary(b)
    total = 0
    for ya, lo_a, hi_a, above_a in ha:
        for yb, lo_b, hi_b, above_b in hb:
            if ya == yb and above_a != above_b:
                total += max(0, min(hi_a, hi_b) - max(lo_a, lo_b))
    for xa, lo_a, hi_a, right_a in va:
        for xb, lo_b, hi_b, right_b in vb:
            if xa == xb and right_a != right_b:
                total += max(0, min(hi_a, hi_b) - max(lo_a, lo_b))
    return total


def polygon_from_cells(
    cells: set[tuple[int, int]], xs: Sequence[int], ys: Sequence[int]
) -> RectilinearPolygon:
    """Trace the outer boundary of a set of grid cells into a polygon.

    ``xs``/``ys`` are the sorted coordinate lines of the grid; cell (i, j)
    spans [xs[i], xs[i+1]] x [ys[j], ys[j+1]].  Raises MergeError when the
    union is disconnected, has a hole, or pinches to a point.
    """
    if not cells:
        raise MergeError("empty cell set")

    # Connectivity check by flood fill over the cell set.
    seen = set()
    stack = [next(iter(sorted(cells)))]
    while stack:
        c = stack.pop()
        if c in seen:
            continue
        seen.add(c)
        i, j = c
        for nb in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if nb in cells and nb not in seen:
                stack.append(nb)
    if seen != cells:
        raise MergeError("cell set is disconnected")

    if _cells_have_hole(cells):
        raise MergeError("union would create a hole")

    # Directed boundary edges, interior kept on the left.
    start_of: dict[Vertex, Vertex] = {}
    count = 0
    for (i, j) in cells:
        x1, x2 = xs[i], xs[i + 1]
        y1, y2 = ys[j], ys[j + 1]
        sides = (
            ((i, j - 1), (x1, y1), (x2, y1)),  # bottom, rightward
            ((i + 1, j), (x2, y1), (x2, y2)),  # right, upward
            ((i, j + 1), (x2, y2), (x1, y2)),  # top, leftward
            ((i - 1, j), (x1, y2), (x1, y1)),  # left, downward
        )
        for nb, p, q in sides:
            if nb not in cells:
                if p in start_of:
                    raise MergeError("union pinches to a point")
                start_of[p] = q
                count += 1

    start = min(start_of)
    ring = [start]
    cur = start_of[start]
    while cur != start:
        ring.append(cur)
        cur = start_of[cur]
    if len(ring) != count:
        raise MergeError("union boundary is not a single loop")
    return RectilinearPolygon(tuple(ring))


def _cells_have_hole(cells: set[tuple[int, int]]) -> bool:
    imin = min(i for i, _ in cells) - 1
    imax = max(i for i, _ in cells) + 1
    jmin = min(j for _, j in cells) - 1
    jmax = max(j for _, j in cells) + 1
    outside = set()
    stack = [(imin, jmin)]
    while stack:
        c = stack.pop()
        if c in outside or c in cells:
            continue
        i, j = c
        if not (imin <= i <= imax and jmin <= j <= jmax):
            continue
        outside.add(c)
        stack.extend(((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)))
    total = (imax - imin + 1) * (jmax - jmin + 1)
    return len(outside) + len(cells) != total


def merge_adjacent(
    a: RectilinearPolygon, b: RectilinearPolygon
) -> RectilinearPolygon:
    """Boolean union of two abutted polygons, renormalized.

    Raises MergeError for non-abutted inputs and for unions that would have
    a hole or a pinch point.
    """
    if shared_edge(a, b) == 0:
        raise MergeError("polygons are not abutted")
    xs = sorted({x for x, _ in a.vertices} | {x for x, _ in b.vertices})
    ys = sorted({y for _, y in a.vertices} | {y for _, y in b.vertices})
    cells = set()
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            mx = (xs[i] + xs[i + 1]) / 2.0
            my = (ys[j] + ys[j + 1]) / 2.0
            if a.contains_point(mx, my) or b.contains_point(mx, my):
                cells.add((i, j))
    merged = polygon_from_cells(cells, xs, ys)
    assert merged.area == a.area + b.area, "merge lost or created area"
    return merged


def congruence_key(poly: RectilinearPolygon) -> tuple[Vertex, ...]:
    """Canonical form under translation plus axis-aligned rotation/reflection."""
    best = None
    pts = poly.vertices
    transforms = (
        lambda x, y: (x, y),
        lambda x, y: (-y, x),
        lambda x, y: (-x, -y),
        lambda x, y: (y, -x),
        lambda x, y: (-x, y),
        lambda x, y: (y, x),
        lambda x, y: (x, -y),
        lambda x, y: (-y, -x),
    )
    for tf in transforms:
        q = [tf(x, y) for x, y in pts]
        dx = -min(x for x, _ in q)
        dy = -min(y for _, y in q)
        moved = [(x + dx, y + dy) for x, y in q]
        key = RectilinearPolygon(tuple(moved)).vertices
        if best is None or key < best:
            best = key
    return best


def congruence_orientation(poly: RectilinearPolygon, master: RectilinearPolygon) -> int:
    """Index of the D4 transform mapping ``master`` onto ``poly``; -1 if none."""
    transforms = (
        lambda x, y: (x, y),
        lambda x, y: (-y, x),
        lambda x, y: (-x, -y),
        lambda x, y: (y, -x),
        lambda x, y: (-x, y),
        lambda x, y: (y, x),
        lambda x, y: (x, -y),
        lambda x, y: (-y, -x),
    )
    target = poly.translate(-poly.bbox[0], -poly.bbox[1]).vertices
    for t, tf in enumerate(transforms):
        q = [tf(x, y) for x, y in master.vertices]
        dx = -min(x for x, _ in q)
        dy = -min(y for _, y in q)
        moved = RectilinearPolygon(tuple((x + dx, y + dy) for x, y in q))
        if moved.vertices == target:
            return t
    return -1


@dataclass(frozen=True)
class FixedOutline:
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or int(self.width) != self.width or int(self.height) != self.height:
            raise GeometryError("outline dimensions must be positive integers")

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def perimeter(self) -> int:
        return 2 * (self.width + self.height)

    def perimeter_point(self, s: float) -> tuple[float, float]:
        """Point at arc length ``s`` walking CCW from (0, 0)."""
        s = s % self.perimeter
        w, h = self.width, self.height
        if s <= w:
            return (s, 0.0)
        if s <= w + h:
            return (float(w), s - w)
        if s <= 2 * w + h:
            return (2 * w + h - s, float(h))
        return (0.0, 2 * (w + h) - s)

    def on_perimeter(self, x: float, y: float) -> bool:
        if x in (0, self.width) and 0 <= y <= self.height:
            return True
        if y in (0, self.height) and 0 <= x <= self.width:
            return True
        return False


@dataclass(frozen=True)
class Partition:
    """One placeable block of the layout."""

    id: int
    shape: RectilinearPolygon
    name: str = ""
    area: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "area", self.shape.area)
        if not self.name:
            object.__setattr__(self, "name", f"p{self.id}")

    @property
    def center(self) -> tuple[float, float]:
        return self.shape.bbox_center

    @property
    def bbox(self) -> Rect:
        return self.shape.bbox

    @property
    def aspect(self) -> float:
        return bbox_aspect(self.shape)


@dataclass(frozen=True)
class Terminal:
    """I/O pin fixed on the outline perimeter (half-grid resolution)."""

    id: int
    x: float
    y: float

    @property
    def name(self) -> str:
        return f"t{self.id}"

    @property
    def center(self) -> tuple[float, float]:
        return (self.x, self.y)


Locatable = Union[Partition, Terminal]


def manhattan_centroid_distance(a: Locatable, b: Locatable) -> float:
    """|dx| + |dy| between bounding-box centers (partitions) or pins (terminals)."""
    ax, ay = a.center
    bx, by = b.center
    return abs(ax - bx) + abs(ay - by)
