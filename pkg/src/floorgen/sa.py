"""Simulated annealing over a B*-tree floorplan representation.

Shared by the packing-based generator (outline fit + whitespace cost) and
the constraint-penalty baseline solver.  Blocks are soft rectangles with an
integer width menu; height is area / width, so block areas are exact.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from .layout import LayoutInstance
from .metrics import EPS

log = logging.getLogger(__name__)

SA_SCHEMA = "floorset-sa v1"


@dataclass(frozen=True)
class SAParams:
    """Annealing schedule, cost weights, and reproducibility knobs."""

    initial_temperature: Union[float, None] = None  # None: calibrate for ~0.9 acceptance
    cooling_ratio: float = 0.95
    moves_per_temperature: Union[int, None] = None  # None: 100 * n_blocks
    stop_temperature: Union[float, None] = None  # None: initial * 1e-4
    w_area: float = 1.0
    w_wl: float = 1.0
    w_violation: float = 10.0
    w_outline: float = 10.0
    retry_budget: int = 3
    seed: int = 0
    freeze_blocks: tuple[int, ...] = ()
    polish_moves: int = 0  # greedy descent moves appended after the schedule

    def __post_init__(self):
        if not 0.0 < self.cooling_ratio < 1.0:
            raise ValueError("cooling ratio must be in (0, 1)")
        for w in (self.w_area, self.w_wl, self.w_violation, self.w_outline):
            if w < 0:
                raise ValueError("cost weights must be non-negative")

    @classmethod
    def from_json(cls, obj: dict) -> "SAParams":
        if obj.get("schema") != SA_SCHEMA:
            raise ValueError(f"expected schema {SA_SCHEMA!r}, got {obj.get('schema')!r}")
        kw = {k: v for k, v in obj.items() if k != "schema"}
        if "freeze_blocks" in kw:
            kw["freeze_blocks"] = tuple(kw["freeze_blocks"])
        return cls(**kw)

    def to_json(self) -> dict:
        return {
            "schema": SA_SCHEMA,
            "initial_temperature": self.initial_temperature,
            "cooling_ratio": self.cooling_ratio,
            "moves_per_temperature": self.moves_per_temperature,
            "stop_temperature": self.stop_temperature,
            "w_area": self.w_area,
            "w_wl": self.w_wl,
            "w_violation": self.w_violation,
            "w_outline": self.w_outline,
            "retry_budget": self.retry_budget,
            "seed": self.seed,
            "freeze_blocks": list(self.freeze_blocks),
            "polish_moves": self.polish_moves,
        }


def load_sa_params(path) -> SAParams:
    return SAParams.from_json(json.loads(Path(path).read_text()))


def save_sa_params(params: SAParams, path) -> None:
    Path(path).write_text(json.dumps(params.to_json(), indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class SoftBlock:
    """Reshapeable block with a finite (width, height) variant menu."""

    id: int
    area: float
    widths: tuple[int, ...]
    heights: tuple[float, ...]
    init_idx: int = 0

    def __post_init__(self):
        if not self.widths or len(self.widths) != len(self.heights):
            raise ValueError("block needs a non-empty width/height menu")
        if self.area <= 0:
            raise ValueError("block area must be positive")

    @classmethod
    def exact_area(cls, bid: int, area: float, ar_lo: float, ar_hi: float) -> "SoftBlock":
        """Continuous-height variants: integer widths, height = area / width.

        Used by the baseline solver, where block areas must match the golden
        areas exactly.  Falls back to the mid-range width when no integer
        width fits the ratio window.
        """
        lo_i = max(1, math.ceil(math.sqrt(max(ar_lo, 1e-12) * area) - 1e-9))
        hi_i = max(1, math.floor(math.sqrt(ar_hi * area) + 1e-9))
        if hi_i >= lo_i:
            widths = tuple(range(lo_i, hi_i + 1))
        else:
            mid = math.sqrt(math.sqrt(ar_lo * ar_hi) * area)
            widths = (max(1, round(mid)),)
        heights = tuple(area / w for w in widths)
        init = min(range(len(widths)), key=lambda i: abs(widths[i] - math.sqrt(area)))
        return cls(id=bid, area=float(area), widths=widths, heights=heights, init_idx=init)

    @classmethod
    def integral(
        cls, bid: int, area: int, ar_lo: float, ar_hi: float, init_w: int, init_h: int
    ) -> "SoftBlock":
        """Integer-dimension variants covering at least ``area``.

        Heights are rounded up, so reshaping can only grow a block; the
        initial (exact) pair is always in the menu.
        """
        pairs = {(init_w, init_h)}
        lo_i = max(1, math.ceil(math.sqrt(max(ar_lo, 1e-12) * area) - 1e-9))
        hi_i = max(1, math.floor(math.sqrt(ar_hi * area) + 1e-9))
        for w in range(lo_i, hi_i + 1):
            h = math.ceil(area / w)
            if ar_lo - 1e-9 <= w / h <= ar_hi + 1e-9:
                pairs.add((w, h))
        menu = sorted(pairs)
        init = menu.index((init_w, init_h))
        return cls(
            id=bid,
            area=float(area),
            widths=tuple(w for w, _ in menu),
            heights=tuple(float(h) for _, h in menu),
            init_idx=init,
        )


class FloorplanState:
    """B*-tree structure plus per-block width selection."""

    __slots__ = ("left", "right", "parent", "root", "wsel")

    def __init__(self, n: int):
        self.left = [-1] * n
        self.right = [-1] * n
        self.parent = [-1] * n
        self.root = 0
        self.wsel = [0] * n

    def clone(self) -> "FloorplanState":
        c = FloorplanState.__new__(FloorplanState)
        c.left = list(self.left)
        c.right = list(self.right)
        c.parent = list(self.parent)
        c.root = self.root
        c.wsel = list(self.wsel)
        return c

    @property
    def n(self) -> int:
        return len(self.left)

    def check(self) -> None:
        """Structural sanity: every block reachable exactly once."""
        seen = set()
        stack = [self.root]
        while stack:
            v = stack.pop()
            assert v not in seen, "node visited twice"
            seen.add(v)
            for c in (self.left[v], self.right[v]):
                if c != -1:
                    assert self.parent[c] == v, "parent pointer broken"
                    stack.append(c)
        assert len(seen) == self.n, "tree does not cover all blocks"
        assert self.parent[self.root] == -1


def chain_tree(blocks: Sequence[SoftBlock]) -> FloorplanState:
    """All blocks in one row (left-child chain), in id order."""
    n = len(blocks)
    st = FloorplanState(n)
    st.wsel = [b.init_idx for b in blocks]
    for i in range(1, n):
        st.left[i - 1] = i
        st.parent[i] = i - 1
    return st


def shelf_tree(blocks: Sequence[SoftBlock], max_width: int) -> FloorplanState:
    """First-fit-decreasing-height shelves, each at most ``max_width`` wide."""
    n = len(blocks)
    st = FloorplanState(n)
    st.wsel = [b.init_idx for b in blocks]
    order = sorted(range(n), key=lambda i: (-blocks[i].heights[st.wsel[i]], i))
    rows: list[list[int]] = []
    used: list[int] = []
    for i in order:
        w = blocks[i].widths[st.wsel[i]]
        for r in range(len(rows)):
            if used[r] + w <= max_width:
                rows[r].append(i)
                used[r] += w
                break
        else:
            rows.append([i])
            used.append(w)
    st.root = rows[0][0]
    st.parent[st.root] = -1
    for r, row in enumerate(rows):
        if r > 0:
            head, prev_head = row[0], rows[r - 1][0]
            st.right[prev_head] = head
            st.parent[head] = prev_head
        for a, b in zip(row, row[1:]):
            st.left[a] = b
            st.parent[b] = a
    return st


def _swap_structural(st: FloorplanState, a: int, b: int) -> None:
    """Exchange the tree roles of blocks a and b (relabel the structure)."""

    def pi(x: int) -> int:
        return b if x == a else (a if x == b else x)

    st.left = [pi(st.left[pi(i)]) for i in range(st.n)]
    st.right = [pi(st.right[pi(i)]) for i in range(st.n)]
    st.parent = [pi(st.parent[pi(i)]) for i in range(st.n)]
    st.root = pi(st.root)


def _detach_leaf(st: FloorplanState, b: int) -> None:
    p = st.parent[b]
    assert p != -1, "cannot detach the root"
    if st.left[p] == b:
        st.left[p] = -1
    else:
        st.right[p] = -1
    st.parent[b] = -1


def _remove_block(st: FloorplanState, b: int, rng: np.random.Generator) -> None:
    """Push b down by structural swaps until it is a leaf, then detach."""
    while st.left[b] != -1 or st.right[b] != -1:
        kids = [c for c in (st.left[b], st.right[b]) if c != -1]
        c = kids[int(rng.integers(0, len(kids)))]
        _swap_structural(st, b, c)
    _detach_leaf(st, b)


def _insert_block(st: FloorplanState, b: int, p: int, side: int, rng: np.random.Generator) -> None:
    """Attach detached b as the ``side`` child of p, pushing any existing
    child below b."""
    slot = st.left if side == 0 else st.right
    c = slot[p]
    slot[p] = b
    st.parent[b] = p
    if c != -1:
        s2 = int(rng.integers(0, 2))
        if s2 == 0:
            st.left[b] = c
        else:
            st.right[b] = c
        st.parent[c] = b


def perturb(
    state: FloorplanState,
    blocks: Sequence[SoftBlock],
    rng: np.random.Generator,
    frozen: frozenset[int] = frozenset(),
) -> FloorplanState:
    """One random move: swap two blocks, relocate a block, or reshape one."""
    st = state.clone()
    n = st.n
    movable = [i for i in range(n) if i not in frozen]
    if not movable:
        return st
    for _ in range(32):  # resample until a legal move applies
        kind = int(rng.integers(0, 3))
        if kind == 0 and len(movable) >= 2:  # swap
            a, b = rng.choice(len(movable), size=2, replace=False)
            _swap_structural(st, movable[int(a)], movable[int(b)])
            return st
        if kind == 1 and n >= 2:  # relocate
            b = movable[int(rng.integers(0, len(movable)))]
            _remove_block(st, b, rng)
            p_choices = [i for i in range(n) if i != b]
            p = p_choices[int(rng.integers(0, len(p_choices)))]
            side = int(rng.integers(0, 2))
            _insert_block(st, b, p, side, rng)
            return st
        if kind == 2:  # reshape
            cands = [i for i in movable if len(blocks[i].widths) > 1]
            if not cands:
                continue
            b = cands[int(rng.integers(0, len(cands)))]
            cur = st.wsel[b]
            nw = int(rng.integers(0, len(blocks[b].widths) - 1))
            st.wsel[b] = nw if nw < cur else nw + 1
            return st
    return st


@dataclass
class Placement:
    """Decoded coordinates; x/w integral, y/h may be fractional."""

    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    h: np.ndarray
    bw: float
    bh: float


class Decoder:
    """Skyline-based B*-tree decoding with a reusable buffer."""

    def __init__(self, blocks: Sequence[SoftBlock]):
        self.blocks = blocks
        self.widths = [b.widths for b in blocks]
        self.heights = [b.heights for b in blocks]
        total = int(sum(max(b.widths) for b in blocks)) + 1
        self._sky = np.zeros(total, dtype=float)
        self._used = total

    def decode(self, st: FloorplanState) -> Placement:
        n = st.n
        sky = self._sky
        sky[: self._used] = 0.0
        xs = [0] * n
        ys = [0.0] * n
        ws = [0] * n
        hs = [0.0] * n
        xpos = [0] * n
        used = 0
        bh = 0.0
        stack = [st.root]
        left, right, wsel = st.left, st.right, st.wsel
        while stack:
            v = stack.pop()
            xv = xpos[v]
            w = int(self.widths[v][wsel[v]])
            h = float(self.heights[v][wsel[v]])
            seg = sky[xv : xv + w]
            yv = float(seg.max())
            seg[:] = yv + h
            xs[v], ys[v], ws[v], hs[v] = xv, yv, w, h
            if xv + w > used:
                used = xv + w
            if yv + h > bh:
                bh = yv + h
            r, l = right[v], left[v]
            if r != -1:
                xpos[r] = xv
                stack.append(r)
            if l != -1:
                xpos[l] = xv + w
                stack.append(l)
        self._used = used
        return Placement(
            x=np.asarray(xs, dtype=float),
            y=np.asarray(ys, dtype=float),
            w=np.asarray(ws, dtype=float),
            h=np.asarray(hs, dtype=float),
            bw=float(used),
            bh=bh,
        )


def decode(state: FloorplanState, blocks: Sequence[SoftBlock]) -> Placement:
    """One-shot decode (tests / casual callers)."""
    return Decoder(blocks).decode(state)


@dataclass(frozen=True)
class CostBreakdown:
    area_term: float = 0.0
    wl_term: float = 0.0
    b2b_wl: float = 0.0
    t2b_wl: float = 0.0
    violation_count: int = 0
    overflow_term: float = 0.0

    def total(self, p: SAParams) -> float:
        return (
            p.w_area * self.area_term
            + p.w_wl * self.wl_term
            + p.w_violation * self.violation_count
            + p.w_outline * self.overflow_term
        )


CostFn = Callable[[Placement], CostBreakdown]


@dataclass
class PlacedBlock:
    id: int
    x: float
    y: float
    w: float
    h: float


@dataclass
class PlacementSolution:
    blocks: list[PlacedBlock]
    bbox: tuple[float, float]
    breakdown: CostBreakdown
    cost: float

    def block_map(self) -> dict[int, PlacedBlock]:
        return {b.id: b for b in self.blocks}


@dataclass
class AnnealResult:
    best: PlacementSolution
    initial_cost: float
    n_moves: int
    trajectory: list[CostBreakdown] = field(default_factory=list)


def _solution(pl: Placement, br: CostBreakdown, cost: float, ids: Sequence[int]) -> PlacementSolution:
    blocks = [
        PlacedBlock(ids[i], float(pl.x[i]), float(pl.y[i]), float(pl.w[i]), float(pl.h[i]))
        for i in range(len(ids))
    ]
    return PlacementSolution(blocks=blocks, bbox=(pl.bw, pl.bh), breakdown=br, cost=cost)


def anneal(
    blocks: Sequence[SoftBlock],
    initial,
    cost_fn: CostFn,
    params: SAParams,
    rng: np.random.Generator,
    *,
    decode_fn: Union[Callable, None] = None,
    perturb_fn: Union[Callable, None] = None,
    record_trajectory: bool = False,
    stop: Union[Callable[[CostBreakdown], bool], None] = None,
) -> AnnealResult:
    """Classic annealing: uphill moves accepted with exp(-dc/T).

    Runs over the B*-tree representation by default; packing callers swap in
    another state representation through ``decode_fn`` / ``perturb_fn``.
    Returns the minimum-cost placement encountered; with ``stop`` given the
    loop exits early once an accepted state satisfies it.
    """
    frozen = frozenset(params.freeze_blocks)
    if decode_fn is None:
        dec = Decoder(blocks)
        decode_fn = dec.decode
    if perturb_fn is None:
        perturb_fn = lambda st, r: perturb(st, blocks, r, frozen)  # noqa: E731
    ids = [b.id for b in blocks]
    n = len(blocks)

    cur = initial.clone()
    pl = decode_fn(cur)
    cur_br = cost_fn(pl)
    cur_cost = cur_br.total(params)
    initial_cost = cur_cost
    best_pl, best_br, best_cost = pl, cur_br, cur_cost
    trajectory = [cur_br] if record_trajectory else []

    t0 = params.initial_temperature
    if t0 is None:
        ups = []
        probe = cur
        for _ in range(100):
            cand = perturb_fn(probe, rng)
            d = cost_fn(decode_fn(cand)).total(params) - cur_cost
            if d > 0:
                ups.append(d)
        t0 = (sum(ups) / len(ups)) / 0.10536051565782628 if ups else 1.0
    t0 = max(t0, 1e-12)
    t_stop = params.stop_temperature if params.stop_temperature is not None else t0 * 1e-4
    mpt = params.moves_per_temperature if params.moves_per_temperature is not None else 100 * n

    n_moves = 0
    stopped = stop is not None and stop(cur_br)
    t = t0
    while t > t_stop and not stopped:
        for _ in range(mpt):
            cand = perturb_fn(cur, rng)
            cand_pl = decode_fn(cand)
            cand_br = cost_fn(cand_pl)
            cand_cost = cand_br.total(params)
            n_moves += 1
            dc = cand_cost - cur_cost
            if dc <= 0 or float(rng.random()) < math.exp(-dc / t):
                cur, cur_br, cur_cost = cand, cand_br, cand_cost
                if record_trajectory:
                    trajectory.append(cur_br)
                if cur_cost < best_cost:
                    best_pl, best_br, best_cost = cand_pl, cur_br, cur_cost
                if stop is not None and stop(cur_br):
                    stopped = True
                    break
        t *= params.cooling_ratio

    for _ in range(params.polish_moves if not stopped else 0):
        cand = perturb_fn(cur, rng)
        cand_pl = decode_fn(cand)
        cand_br = cost_fn(cand_pl)
        cand_cost = cand_br.total(params)
        n_moves += 1
        if cand_cost < cur_cost:
            cur, cur_br, cur_cost = cand, cand_br, cand_cost
            if record_trajectory:
                trajectory.append(cur_br)
            if cur_cost < best_cost:
                best_pl, best_br, best_cost = cand_pl, cur_br, cur_cost

    return AnnealResult(
        best=_solution(best_pl, best_br, best_cost, ids),
        initial_cost=initial_cost,
        n_moves=n_moves,
        trajectory=trajectory,
    )


def select_best(trajectory: Sequence[CostBreakdown], params: SAParams) -> CostBreakdown:
    """Re-rank a recorded trajectory under (possibly different) weights."""
    best = trajectory[0]
    best_cost = best.total(params)
    for br in trajectory[1:]:
        c = br.total(params)
        if c < best_cost:
            best, best_cost = br, c
    return best


# ---------------------------------------------------------------------------
# Skyline-sequence packing representation (fixed strip width)

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is an optional speedup
    def _njit(*a, **k):
        def wrap(f):
            return f
        return wrap if not (len(a) == 1 and callable(a[0])) else a[0]


@_njit(cache=True)
def _skyline_place(order, wsel, menu_w, menu_h, menu_off, W):  # pragma: no cover
    n = order.shape[0]
    sky = np.zeros(W, np.float64)
    xs = np.zeros(n, np.int64)
    ys = np.zeros(n, np.float64)
    ws = np.zeros(n, np.int64)
    hs = np.zeros(n, np.float64)
    bw = 0
    for k in range(n):
        i = order[k]
        w = menu_w[menu_off[i] + wsel[i]]
        h = menu_h[menu_off[i] + wsel[i]]
        if w >= W:
            x = 0
            y = sky[0]
            for t in range(W):
                if sky[t] > y:
                    y = sky[t]
        else:
            best_y = 1e300
            x = 0
            s = 0
            while s <= W - w:
                m = -1.0
                blocker = s
                for t in range(s, s + w):
                    if sky[t] >= m:
                        m = sky[t]
                        blocker = t
                if m < best_y:
                    best_y = m
                    x = s
                # no window containing the blocking column can do better
                s = blocker + 1
            y = best_y
        for t in range(x, x + w if x + w <= W else W):
            sky[t] = y + h
        xs[i] = x
        ys[i] = y
        ws[i] = w
        hs[i] = h
        if x + w > bw:
            bw = x + w
    bh = 0.0
    for t in range(W):
        if sky[t] > bh:
            bh = sky[t]
    return xs, ys, ws, hs, bw, bh


class SeqState:
    """Placement order plus per-block variant selection."""

    __slots__ = ("order", "wsel")

    def __init__(self, order: list[int], wsel: list[int]):
        self.order = order
        self.wsel = wsel

    def clone(self) -> "SeqState":
        c = SeqState.__new__(SeqState)
        c.order = list(self.order)
        c.wsel = list(self.wsel)
        return c


class SkylinePacker:
    """Drop blocks onto a width-bounded skyline in sequence order.

    Every block lands at the lowest (then leftmost) position whose span fits
    inside the strip, so horizontal containment holds by construction and
    annealing only has to fight the vertical extent.
    """

    def __init__(self, blocks: Sequence[SoftBlock], strip_width: int):
        self.blocks = blocks
        self.strip_width = int(strip_width)
        self.widths = [b.widths for b in blocks]
        self.heights = [b.heights for b in blocks]
        self._menu_w = np.array([w for b in blocks for w in b.widths], dtype=np.int64)
        self._menu_h = np.array([h for b in blocks for h in b.heights], dtype=np.float64)
        offs = np.zeros(len(blocks), dtype=np.int64)
        acc = 0
        for i, b in enumerate(blocks):
            offs[i] = acc
            acc += len(b.widths)
        self._menu_off = offs

    def initial(self) -> SeqState:
        wsel = [b.init_idx for b in self.blocks]
        order = sorted(
            range(len(self.blocks)), key=lambda i: (-self.heights[i][wsel[i]], i)
        )
        return SeqState(order, wsel)

    def decode(self, st: SeqState) -> Placement:
        xs, ys, ws, hs, bw, bh = _skyline_place(
            np.asarray(st.order, dtype=np.int64),
            np.asarray(st.wsel, dtype=np.int64),
            self._menu_w,
            self._menu_h,
            self._menu_off,
            self.strip_width,
        )
        return Placement(
            x=xs.astype(np.float64),
            y=ys,
            w=ws.astype(np.float64),
            h=hs,
            bw=float(bw),
            bh=float(bh),
        )

    def perturb(self, st: SeqState, rng: np.random.Generator) -> SeqState:
        out = st.clone()
        n = len(out.order)
        for _ in range(8):
            kind = int(rng.integers(0, 3))
            if kind == 0 and n >= 2:  # swap two sequence positions
                a, b = rng.choice(n, size=2, replace=False)
                out.order[a], out.order[b] = out.order[b], out.order[a]
                return out
            if kind == 1 and n >= 2:  # relocate one block in the sequence
                a = int(rng.integers(0, n))
                v = out.order.pop(a)
                b = int(rng.integers(0, n))
                out.order.insert(b, v)
                return out
            if kind == 2:  # reshape
                cands = [i for i in range(n) if len(self.widths[i]) > 1]
                if not cands:
                    continue
                i = cands[int(rng.integers(0, len(cands)))]
                cur = out.wsel[i]
                nw = int(rng.integers(0, len(self.widths[i]) - 1))
                out.wsel[i] = nw if nw < cur else nw + 1
                return out
        return out


# ---------------------------------------------------------------------------
# Constraint-penalty baseline on parsed golden problems


def _baseline_blocks(layout: LayoutInstance) -> list[SoftBlock]:
    blocks = []
    for p in sorted(layout.partitions, key=lambda p: p.id):
        lo, hi = layout.constraints.shape_range.get(p.id, (0.25, 4.0))
        blocks.append(SoftBlock.exact_area(p.id, float(p.area), lo, hi))
    return blocks


def make_baseline_cost(layout: LayoutInstance, params: SAParams) -> CostFn:
    """Cost closure: normalized bbox area + normalized weighted wirelength +
    violation-count penalty + outline-overrun penalty."""
    outline = layout.outline
    W, H = float(outline.width), float(outline.height)
    ids = sorted(p.id for p in layout.partitions)
    idx = {pid: i for i, pid in enumerate(ids)}
    cs = layout.constraints

    b2b_a = np.array([idx[n.a] for n in layout.nets if n.kind == "b2b"], dtype=int)
    b2b_b = np.array([idx[n.b] for n in layout.nets if n.kind == "b2b"], dtype=int)
    b2b_w = np.array([n.weight for n in layout.nets if n.kind == "b2b"])
    tmap = {t.id: t for t in layout.terminals}
    t2b_p = np.array([idx[n.b] for n in layout.nets if n.kind == "t2b"], dtype=int)
    t2b_x = np.array([tmap[n.a].x for n in layout.nets if n.kind == "t2b"])
    t2b_y = np.array([tmap[n.a].y for n in layout.nets if n.kind == "t2b"])
    t2b_w = np.array([n.weight for n in layout.nets if n.kind == "t2b"])

    wl_norm = None
    if layout.labels is not None:
        g = layout.labels[1] + layout.labels[2]
        wl_norm = g if g > 0 else None

    n = len(ids)
    shape_lo = np.full(n, -np.inf)
    shape_hi = np.full(n, np.inf)
    for pid, (lo, hi) in cs.shape_range.items():
        shape_lo[idx[pid]] = lo
        shape_hi[idx[pid]] = hi
    boundary = [(idx[pid], edges) for pid, edges in sorted(cs.boundary.items())]
    preplaced = [(idx[pid], float(px), float(py)) for pid, (px, py) in sorted(cs.preplaced.items())]
    clusters = [np.array([idx[pid] for pid in c], dtype=int) for c in cs.clusters]
    groups = [np.array([idx[pid] for pid in g], dtype=int) for g in cs.multi_inst]

    def cost(pl: Placement) -> CostBreakdown:
        x, y, w, h = pl.x, pl.y, pl.w, pl.h
        cx = x + w * 0.5
        cy = y + h * 0.5
        b2b = float(
            np.sum(b2b_w * (np.abs(cx[b2b_a] - cx[b2b_b]) + np.abs(cy[b2b_a] - cy[b2b_b])))
        ) if len(b2b_a) else 0.0
        t2b = float(
            np.sum(t2b_w * (np.abs(t2b_x - cx[t2b_p]) + np.abs(t2b_y - cy[t2b_p])))
        ) if len(t2b_p) else 0.0
        wl_raw = b2b + t2b
        wl_term = wl_raw / wl_norm if wl_norm else wl_raw

        ratio = w / h
        viol = int(np.sum((ratio < shape_lo - EPS) | (ratio > shape_hi + EPS)))
        for i, edges in boundary:
            ok = True
            for e in edges:
                if e == "LEFT":
                    ok &= abs(x[i]) < EPS
                elif e == "RIGHT":
                    ok &= abs(x[i] + w[i] - W) < EPS
                elif e == "BOTTOM":
                    ok &= abs(y[i]) < EPS
                else:
                    ok &= abs(y[i] + h[i] - H) < EPS
            if not ok:
                viol += 1
        for i, px, py in preplaced:
            if abs(x[i] - px) > EPS or abs(y[i] - py) > EPS:
                viol += 1
        for members in clusters:
            k = len(members)
            parent = list(range(k))

            def find(i):
                while parent[i] != i:
                    parent[i] = parent[parent[i]]
                    i = parent[i]
                return i

            for ii in range(k):
                a = members[ii]
                for jj in range(ii + 1, k):
                    b = members[jj]
                    x_meet = abs(x[a] + w[a] - x[b]) < EPS or abs(x[b] + w[b] - x[a]) < EPS
                    y_meet = abs(y[a] + h[a] - y[b]) < EPS or abs(y[b] + h[b] - y[a]) < EPS
                    y_olap = min(y[a] + h[a], y[b] + h[b]) - max(y[a], y[b])
                    x_olap = min(x[a] + w[a], x[b] + w[b]) - max(x[a], x[b])
                    if (x_meet and y_olap > EPS) or (y_meet and x_olap > EPS):
                        parent[find(ii)] = find(jj)
            if len({find(i) for i in range(k)}) > 1:
                viol += 1
        for members in groups:
            dims = {
                (round(min(w[i], h[i]), 6), round(max(w[i], h[i]), 6)) for i in members
            }
            if len(dims) > 1:
                viol += 1

        over = max(0.0, pl.bw - W) / W + max(0.0, pl.bh - H) / H
        return CostBreakdown(
            area_term=pl.bw * pl.bh / (W * H),
            wl_term=wl_term,
            b2b_wl=b2b,
            t2b_wl=t2b,
            violation_count=viol,
            overflow_term=over,
        )

    return cost


def solve_baseline(
    layout: LayoutInstance,
    params: SAParams,
    *,
    record_trajectory: bool = False,
) -> AnnealResult:
    """Run the constraint-penalty annealer on one golden problem.

    Golden partitions are re-solved as soft rectangles of the same area with
    their annotated aspect-ratio ranges; golden positions are never used
    (pre-placement anchors enter only through the penalty).
    """
    blocks = _baseline_blocks(layout)
    rng = np.random.default_rng(params.seed)
    initial = shelf_tree(blocks, layout.outline.width)
    cost_fn = make_baseline_cost(layout, params)
    return anneal(
        blocks,
        initial,
        cost_fn,
        params,
        rng,
        record_trajectory=record_trajectory,
    )
