"""Layout data model shared by the generators, metrics, and I/O."""
from __future__ import annotations

from dataclasses import dataclass, field

from .geometry import FixedOutline, Partition, Terminal

# Outline edges a boundary constraint can reference.
EDGES = ("LEFT", "RIGHT", "TOP", "BOTTOM")

# (edge, edge) pairs that form a corner.
CORNERS = (
    ("LEFT", "BOTTOM"),
    ("LEFT", "TOP"),
    ("RIGHT", "BOTTOM"),
    ("RIGHT", "TOP"),
)

MODE_PRIME = "Prime"
MODE_LITE = "Lite"


@dataclass(frozen=True)
class Net:
    """2-pin weighted net.

    kind "b2b": endpoints are partition ids (a < b).
    kind "t2b": endpoint a is a terminal id, endpoint b a partition id.
    """

    kind: str
    a: int
    b: int
    weight: float

    def __post_init__(self):
        if self.kind not in ("b2b", "t2b"):
            raise ValueError(f"unknown net kind {self.kind!r}")
        if self.kind == "b2b" and self.a == self.b:
            raise ValueError("self-loop net")
        if not (0.0 < self.weight <= 1.0):
            raise ValueError(f"net weight {self.weight} outside (0, 1]")


@dataclass
class ConstraintSet:
    """Hard placement constraints annotated on a layout."""

    boundary: dict[int, tuple[str, ...]] = field(default_factory=dict)
    preplaced: dict[int, tuple[int, int]] = field(default_factory=dict)
    clusters: list[tuple[int, ...]] = field(default_factory=list)
    multi_inst: list[tuple[int, ...]] = field(default_factory=list)
    shape_range: dict[int, tuple[float, float]] = field(default_factory=dict)

    def validate(self) -> None:
        seen: set[int] = set()
        for c in self.clusters:
            if len(c) < 2:
                raise ValueError("cluster with fewer than 2 members")
            if seen & set(c):
                raise ValueError("clusters are not disjoint")
            seen |= set(c)
        seen = set()
        for g in self.multi_inst:
            if len(g) < 2:
                raise ValueError("multi-instantiation group needs >= 2 members")
            if seen & set(g):
                raise ValueError("multi-instantiation groups are not disjoint")
            seen |= set(g)
        for pid, edges in self.boundary.items():
            if not edges or len(edges) > 2:
                raise ValueError(f"boundary tag for {pid} must be 1 edge or a corner pair")
            for e in edges:
                if e not in EDGES:
                    raise ValueError(f"unknown edge tag {e!r}")
            if len(edges) == 2 and tuple(sorted(edges)) not in {
                tuple(sorted(c)) for c in CORNERS
            }:
                raise ValueError(f"edge pair {edges} is not a corner")

    def is_empty(self) -> bool:
        return not (
            self.boundary or self.preplaced or self.clusters or self.multi_inst
        )


@dataclass(frozen=True)
class Provenance:
    seed: int
    index: int
    mode: str


@dataclass
class LayoutInstance:
    """One benchmark: outline, blocks, pins, nets, constraints, labels."""

    outline: FixedOutline
    partitions: list[Partition]
    terminals: list[Terminal]
    nets: list[Net]
    constraints: ConstraintSet
    provenance: Provenance
    labels: tuple[float, float, float] | None = None
    diag: dict = field(default_factory=dict, compare=False)

    def partition_by_id(self, pid: int) -> Partition:
        for p in self.partitions:
            if p.id == pid:
                return p
        raise KeyError(f"unknown partition id {pid}")

    def terminal_by_id(self, tid: int) -> Terminal:
        for t in self.terminals:
            if t.id == tid:
                return t
        raise KeyError(f"unknown terminal id {tid}")

    @property
    def n_parts(self) -> int:
        return len(self.partitions)

    @property
    def n_terms(self) -> int:
        return len(self.terminals)

    def sort_nets(self) -> None:
        """Canonical net order: b2b by (a, b), then t2b by (a, b)."""
        order = {"b2b": 0, "t2b": 1}
        self.nets.sort(key=lambda n: (order[n.kind], n.a, n.b))
