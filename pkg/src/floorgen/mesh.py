"""Random mesh decomposition of the fixed outline into an initial cell grid."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, RectilinearPolygon


class MeshError(GeometryError):
    """Outline cannot host the requested grid."""


@dataclass(frozen=True)
class PartitionGrid:
    """Tensor-product grid of cells induced by interior x/y cut lines.

    ``xs``/``ys`` are the sorted coordinate lines including 0 and W (resp. H),
    so cell (i, j) spans [xs[i], xs[i+1]] x [ys[j], ys[j+1]].
    """

    xs: tuple[int, ...]
    ys: tuple[int, ...]

    def __post_init__(self):
        for arr in (self.xs, self.ys):
            if len(arr) < 2 or list(arr) != sorted(set(arr)):
                raise MeshError("cut coordinates must be distinct and sorted")

    @property
    def nx(self) -> int:
        return len(self.xs) - 1

    @property
    def ny(self) -> int:
        return len(self.ys) - 1

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def width(self) -> int:
        return self.xs[-1] - self.xs[0]

    @property
    def height(self) -> int:
        return self.ys[-1] - self.ys[0]

    def cells(self) -> list[tuple[int, int]]:
        return [(i, j) for j in range(self.ny) for i in range(self.nx)]

    def cell_size(self, i: int, j: int) -> tuple[int, int]:
        return (self.xs[i + 1] - self.xs[i], self.ys[j + 1] - self.ys[j])

    def cell_polygon(self, i: int, j: int) -> RectilinearPolygon:
        return RectilinearPolygon.from_rect(
            self.xs[i], self.ys[j], self.xs[i + 1], self.ys[j + 1]
        )

    def adjacent_pairs(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        out = []
        for j in range(self.ny):
            for i in range(self.nx):
                if i + 1 < self.nx:
                    out.append(((i, j), (i + 1, j)))
                if j + 1 < self.ny:
                    out.append(((i, j), (i, j + 1)))
        return out


def _grid_choices(n_cells_lo: int, n_cells_hi: int, target: int, w: int, h: int):
    """Feasible (count, nx, ny) factorizations, best first.

    Ranked by |count - target|, then by squareness, then orientation that
    follows the outline's own aspect.
    """
    options = []
    for m in range(n_cells_lo, n_cells_hi + 1):
        for nx in range(1, m + 1):
            if m % nx:
                continue
            ny = m // nx
            if nx > w or ny > h:
                continue
            squareness = max(nx, ny) / min(nx, ny)
            if w >= h:
                orient = 0 if nx >= ny else 1
            else:
                orient = 0 if ny >= nx else 1
            options.append((abs(m - target), squareness, orient, m, nx, ny))
    options.sort()
    return [(m, nx, ny) for _, _, _, m, nx, ny in options]


def create_mesh(n_parts: int, w: int, h: int, rng: np.random.Generator) -> PartitionGrid:
    """Cut the W x H outline into 4x-6x ``n_parts`` cells at random positions.

    The realized cell count is the achievable factorization closest to the
    sampled multiple of ``n_parts``.
    """
    if n_parts < 2:
        raise MeshError("need at least 2 partitions")
    factor = int(rng.integers(4, 7))
    target = factor * n_parts
    choices = _grid_choices(4 * n_parts, 6 * n_parts, target, w, h)
    if not choices:
        raise MeshError(
            f"outline {w}x{h} cannot host {4 * n_parts}..{6 * n_parts} cells"
        )
    _, nx, ny = choices[0]
    x_cuts = sorted(int(v) for v in rng.choice(np.arange(1, w), size=nx - 1, replace=False)) if nx > 1 else []
    y_cuts = sorted(int(v) for v in rng.choice(np.arange(1, h), size=ny - 1, replace=False)) if ny > 1 else []
    return PartitionGrid(xs=(0, *x_cuts, w), ys=(0, *y_cuts, h))
