"""Topology of the hexagonal game board.

Cells are pointy-top hexagons in an offset-row arrangement (odd rows
shifted half a cell to the right) and are indexed row-wise, left to
right, top to bottom: cell ``i`` sits at row ``i // cols``, column
``i % cols``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Offset deltas (drow, dcol) for pointy-top hexes, odd rows shifted right.
_EVEN_ROW_DELTAS = ((-1, -1), (-1, 0), (0, -1), (0, 1), (1, -1), (1, 0))
_ODD_ROW_DELTAS = ((-1, 0), (-1, 1), (0, -1), (0, 1), (1, 0), (1, 1))

LAYOUT_NAME = "odd-r"


@dataclass(frozen=True)
class HexGrid:
    """A rows x cols board of hexagonal cells with odd-r offset adjacency."""

    rows: int = 6
    cols: int = 6
    layout: str = LAYOUT_NAME

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.layout != LAYOUT_NAME:
            raise ValueError(f"unsupported layout {self.layout!r}")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def check_cell(self, cell: int) -> None:
        if not 0 <= cell < self.size:
            raise ValueError(f"cell index {cell} out of range 0..{self.size - 1}")

    def neighbors(self, cell: int) -> frozenset[int]:
        """Adjacent cells of ``cell`` under the odd-r offset layout."""
        self.check_cell(cell)
        row, col = divmod(cell, self.cols)
        deltas = _ODD_ROW_DELTAS if row % 2 else _EVEN_ROW_DELTAS
        out = []
        for dr, dc in deltas:
            r, c = row + dr, col + dc
            if 0 <= r < self.rows and 0 <= c < self.cols:
                out.append(r * self.cols + c)
        return frozenset(out)

    def adjacency(self) -> list[frozenset[int]]:
        return [self.neighbors(i) for i in range(self.size)]

    def layout_descriptor(self) -> dict:
        """Rendering/adjacency convention, e.g. for a browser client."""
        return {
            "rows": self.rows,
            "cols": self.cols,
            "layout": self.layout,
            "orientation": "pointy",
            "indexing": "row-major",
        }


@dataclass(frozen=True)
class DistanceTable:
    """All-pairs intermediate-hex counts: cells strictly between the
    endpoints of a shortest path (0 on the diagonal and for adjacent pairs).
    """

    entries: np.ndarray
    d_max: int = field(default=0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "d_max", int(self.entries.max(initial=0)))

    def intermediate(self, a: int, b: int) -> int:
        return int(self.entries[a, b])


def bfs_hops(grid: HexGrid, source: int) -> list[int]:
    """Hop distances from ``source`` to every cell (breadth-first)."""
    grid.check_cell(source)
    hops = [-1] * grid.size
    hops[source] = 0
    frontier = [source]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for u in frontier:
            for v in grid.neighbors(u):
                if hops[v] < 0:
                    hops[v] = d
                    nxt.append(v)
        frontier = nxt
    return hops


def intermediate_count(grid: HexGrid, a: int, b: int) -> int:
    """Number of hexes strictly inside a shortest path from a to b."""
    grid.check_cell(a)
    grid.check_cell(b)
    if a == b:
        return 0
    return max(bfs_hops(grid, a)[b] - 1, 0)


def build_distance_table(grid: HexGrid) -> DistanceTable:
    """All-pairs table of intermediate-hex counts, plus its maximum."""
    n = grid.size
    hops = np.empty((n, n), dtype=np.int64)
    for s in range(n):
        row = bfs_hops(grid, s)
        if min(row) < 0:
            raise ValueError("grid is not connected")
        hops[s] = row
    entries = np.maximum(hops - 1, 0)
    entries.setflags(write=False)
    return DistanceTable(entries=entries)
