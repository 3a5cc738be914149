import numpy as np
import pytest

from hexmem.hexgrid import HexGrid, build_distance_table, intermediate_count

# Hand-enumerated adjacency for the odd-r layout (row-major indices, 6x6):
# row 0 is unshifted, odd rows sit half a cell to the right.
HAND_CORNERS = {
    0: {1, 6},            # top-left: right, below-right
    5: {4, 10, 11},       # top-right: left, below-left, below-right
    30: {31, 24, 25},     # bottom-left (odd row): right, above, above-right
    35: {34, 29},         # bottom-right (odd row): left, above
}


def floyd_warshall_oracle(grid: HexGrid) -> np.ndarray:
    n = grid.size
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for a in range(n):
        for b in grid.neighbors(a):
            dist[a, b] = 1.0
    for k in range(n):
        for i in range(n):
            dist[i] = np.minimum(dist[i], dist[i, k] + dist[k])
    return dist


def test_corner_neighbors_match_hand_enumeration(grid):
    for cell, expected in HAND_CORNERS.items():
        assert grid.neighbors(cell) == frozenset(expected)


def test_interior_cell_has_six_neighbors(grid):
    # cell 14 = row 2, col 2
    assert len(grid.neighbors(14)) == 6


def test_degree_bounds_and_symmetry(grid):
    for a in range(grid.size):
        nbrs = grid.neighbors(a)
        assert 2 <= len(nbrs) <= 6
        assert a not in nbrs
        for b in nbrs:
            assert a in grid.neighbors(b)


def test_neighbors_rejects_out_of_range(grid):
    with pytest.raises(ValueError):
        grid.neighbors(36)
    with pytest.raises(ValueError):
        grid.neighbors(-1)


def test_intermediate_count_trivial_cases(grid):
    assert intermediate_count(grid, 12, 12) == 0
    a = 14
    for b in grid.neighbors(a):
        assert intermediate_count(grid, a, b) == 0


def test_intermediate_count_along_a_row(grid):
    # two ends of row 0 are 5 hops apart along the row
    assert intermediate_count(grid, 0, 5) == 4


def test_table_matches_floyd_warshall_on_all_pairs(grid, table):
    dist = floyd_warshall_oracle(grid)
    assert np.isfinite(dist).all(), "grid must be connected"
    expected = np.maximum(dist - 1, 0).astype(int)
    assert (table.entries == expected).all()
    assert table.d_max == expected.max()


def test_table_symmetric_zero_diagonal(table):
    assert (table.entries == table.entries.T).all()
    assert (np.diag(table.entries) == 0).all()


def test_flood_fill_reaches_every_cell(grid):
    seen = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in grid.neighbors(u):
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    assert seen == set(range(grid.size))


def test_triangle_inequality_over_hops(grid, table):
    hops = table.entries + (1 - np.eye(grid.size, dtype=int))
    n = grid.size
    for a in range(n):
        lhs = hops[a][None, :]  # hop(a, c)
        rhs = hops[a][:, None] + hops  # hop(a, b) + hop(b, c)
        assert (lhs <= rhs).all()
