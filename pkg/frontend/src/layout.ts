// Pixel geometry for a pointy-top offset hex board. The server's layout
// descriptor drives everything; the client never assumes adjacency.

import type { GridDescriptor } from "./api.js";

export interface Point {
  x: number;
  y: number;
}

export interface BoardLayout {
  grid: GridDescriptor;
  size: number; // hex circumradius in px
  centers: Point[]; // indexed like the server: row-major
  width: number;
  height: number;
}

const SQRT3 = Math.sqrt(3);

export function computeLayout(grid: GridDescriptor, size: number, pad = 8): BoardLayout {
  if (grid.layout !== "odd-r" || grid.orientation !== "pointy") {
    throw new Error(`unsupported board layout ${grid.layout}/${grid.orientation}`);
  }
  const centers: Point[] = [];
  for (let r = 0; r < grid.rows; r++) {
    for (let c = 0; c < grid.cols; c++) {
      const shift = r % 2 === 1 ? 0.5 : 0;
      centers.push({
        x: pad + SQRT3 * size * (c + shift) + (SQRT3 / 2) * size,
        y: pad + 1.5 * size * r + size,
      });
    }
  }
  return {
    grid,
    size,
    centers,
    width: 2 * pad + SQRT3 * size * (grid.cols + 0.5),
    height: 2 * pad + 1.5 * size * (grid.rows - 1) + 2 * size,
  };
}

export function hexCorners(center: Point, size: number): Point[] {
  const corners: Point[] = [];
  for (let k = 0; k < 6; k++) {
    const angle = (Math.PI / 180) * (60 * k - 30);
    corners.push({ x: center.x + size * Math.cos(angle), y: center.y + size * Math.sin(angle) });
  }
  return corners;
}

// Nearest-center hit test: hexes tile the plane as the Voronoi cells of
// their centers, so the nearest center wins; the circumradius bound drops
// clicks outside the board fringe.
export function cellAt(layout: BoardLayout, x: number, y: number): number | null {
  let best = -1;
  let bestDist = Infinity;
  layout.centers.forEach((p, i) => {
    const d = (p.x - x) ** 2 + (p.y - y) ** 2;
    if (d < bestDist) {
      bestDist = d;
      best = i;
    }
  });
  if (best < 0 || bestDist > layout.size ** 2) {
    return null;
  }
  return best;
}
