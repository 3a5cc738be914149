import { describe, expect, it } from "vitest";

import type { GridDescriptor } from "../src/api.js";
import { cellAt, computeLayout, hexCorners } from "../src/layout.js";

const GRID: GridDescriptor = {
  rows: 6,
  cols: 6,
  layout: "odd-r",
  orientation: "pointy",
  indexing: "row-major",
};

describe("computeLayout", () => {
  it("places 36 centers with odd rows shifted right", () => {
    const layout = computeLayout(GRID, 30);
    expect(layout.centers).toHaveLength(36);
    const row0 = layout.centers[0]!;
    const row1 = layout.centers[6]!;
    expect(row1.x - row0.x).toBeCloseTo((Math.sqrt(3) / 2) * 30, 6);
    expect(row1.y).toBeGreaterThan(row0.y);
  });

  it("spaces adjacent same-row cells one hex width apart", () => {
    const layout = computeLayout(GRID, 30);
    const a = layout.centers[0]!;
    const b = layout.centers[1]!;
    expect(b.x - a.x).toBeCloseTo(Math.sqrt(3) * 30, 6);
    expect(b.y).toBe(a.y);
  });

  it("rejects unknown layouts", () => {
    expect(() => computeLayout({ ...GRID, layout: "axial" }, 30)).toThrow(/layout/);
  });
});

describe("cellAt", () => {
  const layout = computeLayout(GRID, 30);

  it("hits every cell at its own center", () => {
    layout.centers.forEach((p, i) => {
      expect(cellAt(layout, p.x, p.y)).toBe(i);
    });
  });

  it("misses far outside the board", () => {
    expect(cellAt(layout, -100, -100)).toBeNull();
    expect(cellAt(layout, layout.width + 80, layout.height + 80)).toBeNull();
  });

  it("resolves points near a corner to the nearest center", () => {
    const c14 = layout.centers[14]!;
    expect(cellAt(layout, c14.x + 4, c14.y - 4)).toBe(14);
  });
});

describe("hexCorners", () => {
  it("yields six corners on the circumcircle", () => {
    const corners = hexCorners({ x: 10, y: 20 }, 7);
    expect(corners).toHaveLength(6);
    for (const p of corners) {
      expect(Math.hypot(p.x - 10, p.y - 20)).toBeCloseTo(7, 9);
    }
  });
});
