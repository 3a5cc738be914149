// Canvas renderer: pure function of (layout, view model).

import type { BoardLayout } from "./layout.js";
import { hexCorners } from "./layout.js";
import type { ViewModel } from "./session.js";

export const COLORS = {
  base: "#f5f5f0",
  edge: "#8a8a7a",
  target: "#f4d03f", // memorization highlight
  selected: "#aed6f1",
  correct: "#58d68d",
  incorrect: "#ec7063",
};

export function cellColor(vm: ViewModel, cell: number): string {
  if (vm.phase === "memorize" && vm.memorizeTargets.includes(cell)) {
    return COLORS.target;
  }
  if (vm.phase === "recall" && vm.selected.includes(cell)) {
    return COLORS.selected;
  }
  if (vm.phase === "feedback") {
    const mark = vm.feedback.find((f) => f.cell === cell);
    if (mark) {
      return mark.correct ? COLORS.correct : COLORS.incorrect;
    }
  }
  return COLORS.base;
}

export function drawBoard(
  ctx: CanvasRenderingContext2D,
  layout: BoardLayout,
  vm: ViewModel,
): void {
  ctx.clearRect(0, 0, layout.width, layout.height);
  layout.centers.forEach((center, cell) => {
    const corners = hexCorners(center, layout.size * 0.96);
    ctx.beginPath();
    corners.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
    ctx.closePath();
    ctx.fillStyle = cellColor(vm, cell);
    ctx.fill();
    ctx.strokeStyle = COLORS.edge;
    ctx.lineWidth = 1.5;
    ctx.stroke();
  });
}
