// Browser wiring: canvas, pointer events, method picker, status line.

import { HexmemClient } from "./api.js";
import { cellAt, computeLayout, type BoardLayout } from "./layout.js";
import { drawBoard } from "./render.js";
import { SessionMachine, type ViewModel } from "./session.js";

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? window.location.origin;

const canvas = document.getElementById("board") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const scoreEl = document.getElementById("score")!;
const submitBtn = document.getElementById("submit") as HTMLButtonElement;
const retryBtn = document.getElementById("retry") as HTMLButtonElement;
const methodSel = document.getElementById("method") as HTMLSelectElement;
const startBtn = document.getElementById("start") as HTMLButtonElement;
const summaryEl = document.getElementById("summary")!;

const client = new HexmemClient(apiBase);
const machine = new SessionMachine(client, {
  storage: window.localStorage,
  onChange: update,
});

let layout: BoardLayout | null = null;

function ensureLayout(): BoardLayout | null {
  if (!layout && machine.grid) {
    layout = computeLayout(machine.grid, 34);
    canvas.width = layout.width;
    canvas.height = layout.height;
  }
  return layout;
}

function statusText(vm: ViewModel): string {
  switch (vm.phase) {
    case "idle":
      return "pick a method and start a session";
    case "memorize":
      return `trial ${vm.trial}/${vm.nTrials}: memorize the ${vm.nTargets} highlighted cells`;
    case "recall":
      return `trial ${vm.trial}/${vm.nTrials}: click the ${vm.nTargets} remembered cells (${vm.selected.length}/${vm.nTargets})`;
    case "feedback":
      return `trial ${vm.trial}/${vm.nTrials}: score ${vm.lastScore?.toFixed(3) ?? ""}`;
    case "finishing":
      return "fetching session summary";
    case "done":
      return "session complete";
    case "error":
      return vm.errorMessage ?? "something went wrong";
  }
}

function update(): void {
  const vm = machine.view();
  statusEl.textContent = statusText(vm);
  if (vm.errorMessage && vm.phase === "recall") {
    statusEl.textContent = vm.errorMessage;
  }
  scoreEl.textContent = vm.scores.length
    ? `mean score so far: ${(vm.scores.reduce((a, b) => a + b, 0) / vm.scores.length).toFixed(3)}`
    : "";
  submitBtn.disabled = !vm.canSubmit;
  submitBtn.hidden = vm.phase !== "recall";
  retryBtn.hidden = !(vm.phase === "recall" && vm.errorMessage !== null);
  if (vm.phase === "done" && vm.summary) {
    const s = vm.summary;
    summaryEl.textContent =
      `method ${s.method} - mean score ${s.mean_score?.toFixed(3)}, ` +
      `win rate ${s.win_rate?.toFixed(2)}, ` +
      `decline r ${s.decline_correlation?.toFixed(3) ?? "n/a"}`;
  } else {
    summaryEl.textContent = "";
  }
  const l = ensureLayout();
  if (l) {
    drawBoard(ctx, l, vm);
  }
}

canvas.addEventListener("click", (ev) => {
  const l = ensureLayout();
  if (!l) {
    return;
  }
  const rect = canvas.getBoundingClientRect();
  const cell = cellAt(l, ev.clientX - rect.left, ev.clientY - rect.top);
  if (cell !== null) {
    machine.click(cell);
  }
});

submitBtn.addEventListener("click", () => void machine.submit());
retryBtn.addEventListener("click", () => void machine.submit());
startBtn.addEventListener("click", () => {
  layout = null;
  void machine.start(methodSel.value).catch((err) => {
    statusEl.textContent = `could not start a session: ${String(err)}`;
  });
});

function loop(now: number): void {
  machine.frame(now);
  requestAnimationFrame(loop);
}

void machine.resume().then((resumed) => {
  if (resumed) {
    statusEl.textContent = "resumed the open session at the server's recorded trial";
  }
  update();
});
requestAnimationFrame(loop);
