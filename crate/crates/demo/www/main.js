// Expects the wasm-pack output in ./pkg (wasm-pack build --target web --out-dir www/pkg).
import init, { IcfSession, schedule } from "./pkg/chowfilter_demo.js";

const EXTENT = 4;
const CELLS = 140;
const canvas = document.getElementById("plot");
const ctx = canvas.getContext("2d");
const out = document.getElementById("out");
let session = null;

const num = (id) => Number(document.getElementById(id).value);
const toPx = (v) => ((v + EXTENT) / (2 * EXTENT)) * canvas.width;
const toPy = (v) => ((EXTENT - v) / (2 * EXTENT)) * canvas.height;

function report(text) {
  out.textContent = text;
}

function draw() {
  const grid = session.heatmap(CELLS, EXTENT);
  const cell = canvas.width / CELLS;
  const colours = ["#555", "#555", "#f7f7f7", "#e8f0e8"];
  for (let r = 0; r < CELLS; r++) {
    for (let c = 0; c < CELLS; c++) {
      ctx.fillStyle = colours[grid[r * CELLS + c]];
      ctx.fillRect(c * cell, r * cell, cell + 1, cell + 1);
    }
  }
  const pts = session.points();
  for (let i = 0; i < pts.length; i += 4) {
    const x = toPx(pts[i]);
    const y = toPy(pts[i + 1]);
    const kind = pts[i + 2];
    if (kind === 0) {
      ctx.fillStyle = "rgba(120,120,120,0.45)";
      ctx.fillRect(x - 1.5, y - 1.5, 3, 3);
    } else if (kind === 1) {
      ctx.fillStyle = "#1f5fbf";
      ctx.beginPath();
      ctx.arc(x, y, 2.5, 0, 2 * Math.PI);
      ctx.fill();
    } else {
      ctx.strokeStyle = "#c62828";
      ctx.beginPath();
      ctx.moveTo(x - 3, y - 3);
      ctx.lineTo(x + 3, y + 3);
      ctx.moveTo(x + 3, y - 3);
      ctx.lineTo(x - 3, y + 3);
      ctx.stroke();
    }
  }
}

function guarded(fn) {
  return () => {
    try {
      fn();
    } catch (e) {
      report(`error: ${e}`);
    }
  };
}

function drawSample() {
  session?.free();
  session = new IcfSession(num("seed"), num("n"), num("shift"), num("offset"));
  draw();
  report(`${session.test_len()} test points drawn. Run the filter to build a selector.`);
}

function runFilter() {
  if (!session) drawSample();
  const t0 = performance.now();
  const s = JSON.parse(session.run(num("degree"), num("slack"), num("eps")));
  const ms = (performance.now() - t0).toFixed(0);
  draw();
  report(
    `${s.termination} after ${s.iterations} iterations (${ms} ms)\n` +
      `kept ${s.survivors} of ${s.test_points} test points\n` +
      `removed ${s.shifted_removed} of ${s.shifted_total} shifted, ${s.clean_removed} unshifted\n` +
      `classifier training error ${s.train_error.toFixed(3)}`,
  );
}

function showSchedule() {
  const s = JSON.parse(schedule(2, num("degree"), num("slack"), num("eps")));
  report(
    `B = ${s.bound.toPrecision(5)}\nDelta = ${s.delta.toExponential(3)}\n` +
      `beta = ${s.beta}\nat most ${s.iteration_limit} iterations`,
  );
}

await init();
document.getElementById("sample").onclick = guarded(drawSample);
document.getElementById("run").onclick = guarded(runFilter);
document.getElementById("schedule").onclick = guarded(showSchedule);
guarded(drawSample)();
