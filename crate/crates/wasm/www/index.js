// Built with `wasm-bindgen --target web --out-dir www/pkg`; see the README.
import init, { analyze, simulate_paths, gap_histogram } from "./pkg/exclusion_clouds_wasm.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"];

function rates() {
  const parse = (s) => Float64Array.from(s.trim().split(/\s+/).map(Number));
  return [parse($("a").value), parse($("b").value)];
}

function guard(fn) {
  return () => {
    $("status").textContent = "";
    try {
      fn();
    } catch (e) {
      $("status").textContent = String(e.message ?? e);
    }
  };
}

function runAnalyze() {
  const [a, b] = rates();
  const report = JSON.parse(analyze(a, b));
  $("analysis").textContent = report.text + "\nmerge trace:\n" + report.merge_trace;
}

function runPaths() {
  const [a, b] = rates();
  const n = a.length;
  const flat = simulate_paths(a, b, Number($("horizon").value), Number($("seed").value), 400);
  const rows = flat.length / (n + 1);
  let lo = Infinity;
  let hi = -Infinity;
  for (let r = 0; r < rows; r++) {
    for (let i = 1; i <= n; i++) {
      lo = Math.min(lo, flat[r * (n + 1) + i]);
      hi = Math.max(hi, flat[r * (n + 1) + i]);
    }
  }
  const canvas = $("paths");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const tMax = flat[(rows - 1) * (n + 1)];
  const x = (t) => 10 + (t / tMax) * (canvas.width - 20);
  const y = (p) => canvas.height - 10 - ((p - lo) / Math.max(hi - lo, 1)) * (canvas.height - 20);
  for (let i = 1; i <= n; i++) {
    ctx.strokeStyle = COLORS[(i - 1) % COLORS.length];
    ctx.beginPath();
    for (let r = 0; r < rows; r++) {
      const t = flat[r * (n + 1)];
      const p = flat[r * (n + 1) + i];
      if (r === 0) ctx.moveTo(x(t), y(p));
      else ctx.lineTo(x(t), y(p));
    }
    ctx.stroke();
  }
}

function runHistogram() {
  const [a, b] = rates();
  const maxGap = 20;
  const out = JSON.parse(gap_histogram(a, b, Number($("hist-horizon").value), Number($("seed").value), maxGap));
  const g = out.gaps[Number($("gap").value) - 1];
  if (!g) throw new Error(`gap must lie in 1..${out.gaps.length}`);
  const canvas = $("hist");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const w = (canvas.width - 20) / (maxGap + 1);
  const h = canvas.height - 30;
  ctx.fillStyle = "#1f77b4";
  g.empirical.forEach((p, k) => ctx.fillRect(10 + k * w + 2, 10 + h * (1 - p), w - 4, h * p));
  if (g.analytical) {
    ctx.fillStyle = "#d62728";
    g.analytical.forEach((p, k) => ctx.fillRect(10 + k * w + w / 2 - 3, 10 + h * (1 - p) - 3, 6, 6));
  }
  ctx.fillStyle = "#222";
  for (let k = 0; k <= maxGap; k += 5) ctx.fillText(String(k), 10 + k * w + w / 2 - 3, canvas.height - 5);
  $("hist-note").textContent = g.analytical
    ? `bars: time fraction at each gap value; dots: geometric law with rho = ${g.rho.toPrecision(6)}`
    : `gap ${g.gap} separates two clouds (rho = ${g.rho.toPrecision(6)}); it grows without bound`;
}

$("preset").addEventListener("change", (e) => {
  const [a, b] = e.target.value.split("|");
  $("a").value = a;
  $("b").value = b;
});

await init();
$("run-analyze").addEventListener("click", guard(runAnalyze));
$("run-paths").addEventListener("click", guard(runPaths));
$("run-hist").addEventListener("click", guard(runHistogram));
guard(runAnalyze)();
