import init, { snr_curve, omp_trial, feasibility } from "./pkg/ompb_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function fail(el, e) {
  el.textContent = String(e);
  el.className = "err";
}

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
}

function drawCurve() {
  const msg = $("c-msg");
  msg.textContent = "";
  msg.className = "";
  let flat;
  try {
    flat = snr_curve($("c-rule").value, num("c-rho0"), num("c-mar"), num("c-dmin"), num("c-dmax"), 400);
  } catch (e) {
    return fail(msg, e);
  }
  const cv = $("curve"), ctx = cv.getContext("2d");
  const pad = 50, w = cv.width, h = cv.height;
  const pts = [];
  for (let i = 0; i < flat.length; i += 2) pts.push([flat[i], Math.log10(flat[i + 1])]);
  const x0 = pts[0][0], x1 = pts[pts.length - 1][0];
  const ys = pts.map((p) => p[1]);
  const y0 = Math.floor(Math.min(...ys)), y1 = Math.ceil(Math.max(...ys));
  const X = (x) => pad + (x - x0) / (x1 - x0) * (w - 1.5 * pad);
  const Y = (y) => h - pad - (y - y0) / Math.max(y1 - y0, 1e-9) * (h - 1.5 * pad);
  axes(ctx, w, h, pad);
  for (let d = y0; d <= y1; d++) {
    ctx.fillText("1e" + d, 8, Y(d) + 4);
  }
  ctx.fillText(x0.toFixed(2), X(x0) - 10, h - pad + 16);
  ctx.fillText(x1.toFixed(2), X(x1) - 10, h - pad + 16);
  ctx.fillText("delta", w / 2, h - 10);
  ctx.strokeStyle = "#1565c0";
  ctx.lineWidth = 2;
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(X(x), Y(y)) : ctx.moveTo(X(x), Y(y))));
  ctx.stroke();
  ctx.lineWidth = 1;
  let best = pts[0];
  for (const p of pts) if (p[1] < best[1]) best = p;
  msg.textContent = `minimum required snr ${Math.pow(10, best[1]).toPrecision(6)} at delta = ${best[0].toFixed(3)}`;
}

function drawTrial() {
  const msg = $("t-msg");
  msg.className = "";
  let t;
  try {
    t = omp_trial(num("t-m"), num("t-n"), num("t-k"), num("t-snr"), num("t-delta"), BigInt(num("t-seed")));
  } catch (e) {
    return fail(msg, e);
  }
  const cv = $("trial"), ctx = cv.getContext("2d");
  const pad = 30, w = cv.width, h = cv.height;
  const x = t.signal, xh = t.estimate, n = x.length;
  const amp = Math.max(...x.map(Math.abs), ...xh.map(Math.abs), 1e-9);
  const X = (i) => pad + (i + 0.5) / n * (w - 1.5 * pad);
  const Y = (v) => h / 2 - v / amp * (h / 2 - pad / 2);
  axes(ctx, w, h, pad);
  ctx.strokeStyle = "#ccc";
  ctx.beginPath();
  ctx.moveTo(pad, h / 2);
  ctx.lineTo(w - pad / 2, h / 2);
  ctx.stroke();
  const bar = Math.max(1, (w - 1.5 * pad) / n / 3);
  for (let i = 0; i < n; i++) {
    if (x[i] !== 0) {
      ctx.fillStyle = "#9e9e9e";
      ctx.fillRect(X(i) - bar, Math.min(Y(0), Y(x[i])), bar, Math.abs(Y(x[i]) - Y(0)));
    }
    if (xh[i] !== 0) {
      ctx.fillStyle = x[i] !== 0 ? "#2e7d32" : "#c62828";
      ctx.fillRect(X(i), Math.min(Y(0), Y(xh[i])), bar, Math.abs(Y(xh[i]) - Y(0)));
    }
  }
  const b = t.bound;
  msg.textContent =
    `true support   ${Array.from(t.true_support).join(" ")}\n` +
    `found support  ${Array.from(t.found_support).join(" ")}\n` +
    `error rate     ${t.rho_error}\n` +
    `realized snr   ${Number.isFinite(t.snr_realized) ? t.snr_realized.toPrecision(6) : "inf"}\n` +
    `bound at delta ${Number.isFinite(b) ? b.toPrecision(6) : "undefined (delta >= 1)"}` +
    (t.rho_error > b ? "  (exceeded)" : "");
  t.free();
}

function showFeasibility() {
  const msg = $("f-msg");
  msg.className = "";
  try {
    msg.textContent = feasibility(num("f-n"), num("f-m"), num("f-k"), num("f-rho0"), num("f-snr"));
  } catch (e) {
    fail(msg, e);
  }
}

await init();
for (const id of ["c-rule", "c-rho0", "c-mar", "c-dmin", "c-dmax"]) $(id).addEventListener("input", drawCurve);
for (const id of ["t-m", "t-n", "t-k", "t-snr", "t-delta", "t-seed"]) $(id).addEventListener("input", drawTrial);
for (const id of ["f-n", "f-m", "f-k", "f-rho0", "f-snr"]) $(id).addEventListener("input", showFeasibility);
$("t-next").addEventListener("click", () => {
  $("t-seed").value = num("t-seed") + 1;
  drawTrial();
});
drawCurve();
drawTrial();
showFeasibility();
