import init, { catalog, beta_profile, spherical_curve, orbit_growth } from "./pkg/temperlab_web.js";

function plot(canvas, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 36;
  ctx.clearRect(0, 0, w, h);
  const pts = series.flatMap((s) => s.points);
  const xs = pts.map((p) => p[0]), ys = pts.map((p) => p[1]);
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  const y0 = opts.ymin ?? Math.min(...ys), y1 = opts.ymax ?? Math.max(...ys);
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#666";
  ctx.font = "11px sans-serif";
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(3), w - pad - 20, h - pad + 14);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dash ?? []);
    ctx.beginPath();
    s.points.forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function fill(select, names) {
  for (const n of names) select.add(new Option(n, n));
}

function showBeta() {
  const name = document.getElementById("pair").value;
  const v = JSON.parse(beta_profile(name, 361));
  document.getElementById("beta-out").textContent = `beta = ${v.beta}, dim ${v.dim}`;
  const b = v.beta_float;
  plot(document.getElementById("beta-plot"), [
    { points: v.points, color: "#1f5fa8" },
    { points: [[0, b], [2 * Math.PI, b]], color: "#c33", dash: [4, 4] },
    { points: [[0, 0.5], [2 * Math.PI, 0.5]], color: "#999", dash: [2, 3] },
  ], { ymin: 0, ymax: 1 });
}

function showXi() {
  const c = parseFloat(document.getElementById("c").value);
  document.getElementById("c-out").textContent = `c = ${c.toFixed(2)}`;
  const v = JSON.parse(spherical_curve(c, 10, 101));
  plot(document.getElementById("xi-plot"), [
    { points: v.points.map((p) => [p[0], p[1]]), color: "#1f5fa8" },
    { points: v.points.map((p) => [p[0], p[2]]), color: "#c33", dash: [4, 4] },
  ]);
}

function showOrbit() {
  const name = document.getElementById("group").value;
  const depth = parseInt(document.getElementById("depth").value, 10);
  const out = document.getElementById("orbit-out");
  try {
    const v = JSON.parse(orbit_growth(name, depth));
    out.textContent = `${v.elements} elements`;
    const pts = v.points.filter((p) => p[1] > 0).map((p) => [p[0], Math.log(p[1])]);
    plot(document.getElementById("orbit-plot"), [{ points: pts, color: "#1f5fa8" }]);
  } catch (e) {
    out.textContent = String(e);
  }
}

await init();
const entries = JSON.parse(catalog());
fill(document.getElementById("pair"), entries.filter((e) => !e.discrete).map((e) => e.name));
fill(document.getElementById("group"), entries.filter((e) => e.discrete).map((e) => e.name));
document.getElementById("pair").addEventListener("change", showBeta);
document.getElementById("c").addEventListener("input", showXi);
document.getElementById("group").addEventListener("change", showOrbit);
document.getElementById("depth").addEventListener("change", showOrbit);
showBeta();
showXi();
showOrbit();
