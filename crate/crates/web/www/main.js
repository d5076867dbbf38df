import init, { presets, trial, detect, ensemble } from "./pkg/stepguard_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function setup(canvas) {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth, h = canvas.clientHeight;
  canvas.width = w * dpr;
  canvas.height = h * dpr;
  const ctx = canvas.getContext("2d");
  ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
  ctx.clearRect(0, 0, w, h);
  ctx.font = "11px sans-serif";
  return { ctx, w, h };
}

// series: [{ xs, ys, color, dots?, marks? }], marks are x values drawn as red ticks
function plot(canvas, series, { logx = false, logy = false, ylo, yhi, marks = [] } = {}) {
  const { ctx, w, h } = setup(canvas);
  const pad = { l: 50, r: 10, t: 10, b: 22 };
  const fx = logx ? Math.log10 : (v) => v;
  const fy = logy ? Math.log10 : (v) => v;
  const ok = (x, y) => Number.isFinite(fx(x)) && Number.isFinite(fy(y));
  let xs = [], ys = [];
  for (const s of series) s.xs.forEach((x, i) => { if (ok(x, s.ys[i])) { xs.push(fx(x)); ys.push(fy(s.ys[i])); } });
  if (!xs.length) return;
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  const y0 = ylo ?? Math.min(...ys), y1 = yhi ?? Math.max(...ys);
  const sx = (v) => pad.l + (w - pad.l - pad.r) * (fx(v) - x0) / ((x1 - x0) || 1);
  const sy = (v) => h - pad.b - (h - pad.t - pad.b) * (fy(v) - y0) / ((y1 - y0) || 1);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad.l, pad.t, w - pad.l - pad.r, h - pad.t - pad.b);
  ctx.fillStyle = "#555";
  const lab = (v, log) => (log ? "1e" + v.toFixed(1) : v.toPrecision(3));
  ctx.fillText(lab(y1, logy), 2, pad.t + 8);
  ctx.fillText(lab(y0, logy), 2, h - pad.b);
  ctx.fillText(lab(x0, logx), pad.l, h - 6);
  const right = lab(x1, logx);
  ctx.fillText(right, w - pad.r - ctx.measureText(right).width, h - 6);

  ctx.strokeStyle = "rgba(200,0,0,0.5)";
  for (const m of marks) {
    ctx.beginPath(); ctx.moveTo(sx(m), pad.t); ctx.lineTo(sx(m), h - pad.b); ctx.stroke();
  }
  for (const s of series) {
    ctx.strokeStyle = ctx.fillStyle = s.color;
    if (s.dots) {
      s.xs.forEach((x, i) => { if (ok(x, s.ys[i])) ctx.fillRect(sx(x) - 1.5, sy(s.ys[i]) - 1.5, 3, 3); });
      continue;
    }
    ctx.beginPath();
    let pen = false;
    s.xs.forEach((x, i) => {
      if (!ok(x, s.ys[i])) { pen = false; return; }
      pen ? ctx.lineTo(sx(x), sy(s.ys[i])) : ctx.moveTo(sx(x), sy(s.ys[i]));
      pen = true;
    });
    ctx.stroke();
  }
}

function guard(out, f) {
  try {
    out.classList.remove("err");
    f();
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e);
  }
}

function runTrial() {
  const out = $("t-out");
  guard(out, () => {
    const r = JSON.parse(trial($("t-preset").value, num("t-step"), num("t-factor"), BigInt(num("t-seed")), $("t-mode").value));
    const flagged = r.points.filter((p) => p.flagged).map((p) => p.step);
    out.textContent =
      (r.fault_step ? `fault at step ${r.fault_step}, factor ${r.factor.toFixed(4)}, L = ${r.lte?.toExponential(3)}\n` : "clean run\n") +
      `detected at fault or next: ${r.detected}, false positives: ${r.false_positives}\n` +
      `flagged steps: ${flagged.join(", ") || "none"}`;
    const xs = r.points.map((p) => p.step);
    plot($("t-plot"), [{ xs, ys: r.points.map((p) => p.d), color: "#1565c0" }], { logy: true, marks: flagged });
  });
}

function runDetect() {
  const out = $("d-out");
  guard(out, () => {
    const pts = JSON.parse(detect($("d-seq").value, num("d-up"), num("d-down"), num("d-p"), $("d-mode").value));
    const flagged = pts.filter((p) => p.flagged).map((p) => p.step);
    out.textContent = "step  J        tau_J    V        tau_V\n" + pts
      .filter((p) => p.jump !== null)
      .map((p) => [p.step, p.jump, p.tau_j, p.variance, p.tau_v]
        .map((v, i) => (i ? v.toFixed(4) : String(v)).padEnd(i ? 9 : 6)).join("") + (p.flagged ? "flag" : ""))
      .join("\n");
    const xs = pts.map((p) => p.step);
    plot($("d-plot"), [{ xs, ys: pts.map((p) => p.d), color: "#1565c0" }], { marks: flagged });
  });
}

function runEnsemble() {
  const out = $("e-out");
  out.textContent = "running...";
  // let the message paint before the blocking run
  setTimeout(() => guard(out, () => {
    const r = JSON.parse(ensemble($("e-preset").value, num("e-trials"), BigInt(num("e-seed")), num("e-sigma")));
    const f = (v) => (v === null ? "n/a" : v.toFixed(3));
    out.textContent = `${r.trials} trials, ${r.aborted} aborted\n` +
      `TPR at fault ${f(r.tpr_at_fault)}, at fault or next ${f(r.tpr_fault_or_next)}, FPR ${r.fpr.toFixed(4)}`;
    plot($("e-plot"), [
      { xs: r.samples.map((s) => s[0]), ys: r.samples.map((s) => (s[1] ? 1 : 0)), color: "#888", dots: true },
      { xs: r.curve.map((c) => c[0]), ys: r.curve.map((c) => c[1]), color: "#c62828" },
    ], { logx: true, ylo: 0, yhi: 1 });
  }), 10);
}

await init();
for (const id of ["t-preset", "e-preset"]) {
  for (const name of JSON.parse(presets())) $(id).add(new Option(name, name));
}
$("t-preset").value = "vdp-b2-rk45";
$("e-preset").value = "heat-cfg1-fe-be";
$("t-run").onclick = runTrial;
$("d-run").onclick = runDetect;
$("e-run").onclick = runEnsemble;
runTrial();
runDetect();
