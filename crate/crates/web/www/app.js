import init, { airtime_breakdown, simulate, traffic_timeline } from "./pkg/wifivr_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function config() {
  return JSON.stringify({
    duration_s: num("duration"),
    phy: { mcs_index: num("mcs") },
    mac: { per: num("per") },
    traffic: { fps: num("fps"), bitrate_mbps: num("bitrate"), inter_batch_time_ms: num("tau") },
  });
}

function guarded(fn) {
  return () => {
    $("error").textContent = "";
    try {
      fn();
    } catch (e) {
      $("error").textContent = String(e.message ?? e);
    }
  };
}

function fillTable(el, rows) {
  el.innerHTML = rows.map(([k, v]) => `<tr><td>${k}</td><td>${v}</td></tr>`).join("");
}

const fmt = (v, d = 3) => (v == null ? "n/a" : v.toFixed(d));

function axes(ctx, w, h, xmax, ymax, xlabel, ylabel) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.beginPath();
  ctx.moveTo(40, 10);
  ctx.lineTo(40, h - 25);
  ctx.lineTo(w - 10, h - 25);
  ctx.stroke();
  ctx.fillText(xlabel, w / 2, h - 6);
  ctx.fillText(ylabel, 4, 12);
  for (let i = 0; i <= 4; i++) {
    const x = 40 + ((w - 50) * i) / 4;
    ctx.fillText((xmax * i / 4).toPrecision(3), x - 8, h - 13);
  }
  ctx.fillText(ymax.toPrecision(3), 4, 24);
  return {
    x: (v) => 40 + ((w - 50) * v) / xmax,
    y: (v) => h - 25 - ((h - 40) * v) / ymax,
  };
}

function drawBreakdown() {
  const b = JSON.parse(airtime_breakdown(config(), num("bytes")));
  const rows = b.parts.map(([k, v]) => [k, `${fmt(v, 1)} µs`]);
  rows.push(["total", `${fmt(b.total_us, 1)} µs`]);
  rows.push(["total without backoff", `${fmt(b.total_without_backoff_us, 1)} µs`]);
  rows.push(["PHY rate", `${fmt(b.phy_rate_mbps, 1)} Mbps`]);
  fillTable($("breakdown"), rows);
}

function drawTimeline() {
  const t = JSON.parse(traffic_timeline(config(), num("seed"), 60));
  const c = $("timeline");
  const ctx = c.getContext("2d");
  const frames = Math.max(1, t.frames_ms.length);
  const s = axes(ctx, c.width, c.height, 60, frames, "send time (ms)", "frame");
  ctx.fillStyle = "#c33";
  for (const f of t.frames_ms) ctx.fillRect(s.x(f), s.y(frames), 1, c.height - 35);
  for (const [ms, frame] of t.packets) {
    ctx.fillStyle = `hsl(${(frame * 67) % 360} 60% 40%)`;
    ctx.fillRect(s.x(ms), s.y(frame + 1), 1.5, s.y(frame) - s.y(frame + 1) - 2);
  }
}

function drawSimulation() {
  const r = JSON.parse(simulate(config(), num("seed")));
  fillTable($("summary"), [
    ["mean DL packet delay (ms)", fmt(r.dl_delay_mean_ms)],
    ["99.99th pct DL delay (ms)", fmt(r.dl_delay_p9999_ms)],
    ["mean frame delay (ms)", fmt(r.vf_delay_mean_ms)],
    ["mean A-MPDU size", fmt(r.ampdu_mean, 2)],
    ["airtime", fmt(r.airtime)],
    ["AP buffer occupancy", fmt(r.buffer_occupancy, 4)],
    ["AP buffer non-empty", fmt(r.buffer_busy)],
    ["retransmissions", r.retransmissions],
    ["collisions", r.collisions],
  ]);

  const c = $("ecdf");
  const ctx = c.getContext("2d");
  const curves = [[r.dl_delay_ecdf, "#1f6fb2", "packet"], [r.vf_delay_ecdf, "#c2541b", "frame"]];
  const xmax = Math.max(1e-3, ...curves.flatMap(([pts]) => pts.map((p) => p[0])));
  const s = axes(ctx, c.width, c.height, xmax, 1, "delay (ms)", "ECDF");
  curves.forEach(([pts, color, name], i) => {
    ctx.strokeStyle = color;
    ctx.fillStyle = color;
    ctx.beginPath();
    pts.forEach(([x, y], j) => (j ? ctx.lineTo(s.x(x), s.y(y)) : ctx.moveTo(s.x(x), s.y(y))));
    ctx.stroke();
    ctx.fillText(name, c.width - 80, 20 + 14 * i);
  });

  const a = $("ampdu");
  const actx = a.getContext("2d");
  const h = r.ampdu_histogram;
  const total = h.reduce((x, y) => x + y, 0) || 1;
  const ymax = Math.max(...h, 1) / total;
  const sa = axes(actx, a.width, a.height, Math.max(h.length, 2), ymax, "A-MPDU size (packets)", "share");
  actx.fillStyle = "#4a8";
  h.forEach((n, size) => {
    if (n) actx.fillRect(sa.x(size), sa.y(n / total), Math.max(1, sa.x(1) - sa.x(0) - 1), sa.y(0) - sa.y(n / total));
  });
}

await init();
$("run-breakdown").onclick = guarded(drawBreakdown);
$("run-timeline").onclick = guarded(drawTimeline);
$("run-sim").onclick = guarded(drawSimulation);
guarded(drawBreakdown)();
guarded(drawTimeline)();
