import init, { default_goal, compile_goal, reward_field, simulate_plate } from "./pkg/goalforge_web.js";

const $ = (id) => document.getElementById(id);

function fail(e) {
  $("error").textContent = String(e);
}

function compile() {
  $("error").textContent = "";
  let view;
  try {
    view = JSON.parse(compile_goal($("goal").value));
  } catch (e) {
    fail(e);
    return null;
  }
  $("etltl").textContent = view.etltl;
  $("dot").textContent = view.dot;
  $("summary").textContent = `${view.states.length} states, ${view.edges} edges, hash ${view.hash.slice(0, 12)}`;
  const select = $("state");
  select.innerHTML = "";
  for (const s of view.states) {
    if (s.trap) continue;
    const opt = document.createElement("option");
    opt.value = s.id;
    opt.textContent = `q${s.id} ${s.label}${s.accepting ? " (accepting)" : ""}`;
    opt.selected = s.id === view.initial;
    select.appendChild(opt);
  }
  return view;
}

// Negative rewards red, positive green.
function color(v, min, max) {
  const t = v >= 0 ? v / (max > 0 ? max : 1) : v / (min < 0 ? -min : 1);
  const a = Math.min(1, Math.abs(t));
  return v >= 0
    ? `rgb(${Math.round(255 * (1 - a))},${Math.round(255 - 90 * a)},${Math.round(255 * (1 - a))})`
    : `rgb(${Math.round(255 - 40 * a)},${Math.round(255 * (1 - a))},${Math.round(255 * (1 - a))})`;
}

function drawField() {
  if (!compile()) return;
  let f;
  try {
    f = JSON.parse(reward_field($("goal").value, Number($("state").value), 80));
  } catch (e) {
    fail(e);
    return;
  }
  const c = $("fieldCanvas");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const cell = c.width / f.n;
  f.rewards.forEach((v, i) => {
    if (v === null) return;
    ctx.fillStyle = color(v, f.min, f.max);
    ctx.fillRect((i % f.n) * cell, Math.floor(i / f.n) * cell, cell + 0.5, cell + 0.5);
  });
  $("fieldRange").textContent = `step reward at rest: min ${f.min.toFixed(3)}, max ${f.max.toFixed(3)}`;
}

function drawPlate(ctx, size, radius) {
  ctx.clearRect(0, 0, size, size);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.arc(size / 2, size / 2, size / 2 - 2, 0, 2 * Math.PI);
  ctx.stroke();
  return (x, y) => [size / 2 + (x / radius) * (size / 2 - 2), size / 2 - (y / radius) * (size / 2 - 2)];
}

function simulate() {
  if (!compile()) return;
  let sim;
  try {
    sim = JSON.parse(
      simulate_plate($("goal").value, BigInt($("seed").value || 0), Number($("gain").value), Number($("damping").value)),
    );
  } catch (e) {
    fail(e);
    return;
  }
  const c = $("simCanvas");
  const ctx = c.getContext("2d");
  const to = drawPlate(ctx, c.width, sim.radius);
  ctx.strokeStyle = "#1565c0";
  ctx.beginPath();
  sim.x.forEach((x, i) => {
    const [px, py] = to(x, sim.y[i]);
    i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  });
  ctx.stroke();
  const [ex, ey] = to(sim.x[sim.x.length - 1], sim.y[sim.y.length - 1]);
  ctx.fillStyle = "#1565c0";
  ctx.beginPath();
  ctx.arc(ex, ey, 4, 0, 2 * Math.PI);
  ctx.fill();

  const r = $("rewardCanvas");
  const rc = r.getContext("2d");
  rc.clearRect(0, 0, r.width, r.height);
  const lo = Math.min(0, ...sim.reward.map((v) => Math.max(v, -2)));
  const hi = Math.max(0, ...sim.reward.map((v) => Math.min(v, 2)));
  const y = (v) => r.height - ((Math.max(lo, Math.min(hi, v)) - lo) / (hi - lo || 1)) * r.height;
  rc.strokeStyle = "#aaa";
  rc.beginPath();
  rc.moveTo(0, y(0));
  rc.lineTo(r.width, y(0));
  rc.stroke();
  rc.strokeStyle = "#2e7d32";
  rc.beginPath();
  sim.reward.forEach((v, i) => {
    const px = (i / Math.max(1, sim.reward.length - 1)) * r.width;
    i === 0 ? rc.moveTo(px, y(v)) : rc.lineTo(px, y(v));
  });
  rc.stroke();

  const rows = sim.report.goals
    .map((g) => `<tr><td>${g.goal}</td><td>${g.op}</td><td>${g.SuccessRate}</td><td>${g.GoalSatisfactionRate.toFixed(3)}</td></tr>`)
    .join("");
  $("report").innerHTML =
    `<p>${sim.x.length} steps, ended with <b>${sim.events[sim.events.length - 1]}</b>, return ${sim.total_return.toFixed(2)}</p>` +
    `<table><tr><th>goal</th><th>operator</th><th>success</th><th>GSR</th></tr>${rows}</table>`;
}

await init();
$("goal").value = default_goal();
$("compile").onclick = compile;
$("field").onclick = drawField;
$("simulate").onclick = simulate;
compile();
drawField();
simulate();
