import init, { AgarDemo, noise_curve, noise_lambda, PointMassTrainer } from "./pkg/aclab_web.js";

await init();

// pellet arena

const view = document.getElementById("view");
const gridCanvas = document.getElementById("grid");
const pixelCanvas = document.getElementById("pixels");
const arenaStats = document.getElementById("arena-stats");
let seed = 1n;
let demo = new AgarDemo(seed);
let cursor = [0.5, 0.5];
let paused = false;

view.addEventListener("mousemove", (e) => {
  const r = view.getBoundingClientRect();
  cursor = [(e.clientX - r.left) / r.width, (e.clientY - r.top) / r.height];
});
document.getElementById("arena-reset").onclick = () => {
  seed += 1n;
  demo.free();
  demo = new AgarDemo(seed);
};
document.getElementById("arena-pause").onclick = (e) => {
  paused = !paused;
  e.target.textContent = paused ? "Resume" : "Pause";
};

function drawArena() {
  const ctx = view.getContext("2d");
  const side = demo.view_side();
  const px = demo.player_x(), py = demo.player_y();
  const scale = view.width / side;
  const toScreen = (x, y) => [(x - px + side / 2) * scale, (y - py + side / 2) * scale];
  ctx.fillStyle = "#f4f4f4";
  ctx.fillRect(0, 0, view.width, view.height);
  // arena walls
  const [wx0, wy0] = toScreen(0, 0);
  const arena = demo.arena_side() * scale;
  ctx.strokeStyle = "#999";
  ctx.strokeRect(wx0, wy0, arena, arena);
  const pellets = demo.pellets();
  ctx.fillStyle = "#2ca02c";
  for (let i = 0; i < pellets.length; i += 2) {
    const [x, y] = toScreen(pellets[i], pellets[i + 1]);
    if (x < -4 || y < -4 || x > view.width + 4 || y > view.height + 4) continue;
    ctx.beginPath();
    ctx.arc(x, y, Math.max(2, 3 * scale), 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.fillStyle = "#1f77b4";
  ctx.beginPath();
  ctx.arc(view.width / 2, view.height / 2, demo.radius() * scale, 0, 2 * Math.PI);
  ctx.fill();

  const g = demo.vision_grid();
  const n = demo.grid_side();
  const gctx = gridCanvas.getContext("2d");
  const cell = gridCanvas.width / n;
  const max = Math.max(1, ...g);
  for (let r = 0; r < n; r++) {
    for (let c = 0; c < n; c++) {
      const v = Math.round(255 * (1 - g[r * n + c] / max));
      gctx.fillStyle = `rgb(${v},${v},255)`;
      gctx.fillRect(c * cell, r * cell, cell, cell);
    }
  }

  const pside = demo.agent_view_side();
  const img = new ImageData(new Uint8ClampedArray(demo.agent_view_rgba()), pside, pside);
  const off = new OffscreenCanvas(pside, pside);
  off.getContext("2d").putImageData(img, 0, 0);
  const pctx = pixelCanvas.getContext("2d");
  pctx.imageSmoothingEnabled = false;
  pctx.drawImage(off, 0, 0, pixelCanvas.width, pixelCanvas.height);

  arenaStats.textContent =
    `frame      ${demo.frame()}\n` +
    `mass       ${demo.mass().toFixed(2)}\n` +
    `radius     ${demo.radius().toFixed(1)}\n` +
    `view side  ${side.toFixed(0)}\n` +
    `net gain   ${demo.total_reward().toFixed(2)}` +
    (demo.done() ? "\nepisode over" : "");
}

function arenaLoop() {
  if (!paused && !demo.done()) demo.step(cursor[0], cursor[1]);
  drawArena();
  setTimeout(() => requestAnimationFrame(arenaLoop), 60);
}
arenaLoop();

// noise schedule

function axes(ctx, w, h) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#444";
  ctx.strokeRect(40, 10, w - 50, h - 40);
}

function plotLine(canvas, ys, color, yMax) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width - 50, h = canvas.height - 40;
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ys.forEach((v, i) => {
    const x = 40 + (i / Math.max(1, ys.length - 1)) * w;
    const y = 10 + h - (v / yMax) * h;
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.stroke();
}

function drawNoise() {
  const sd0 = parseFloat(document.getElementById("sd0").value);
  const sdh = parseFloat(document.getElementById("sdh").value);
  const tmax = BigInt(Math.max(2, parseInt(document.getElementById("tmax").value, 10)));
  const canvas = document.getElementById("noise-plot");
  const stats = document.getElementById("noise-stats");
  axes(canvas.getContext("2d"), canvas.width, canvas.height);
  try {
    const ys = noise_curve(sd0, sdh, tmax, 200);
    plotLine(canvas, ys, "#d62728", Math.max(...ys) * 1.05);
    stats.textContent =
      `lambda     ${noise_lambda(sd0, sdh, tmax).toExponential(4)}\n` +
      `N(0)       ${ys[0].toFixed(4)}\n` +
      `N(T/2)     ${noise_curve(sd0, sdh, tmax, 3)[1].toFixed(4)}\n` +
      `N(T)       ${ys[ys.length - 1].toFixed(6)}`;
  } catch (e) {
    stats.textContent = String(e);
  }
}
for (const id of ["sd0", "sdh", "tmax"]) document.getElementById(id).addEventListener("input", drawNoise);
drawNoise();

// live trainer

let trainer = null;
let running = false;
let returns = [];

function drawPath(path) {
  const canvas = document.getElementById("path");
  const ctx = canvas.getContext("2d");
  const half = 2.5;
  const s = canvas.width / (2 * half);
  const to = (x, y) => [(x + half) * s, (half - y) * s];
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#aaa";
  ctx.strokeRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#d62728";
  const [gx, gy] = to(0, 0);
  ctx.fillRect(gx - 4, gy - 4, 8, 8);
  ctx.strokeStyle = "#1f77b4";
  ctx.beginPath();
  for (let i = 0; i < path.length; i += 2) {
    const [x, y] = to(path[i], path[i + 1]);
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  }
  ctx.stroke();
}

function trainLoop() {
  if (!running || trainer === null) return;
  const loss = trainer.train(250);
  const ret = trainer.evaluate(7n);
  returns.push(ret);
  drawPath(trainer.rollout(7n));
  const canvas = document.getElementById("returns");
  axes(canvas.getContext("2d"), canvas.width, canvas.height);
  const shifted = returns.map((r) => r + 4);
  plotLine(canvas, shifted, "#2ca02c", Math.max(8, ...shifted));
  document.getElementById("train-stats").textContent =
    `step        ${trainer.steps()} / ${trainer.total_steps()}\n` +
    `episodes    ${trainer.episodes()}\n` +
    `noise SD    ${trainer.current_sd().toFixed(4)}\n` +
    `critic loss ${loss.toExponential(3)}\n` +
    `test return ${ret.toFixed(3)}`;
  if (trainer.steps() >= trainer.total_steps()) {
    running = false;
    return;
  }
  setTimeout(trainLoop, 0);
}

document.getElementById("train-start").onclick = () => {
  if (trainer !== null) trainer.free();
  const alg = document.getElementById("alg").value;
  const steps = BigInt(parseInt(document.getElementById("train-steps").value, 10));
  trainer = new PointMassTrainer(alg, steps, 3n);
  returns = [];
  running = true;
  trainLoop();
};
document.getElementById("train-stop").onclick = () => {
  running = false;
};
