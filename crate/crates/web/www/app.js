import init, { attribute_names, gaze_heatmap, compare_policies, Episode } from "./pkg/oversight_web.js";

const DRONES = 4;
const ATTRS = 8;
const $ = (id) => document.getElementById(id);

function showError(e) {
  $("error").textContent = String(e && e.message ? e.message : e);
}

function buildGrid(table, names, onClick) {
  table.innerHTML = "";
  const head = table.insertRow();
  head.appendChild(document.createElement("th"));
  for (const n of names) {
    const th = document.createElement("th");
    th.textContent = n;
    head.appendChild(th);
  }
  const cells = [];
  for (let d = 0; d < DRONES; d++) {
    const row = table.insertRow();
    const th = document.createElement("th");
    th.textContent = `drone ${d}`;
    row.appendChild(th);
    for (let a = 0; a < ATTRS; a++) {
      const td = row.insertCell();
      td.className = "icon";
      const i = d * ATTRS + a;
      if (onClick) td.addEventListener("click", () => onClick(i));
      cells.push(td);
    }
  }
  return cells;
}

function shade(td, p, max) {
  const v = max > 0 ? p / max : 0;
  td.style.background = `rgba(40, 110, 220, ${(0.85 * v).toFixed(3)})`;
}

// Heatmap
const highlights = new Uint8Array(DRONES * ATTRS);
let heatCells = [];

function drawHeatmap() {
  const beta = parseFloat($("beta").value);
  const tau = parseFloat($("tau").value);
  $("beta-v").textContent = beta.toFixed(1);
  $("tau-v").textContent = tau.toFixed(1);
  try {
    const gaze = gaze_heatmap(highlights, beta, tau);
    const max = Math.max(...gaze);
    gaze.forEach((p, i) => {
      const td = heatCells[i];
      td.textContent = (100 * p).toFixed(1) + "%";
      td.classList.toggle("hl", highlights[i] === 1);
      shade(td, p, max);
    });
    $("error").textContent = "";
  } catch (e) {
    showError(e);
  }
}

// Episode
let episode = null;
let epCells = [];
let timer = null;

function drawFrame(f) {
  const max = Math.max(...f.gaze);
  for (let i = 0; i < DRONES * ATTRS; i++) {
    const td = epCells[i];
    td.textContent = `${f.att[i].toFixed(1)} / ${f.usr[i].toFixed(1)}`;
    td.classList.toggle("hl", f.hlt[i] === 1);
    td.classList.toggle("fix", f.fixation === i);
    td.classList.toggle("crit", f.critical.includes(i));
    shade(td, f.gaze[i], max);
  }
  $("ep-step").textContent = `step ${f.step} (t = ${f.t.toFixed(1)} s)`;
  $("ep-reward").textContent = `reward ${f.reward.toFixed(0)}`;
  $("ep-score").textContent = `score ${f.score.toFixed(0)}`;
  $("ep-dist").textContent = `belief distance ${f.belief_distance.toFixed(1)}`;
}

function stopPlay() {
  if (timer !== null) clearInterval(timer);
  timer = null;
  $("play").textContent = "play";
}

function resetEpisode() {
  stopPlay();
  try {
    if (episode) episode.free();
    episode = new Episode($("policy").value, parseInt($("seed").value, 10) || 0, parseFloat($("beta").value));
    drawFrame(JSON.parse(episode.frame()));
    $("error").textContent = "";
  } catch (e) {
    showError(e);
  }
}

function stepEpisode() {
  if (!episode || episode.done()) {
    stopPlay();
    return;
  }
  try {
    drawFrame(JSON.parse(episode.step()));
  } catch (e) {
    stopPlay();
    showError(e);
  }
}

// Comparison
function runComparison() {
  const n = parseInt($("cmp-n").value, 10) || 1;
  const h = parseFloat($("cmp-h").value);
  const seed = parseInt($("seed").value, 10) || 0;
  try {
    const rows = JSON.parse(compare_policies(n, seed, h, parseFloat($("beta").value)));
    const t = $("cmp");
    t.innerHTML = "<tr><th>policy</th><th>mean episode reward</th><th>highlights per step</th></tr>";
    for (const r of rows) {
      const tr = t.insertRow();
      tr.insertCell().textContent = r.policy;
      tr.insertCell().textContent = r.mean_episode_reward.toFixed(0);
      tr.insertCell().textContent = r.mean_highlights_per_step.toFixed(2);
    }
    $("error").textContent = "";
  } catch (e) {
    showError(e);
  }
}

async function main() {
  await init();
  const names = JSON.parse(attribute_names());
  heatCells = buildGrid($("heatmap"), names, (i) => {
    highlights[i] ^= 1;
    drawHeatmap();
  });
  epCells = buildGrid($("episode"), names, null);
  $("beta").addEventListener("input", drawHeatmap);
  $("tau").addEventListener("input", drawHeatmap);
  $("clear").addEventListener("click", () => {
    highlights.fill(0);
    drawHeatmap();
  });
  $("reset").addEventListener("click", resetEpisode);
  $("step").addEventListener("click", stepEpisode);
  $("play").addEventListener("click", () => {
    if (timer !== null) {
      stopPlay();
      return;
    }
    $("play").textContent = "pause";
    timer = setInterval(stepEpisode, 100);
  });
  $("compare").addEventListener("click", runComparison);
  drawHeatmap();
  resetEpisode();
}

main().catch(showError);
