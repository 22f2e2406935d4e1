import init, { synth, detect, linf, cell_rates } from "./pkg/subgroup_audit_demo.js";

const $ = (id) => document.getElementById(id);
let lastRule = [];

function fail(el, err) {
  el.innerHTML = "";
  const span = document.createElement("span");
  span.className = "error";
  span.textContent = "error: " + (err && err.message ? err.message : err);
  el.appendChild(span);
}

function number(id, fallback) {
  const v = $(id).value.trim();
  return v === "" ? fallback : Number(v);
}

function generate() {
  const withGender = $("gender").checked;
  $("csv").value = synth(number("seed", 0), withGender);
  $("protected").value = withGender ? "Race,Age,Gender" : "Race,Age";
  lastRule = [];
  showGrid();
}

function showGrid() {
  const out = $("grid");
  try {
    const g = JSON.parse(cell_rates($("csv").value, $("target").value, $("grid-rows").value, $("grid-cols").value));
    const rowName = $("grid-rows").value;
    const colName = $("grid-cols").value;
    // literals on the two shown columns; others do not constrain the grid
    const shown = lastRule.filter((l) => l.feature === rowName || l.feature === colName);
    const inRule = (r, c) =>
      shown.length > 0 && shown.every((l) => (l.feature === rowName ? l.value === r : l.value === c));
    const table = document.createElement("table");
    table.className = "grid";
    const head = table.insertRow();
    head.appendChild(document.createElement("th"));
    for (const c of g.cols) {
      const th = document.createElement("th");
      th.textContent = c;
      head.appendChild(th);
    }
    g.rows.forEach((r, i) => {
      const tr = table.insertRow();
      const th = document.createElement("th");
      th.textContent = r;
      tr.appendChild(th);
      g.cols.forEach((c, j) => {
        const [pos, n] = g.cells[i][j];
        const td = tr.insertCell();
        const rate = n ? pos / n : 0;
        td.textContent = n ? `${pos}/${n}` : "–";
        td.title = n ? `rate ${rate.toFixed(3)}` : "empty";
        td.style.background = n ? `hsl(${Math.round(rate * 120)}, 65%, 80%)` : "#fff";
        if (inRule(r, c)) td.classList.add("hit");
      });
    });
    out.innerHTML = "";
    out.appendChild(table);
  } catch (e) {
    fail(out, e);
  }
}

function runDetect() {
  const out = $("detect-out");
  try {
    const maxLit = number("maxlit", -1);
    const json = detect($("csv").value, $("target").value, $("protected").value, $("bins").value, maxLit);
    const r = JSON.parse(json);
    lastRule = r.rule;
    out.textContent = `${r.rule_text}   MSD ${r.msd_value.toFixed(4)}   signed gap ${r.signed_gap >= 0 ? "+" : ""}${r.signed_gap.toFixed(4)}   (${r.search.nodes_explored} nodes, ${r.search.nodes_pruned} pruned)`;
    $("detect-json").textContent = json;
    showGrid();
  } catch (e) {
    fail(out, e);
  }
}

function runLinf() {
  const out = $("linf-out");
  try {
    const json = linf(
      $("csv").value,
      $("target").value,
      $("protected").value,
      $("feature").value,
      $("value").value,
      number("delta", 0.125),
      number("epsilon", 0.05),
      number("eta", 0.05),
      number("maxsub", 0),
      number("linf-seed", 0),
    );
    const r = JSON.parse(json);
    out.innerHTML = "";
    const v = document.createElement("span");
    v.className = "verdict-" + r.verdict;
    v.textContent = r.verdict;
    out.appendChild(v);
    const mode = r.exact ? "exact" : `subsampled ${r.subsample_sizes[0]} / ${r.subsample_sizes[1]} rows`;
    out.append(`   ℓ∞ gap ${r.estimate.toFixed(4)} ± ${r.margin.toFixed(4)} vs Δ ${r.threshold} (${mode})`);
    $("linf-json").textContent = json;
  } catch (e) {
    fail(out, e);
  }
}

async function main() {
  await init();
  $("gen").onclick = generate;
  $("grid-btn").onclick = () => showGrid();
  $("detect").onclick = runDetect;
  $("linf").onclick = runLinf;
  $("file").onchange = async (ev) => {
    const f = ev.target.files[0];
    if (f) {
      $("csv").value = await f.text();
      lastRule = [];
    }
  };
  generate();
}

main();
