import init, { convert, score, qa_match } from "./pkg/chartrel_web.js";

const $ = (id) => document.getElementById(id);

function esc(s) {
  return String(s).replace(/[&<>"]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" })[c]);
}

function fmt(x) {
  return x === null ? "inf" : Number(x).toFixed(4);
}

function renderScore(r) {
  let html = "<table><tr><th>tier</th><th>J</th><th>e</th><th>IoU</th><th>matched</th></tr>";
  for (const t of r.tiers) {
    html += `<tr><td>${esc(t.name)}</td><td>${t.j_thr}</td><td>${t.e_thr}</td>` +
      `<td>${t.iou === null ? "n/a" : t.iou.toFixed(4)}</td><td>${t.matched}</td></tr>`;
  }
  html += "</table><h3>Custom tier pairs (J, e)</h3>";

  const custom = r.tiers[r.tiers.length - 1];
  const matched = new Set(custom.pairs.map(([p, q]) => `${p},${q}`));
  html += "<table><tr><th>pred \\ gt</th>";
  for (const g of r.gt) html += `<th>${esc(g.row)} / ${esc(g.col)} = ${esc(g.value)}</th>`;
  html += "</tr>";
  r.pred.forEach((p, i) => {
    html += `<tr><th>${esc(p.row)} / ${esc(p.col)} = ${esc(p.value)}</th>`;
    r.judgments[i].forEach((c, j) => {
      const cls = matched.has(`${i},${j}`) ? "match" : c.l ? "ok" : "";
      html += `<td class="${cls}">${c.j}, ${fmt(c.e)}</td>`;
    });
    html += "</tr>";
  });
  return html + "</table>";
}

function guard(out, f) {
  try {
    f();
  } catch (e) {
    out.innerHTML = `<span class="error">${esc(e.message ?? e)}</span>`;
  }
}

await init();

$("conv-go").onclick = () =>
  guard($("conv-out"), () => {
    $("conv-out").textContent = convert($("conv-in").value, $("conv-to").value);
  });

$("score-go").onclick = () =>
  guard($("score-out"), () => {
    const json = score($("pred").value, $("gt").value, Number($("jthr").value), Number($("ethr").value), $("mode").value);
    $("score-out").innerHTML = renderScore(JSON.parse(json));
  });

$("qa-go").onclick = () => {
  const ok = qa_match($("qa-pred").value, $("qa-gold").value, Number($("qa-margin").value));
  $("qa-out").textContent = ok ? "match" : "no match";
};
