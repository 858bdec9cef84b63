import init, { weightCurve, explore, gaussianize } from "./pkg/priorglasso_web.js";

const $ = (id) => document.getElementById(id);

function drawCurve(k) {
  const canvas = $("curve");
  const ctx = canvas.getContext("2d");
  const values = weightCurve(k, 101);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(30, 10, canvas.width - 40, canvas.height - 40);
  ctx.fillStyle = "#333";
  ctx.fillText("prior W", canvas.width / 2, canvas.height - 8);
  ctx.fillText("w̃", 8, canvas.height / 2);
  ctx.beginPath();
  ctx.strokeStyle = "#1f5fa8";
  values.forEach((w, i) => {
    const x = 30 + (i / (values.length - 1)) * (canvas.width - 40);
    const y = 10 + (1 - w) * (canvas.height - 40);
    if (i === 0) ctx.moveTo(x, y); else ctx.lineTo(x, y);
  });
  ctx.stroke();
}

function drawEdges(canvas, p, edges, title) {
  const ctx = canvas.getContext("2d");
  const r = canvas.width / 2 - 30;
  const cx = canvas.width / 2;
  const cy = canvas.height / 2;
  const pos = (i) => [cx + r * Math.cos((2 * Math.PI * i) / p), cy + r * Math.sin((2 * Math.PI * i) / p)];
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#333";
  ctx.fillText(title, 8, 14);
  const seen = new Set();
  for (const e of edges) {
    const key = `${e.i}-${e.j}-${e.sign}`;
    if (seen.has(key)) continue;
    seen.add(key);
    const [x1, y1] = pos(e.i);
    const [x2, y2] = pos(e.j);
    ctx.strokeStyle = e.sign === "+" ? "rgba(200,60,40,0.5)" : "rgba(40,90,200,0.5)";
    ctx.beginPath();
    ctx.moveTo(x1, y1);
    ctx.lineTo(x2, y2);
    ctx.stroke();
  }
  for (let i = 0; i < p; i++) {
    const [x, y] = pos(i);
    ctx.fillStyle = "#222";
    ctx.beginPath();
    ctx.arc(x, y, 3, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function runFit() {
  const num = (id) => Number($(id).value);
  try {
    const result = JSON.parse(
      explore(num("p"), num("classes"), num("n"), num("ratio"), num("density"), BigInt(num("seed")), num("rho"), num("gamma")),
    );
    drawEdges($("truth"), result.spec.p, result.true_edges, "true support (all classes)");
    drawEdges($("estimate"), result.spec.p, result.estimated_edges, "estimated support");
    $("summary").textContent = [
      `iterations ${result.iterations} (converged: ${result.converged})`,
      `combined F1 joint ${result.joint_f1.toFixed(3)}, independent ${result.independent_f1.toFixed(3)}`,
      `common ratio estimated ${result.csr_estimated.toFixed(3)}, target ${result.csr_target.toFixed(3)}`,
    ].join("\n");
  } catch (err) {
    $("summary").textContent = `error: ${err.message ?? err}`;
  }
}

function runTransform() {
  try {
    const values = $("values").value.split(",").map((v) => Number(v.trim()));
    const z = gaussianize(new Float64Array(values));
    $("transformed").textContent = values.map((v, i) => `${v} → ${z[i].toFixed(4)}`).join("\n");
  } catch (err) {
    $("transformed").textContent = `error: ${err.message ?? err}`;
  }
}

await init();
$("status").textContent = "";
$("k").addEventListener("input", (e) => {
  $("k-value").textContent = e.target.value;
  drawCurve(Number(e.target.value));
});
$("fit").addEventListener("click", runFit);
$("transform").addEventListener("click", runTransform);
drawCurve(10);
runFit();
runTransform();
