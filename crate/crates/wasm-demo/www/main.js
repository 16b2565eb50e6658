import init, { exactSummary, runTraces, dualCheck } from './pkg/fgmc_wasm.js';

const $ = (id) => document.getElementById(id);
const model = () => [$('preset').value.trim(), Number($('size').value)];
const COLORS = ['#1f77b4', '#ff7f0e', '#2ca02c', '#d62728', '#9467bd', '#8c564b', '#e377c2', '#7f7f7f', '#bcbd22', '#17becf'];

function guard(out, f) {
  try {
    f();
  } catch (e) {
    out.innerHTML = '';
    const p = document.createElement('p');
    p.className = 'err';
    p.textContent = e.message ?? String(e);
    out.appendChild(p);
  }
}

function showExact() {
  const out = $('exact-out');
  guard(out, () => {
    const s = JSON.parse(exactSummary(...model()));
    const rows = ['plus', 'minus', 'plus_i', 'minus_i'].map((b) => {
      const x = s.bins[b];
      const per = x.log2_abs_per_n == null ? '-' : x.log2_abs_per_n.toFixed(5);
      return `<tr><td>${b}</td><td>${x.count}</td><td>${per}</td></tr>`;
    });
    out.innerHTML = `<table><tr><th>bin</th><th>|X<sub>b</sub>|</th><th>(1/N) log<sub>2</sub>|Z<sub>b</sub>|</th></tr>${rows.join('')}</table>
      <p>Z<sub>f</sub> = ${s.z_f[0].toPrecision(6)} ${s.z_f[1] >= 0 ? '+' : '-'} ${Math.abs(s.z_f[1]).toPrecision(6)}i,
      |Z<sub>f</sub>| / Z<sub>|f|</sub> = ${s.cancellation_ratio.toExponential(2)} (${s.method})</p>`;
  });
}

function svgEl(name, attrs) {
  const e = document.createElementNS('http://www.w3.org/2000/svg', name);
  for (const [k, v] of Object.entries(attrs)) e.setAttribute(k, v);
  return e;
}

function plot(data, kmax) {
  const [w, h, l, r, t, b] = [880, 420, 70, 20, 20, 40];
  const ys = data.chains.flat().map((p) => p[1]);
  if (data.exact != null) ys.push(data.exact);
  let lo = Math.min(...ys), hi = Math.max(...ys);
  if (hi - lo < 1e-9) { lo -= 0.5; hi += 0.5; }
  const pad = 0.05 * (hi - lo);
  lo -= pad; hi += pad;
  const px = (k) => l + (w - l - r) * k / kmax;
  const py = (y) => t + (h - t - b) * (hi - y) / (hi - lo);
  const svg = svgEl('svg', { width: w, height: h, 'font-size': 11 });
  svg.appendChild(svgEl('rect', { x: l, y: t, width: w - l - r, height: h - t - b, fill: 'none', stroke: '#000' }));
  for (let i = 0; i <= 5; i++) {
    const y = lo + (hi - lo) * i / 5;
    svg.appendChild(svgEl('line', { x1: l, x2: w - r, y1: py(y), y2: py(y), stroke: '#eee' }));
    const ty = svgEl('text', { x: l - 5, y: py(y) + 4, 'text-anchor': 'end' });
    ty.textContent = y.toFixed(4);
    svg.appendChild(ty);
    const tx = svgEl('text', { x: px(kmax * i / 5), y: h - b + 15, 'text-anchor': 'middle' });
    tx.textContent = Math.round(kmax * i / 5);
    svg.appendChild(tx);
  }
  if (data.exact != null) {
    svg.appendChild(svgEl('line', { x1: l, x2: w - r, y1: py(data.exact), y2: py(data.exact), stroke: '#000', 'stroke-dasharray': '6 4' }));
  }
  data.chains.forEach((pts, i) => {
    const points = pts.map(([k, y]) => `${px(k).toFixed(1)},${py(y).toFixed(1)}`).join(' ');
    svg.appendChild(svgEl('polyline', { points, fill: 'none', stroke: COLORS[i % COLORS.length] }));
  });
  const cap = svgEl('text', { x: (l + w - r) / 2, y: h - 8, 'text-anchor': 'middle' });
  cap.textContent = `k (samples), ${data.label}${data.exact != null ? ', dashed: exact' : ''}`;
  svg.appendChild(cap);
  return svg;
}

function showTraces() {
  const out = $('plot');
  out.textContent = 'running...';
  // Let the page repaint before the synchronous run.
  setTimeout(() => guard(out, () => {
    const k = Number($('k').value);
    const data = JSON.parse(runTraces(...model(), $('estimator').value, $('bin').value, k, Number($('chains').value), Number($('seed').value)));
    out.innerHTML = '';
    out.appendChild(plot(data, k));
  }), 10);
}

function showDual() {
  const out = $('dual-out');
  guard(out, () => {
    const r = JSON.parse(dualCheck(...model()));
    out.textContent = JSON.stringify(r, null, 2) + (r.zero_equivalence ? '\nPASS' : '\nFAIL');
  });
}

await init();
$('exact').onclick = showExact;
$('run').onclick = showTraces;
$('dual').onclick = showDual;
showExact();
