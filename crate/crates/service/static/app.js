"use strict";

const $ = (id) => document.getElementById(id);
let session = null;
let source = null;

async function api(method, path, body) {
  const res = await fetch(path, {
    method,
    headers: body ? { "content-type": "application/json" } : {},
    body: body ? JSON.stringify(body) : undefined,
  });
  const text = await res.text();
  const data = text ? JSON.parse(text) : null;
  if (!res.ok) throw new Error(data && data.error ? data.error : res.statusText);
  return data;
}

function status(msg) {
  $("status").textContent = msg;
}

function controls(info) {
  const box = $("controls");
  box.innerHTML = "";
  for (const c of info.controls) {
    const label = document.createElement("label");
    const value = info.staged[c.key];
    const v = value.real !== undefined ? value.real : value.int;
    const input = document.createElement("input");
    input.type = "range";
    input.min = c.lo;
    input.max = c.hi;
    input.step = c.step;
    input.value = v;
    const out = document.createElement("span");
    out.textContent = ` ${c.key} = ${v}`;
    input.addEventListener("change", async () => {
      try {
        const r = await api("POST", `/api/sessions/${session}/params`, { [c.key]: Number(input.value) });
        out.textContent = ` ${c.key} = ${input.value}`;
        out.className = r.pending_reset.includes(c.key) ? "pending" : "";
      } catch (e) {
        status(e.message);
      }
    });
    label.append(input, out);
    box.append(label);
  }
}

function draw(frame) {
  const cv = $("view");
  const ctx = cv.getContext("2d");
  const s = Math.min(cv.width / frame.width, cv.height / frame.height);
  const X = (x) => x * s;
  const Y = (y) => cv.height - y * s;
  ctx.fillStyle = "#fff";
  ctx.fillRect(0, 0, cv.width, cv.height);
  for (const c of frame.cells || []) {
    ctx.fillStyle = c.color;
    ctx.fillRect(X(c.x), Y(c.y + c.h), c.w * s, c.h * s);
  }
  ctx.strokeStyle = "#9a9a9a";
  for (const [x1, y1, x2, y2] of frame.edges || []) {
    ctx.beginPath();
    ctx.moveTo(X(x1), Y(y1));
    ctx.lineTo(X(x2), Y(y2));
    ctx.stroke();
  }
  for (const e of frame.entities) {
    const r = (e.size * s) / 2;
    ctx.fillStyle = e.color;
    ctx.beginPath();
    if (e.shape === "arrow") {
      const a = e.orientation;
      const hx = -Math.sin(a), hy = Math.cos(a);
      const px = hy, py = -hx;
      const tip = [e.x + 0.6 * e.size * hx, e.y + 0.6 * e.size * hy];
      const bx = e.x - 0.4 * e.size * hx, by = e.y - 0.4 * e.size * hy;
      const w = 0.3 * e.size;
      ctx.moveTo(X(tip[0]), Y(tip[1]));
      ctx.lineTo(X(bx + w * px), Y(by + w * py));
      ctx.lineTo(X(bx - w * px), Y(by - w * py));
      ctx.closePath();
      ctx.fill();
    } else if (e.shape === "box" || e.shape === "square") {
      ctx.fillRect(X(e.x) - r, Y(e.y) - r, 2 * r, 2 * r);
    } else {
      ctx.arc(X(e.x), Y(e.y), r, 0, 2 * Math.PI);
      ctx.fill();
      ctx.strokeStyle = "#333333";
      ctx.stroke();
    }
  }
  $("plots").textContent = Object.entries(frame.plots)
    .map(([k, v]) => `${k}: ${v === null ? "-" : v.toFixed(4)}`)
    .join("\n");
  status(`session ${session} epoch ${frame.epoch} tick ${frame.tick}`);
}

function follow() {
  if (source) source.close();
  source = new EventSource(`/api/sessions/${session}/stream`);
  source.addEventListener("frame", (ev) => draw(JSON.parse(ev.data)));
  source.addEventListener("error", () => {});
}

async function create() {
  if (session !== null) await api("DELETE", `/api/sessions/${session}`).catch(() => {});
  const info = await api("POST", "/api/sessions", { model: $("model").value });
  session = info.id;
  controls(info);
  follow();
}

async function main() {
  const models = await api("GET", "/api/models");
  for (const m of models) {
    const o = document.createElement("option");
    o.value = m.name;
    o.textContent = m.name;
    $("model").append(o);
  }
  $("create").onclick = () => create().catch((e) => status(e.message));
  $("run").onclick = () => api("POST", `/api/sessions/${session}/run`, {}).catch((e) => status(e.message));
  $("pause").onclick = () => api("POST", `/api/sessions/${session}/pause`).catch((e) => status(e.message));
  $("reset").onclick = async () => {
    try {
      controls(await api("POST", `/api/sessions/${session}/reset`));
    } catch (e) {
      status(e.message);
    }
  };
  await create();
}

main().catch((e) => status(e.message));
