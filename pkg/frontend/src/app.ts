// Operator console: live phasor plot, rolling angle/speed trends, line and
// control toggles, manual excitation sliders and a console box, all over
// the real-time service's WebSocket protocol.

import {
  SliderThrottle,
  consoleCommand,
  controlToggleCommand,
  excitationCommand,
  lineToggleCommand,
} from "./controls.js";
import { CanvasLike, renderPhasors } from "./phasor.js";
import { AckMsg, CommandMsg, Snapshot, parseServerMessage, subscribeMsg } from "./protocol.js";
import { SessionView } from "./session.js";
import { renderTrend } from "./trend.js";

const RENDER_CAP_FPS = 30;
const ACK_TIMEOUT_MS = 3000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  session = new SessionView(20);
  private ws: WebSocket | null = null;
  private reconnectDelayMs = 500;
  private lastRenderMs = 0;
  private renderDirty = false;
  private widgetsBuilt = false;
  private observedDt: number | null = null;
  private prevSnapT: number | null = null;
  private sliderThrottles = new Map<string, SliderThrottle>();
  private sliderInputs = new Map<string, HTMLInputElement>();

  private phasorCanvas = el<HTMLCanvasElement>("phasors");
  private deltaCanvas = el<HTMLCanvasElement>("trend-delta");
  private omegaCanvas = el<HTMLCanvasElement>("trend-omega");
  private statusBadge = el<HTMLSpanElement>("status");
  private toastBox = el<HTMLDivElement>("toasts");
  private lineBox = el<HTMLDivElement>("lines");
  private genBox = el<HTMLDivElement>("generators");
  private consoleInput = el<HTMLInputElement>("console-input");
  private consoleLog = el<HTMLDivElement>("console-log");

  start(): void {
    this.connect();
    this.consoleInput.addEventListener("keydown", (ev) => {
      if (ev.key === "Enter" && this.consoleInput.value.trim()) {
        this.sendConsole(this.consoleInput.value.trim());
        this.consoleInput.value = "";
      }
    });
    setInterval(() => this.flushSliders(), 25);
    requestAnimationFrame((ms) => this.renderLoop(ms));
  }

  private connect(): void {
    this.session.connection = "connecting";
    this.setStatus("connecting");
    const url = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
    const ws = new WebSocket(url);
    this.ws = ws;
    ws.onopen = () => {
      // reconnect resumes cleanly: buffers reset, no duplicate pending
      this.session.reset();
      this.widgetsBuilt = false;
      this.observedDt = null;
      this.prevSnapT = null;
      this.session.connection = "connected";
      this.reconnectDelayMs = 500;
      this.setStatus("connected");
      ws.send(JSON.stringify(subscribeMsg(1)));
    };
    ws.onmessage = (ev) => this.onMessage(String(ev.data));
    ws.onclose = () => {
      this.session.connection = "disconnected";
      this.setStatus("disconnected; retrying");
      this.ws = null;
      setTimeout(() => this.connect(), this.reconnectDelayMs);
      this.reconnectDelayMs = Math.min(this.reconnectDelayMs * 2, 8000);
    };
    ws.onerror = () => ws.close();
  }

  private onMessage(raw: string): void {
    const msg = parseServerMessage(raw);
    if (!msg) return;
    this.session.handle(msg);
    if (msg.type === "snapshot") {
      this.negotiateDecimation(msg);
      if (!this.widgetsBuilt) {
        this.buildWidgets(msg);
        this.widgetsBuilt = true;
      }
      this.syncWidgets(msg);
      if (msg.diverged) this.toast("simulation diverged; loop halted", true);
      this.renderDirty = true;
    }
  }

  /** Ask the server to decimate down to the display-useful rate. */
  private negotiateDecimation(snap: Snapshot): void {
    if (this.observedDt !== null || this.ws === null) {
      this.prevSnapT = snap.t_sim;
      return;
    }
    if (this.prevSnapT === null) {
      this.prevSnapT = snap.t_sim;
      return;
    }
    const dt = snap.t_sim - this.prevSnapT;
    if (dt > 0) {
      this.observedDt = dt;
      // floor keeps the decimated rate at or above the render cap
      const factor = Math.max(1, Math.floor(1 / (RENDER_CAP_FPS * dt)));
      if (factor > 1) this.ws.send(JSON.stringify(subscribeMsg(factor)));
    }
  }

  private send(cmd: CommandMsg, onResult?: (ack: AckMsg) => void): void {
    if (!this.ws || this.ws.readyState !== WebSocket.OPEN) {
      this.toast("not connected", true);
      return;
    }
    this.session.register(cmd.id, cmd.kind, performance.now(), (ack) => {
      if (ack.status === "rejected") {
        this.toast(`${cmd.kind} rejected: ${ack.detail ?? "unknown reason"}`, true);
      }
      onResult?.(ack);
      this.renderDirty = true;
    });
    this.ws.send(JSON.stringify(cmd));
  }

  private sendConsole(text: string): void {
    const entry = document.createElement("div");
    entry.textContent = `> ${text}`;
    this.consoleLog.append(entry);
    this.send(consoleCommand(text), (ack) => {
      const line = document.createElement("div");
      line.textContent = ack.status === "applied" ? String(ack.detail ?? "ok")
                                                  : `error: ${ack.detail}`;
      line.className = ack.status;
      this.consoleLog.append(line);
      this.consoleLog.scrollTop = this.consoleLog.scrollHeight;
    });
    this.consoleLog.scrollTop = this.consoleLog.scrollHeight;
  }

  // -- widgets ----------------------------------------------------------

  private buildWidgets(snap: Snapshot): void {
    this.lineBox.textContent = "";
    for (const line of Object.keys(snap.lines).sort()) {
      const btn = document.createElement("button");
      btn.id = `line-${line}`;
      btn.textContent = line;
      btn.addEventListener("click", () => {
        const closed = this.session.latest?.lines[line] ?? true;
        btn.classList.add("pending");
        this.send(lineToggleCommand(line, closed), () => btn.classList.remove("pending"));
      });
      this.lineBox.append(btn);
    }

    this.genBox.textContent = "";
    for (const gen of Object.keys(snap.generators).sort()) {
      const row = document.createElement("div");
      row.className = "gen-row";
      const label = document.createElement("span");
      label.textContent = gen;
      label.className = "gen-name";
      row.append(label);
      for (const device of ["avr", "gov", "pss"] as const) {
        const flag = snap.controls[gen]?.[device];
        const box = document.createElement("input");
        box.type = "checkbox";
        box.id = `ctl-${gen}-${device}`;
        box.disabled = flag === null || flag === undefined;
        box.checked = flag === true;
        box.addEventListener("change", () => {
          box.classList.add("pending");
          this.send(controlToggleCommand(gen, device, box.checked), (ack) => {
            box.classList.remove("pending");
            if (ack.status === "rejected") box.checked = !box.checked; // revert
          });
        });
        const wrap = document.createElement("label");
        wrap.append(box, document.createTextNode(device.toUpperCase()));
        row.append(wrap);
      }
      const slider = document.createElement("input");
      slider.type = "range";
      slider.id = `exc-${gen}`;
      slider.min = "0";
      slider.max = "6";
      slider.step = "0.01";
      slider.disabled = snap.controls[gen]?.avr === true;
      slider.title = "manual excitation (enabled when the AVR is off)";
      slider.addEventListener("input", () => this.offerSlider(gen, Number(slider.value)));
      this.sliderInputs.set(gen, slider);
      this.sliderThrottles.set(gen, new SliderThrottle(50));
      row.append(slider);
      this.genBox.append(row);
    }
  }

  private offerSlider(gen: string, value: number): void {
    const throttle = this.sliderThrottles.get(gen);
    if (!throttle) return;
    const v = throttle.offer(value, performance.now());
    if (v !== null) this.send(excitationCommand(gen, v));
  }

  private flushSliders(): void {
    for (const [gen, throttle] of this.sliderThrottles) {
      const v = throttle.flush(performance.now());
      if (v !== null) this.send(excitationCommand(gen, v));
    }
  }

  /** Widget truth always re-derived from the latest snapshot. */
  private syncWidgets(snap: Snapshot): void {
    for (const [line, closed] of Object.entries(snap.lines)) {
      const btn = document.getElementById(`line-${line}`);
      if (btn) btn.className = closed ? "closed" : "open";
    }
    for (const [gen, flags] of Object.entries(snap.controls)) {
      for (const device of ["avr", "gov", "pss"] as const) {
        const box = document.getElementById(`ctl-${gen}-${device}`) as HTMLInputElement | null;
        if (box && !box.classList.contains("pending")) {
          box.checked = flags[device] === true;
        }
      }
      const slider = this.sliderInputs.get(gen);
      if (slider) {
        slider.disabled = flags.avr === true;
        if (slider.disabled) {
          slider.value = String(snap.generators[gen]?.e_f ?? 0);
        }
      }
    }
    const stale = this.session.stalePending(performance.now(), ACK_TIMEOUT_MS);
    if (stale.length) this.setStatus(`connected (awaiting ${stale.length} ack)`);
  }

  // -- rendering ----------------------------------------------------------

  private renderLoop(nowMs: number): void {
    if (this.renderDirty && nowMs - this.lastRenderMs >= 1000 / RENDER_CAP_FPS) {
      this.lastRenderMs = nowMs;
      this.renderDirty = false;
      this.render();
    }
    requestAnimationFrame((ms) => this.renderLoop(ms));
  }

  private render(): void {
    const snap = this.session.latest;
    if (!snap) return;
    const order = Object.keys(snap.generators).sort();
    const pctx = this.phasorCanvas.getContext("2d") as unknown as CanvasLike;
    renderPhasors(pctx, snap, order, this.phasorCanvas.width, this.phasorCanvas.height);
    const dctx = this.deltaCanvas.getContext("2d") as unknown as CanvasLike;
    renderTrend(dctx, this.session.trends, "delta", this.session.gaps, snap.t_sim,
                this.session.horizonS, this.deltaCanvas.width,
                this.deltaCanvas.height, "rotor angle (rad)");
    const octx = this.omegaCanvas.getContext("2d") as unknown as CanvasLike;
    renderTrend(octx, this.session.trends, "d_omega", this.session.gaps, snap.t_sim,
                this.session.horizonS, this.omegaCanvas.width,
                this.omegaCanvas.height, "speed deviation (pu)");
    el<HTMLSpanElement>("t-sim").textContent = `t = ${snap.t_sim.toFixed(2)} s`;
    if (this.session.droppedTotal > 0) {
      el<HTMLSpanElement>("dropped").textContent =
        `${this.session.droppedTotal} snapshots dropped`;
    }
  }

  private setStatus(text: string): void {
    this.statusBadge.textContent = text;
    this.statusBadge.className = this.session.connection;
  }

  private toast(text: string, isError: boolean): void {
    const node = document.createElement("div");
    node.className = isError ? "toast error" : "toast";
    node.textContent = text;
    this.toastBox.append(node);
    setTimeout(() => node.remove(), 4000);
  }
}

new App().start();
