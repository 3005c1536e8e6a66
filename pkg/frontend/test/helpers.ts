import { Snapshot } from "../src/protocol.js";

export function makeSnapshot(
  tSim: number,
  gens: Record<string, { delta: number; d_omega: number; e_f: number; p_e?: number }>,
  over: Partial<Snapshot> = {},
): Snapshot {
  const generators: Snapshot["generators"] = {};
  const controls: Snapshot["controls"] = {};
  for (const [name, g] of Object.entries(gens)) {
    generators[name] = { delta: g.delta, d_omega: g.d_omega, e_f: g.e_f, p_e: g.p_e ?? 0 };
    controls[name] = { avr: true, gov: true, pss: true };
  }
  return {
    type: "snapshot",
    t_sim: tSim,
    generators,
    buses: { B1: [1.0, 0.0] },
    controls,
    lines: { "L7-8a": true },
    timing: null,
    diverged: false,
    ...over,
  };
}

/** Canvas stand-in recording every draw call for assertions. */
export class RecordingCanvas {
  calls: Array<{ op: string; args: number[] | string[] }> = [];
  strokeStyle = "";
  fillStyle = "";
  lineWidth = 0;
  font = "";

  private log(op: string, ...args: Array<number | string>) {
    this.calls.push({ op, args: args as number[] });
  }

  clearRect(x: number, y: number, w: number, h: number) { this.log("clearRect", x, y, w, h); }
  beginPath() { this.log("beginPath"); }
  moveTo(x: number, y: number) { this.log("moveTo", x, y); }
  lineTo(x: number, y: number) { this.log("lineTo", x, y); }
  arc(x: number, y: number, r: number, a0: number, a1: number) { this.log("arc", x, y, r, a0, a1); }
  stroke() { this.log("stroke"); }
  fill() { this.log("fill"); }
  fillText(text: string, x: number, y: number) { this.calls.push({ op: "fillText", args: [text, String(x), String(y)] }); }
}
