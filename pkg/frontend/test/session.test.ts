import { describe, expect, it } from "vitest";

import { AckMsg } from "../src/protocol.js";
import { SessionView } from "../src/session.js";
import { makeSnapshot } from "./helpers.js";

const ack = (id: string, status: "applied" | "rejected" = "applied"): AckMsg =>
  ({ type: "ack", id, status, t_sim: 1.0, detail: null });

describe("SessionView", () => {
  it("tracks the latest snapshot and per-generator trends", () => {
    const s = new SessionView(20);
    s.handle(makeSnapshot(0.005, { G1: { delta: 0.1, d_omega: 0.001, e_f: 2.0 } }));
    s.handle(makeSnapshot(0.010, { G1: { delta: 0.2, d_omega: 0.002, e_f: 2.1 } }));
    expect(s.latest?.t_sim).toBe(0.010);
    const tr = s.trends.get("G1")!;
    expect(tr.delta.samples().ys).toEqual([0.1, 0.2]);
    expect(tr.d_omega.samples().ys).toEqual([0.001, 0.002]);
  });

  it("keeps trend buffers time-monotone", () => {
    const s = new SessionView(20);
    s.handle(makeSnapshot(0.010, { G1: { delta: 0.2, d_omega: 0, e_f: 2 } }));
    s.handle(makeSnapshot(0.005, { G1: { delta: 9.9, d_omega: 0, e_f: 2 } }));
    const ts = s.trends.get("G1")!.delta.samples().ts;
    expect(ts).toEqual([0.010]); // stale sample dropped
  });

  it("trims trends to the horizon", () => {
    const s = new SessionView(1.0);
    for (let k = 0; k <= 300; k++) {
      s.handle(makeSnapshot(k * 0.01, { G1: { delta: k, d_omega: 0, e_f: 2 } }));
    }
    const ts = s.trends.get("G1")!.delta.samples().ts;
    expect(ts[0]).toBeGreaterThanOrEqual(3.0 - 1.0 - 1e-9);
    expect(ts[ts.length - 1]).toBeCloseTo(3.0, 12);
  });

  it("clears pending commands exactly once on ack", () => {
    const s = new SessionView(20);
    let results = 0;
    s.register("c1", "line_trip", 0, () => results++);
    expect(s.pendingCount()).toBe(1);
    s.handle(ack("c1"));
    s.handle(ack("c1")); // duplicate ack ignored
    expect(results).toBe(1);
    expect(s.pendingCount()).toBe(0);
  });

  it("records a visible gap across dropped notices", () => {
    const s = new SessionView(20);
    s.handle(makeSnapshot(1.0, { G1: { delta: 0, d_omega: 0, e_f: 2 } }));
    s.handle({ type: "dropped", count: 7 });
    s.handle({ type: "dropped", count: 3 }); // still the same gap
    s.handle(makeSnapshot(2.0, { G1: { delta: 0, d_omega: 0, e_f: 2 } }));
    expect(s.gaps).toEqual([{ tBefore: 1.0, tAfter: 2.0 }]);
    expect(s.droppedTotal).toBe(10);
  });

  it("reset() clears buffers and pending without duplicates", () => {
    const s = new SessionView(20);
    s.register("a", "line_trip", 0, () => {});
    s.handle(makeSnapshot(1.0, { G1: { delta: 0, d_omega: 0, e_f: 2 } }));
    s.handle({ type: "dropped", count: 1 });
    s.reset();
    expect(s.latest).toBeNull();
    expect(s.trends.size).toBe(0);
    expect(s.gaps).toEqual([]);
    expect(s.pendingCount()).toBe(0);
    // an ack from the previous connection is a no-op
    s.handle(ack("a"));
    expect(s.pendingCount()).toBe(0);
  });

  it("reports stale pending commands", () => {
    const s = new SessionView(20);
    s.register("slow", "fault_on", 1000, () => {});
    expect(s.stalePending(1500, 3000)).toHaveLength(0);
    expect(s.stalePending(5000, 3000).map((c) => c.id)).toEqual(["slow"]);
  });
});
