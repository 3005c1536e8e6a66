// Client-side session state: latest snapshot, rolling trends, pending
// commands. Everything displayed derives from the latest snapshot or ack;
// the only optimistic local state is the pending marker itself.

import { AckMsg, ServerMessage, Snapshot } from "./protocol.js";
import { TrendBuffer } from "./ring.js";

export type ConnectionState = "disconnected" | "connecting" | "connected";

export interface PendingCommand {
  id: string;
  kind: string;
  sentAt: number;
  onResult: (ack: AckMsg) => void;
}

export interface Gap {
  tBefore: number; // last snapshot time before the drop notice
  tAfter: number; // first snapshot time after it (fill-in on arrival)
}

export interface GenTrends {
  delta: TrendBuffer;
  d_omega: TrendBuffer;
}

export class SessionView {
  connection: ConnectionState = "disconnected";
  latest: Snapshot | null = null;
  trends = new Map<string, GenTrends>();
  gaps: Gap[] = [];
  droppedTotal = 0;
  private pending = new Map<string, PendingCommand>();
  private pendingGap: number | null = null; // tBefore awaiting its tAfter

  constructor(public horizonS: number = 20) {}

  /** Reconnect semantics: buffers reset, no duplicate pending commands. */
  reset(): void {
    this.latest = null;
    this.trends.clear();
    this.gaps = [];
    this.pendingGap = null;
    this.droppedTotal = 0;
    this.pending.clear();
  }

  pendingCount(): number {
    return this.pending.size;
  }

  isPending(id: string): boolean {
    return this.pending.has(id);
  }

  register(id: string, kind: string, now: number, onResult: (ack: AckMsg) => void): void {
    this.pending.set(id, { id, kind, sentAt: now, onResult });
  }

  handle(msg: ServerMessage): void {
    if (msg.type === "snapshot") {
      this.applySnapshot(msg);
    } else if (msg.type === "ack") {
      this.applyAck(msg);
    } else {
      // dropped notice: open a gap that the next snapshot closes
      this.droppedTotal += msg.count;
      if (this.pendingGap === null && this.latest !== null) {
        this.pendingGap = this.latest.t_sim;
      }
    }
  }

  private applySnapshot(snap: Snapshot): void {
    this.latest = snap;
    if (this.pendingGap !== null) {
      this.gaps.push({ tBefore: this.pendingGap, tAfter: snap.t_sim });
      this.pendingGap = null;
    }
    for (const [name, g] of Object.entries(snap.generators)) {
      let tr = this.trends.get(name);
      if (!tr) {
        tr = {
          delta: new TrendBuffer(this.horizonS),
          d_omega: new TrendBuffer(this.horizonS),
        };
        this.trends.set(name, tr);
      }
      tr.delta.push(snap.t_sim, g.delta);
      tr.d_omega.push(snap.t_sim, g.d_omega);
    }
    const cutoff = snap.t_sim - this.horizonS;
    this.gaps = this.gaps.filter((g) => g.tAfter >= cutoff);
  }

  private applyAck(ack: AckMsg): void {
    if (ack.id === null) return;
    const cmd = this.pending.get(ack.id);
    if (!cmd) return; // unknown or already resolved: cleared exactly once
    this.pending.delete(ack.id);
    cmd.onResult(ack);
  }

  /** Pending commands older than timeoutMs (for surfacing stuck state). */
  stalePending(now: number, timeoutMs: number): PendingCommand[] {
    return [...this.pending.values()].filter((c) => now - c.sentAt > timeoutMs);
  }
}
