// Wire protocol types for the real-time service (one JSON WebSocket).

export interface GeneratorSnap {
  delta: number;
  d_omega: number;
  e_f: number;
  p_e: number;
}

export interface ControlFlags {
  avr: boolean | null; // null: the generator has no such device
  gov: boolean | null;
  pss: boolean | null;
}

export interface TimingSnap {
  step: number;
  t_sim: number;
  calc_time: number;
  loop_time: number;
  overrun: boolean;
}

export interface Snapshot {
  type: "snapshot";
  t_sim: number;
  generators: Record<string, GeneratorSnap>;
  buses: Record<string, [number, number]>;
  controls: Record<string, ControlFlags>;
  lines: Record<string, boolean>;
  timing: TimingSnap | null;
  diverged: boolean;
}

export interface AckMsg {
  type: "ack";
  id: string | null;
  status: "applied" | "rejected";
  t_sim: number;
  detail: string | null;
}

export interface DroppedMsg {
  type: "dropped";
  count: number;
}

export type ServerMessage = Snapshot | AckMsg | DroppedMsg;

export type CommandKind =
  | "line_trip"
  | "line_close"
  | "fault_on"
  | "fault_off"
  | "param_change"
  | "control_toggle"
  | "setpoint_change"
  | "pause"
  | "resume"
  | "set_speed"
  | "console";

export interface CommandMsg {
  type: "command";
  id: string;
  kind: CommandKind;
  payload: Record<string, unknown>;
}

export interface SubscribeMsg {
  type: "subscribe";
  decimation: number;
}

export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const t = (data as { type?: unknown }).type;
  if (t === "snapshot" || t === "ack" || t === "dropped") {
    return data as ServerMessage;
  }
  return null;
}

export function subscribeMsg(decimation: number): SubscribeMsg {
  return { type: "subscribe", decimation: Math.max(1, Math.round(decimation)) };
}

export function commandMsg(
  id: string,
  kind: CommandKind,
  payload: Record<string, unknown>,
): CommandMsg {
  return { type: "command", id, kind, payload };
}
