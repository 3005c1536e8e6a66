// Command emission helpers: unique ids, one command per widget
// interaction, throttled slider updates.

import { CommandKind, CommandMsg, commandMsg } from "./protocol.js";

let counter = 0;

export function nextCommandId(): string {
  counter += 1;
  return `ui-${counter}`;
}

export function resetCommandIds(): void {
  counter = 0;
}

export function lineToggleCommand(line: string, currentlyClosed: boolean): CommandMsg {
  const kind: CommandKind = currentlyClosed ? "line_trip" : "line_close";
  return commandMsg(nextCommandId(), kind, { target: line });
}

export function controlToggleCommand(gen: string, device: "avr" | "gov" | "pss",
                                     enable: boolean): CommandMsg {
  return commandMsg(nextCommandId(), "control_toggle",
                    { target: `${gen}.${device}`, value: enable ? 1 : 0 });
}

export function excitationCommand(gen: string, value: number): CommandMsg {
  return commandMsg(nextCommandId(), "setpoint_change",
                    { target: `${gen}.E_f`, value });
}

export function consoleCommand(text: string): CommandMsg {
  return commandMsg(nextCommandId(), "console", { text });
}

/**
 * Rate limiter for slider drags: at most one value per interval, always
 * keeping the latest value (trailing edge) so the final position lands.
 */
export class SliderThrottle {
  private lastSent = -Infinity;
  private trailing: number | null = null;

  constructor(public intervalMs: number = 50) {}

  /** Returns the value to send now, or null if suppressed. */
  offer(value: number, nowMs: number): number | null {
    if (nowMs - this.lastSent >= this.intervalMs) {
      this.lastSent = nowMs;
      this.trailing = null;
      return value;
    }
    this.trailing = value;
    return null;
  }

  /** Call on a timer: releases the trailing value once the interval passed. */
  flush(nowMs: number): number | null {
    if (this.trailing !== null && nowMs - this.lastSent >= this.intervalMs) {
      const v = this.trailing;
      this.trailing = null;
      this.lastSent = nowMs;
      return v;
    }
    return null;
  }
}
