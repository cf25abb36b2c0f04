// Telemetry wire protocol: newline-delimited JSON over TCP, or one JSON
// object per WebSocket text frame. Mirrors docs/PROTOCOL.md.

export interface FrameMsg {
  v: number;
  kind: "frame";
  t_ms: number;
  p_relax: number;
  p_open: number;
  p_close: number;
  bar_open: number;
  bar_close: number;
  intent: "relax" | "open" | "close";
  hand: "extended" | "released";
}

export interface StageMsg {
  v: number;
  kind: "stage";
  t_ms: number;
  stage: "collect" | "train" | "evaluate" | "practice" | "idle";
  iteration: number;
}

export interface CueMsg {
  v: number;
  kind: "cue";
  t_ms: number;
  cue: "relax" | "open" | "close";
  duration_ms: number;
}

export interface DeviceMsg {
  v: number;
  kind: "device";
  t_ms: number;
  hand: "extended" | "released";
  motor_engaged: boolean;
}

export interface LogMsg {
  v: number;
  kind: "log";
  t_ms: number;
  level: "info" | "warn";
  message: string;
}

export interface ReportMsg {
  v: number;
  kind: "report";
  t_ms: number;
  iteration: number;
  test_accuracy: number;
  raw_accuracy: number;
  weight_variance_open: number;
  silhouette: number;
}

export type ServerMsg = FrameMsg | StageMsg | CueMsg | DeviceMsg | LogMsg | ReportMsg;

export type ControlMsg =
  | { kind: "start_stage"; stage: string }
  | { kind: "stop" }
  | { kind: "motor"; on: boolean }
  | { kind: "load_model"; path: string };

/** Parse one line; returns null for blank lines or unknown payloads
 * (forward compatibility: unknown kinds are ignored). */
export function parseLine(line: string): ServerMsg | null {
  const trimmed = line.trim();
  if (!trimmed) return null;
  let raw: unknown;
  try {
    raw = JSON.parse(trimmed);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const msg = raw as { kind?: unknown };
  switch (msg.kind) {
    case "frame":
    case "stage":
    case "cue":
    case "device":
    case "log":
    case "report":
      return raw as ServerMsg;
    default:
      return null;
  }
}

export function encodeControl(msg: ControlMsg): string {
  return JSON.stringify(msg) + "\n";
}

/** Incremental line splitter for chunked socket reads. */
export class LineBuffer {
  private pending = "";

  push(chunk: string): string[] {
    this.pending += chunk;
    const parts = this.pending.split("\n");
    this.pending = parts.pop() ?? "";
    return parts.filter((p) => p.length > 0);
  }
}
