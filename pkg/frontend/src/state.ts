// Dashboard state. The reducer is a pure function of the event
// sequence, so a logged telemetry file replays to an identical final
// state; anything wall-clock-dependent (staleness) is derived outside.

import { ServerMsg, parseLine } from "./protocol.js";

export type ConnectionState = "connecting" | "open" | "closed";

export type UiEvent =
  | { kind: "connection"; state: ConnectionState; atMs: number }
  | { msg: ServerMsg; atMs: number };

export interface TimelinePoint {
  tMs: number;
  barOpen: number;
  barClose: number;
  pOpen: number;
  pClose: number;
}

export interface ReportRow {
  iteration: number;
  testAccuracy: number;
  rawAccuracy: number;
  weightVarianceOpen: number;
  silhouette: number;
}

export interface UiState {
  connection: ConnectionState;
  stage: string;
  iteration: number;
  cue: string | null;
  cueUntilTms: number | null;
  barOpen: number;
  barClose: number;
  intent: string;
  hand: string;
  motorEngaged: boolean;
  lastFrameAtMs: number | null;
  lastFrameTms: number | null;
  framesSeen: number;
  timeline: TimelinePoint[];
  reports: ReportRow[];
  toasts: string[];
}

export const TIMELINE_WINDOW_MS = 60_000;
export const STALE_AFTER_MS = 1000;
const MAX_TOASTS = 5;

export function initialState(): UiState {
  return {
    connection: "connecting",
    stage: "idle",
    iteration: 1,
    cue: null,
    cueUntilTms: null,
    barOpen: 0,
    barClose: 0,
    intent: "relax",
    hand: "released",
    motorEngaged: true,
    lastFrameAtMs: null,
    lastFrameTms: null,
    framesSeen: 0,
    timeline: [],
    reports: [],
    toasts: [],
  };
}

export function reduce(state: UiState, event: UiEvent): UiState {
  if ("kind" in event && event.kind === "connection") {
    return { ...state, connection: event.state };
  }
  const { msg, atMs } = event as { msg: ServerMsg; atMs: number };
  switch (msg.kind) {
    case "frame": {
      const point: TimelinePoint = {
        tMs: msg.t_ms,
        barOpen: msg.bar_open,
        barClose: msg.bar_close,
        pOpen: msg.p_open,
        pClose: msg.p_close,
      };
      // stream time can restart at stage boundaries; drop the old curve then
      const restart =
        state.lastFrameTms !== null && msg.t_ms < state.lastFrameTms;
      const kept = restart
        ? []
        : state.timeline.filter((p) => p.tMs >= msg.t_ms - TIMELINE_WINDOW_MS);
      kept.push(point);
      const cueExpired =
        state.cueUntilTms !== null && !restart && msg.t_ms >= state.cueUntilTms;
      return {
        ...state,
        barOpen: msg.bar_open,
        barClose: msg.bar_close,
        intent: msg.intent,
        hand: msg.hand,
        lastFrameAtMs: atMs,
        lastFrameTms: msg.t_ms,
        framesSeen: state.framesSeen + 1,
        timeline: kept,
        cue: cueExpired ? null : state.cue,
        cueUntilTms: cueExpired ? null : state.cueUntilTms,
      };
    }
    case "stage":
      return {
        ...state,
        stage: msg.stage,
        iteration: msg.iteration,
        cue: null,
        cueUntilTms: null,
      };
    case "cue":
      return { ...state, cue: msg.cue, cueUntilTms: msg.t_ms + msg.duration_ms };
    case "device":
      return { ...state, hand: msg.hand, motorEngaged: msg.motor_engaged };
    case "log": {
      if (msg.level !== "warn") return state;
      const toasts = [...state.toasts, msg.message].slice(-MAX_TOASTS);
      return { ...state, toasts };
    }
    case "report": {
      const row: ReportRow = {
        iteration: msg.iteration,
        testAccuracy: msg.test_accuracy,
        rawAccuracy: msg.raw_accuracy,
        weightVarianceOpen: msg.weight_variance_open,
        silhouette: msg.silhouette,
      };
      const reports = state.reports
        .filter((r) => r.iteration !== row.iteration)
        .concat(row)
        .sort((a, b) => a.iteration - b.iteration);
      return { ...state, reports };
    }
  }
}

export function replay(events: UiEvent[]): UiState {
  let state = initialState();
  for (const event of events) {
    state = reduce(state, event);
  }
  return state;
}

/** Turn a logged telemetry file into a deterministic event sequence
 * (receipt times are taken from the stream clock). */
export function eventsFromLog(text: string): UiEvent[] {
  const events: UiEvent[] = [{ kind: "connection", state: "open", atMs: 0 }];
  for (const line of text.split("\n")) {
    const msg = parseLine(line);
    if (msg) events.push({ msg, atMs: msg.t_ms });
  }
  return events;
}

/** Derived view: no frame for more than a second means the stream is stale. */
export function isStale(state: UiState, nowMs: number): boolean {
  if (state.connection !== "open") return true;
  if (state.lastFrameAtMs === null) return true;
  return nowMs - state.lastFrameAtMs > STALE_AFTER_MS;
}
