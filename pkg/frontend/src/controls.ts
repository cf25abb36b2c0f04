// Operator controls. Control messages leave this module only from
// explicit click handlers; nothing here fires on its own.

import { ControlMsg, encodeControl } from "./protocol.js";

export type SendControl = (msg: ControlMsg) => void;

export const STAGES = ["collect", "train", "evaluate", "practice"] as const;

export function buildControls(root: HTMLElement, send: SendControl): void {
  const stageRow = document.createElement("div");
  stageRow.className = "control-row";
  for (const stage of STAGES) {
    const button = document.createElement("button");
    button.textContent = `Start ${stage}`;
    button.dataset.stage = stage;
    button.addEventListener("click", () => send({ kind: "start_stage", stage }));
    stageRow.appendChild(button);
  }
  const actionRow = document.createElement("div");
  actionRow.className = "control-row";
  const stop = document.createElement("button");
  stop.textContent = "Stop";
  stop.className = "danger";
  stop.addEventListener("click", () => send({ kind: "stop" }));
  const motorOn = document.createElement("button");
  motorOn.textContent = "Motor on";
  motorOn.addEventListener("click", () => send({ kind: "motor", on: true }));
  const motorOff = document.createElement("button");
  motorOff.textContent = "Motor off";
  motorOff.addEventListener("click", () => send({ kind: "motor", on: false }));
  actionRow.append(stop, motorOn, motorOff);
  root.append(stageRow, actionRow);
}

export function controlLine(msg: ControlMsg): string {
  return encodeControl(msg);
}
