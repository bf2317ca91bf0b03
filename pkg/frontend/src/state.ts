/** Pure view-state derivation; no DOM, no network. */

import type { NodeStatus, SurveillanceEvent } from "./api.js";

export interface DashboardState {
  nodes: NodeStatus[];
  events: SurveillanceEvent[];
  commandInFlight: boolean;
  lastError: string | null;
}

export const initialState: DashboardState = {
  nodes: [],
  events: [],
  commandInFlight: false,
  lastError: null,
};

/** The single event currently driving alarms, if any. */
export function activeEvent(events: SurveillanceEvent[]): SurveillanceEvent | null {
  return events.find((e) => e.state === "ACTIVE") ?? null;
}

/** Command buttons are enabled only while an event is ACTIVE and no
 * command is already in flight. */
export function commandsEnabled(state: DashboardState): boolean {
  return activeEvent(state.events) !== null && !state.commandInFlight;
}

export function nodeStatusLabel(node: NodeStatus): string {
  if (!node.connected) return "offline";
  if (node.kind === "pir") return node.value === 1 ? "motion" : "clear";
  return node.value === 1 ? "FIRE" : "normal";
}

export function verdictLabel(event: SurveillanceEvent): string {
  if (event.kind === "fire") return "fire alarm";
  if (!event.verdict) return "no face found";
  if (event.verdict.known) return `recognized: ${event.verdict.label}`;
  return "unknown person";
}

export function eventSummary(event: SurveillanceEvent): string {
  const outcome = event.resolution ?? event.state;
  return `${event.event_id} [${event.kind}] ${outcome} — ${verdictLabel(event)}`;
}

/** Alert outcomes folded into a short line, e.g. "email ok, sms ok, call failed". */
export function alertSummary(event: SurveillanceEvent): string {
  if (event.alerts.length === 0) return "no alerts";
  return event.alerts.map((a) => `${a.channel} ${a.outcome}`).join(", ");
}

export function withPoll(
  state: DashboardState,
  nodes: NodeStatus[],
  events: SurveillanceEvent[],
): DashboardState {
  return { ...state, nodes, events, lastError: null };
}

export function withPollError(state: DashboardState, message: string): DashboardState {
  return { ...state, lastError: message };
}

export function withCommandStarted(state: DashboardState): DashboardState {
  return { ...state, commandInFlight: true };
}

export function withCommandFinished(
  state: DashboardState,
  error: string | null,
): DashboardState {
  return { ...state, commandInFlight: false, lastError: error };
}
