import { describe, expect, it } from "vitest";

import type { NodeStatus, SurveillanceEvent } from "../src/api.js";
import {
  activeEvent,
  alertSummary,
  commandsEnabled,
  eventSummary,
  initialState,
  nodeStatusLabel,
  verdictLabel,
  withCommandFinished,
  withCommandStarted,
  withPoll,
  withPollError,
} from "../src/state.js";

function makeEvent(overrides: Partial<SurveillanceEvent> = {}): SurveillanceEvent {
  return {
    event_id: "evt-0001",
    kind: "pir",
    trigger_node: "pir1",
    triggered_at: 1000,
    state: "ACTIVE",
    history: ["IDLE", "TRIGGERED", "CAPTURED", "RECOGNIZED", "ALERTED", "ACTIVE"],
    resolution: null,
    verdict: { known: true, label: "alice", distance: 1.2 },
    captures: ["capture-0.png"],
    alerts: [
      { channel: "email", at: 1001, outcome: "ok", detail: "" },
      { channel: "sms", at: 1002, outcome: "ok", detail: "" },
    ],
    command_source: null,
    buzzer_on: true,
    ...overrides,
  };
}

function makeNode(overrides: Partial<NodeStatus> = {}): NodeStatus {
  return {
    node_id: "pir1",
    kind: "pir",
    value: 0,
    connected: true,
    fetched_at: 1000,
    ...overrides,
  };
}

describe("activeEvent", () => {
  it("returns null with no events", () => {
    expect(activeEvent([])).toBeNull();
  });

  it("finds the ACTIVE event among resolved ones", () => {
    const resolved = makeEvent({ event_id: "evt-0002", state: "IDLE", resolution: "CEASED" });
    const active = makeEvent();
    expect(activeEvent([resolved, active])?.event_id).toBe("evt-0001");
  });

  it("ignores fire events that never stay active", () => {
    const fire = makeEvent({ kind: "fire", state: "IDLE", verdict: null });
    expect(activeEvent([fire])).toBeNull();
  });
});

describe("commandsEnabled", () => {
  it("is false with no active event", () => {
    expect(commandsEnabled(initialState)).toBe(false);
  });

  it("is true with an active event and no command in flight", () => {
    const state = withPoll(initialState, [], [makeEvent()]);
    expect(commandsEnabled(state)).toBe(true);
  });

  it("is false while a command is in flight", () => {
    const state = withCommandStarted(withPoll(initialState, [], [makeEvent()]));
    expect(commandsEnabled(state)).toBe(false);
  });

  it("re-enables after the command finishes if still active", () => {
    let state = withCommandStarted(withPoll(initialState, [], [makeEvent()]));
    state = withCommandFinished(state, null);
    expect(commandsEnabled(state)).toBe(true);
  });
});

describe("labels", () => {
  it("node labels cover both kinds and offline", () => {
    expect(nodeStatusLabel(makeNode())).toBe("clear");
    expect(nodeStatusLabel(makeNode({ value: 1 }))).toBe("motion");
    expect(nodeStatusLabel(makeNode({ kind: "fire", value: 1 }))).toBe("FIRE");
    expect(nodeStatusLabel(makeNode({ connected: false, value: 1 }))).toBe("offline");
  });

  it("verdict label distinguishes known, unknown, no-face, fire", () => {
    expect(verdictLabel(makeEvent())).toBe("recognized: alice");
    expect(
      verdictLabel(makeEvent({ verdict: { known: false, label: null, distance: 99 } })),
    ).toBe("unknown person");
    expect(verdictLabel(makeEvent({ verdict: null }))).toBe("no face found");
    expect(verdictLabel(makeEvent({ kind: "fire", verdict: null }))).toBe("fire alarm");
  });

  it("event summary prefers the resolution once set", () => {
    expect(eventSummary(makeEvent())).toContain("ACTIVE");
    expect(
      eventSummary(makeEvent({ state: "IDLE", resolution: "ESCALATED" })),
    ).toContain("ESCALATED");
  });

  it("alert summary folds channels and outcomes", () => {
    expect(alertSummary(makeEvent())).toBe("email ok, sms ok");
    expect(alertSummary(makeEvent({ alerts: [] }))).toBe("no alerts");
  });
});

describe("state transitions", () => {
  it("poll replaces data and clears the error", () => {
    const errored = withPollError(initialState, "boom");
    const state = withPoll(errored, [makeNode()], [makeEvent()]);
    expect(state.nodes).toHaveLength(1);
    expect(state.events).toHaveLength(1);
    expect(state.lastError).toBeNull();
  });

  it("a failed command surfaces its error and unlocks the buttons", () => {
    let state = withCommandStarted(withPoll(initialState, [], [makeEvent()]));
    state = withCommandFinished(state, "no active event to resolve (state IDLE)");
    expect(state.commandInFlight).toBe(false);
    expect(state.lastError).toContain("no active event");
  });
});
