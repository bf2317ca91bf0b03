/** DOM wiring: renders the dashboard and keeps it in sync with the API. */

import { ApiClient, type CommandAction } from "./api.js";
import {
  type DashboardState,
  activeEvent,
  alertSummary,
  commandsEnabled,
  eventSummary,
  initialState,
  nodeStatusLabel,
  withCommandFinished,
  withCommandStarted,
  withPoll,
  withPollError,
} from "./state.js";

const POLL_INTERVAL_MS = 1000;

export class Dashboard {
  private state: DashboardState = initialState;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly root: Document = document,
  ) {}

  start(): void {
    const stream = this.root.getElementById("stream") as HTMLImageElement | null;
    if (stream) stream.src = this.api.streamUrl();
    this.bindCommand("cmd-found-ok", "found_ok");
    this.bindCommand("cmd-inform", "inform_authorities");
    void this.poll();
    this.timer = setInterval(() => void this.poll(), POLL_INTERVAL_MS);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
  }

  private bindCommand(id: string, action: CommandAction): void {
    const button = this.root.getElementById(id);
    if (!button) return;
    button.addEventListener("click", () => void this.sendCommand(action));
  }

  private async sendCommand(action: CommandAction): Promise<void> {
    if (!commandsEnabled(this.state)) return;
    this.state = withCommandStarted(this.state);
    this.render();
    const result = await this.api.postCommand(action);
    this.state = withCommandFinished(this.state, result.ok ? null : result.error ?? null);
    await this.poll();
  }

  private async poll(): Promise<void> {
    try {
      const [nodes, events] = await Promise.all([
        this.api.getNodes(),
        this.api.getEvents(),
      ]);
      this.state = withPoll(this.state, nodes, events);
    } catch (err) {
      this.state = withPollError(this.state, err instanceof Error ? err.message : String(err));
    }
    this.render();
  }

  private render(): void {
    this.renderNodes();
    this.renderEvents();
    this.renderCommands();
    this.renderError();
  }

  private renderNodes(): void {
    const target = this.root.getElementById("nodes");
    if (!target) return;
    target.innerHTML = "";
    for (const node of this.state.nodes) {
      const row = this.root.createElement("li");
      row.textContent = `${node.node_id} (${node.kind}): ${nodeStatusLabel(node)}`;
      row.className = node.value === 1 ? "alerting" : "";
      target.appendChild(row);
    }
  }

  private renderEvents(): void {
    const target = this.root.getElementById("events");
    if (!target) return;
    target.innerHTML = "";
    for (const event of this.state.events) {
      const row = this.root.createElement("li");
      row.textContent = `${eventSummary(event)} (${alertSummary(event)})`;
      if (event.captures.length > 0) {
        const img = this.root.createElement("img");
        img.src = this.api.captureUrl(event.event_id);
        img.className = "capture";
        row.appendChild(img);
      }
      target.appendChild(row);
    }
    const banner = this.root.getElementById("active-banner");
    if (banner) {
      const active = activeEvent(this.state.events);
      banner.textContent = active
        ? `ALARM: ${eventSummary(active)}`
        : "no active event";
      banner.className = active ? "alerting" : "";
    }
  }

  private renderCommands(): void {
    const enabled = commandsEnabled(this.state);
    for (const id of ["cmd-found-ok", "cmd-inform"]) {
      const button = this.root.getElementById(id) as HTMLButtonElement | null;
      if (button) button.disabled = !enabled;
    }
  }

  private renderError(): void {
    const target = this.root.getElementById("error");
    if (target) target.textContent = this.state.lastError ?? "";
  }
}
