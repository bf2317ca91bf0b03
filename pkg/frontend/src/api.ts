/** Typed client for the controller HTTP API. */

export interface NodeStatus {
  node_id: string;
  kind: "pir" | "fire";
  value: number;
  connected: boolean;
  fetched_at: number;
}

export interface Verdict {
  known: boolean;
  label: string | null;
  distance: number;
}

export interface AlertRecord {
  channel: "email" | "sms" | "call";
  at: number;
  outcome: "ok" | "failed";
  detail: string;
}

export interface SurveillanceEvent {
  event_id: string;
  kind: "pir" | "fire";
  trigger_node: string;
  triggered_at: number;
  state: string;
  history: string[];
  resolution: string | null;
  verdict: Verdict | null;
  captures: string[];
  alerts: AlertRecord[];
  command_source: string | null;
  buzzer_on: boolean;
}

export type CommandAction = "found_ok" | "inform_authorities";

export interface CommandResult {
  ok: boolean;
  status: number;
  error?: string;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async getNodes(): Promise<NodeStatus[]> {
    return this.getJson<NodeStatus[]>("/api/nodes");
  }

  async getEvents(): Promise<SurveillanceEvent[]> {
    return this.getJson<SurveillanceEvent[]>("/api/events");
  }

  captureUrl(eventId: string): string {
    return `${this.base}/api/events/${encodeURIComponent(eventId)}/capture`;
  }

  streamUrl(): string {
    return `${this.base}/stream`;
  }

  async postCommand(action: CommandAction): Promise<CommandResult> {
    const response = await this.fetchImpl(`${this.base}/api/command`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ action }),
    });
    if (response.ok) {
      return { ok: true, status: response.status };
    }
    let error = `HTTP ${response.status}`;
    try {
      const body = (await response.json()) as { error?: string };
      if (body.error) error = body.error;
    } catch {
      // non-JSON error body; keep the status text
    }
    return { ok: false, status: response.status, error };
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(`${this.base}${path}`);
    if (!response.ok) {
      throw new Error(`GET ${path} failed: HTTP ${response.status}`);
    }
    return (await response.json()) as T;
  }
}
