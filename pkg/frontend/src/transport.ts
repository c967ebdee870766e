/** Service connection: snapshot stream consumer plus command sender.
 *
 * The stream is injected so tests (and non-browser hosts) can stub it.
 * Reconnecting re-opens the stream only; commands are one-shot POSTs and are
 * never replayed on reconnect.
 */

import type { CommandAccepted, CommandName, Snapshot } from "./types.js";

export interface StreamHandlers {
  onSnapshot(snapshot: Snapshot): void;
  onOpen(): void;
  onError(): void;
  onEnd(): void;
}

export interface StreamHandle {
  close(): void;
}

export type StreamFactory = (url: string, handlers: StreamHandlers) => StreamHandle;

export type FetchLike = (
  url: string,
  init: { method: string; headers: Record<string, string>; body: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export interface ConnectionEvents {
  onSnapshot(snapshot: Snapshot): void;
  onStatus(connected: boolean): void;
  onCommandQueued(id: number, command: CommandName): void;
}

export class ServiceConnection {
  private stream: StreamHandle | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;
  private sent = 0;
  connects = 0;

  constructor(
    private readonly baseUrl: string,
    private readonly events: ConnectionEvents,
    private readonly streamFactory: StreamFactory,
    private readonly fetchFn: FetchLike,
    private readonly reconnectDelayMs = 1000,
  ) {}

  get commandsSent(): number {
    return this.sent;
  }

  open(): void {
    if (this.stopped) {
      return;
    }
    this.connects += 1;
    this.stream = this.streamFactory(`${this.baseUrl}/stream`, {
      onOpen: () => this.events.onStatus(true),
      onSnapshot: (snapshot) => this.events.onSnapshot(snapshot),
      onEnd: () => this.events.onStatus(false),
      onError: () => {
        this.events.onStatus(false);
        this.scheduleReconnect();
      },
    });
  }

  close(): void {
    this.stopped = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.stream?.close();
    this.stream = null;
  }

  private scheduleReconnect(): void {
    if (this.stopped || this.reconnectTimer !== null) {
      return;
    }
    this.stream?.close();
    this.stream = null;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      this.open();
    }, this.reconnectDelayMs);
  }

  /** POST one command; resolves with the queue acknowledgement. */
  async send(command: CommandName, args?: Record<string, unknown>): Promise<CommandAccepted> {
    const body: Record<string, unknown> = { command };
    if (args !== undefined) {
      body.args = args;
    }
    this.sent += 1;
    const response = await this.fetchFn(`${this.baseUrl}/command`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      const detail = (await response.json().catch(() => ({}))) as { message?: string };
      throw new Error(detail.message ?? `command rejected (${response.status})`);
    }
    const accepted = (await response.json()) as CommandAccepted;
    this.events.onCommandQueued(accepted.command_id, command);
    return accepted;
  }
}

/** Browser stream factory backed by EventSource. */
export function eventSourceStream(url: string, handlers: StreamHandlers): StreamHandle {
  const source = new EventSource(url);
  source.onopen = () => handlers.onOpen();
  source.addEventListener("snapshot", (event) => {
    handlers.onSnapshot(JSON.parse((event as MessageEvent).data) as Snapshot);
  });
  source.addEventListener("end", () => {
    source.close();
    handlers.onEnd();
  });
  source.onerror = () => handlers.onError();
  return { close: () => source.close() };
}
