import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { debounce } from "../src/debounce.js";
import {
  ServiceConnection,
  type StreamHandle,
  type StreamHandlers,
} from "../src/transport.js";
import type { CommandName, Snapshot } from "../src/types.js";

class StubStream {
  handlers: StreamHandlers[] = [];
  closed = 0;

  factory = (_url: string, handlers: StreamHandlers): StreamHandle => {
    this.handlers.push(handlers);
    return { close: () => (this.closed += 1) };
  };

  get current(): StreamHandlers {
    return this.handlers[this.handlers.length - 1];
  }
}

function makeFetch(log: Array<{ url: string; body: string }>) {
  let counter = 0;
  return async (url: string, init: { body: string }) => {
    log.push({ url, body: init.body });
    counter += 1;
    return {
      ok: true,
      status: 200,
      json: async () => ({ queued: true, command_id: counter }),
    };
  };
}

function makeConnection(stub: StubStream, log: Array<{ url: string; body: string }>) {
  const events = {
    snapshots: [] as Snapshot[],
    statuses: [] as boolean[],
    queued: [] as Array<[number, CommandName]>,
  };
  const connection = new ServiceConnection(
    "http://cell",
    {
      onSnapshot: (s) => events.snapshots.push(s),
      onStatus: (ok) => events.statuses.push(ok),
      onCommandQueued: (id, command) => events.queued.push([id, command]),
    },
    stub.factory,
    makeFetch(log),
    5,
  );
  return { connection, events };
}

describe("reconnect idempotence", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("dropping and restoring the stream never duplicates commands", async () => {
    const stub = new StubStream();
    const log: Array<{ url: string; body: string }> = [];
    const { connection } = makeConnection(stub, log);
    connection.open();
    stub.current.onOpen();

    await connection.send("start");
    await connection.send("select_colors", { red: true, green: false, blue: false });
    expect(log.length).toBe(2);

    // drop the stream twice; reconnect fires on the timer
    stub.current.onError();
    await vi.advanceTimersByTimeAsync(10);
    stub.current.onOpen();
    stub.current.onError();
    await vi.advanceTimersByTimeAsync(10);
    stub.current.onOpen();

    expect(connection.connects).toBe(3);
    expect(log.length).toBe(2); // still exactly the two explicit sends
    connection.close();
  });

  it("reconnect reopens the stream after the delay", async () => {
    const stub = new StubStream();
    const { connection } = makeConnection(stub, []);
    connection.open();
    expect(stub.handlers.length).toBe(1);
    stub.current.onError();
    expect(stub.handlers.length).toBe(1);
    await vi.advanceTimersByTimeAsync(10);
    expect(stub.handlers.length).toBe(2);
    connection.close();
  });

  it("close stops reconnecting", async () => {
    const stub = new StubStream();
    const { connection } = makeConnection(stub, []);
    connection.open();
    stub.current.onError();
    connection.close();
    await vi.advanceTimersByTimeAsync(50);
    expect(stub.handlers.length).toBe(1);
  });

  it("snapshots and acks flow through to the events", async () => {
    const stub = new StubStream();
    const log: Array<{ url: string; body: string }> = [];
    const { connection, events } = makeConnection(stub, log);
    connection.open();
    stub.current.onOpen();
    stub.current.onSnapshot({ t_us: 1 } as Snapshot);
    expect(events.snapshots.length).toBe(1);
    await connection.send("stop");
    expect(events.queued).toEqual([[1, "stop"]]);
    expect(JSON.parse(log[0].body)).toEqual({ command: "stop" });
    connection.close();
  });
});

describe("toggle debounce", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("collapses rapid toggling into the final value after 150 ms", () => {
    const sent: boolean[] = [];
    const send = debounce((value: boolean) => sent.push(value), 150);
    send(true);
    send(false);
    send(true);
    expect(sent).toEqual([]);
    vi.advanceTimersByTime(149);
    expect(sent).toEqual([]);
    vi.advanceTimersByTime(1);
    expect(sent).toEqual([true]);
  });

  it("cancel suppresses the pending call", () => {
    const sent: boolean[] = [];
    const send = debounce((value: boolean) => sent.push(value), 150);
    send(true);
    send.cancel();
    vi.advanceTimersByTime(300);
    expect(sent).toEqual([]);
  });
});
