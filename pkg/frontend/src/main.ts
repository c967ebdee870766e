/** Bootstrap: wire the state atom, the service connection, and the screens. */

import { debounce } from "./debounce.js";
import { Hmi } from "./screens.js";
import {
  initialState,
  withCommandQueued,
  withConnection,
  withScreen,
  withSnapshot,
  type UiState,
} from "./state.js";
import { eventSourceStream, ServiceConnection } from "./transport.js";

let state: UiState = initialState();
let hmi: Hmi;

function update(next: UiState): void {
  state = next;
  hmi.render(state);
}

const connection = new ServiceConnection(
  "",
  {
    onSnapshot: (snapshot) => update(withSnapshot(state, snapshot)),
    onStatus: (connected) =>
      update(withConnection(state, connected ? "connected" : "disconnected")),
    onCommandQueued: (id, command) => update(withCommandQueued(state, id, command)),
  },
  eventSourceStream,
  (url, init) => fetch(url, init),
);

function sendSafe(command: Parameters<ServiceConnection["send"]>[0], args?: Record<string, unknown>): void {
  connection.send(command, args).catch((err) => {
    console.error("command rejected:", err);
  });
}

// toggle-style inputs get pushbutton debounce; momentary buttons fire directly
const debouncedSelect = debounce(
  (colors: { red: boolean; green: boolean; blue: boolean }) =>
    sendSafe("select_colors", colors),
  150,
);
const debouncedOverride = debounce(
  (enabled: boolean) => sendSafe("set_override", { enabled }),
  150,
);

window.addEventListener("DOMContentLoaded", () => {
  const mount = document.getElementById("app");
  if (!mount) {
    throw new Error("missing #app mount point");
  }
  hmi = new Hmi(mount, {
    start: () => sendSafe("start"),
    stop: () => sendSafe("stop"),
    selectColors: (colors) => debouncedSelect(colors),
    setOverride: (enabled) => debouncedOverride(enabled),
    spawnPart: (color, yMm) => sendSafe("spawn_part", { color, y_mm: yMm }),
    showScreen: (screen) => update(withScreen(state, screen)),
  });
  hmi.render(state);
  connection.open();
});
