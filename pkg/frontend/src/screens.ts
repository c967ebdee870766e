/** DOM for the three operator screens plus the live view and tag monitor.
 *
 * Controls reflect the snapshot only: toggles latch when the echo arrives,
 * and everything is disabled while disconnected.
 */

import { drawBelt } from "./beltview.js";
import {
  conveyorRunning,
  controlsEnabled,
  rejectCount,
  shownOverride,
  shownSelection,
  systemEnabled,
  type ScreenName,
  type UiState,
} from "./state.js";
import { decodeWord } from "./tags.js";
import type { Snapshot } from "./types.js";

export interface ScreenActions {
  start(): void;
  stop(): void;
  selectColors(colors: { red: boolean; green: boolean; blue: boolean }): void;
  setOverride(enabled: boolean): void;
  spawnPart(color: "red" | "green" | "blue", yMm: number): void;
  showScreen(screen: ScreenName): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text) {
    node.textContent = text;
  }
  return node;
}

function lamp(label: string): { root: HTMLElement; set(on: boolean, color?: string): void } {
  const root = el("div", "lamp");
  const bulb = el("span", "lamp-bulb");
  const caption = el("span", "lamp-label", label);
  root.append(bulb, caption);
  return {
    root,
    set(on: boolean, color = "#3fa34d") {
      bulb.style.background = on ? color : "#333";
    },
  };
}

export class Hmi {
  private root: HTMLElement;
  private banner = el("div", "banner hidden");
  private nav = el("nav", "nav");
  private screens: Record<ScreenName, HTMLElement> = {
    main: el("section", "screen"),
    selection: el("section", "screen"),
    conveyor: el("section", "screen"),
  };
  private canvas = document.createElement("canvas");
  private monitor = el("table", "monitor");

  private runningLamp = lamp("RUNNING");
  private enabledLamp = lamp("ENABLED");
  private beamLamp = lamp("BEAM");
  private robotLamp = lamp("ROBOT BUSY");
  private statusLine = el("div", "status-line");
  private binCount = el("div", "bin-count");

  private startBtn = el("button", "btn btn-start", "START");
  private stopBtn = el("button", "btn btn-stop", "STOP");
  private colorToggles: Record<"red" | "green" | "blue", HTMLInputElement>;
  private overrideToggle: HTMLInputElement;
  private spawnButtons: HTMLButtonElement[] = [];
  private conveyorState = el("div", "conveyor-state");

  constructor(
    parent: HTMLElement,
    private readonly actions: ScreenActions,
  ) {
    this.root = el("div", "hmi");
    parent.append(this.root);
    this.banner.textContent = "DISCONNECTED — reconnecting…";
    this.root.append(this.banner);

    for (const name of ["main", "selection", "conveyor"] as ScreenName[]) {
      const button = el("button", "nav-btn", name.toUpperCase());
      button.addEventListener("click", () => this.actions.showScreen(name));
      this.nav.append(button);
    }
    this.root.append(this.nav);

    this.buildMainScreen();
    this.colorToggles = this.buildSelectionScreen();
    this.overrideToggle = this.buildOverrideToggle();
    this.buildConveyorScreen();
    for (const screen of Object.values(this.screens)) {
      this.root.append(screen);
    }

    const live = el("section", "live");
    live.append(el("h2", "", "Cell view"));
    this.canvas.width = 720;
    this.canvas.height = 220;
    live.append(this.canvas);
    live.append(el("h2", "", "Tag monitor"));
    live.append(this.monitor);
    this.root.append(live);
  }

  private buildMainScreen(): void {
    const screen = this.screens.main;
    screen.append(el("h2", "", "Main"));
    const lamps = el("div", "lamp-row");
    lamps.append(
      this.enabledLamp.root,
      this.runningLamp.root,
      this.beamLamp.root,
      this.robotLamp.root,
    );
    screen.append(lamps);
    this.startBtn.addEventListener("click", () => this.actions.start());
    this.stopBtn.addEventListener("click", () => this.actions.stop());
    const row = el("div", "btn-row");
    row.append(this.startBtn, this.stopBtn);
    screen.append(row);
    screen.append(this.statusLine);
    screen.append(this.binCount);
  }

  private buildSelectionScreen(): Record<"red" | "green" | "blue", HTMLInputElement> {
    const screen = this.screens.selection;
    screen.append(el("h2", "", "Block selection"));
    screen.append(
      el("p", "hint", "Accepted colors stay on the belt; everything else is removed."),
    );
    const toggles = {} as Record<"red" | "green" | "blue", HTMLInputElement>;
    for (const color of ["red", "green", "blue"] as const) {
      const label = el("label", `toggle toggle-${color}`);
      const input = document.createElement("input");
      input.type = "checkbox";
      input.addEventListener("change", () => this.emitSelection());
      label.append(input, el("span", "", color.toUpperCase()));
      screen.append(label);
      toggles[color] = input;
    }
    return toggles;
  }

  private buildOverrideToggle(): HTMLInputElement {
    const screen = this.screens.selection;
    const label = el("label", "toggle toggle-override");
    const input = document.createElement("input");
    input.type = "checkbox";
    input.addEventListener("change", () => this.actions.setOverride(input.checked));
    label.append(
      input,
      el("span", "", "GREEN+BLUE ⇒ BLUE override (edge misdetection fix)"),
    );
    screen.append(label);
    return input;
  }

  private buildConveyorScreen(): void {
    const screen = this.screens.conveyor;
    screen.append(el("h2", "", "Conveyor control"));
    screen.append(this.conveyorState);
    screen.append(el("p", "hint", "Manual part feed (demo):"));
    const row = el("div", "btn-row");
    for (const color of ["red", "green", "blue"] as const) {
      const button = el("button", `btn btn-spawn-${color}`, `FEED ${color.toUpperCase()}`);
      button.addEventListener("click", () =>
        this.actions.spawnPart(color, Number(this.spawnOffsetInputValue())),
      );
      this.spawnButtons.push(button);
      row.append(button);
    }
    screen.append(row);
    const offsetLabel = el("label", "offset-label");
    const offset = document.createElement("input");
    offset.type = "number";
    offset.value = "0";
    offset.min = "-110";
    offset.max = "110";
    offsetLabel.append(el("span", "", "lateral offset (mm): "), offset);
    screen.append(offsetLabel);
    this.spawnOffsetField = offset;
  }

  private spawnOffsetField: HTMLInputElement | null = null;

  private spawnOffsetInputValue(): string {
    return this.spawnOffsetField?.value ?? "0";
  }

  private emitSelection(): void {
    this.actions.selectColors({
      red: this.colorToggles.red.checked,
      green: this.colorToggles.green.checked,
      blue: this.colorToggles.blue.checked,
    });
  }

  /** Re-render everything from the state atom. */
  render(state: UiState): void {
    this.banner.classList.toggle("hidden", state.connection === "connected");
    const enabled = controlsEnabled(state);
    for (const control of [
      this.startBtn,
      this.stopBtn,
      this.overrideToggle,
      ...Object.values(this.colorToggles),
      ...this.spawnButtons,
    ]) {
      (control as HTMLButtonElement | HTMLInputElement).disabled = !enabled;
    }

    for (const [name, section] of Object.entries(this.screens)) {
      section.classList.toggle("active", name === state.screen);
    }

    const snapshot = state.snapshot;
    this.enabledLamp.set(systemEnabled(state));
    this.runningLamp.set(conveyorRunning(state));
    this.beamLamp.set(snapshot?.beam_blocked ?? false, "#ff5050");
    this.robotLamp.set((snapshot?.robot.program ?? null) !== null, "#d0a93f");
    this.statusLine.textContent = snapshot
      ? `t = ${(snapshot.t_us / 1e6).toFixed(2)} s — robot: ${snapshot.robot.state}` +
        (snapshot.robot.program ? ` (${snapshot.robot.program})` : "") +
        (snapshot.error ? ` — ERROR: ${snapshot.error}` : "")
      : "waiting for first snapshot";
    this.binCount.textContent = `rejected parts: ${rejectCount(state)}`;

    // toggles latch only from the snapshot echo (no optimistic state)
    const selection = shownSelection(state);
    this.colorToggles.red.checked = selection.red;
    this.colorToggles.green.checked = selection.green;
    this.colorToggles.blue.checked = selection.blue;
    this.overrideToggle.checked = shownOverride(state);

    this.conveyorState.textContent = snapshot
      ? `conveyor ${snapshot.conveyor.running ? "RUNNING" : "STOPPED"} at ` +
        `${snapshot.conveyor.speed_mm_per_s} mm/s — parts total ${snapshot.metrics.parts_total}`
      : "";

    drawBelt(this.canvas, snapshot);
    this.renderMonitor(snapshot);
  }

  private renderMonitor(snapshot: Snapshot | null): void {
    this.monitor.textContent = "";
    if (!snapshot) {
      return;
    }
    const head = el("tr");
    for (const caption of ["assembly", "word", "decimal", "bits"]) {
      head.append(el("th", "", caption));
    }
    this.monitor.append(head);
    const rows: Array<[string, "robot_to_plc" | "plc_to_robot"]> = [
      ["ROBOT → PLC", "robot_to_plc"],
      ["PLC → ROBOT", "plc_to_robot"],
    ];
    for (const [label, direction] of rows) {
      snapshot.assemblies[direction].words.forEach((value, index) => {
        const tr = el("tr");
        tr.append(el("td", "", index === 0 ? label : ""));
        tr.append(el("td", "", `Data[${index}]`));
        tr.append(el("td", "mono", String(value)));
        tr.append(el("td", "mono", decodeWord(value, index, direction).join(", ")));
        this.monitor.append(tr);
      });
    }
  }
}
