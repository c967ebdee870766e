import { describe, expect, it } from "vitest";

import {
  controlsEnabled,
  initialState,
  isPending,
  shownOverride,
  shownSelection,
  withCommandQueued,
  withConnection,
  withSnapshot,
} from "../src/state.js";
import type { Snapshot } from "../src/types.js";

function makeSnapshot(overrides: Partial<Snapshot> = {}): Snapshot {
  return {
    schema: 1,
    t_us: 0,
    conveyor: {
      running: false,
      speed_mm_per_s: 100,
      belt_length_mm: 1200,
      belt_half_width_mm: 150,
      beam_sensor_x_mm: 600,
    },
    enable: false,
    beam_blocked: false,
    selected: { red: false, green: false, blue: false },
    override: false,
    parts: [],
    assemblies: {
      robot_to_plc: { words: [0, 0, 0, 0], set_bits: [] },
      plc_to_robot: { words: [0, 0, 0, 0], set_bits: [] },
    },
    robot: {
      state: "idle",
      program: null,
      statement_index: null,
      pose: { x: 600, y: -300, z: 200 },
      suction: false,
    },
    filter_wheel: { commanded_angle_deg: 90, led_rgb: [255, 0, 0] },
    reject_bin: [],
    metrics: {
      parts_total: 0,
      reject_bin: [],
      misclassified: 0,
      mean_cycle_time_s: null,
      sim_time_s: 0,
      per_color: {},
    },
    last_command_id: 0,
    completed: false,
    ...overrides,
  };
}

describe("no optimistic state", () => {
  it("queuing a command changes nothing the user can see", () => {
    let state = withSnapshot(initialState(), makeSnapshot());
    const before = {
      selection: shownSelection(state),
      override: shownOverride(state),
    };
    state = withCommandQueued(state, 1, "select_colors");
    state = withCommandQueued(state, 2, "set_override");
    expect(shownSelection(state)).toEqual(before.selection);
    expect(shownOverride(state)).toEqual(before.override);
    expect(isPending(state, "select_colors")).toBe(true);
  });

  it("displayed selection equals the last snapshot until a newer one arrives", () => {
    let state = withSnapshot(initialState(), makeSnapshot());
    state = withCommandQueued(state, 1, "select_colors");
    // stubbed stream: echo arrives with the selection applied
    expect(shownSelection(state).red).toBe(false);
    state = withSnapshot(
      state,
      makeSnapshot({
        t_us: 10_000,
        selected: { red: true, green: false, blue: false },
        last_command_id: 1,
      }),
    );
    expect(shownSelection(state).red).toBe(true);
    expect(isPending(state, "select_colors")).toBe(false);
  });

  it("ack clears only commands at or below last_command_id", () => {
    let state = withSnapshot(initialState(), makeSnapshot());
    state = withCommandQueued(state, 1, "start");
    state = withCommandQueued(state, 2, "set_override");
    state = withSnapshot(state, makeSnapshot({ t_us: 5_000, last_command_id: 1 }));
    expect(isPending(state, "start")).toBe(false);
    expect(isPending(state, "set_override")).toBe(true);
  });

  it("stale snapshots never roll displayed state backwards", () => {
    let state = withSnapshot(
      initialState(),
      makeSnapshot({ t_us: 20_000, selected: { red: true, green: false, blue: false } }),
    );
    state = withSnapshot(state, makeSnapshot({ t_us: 10_000 }));
    expect(shownSelection(state).red).toBe(true);
  });
});

describe("connection gating", () => {
  it("controls disabled until connected with a snapshot", () => {
    let state = initialState();
    expect(controlsEnabled(state)).toBe(false);
    state = withConnection(state, "connected");
    expect(controlsEnabled(state)).toBe(false); // no snapshot yet
    state = withSnapshot(state, makeSnapshot());
    expect(controlsEnabled(state)).toBe(true);
    state = withConnection(state, "disconnected");
    expect(controlsEnabled(state)).toBe(false);
  });

  it("a fresh snapshot marks the connection live again", () => {
    let state = withSnapshot(initialState(), makeSnapshot());
    state = withConnection(state, "disconnected");
    state = withSnapshot(state, makeSnapshot({ t_us: 30_000 }));
    expect(controlsEnabled(state)).toBe(true);
  });
});
