/** Wire schema of the workcell service: snapshots in, commands out. */

export type PartColor = "red" | "green" | "blue" | "unknown";
export type PartStateName =
  | "on_belt"
  | "held_by_robot"
  | "in_reject_bin"
  | "passed_through";

export interface PartView {
  id: number;
  color: PartColor;
  x_mm: number;
  y_mm: number;
  rotation_deg: number;
  state: PartStateName;
}

export interface AssemblyView {
  words: number[];
  set_bits: string[];
}

export interface Snapshot {
  schema: number;
  t_us: number;
  conveyor: {
    running: boolean;
    speed_mm_per_s: number;
    belt_length_mm: number;
    belt_half_width_mm: number;
    beam_sensor_x_mm: number;
  };
  enable: boolean;
  beam_blocked: boolean;
  selected: { red: boolean; green: boolean; blue: boolean };
  override: boolean;
  parts: PartView[];
  assemblies: {
    robot_to_plc: AssemblyView;
    plc_to_robot: AssemblyView;
  };
  robot: {
    state: string;
    program: string | null;
    statement_index: number | null;
    pose: { x: number; y: number; z: number };
    suction: boolean;
  };
  filter_wheel: { commanded_angle_deg: number; led_rgb: number[] };
  reject_bin: number[];
  metrics: {
    parts_total: number;
    reject_bin: number[];
    misclassified: number;
    mean_cycle_time_s: number | null;
    sim_time_s: number;
    per_color: Record<string, { spawned: number; kept: number; removed: number }>;
  };
  last_command_id: number;
  completed: boolean;
  finished?: boolean;
  error?: string;
}

export type CommandName =
  | "start"
  | "stop"
  | "select_colors"
  | "set_override"
  | "spawn_part";

export interface CommandRequest {
  command: CommandName;
  args?: Record<string, unknown>;
}

export interface CommandAccepted {
  queued: boolean;
  command_id: number;
}
