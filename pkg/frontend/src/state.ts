/** UI state atom and its pure transitions.
 *
 * The invariant everything here serves: the UI never computes process state
 * locally. What is displayed comes from the last received snapshot and
 * nothing else; a queued command is only shown as applied once a snapshot's
 * last_command_id has caught up with it.
 */

import type { CommandName, Snapshot } from "./types.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";
export type ScreenName = "main" | "selection" | "conveyor";

export interface PendingCommand {
  id: number;
  command: CommandName;
}

export interface UiState {
  connection: ConnectionStatus;
  snapshot: Snapshot | null;
  pending: PendingCommand[];
  screen: ScreenName;
}

export function initialState(): UiState {
  return { connection: "connecting", snapshot: null, pending: [], screen: "main" };
}

export function withConnection(state: UiState, connection: ConnectionStatus): UiState {
  return { ...state, connection };
}

export function withSnapshot(state: UiState, snapshot: Snapshot): UiState {
  // stale or duplicate pushes must never roll displayed state backwards
  if (state.snapshot && snapshot.t_us < state.snapshot.t_us) {
    return state;
  }
  const pending = state.pending.filter((p) => p.id > snapshot.last_command_id);
  return { ...state, snapshot, pending, connection: "connected" };
}

export function withCommandQueued(
  state: UiState,
  id: number,
  command: CommandName,
): UiState {
  return { ...state, pending: [...state.pending, { id, command }] };
}

export function withScreen(state: UiState, screen: ScreenName): UiState {
  return { ...state, screen };
}

// --- selectors (all read the snapshot only) ---------------------------------

export function controlsEnabled(state: UiState): boolean {
  return state.connection === "connected" && state.snapshot !== null;
}

export function shownSelection(state: UiState): { red: boolean; green: boolean; blue: boolean } {
  return state.snapshot?.selected ?? { red: false, green: false, blue: false };
}

export function shownOverride(state: UiState): boolean {
  return state.snapshot?.override ?? false;
}

export function conveyorRunning(state: UiState): boolean {
  return state.snapshot?.conveyor.running ?? false;
}

export function systemEnabled(state: UiState): boolean {
  return state.snapshot?.enable ?? false;
}

export function rejectCount(state: UiState): number {
  return state.snapshot?.reject_bin.length ?? 0;
}

export function isPending(state: UiState, command: CommandName): boolean {
  return state.pending.some((p) => p.command === command);
}
