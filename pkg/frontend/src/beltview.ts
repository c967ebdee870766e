/** Schematic top-down belt view on a canvas: belt, beam line, camera window,
 * parts colored by class, reject bin with its contents count. */

import type { Snapshot } from "./types.js";

const PART_COLORS: Record<string, string> = {
  red: "#d64541",
  green: "#3fa34d",
  blue: "#3a6ea5",
  unknown: "#888888",
};

export function drawBelt(canvas: HTMLCanvasElement, snapshot: Snapshot | null): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    return;
  }
  const w = canvas.width;
  const h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  if (!snapshot) {
    ctx.fillStyle = "#666";
    ctx.fillText("no data", 10, 20);
    return;
  }

  const belt = snapshot.conveyor;
  const scale = w / belt.belt_length_mm;
  const beltTop = h * 0.15;
  const beltHeight = h * 0.45;
  const yScale = beltHeight / (belt.belt_half_width_mm * 2);
  const toX = (mm: number) => mm * scale;
  const toY = (mm: number) => beltTop + beltHeight / 2 + mm * yScale;

  // belt surface with motion hint
  ctx.fillStyle = "#2b2b2b";
  ctx.fillRect(0, beltTop, w, beltHeight);
  ctx.strokeStyle = belt.running ? "#6fcf6f" : "#555";
  ctx.lineWidth = 2;
  ctx.strokeRect(0.5, beltTop + 0.5, w - 1, beltHeight - 1);

  // camera window (160 mm half-width at default optics scale)
  const windowHalf = 160;
  ctx.fillStyle = "rgba(120, 160, 255, 0.12)";
  ctx.fillRect(toX(belt.beam_sensor_x_mm - windowHalf), beltTop, toX(2 * windowHalf), beltHeight);

  // beam sensor line
  ctx.strokeStyle = snapshot.beam_blocked ? "#ff5050" : "#d0a93f";
  ctx.beginPath();
  ctx.moveTo(toX(belt.beam_sensor_x_mm), beltTop - 6);
  ctx.lineTo(toX(belt.beam_sensor_x_mm), beltTop + beltHeight + 6);
  ctx.stroke();

  // parts on the belt (and the one held by the robot, hollow)
  for (const part of snapshot.parts) {
    if (part.state === "in_reject_bin" || part.state === "passed_through") {
      continue;
    }
    const size = 40 * scale;
    const x = toX(part.x_mm);
    const y = toY(part.y_mm);
    ctx.save();
    ctx.translate(x, y);
    ctx.rotate((part.rotation_deg * Math.PI) / 180);
    ctx.fillStyle = PART_COLORS[part.color] ?? PART_COLORS.unknown;
    if (part.state === "held_by_robot") {
      ctx.globalAlpha = 0.5;
    }
    ctx.fillRect(-size / 2, -size / 2, size, size);
    ctx.restore();
  }

  // reject bin
  const binW = w * 0.12;
  const binX = toX(belt.beam_sensor_x_mm) - binW / 2;
  const binY = beltTop + beltHeight + h * 0.12;
  ctx.strokeStyle = "#999";
  ctx.strokeRect(binX, binY, binW, h * 0.2);
  ctx.fillStyle = "#ccc";
  ctx.font = "12px sans-serif";
  ctx.fillText(`reject bin: ${snapshot.reject_bin.length}`, binX + 4, binY + h * 0.12);

  // robot tool position marker
  const pose = snapshot.robot.pose;
  ctx.fillStyle = snapshot.robot.suction ? "#ffd24d" : "#aaaaaa";
  ctx.beginPath();
  ctx.arc(toX(pose.x), toY(pose.y), 5, 0, 2 * Math.PI);
  ctx.fill();
}
