/** Assembly bit aliases, mirrored from the service's tag layout.
 *
 * Each direction carries 4 x 16-bit words; unlisted bits are reserved-zero.
 * The monitor decodes the raw decimal words back into named bits, so word0
 * value 141 on the controller side reads IMSTP + SFSPD + Stop + Enable.
 */

export type AssemblyDirection = "robot_to_plc" | "plc_to_robot";

interface BitAlias {
  word: number;
  bit: number;
  name: string;
}

export const ROBOT_TO_PLC_ALIASES: BitAlias[] = [
  { word: 0, bit: 1, name: "Cmd enabled" },
  { word: 0, bit: 2, name: "System ready" },
  { word: 0, bit: 3, name: "Prg running" },
  { word: 0, bit: 4, name: "Prg paused" },
  { word: 0, bit: 5, name: "Motion held" },
  { word: 0, bit: 6, name: "Fault" },
  { word: 0, bit: 7, name: "At perch" },
  { word: 0, bit: 8, name: "TP enabled" },
  { word: 0, bit: 10, name: "Red" },
  { word: 0, bit: 11, name: "Green" },
  { word: 0, bit: 12, name: "Blue" },
  { word: 0, bit: 13, name: "Conveyor fwd" },
  { word: 1, bit: 1, name: "Scan Done" },
  { word: 1, bit: 12, name: "Robot DO 141" },
];

export const PLC_TO_ROBOT_ALIASES: BitAlias[] = [
  { word: 0, bit: 0, name: "IMSTP" },
  { word: 0, bit: 1, name: "HOLD" },
  { word: 0, bit: 2, name: "SFSPD" },
  { word: 0, bit: 3, name: "Stop" },
  { word: 0, bit: 4, name: "Fault Reset" },
  { word: 0, bit: 5, name: "Stat" },
  { word: 0, bit: 6, name: "Part match" },
  { word: 0, bit: 7, name: "Enable" },
  { word: 0, bit: 8, name: "Scan Program" },
  { word: 0, bit: 9, name: "Remove Program" },
];

function table(direction: AssemblyDirection): BitAlias[] {
  return direction === "robot_to_plc" ? ROBOT_TO_PLC_ALIASES : PLC_TO_ROBOT_ALIASES;
}

/** Names of the bits set in an assembly's words, in table order. */
export function decodeWords(words: number[], direction: AssemblyDirection): string[] {
  const out: string[] = [];
  for (const alias of table(direction)) {
    const word = words[alias.word] ?? 0;
    if ((word >> alias.bit) & 1) {
      out.push(alias.name);
    }
  }
  return out;
}

/** Decode a single word of one assembly (for per-word monitor rows). */
export function decodeWord(
  value: number,
  wordIndex: number,
  direction: AssemblyDirection,
): string[] {
  const out: string[] = [];
  for (const alias of table(direction)) {
    if (alias.word === wordIndex && (value >> alias.bit) & 1) {
      out.push(alias.name);
    }
  }
  return out;
}

/** Pack named bits into words (used by tests to cross-check decoding). */
export function packBits(names: string[], direction: AssemblyDirection): number[] {
  const words = [0, 0, 0, 0];
  for (const name of names) {
    const alias = table(direction).find((a) => a.name === name);
    if (!alias) {
      throw new Error(`unknown ${direction} alias: ${name}`);
    }
    words[alias.word] |= 1 << alias.bit;
  }
  return words;
}
