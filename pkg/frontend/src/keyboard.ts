/**
 * Computer-keyboard piano: `a` is C3 (MIDI 60), laid out tracker-style
 * (a s d f g h j k = white keys C D E F G A B C; w e t y u = the sharps
 * between them). `q` toggles the octave +12. Results clamp into the range
 * the server advertises.
 */

const BASE_NOTE = 60; // C3, the `a` key

const KEY_OFFSETS: Record<string, number> = {
  a: 0, // C
  w: 1, // C#
  s: 2, // D
  e: 3, // D#
  d: 4, // E
  f: 5, // F
  t: 6, // F#
  g: 7, // G
  y: 8, // G#
  h: 9, // A
  u: 10, // A#
  j: 11, // B
  k: 12, // C, one octave up
};

export const OCTAVE_TOGGLE_KEY = "q";

export function isNoteKey(key: string): boolean {
  return Object.prototype.hasOwnProperty.call(KEY_OFFSETS, key.toLowerCase());
}

export function clampPitch(pitch: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, pitch));
}

/**
 * Map a key press to a MIDI note, or null for non-note keys.
 * `octaveUp` is the state of the `q` toggle.
 */
export function keyToMidi(
  key: string,
  octaveUp: boolean,
  lo: number,
  hi: number,
): number | null {
  const offset = KEY_OFFSETS[key.toLowerCase()];
  if (offset === undefined) return null;
  const note = BASE_NOTE + offset + (octaveUp ? 12 : 0);
  return clampPitch(note, lo, hi);
}

export function mappedKeys(): string[] {
  return Object.keys(KEY_OFFSETS);
}
