import { ApiClient, ApiRequestError } from "./api.js";
import { canvasToLatent, CanvasGeometry, DEFAULT_GEOMETRY } from "./coords.js";
import { keyToMidi, OCTAVE_TOGGLE_KEY } from "./keyboard.js";
import { base64ToBytes } from "./wav.js";
import type { GenerateResponse, MapPayload, PlaybackState } from "./types.js";

export interface ExplorerEvents {
  onState?: (state: PlaybackState) => void;
  onMap?: (map: MapPayload) => void;
  onSelection?: (x: number, y: number) => void;
  onPitch?: (pitch: number) => void;
  onError?: (message: string) => void;
  onResult?: (res: GenerateResponse) => void;
  /** Hand the decoded wav bytes to the audio layer; resolves when playback ends. */
  play?: (wavBytes: Uint8Array) => Promise<void>;
}

/**
 * All explorer behavior without any DOM: map loading, click selection,
 * keyboard pitch entry, the single-in-flight generate rule, and the
 * idle -> loading -> playing -> idle state machine. The browser layer and the
 * tests drive exactly this class.
 */
export class ExplorerController {
  map: MapPayload | null = null;
  selected: { x: number; y: number } | null = null;
  pitch: number | null = null;
  octaveUp = false;
  state: PlaybackState = "idle";
  lastResult: GenerateResponse | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly events: ExplorerEvents = {},
    private readonly geometry: CanvasGeometry = DEFAULT_GEOMETRY,
  ) {}

  private setState(next: PlaybackState): void {
    this.state = next;
    this.events.onState?.(next);
  }

  async loadMap(): Promise<MapPayload> {
    const map = await this.api.fetchMap();
    this.map = map;
    if (this.pitch === null) this.pitch = map.pitch_lo;
    this.events.onMap?.(map);
    return map;
  }

  /** Click on the canvas selects the latent point under the cursor. */
  handleCanvasClick(px: number, py: number): { x: number; y: number } {
    const point = canvasToLatent(px, py, this.geometry);
    this.selected = point;
    this.events.onSelection?.(point.x, point.y);
    return point;
  }

  setPitch(pitch: number): void {
    if (this.map) {
      pitch = Math.min(this.map.pitch_hi, Math.max(this.map.pitch_lo, pitch));
    }
    this.pitch = pitch;
    this.events.onPitch?.(pitch);
  }

  /** Keyboard entry; returns true when the key meant something. The octave
   * toggle affects subsequent note keys, not the current pitch. */
  handleKey(key: string): boolean {
    if (key.toLowerCase() === OCTAVE_TOGGLE_KEY) {
      this.octaveUp = !this.octaveUp;
      return true;
    }
    if (!this.map) return false;
    const midi = keyToMidi(key, this.octaveUp, this.map.pitch_lo, this.map.pitch_hi);
    if (midi === null) return false;
    this.setPitch(midi);
    return true;
  }

  /**
   * Fire a generate request for the current (point, pitch). At most one
   * request is in flight; triggers while busy are dropped (returns null).
   */
  async trigger(): Promise<GenerateResponse | null> {
    if (this.state !== "idle") return null;
    if (!this.selected || this.pitch === null) {
      this.events.onError?.("select a timbre point and a pitch first");
      return null;
    }
    this.setState("loading");
    try {
      const res = await this.api.generate({
        x: this.selected.x,
        y: this.selected.y,
        pitch: this.pitch,
      });
      this.lastResult = res;
      // the server echoes the clamped point; show the user where they landed
      this.selected = { x: res.x, y: res.y };
      this.events.onSelection?.(res.x, res.y);
      this.events.onResult?.(res);
      if (this.events.play) {
        this.setState("playing");
        await this.events.play(base64ToBytes(res.wav));
      }
      this.setState("idle");
      return res;
    } catch (err) {
      const message =
        err instanceof ApiRequestError ? `${err.status}: ${err.message}` : String(err);
      this.events.onError?.(message);
      this.setState("idle");
      return null;
    }
  }
}
