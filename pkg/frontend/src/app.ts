/**
 * Browser bootstrap: canvas scatter, click handling, keyboard piano,
 * WebAudio playback. All behavior lives in ExplorerController; this file only
 * renders and forwards events.
 */

import { ApiClient } from "./api.js";
import { pointColor } from "./colors.js";
import { ExplorerController } from "./controller.js";
import { latentToCanvas, DEFAULT_GEOMETRY } from "./coords.js";
import { isNoteKey, OCTAVE_TOGGLE_KEY } from "./keyboard.js";
import type { MapPayload } from "./types.js";

const canvas = document.getElementById("map") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const pitchSlider = document.getElementById("pitch") as HTMLInputElement;
const pitchLabel = document.getElementById("pitch-label")!;
const octaveLabel = document.getElementById("octave-label")!;
const errorBanner = document.getElementById("error-banner")!;
const retryButton = document.getElementById("retry")!;
const playButton = document.getElementById("play") as HTMLButtonElement;

const geom = DEFAULT_GEOMETRY;
canvas.width = geom.size;
canvas.height = geom.size;

let audioCtx: AudioContext | null = null;

async function playWav(bytes: Uint8Array): Promise<void> {
  audioCtx = audioCtx ?? new AudioContext();
  const buffer = await audioCtx.decodeAudioData(
    bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.byteLength) as ArrayBuffer,
  );
  await new Promise<void>((resolve) => {
    const source = audioCtx!.createBufferSource();
    source.buffer = buffer;
    source.connect(audioCtx!.destination);
    source.onended = () => resolve();
    source.start();
  });
}

const controller = new ExplorerController(
  new ApiClient(""),
  {
    onMap: renderAll,
    onSelection: () => renderAll(controller.map!),
    onPitch: (pitch) => {
      pitchSlider.value = String(pitch);
      pitchLabel.textContent = `MIDI ${pitch}`;
    },
    onState: (state) => {
      statusEl.textContent = state;
      playButton.disabled = state !== "idle";
    },
    onError: (message) => {
      errorBanner.textContent = message;
      errorBanner.classList.remove("hidden");
      window.setTimeout(() => errorBanner.classList.add("hidden"), 4000);
    },
    onResult: (res) => {
      statusEl.textContent = `(${res.x.toFixed(2)}, ${res.y.toFixed(2)}) @ MIDI ${res.pitch} in ${res.latency_ms.toFixed(0)} ms`;
    },
    play: playWav,
  },
  geom,
);

function renderAll(map: MapPayload): void {
  const nFamilies = new Set(map.points.map((p) => p.family_id)).size;
  const perFamily = Math.max(
    1,
    Math.round(new Set(map.points.map((p) => p.instrument_id)).size / Math.max(nFamilies, 1)),
  );
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  // unit circle
  const half = geom.size / 2;
  ctx.beginPath();
  ctx.arc(half, half, half * (1 - geom.margin), 0, Math.PI * 2);
  ctx.strokeStyle = "#b9b4ab";
  ctx.stroke();

  for (const p of map.points) {
    const { px, py } = latentToCanvas(p.x, p.y, geom);
    ctx.beginPath();
    ctx.arc(px, py, 3.2, 0, Math.PI * 2);
    ctx.fillStyle = pointColor(p.family_id, p.instrument_id, nFamilies, perFamily);
    ctx.fill();
  }

  if (controller.selected) {
    const { px, py } = latentToCanvas(controller.selected.x, controller.selected.y, geom);
    ctx.beginPath();
    ctx.arc(px, py, 7, 0, Math.PI * 2);
    ctx.strokeStyle = "#1d1d1d";
    ctx.lineWidth = 2;
    ctx.stroke();
    ctx.lineWidth = 1;
  }
}

canvas.addEventListener("click", (ev) => {
  const rect = canvas.getBoundingClientRect();
  controller.handleCanvasClick(ev.clientX - rect.left, ev.clientY - rect.top);
  void controller.trigger();
});

pitchSlider.addEventListener("input", () => {
  controller.setPitch(Number(pitchSlider.value));
});

playButton.addEventListener("click", () => void controller.trigger());

window.addEventListener("keydown", (ev) => {
  if (ev.repeat) return;
  const key = ev.key.toLowerCase();
  if (key === OCTAVE_TOGGLE_KEY) {
    controller.handleKey(key);
    octaveLabel.textContent = controller.octaveUp ? "+12" : "base";
    return;
  }
  if (isNoteKey(key)) {
    controller.handleKey(key);
    void controller.trigger();
  }
});

retryButton.addEventListener("click", () => void bootstrap());

async function bootstrap(): Promise<void> {
  errorBanner.classList.add("hidden");
  try {
    const map = await controller.loadMap();
    if (map.points.length === 0) {
      statusEl.textContent = "map is empty; train a model first";
      return;
    }
    pitchSlider.min = String(map.pitch_lo);
    pitchSlider.max = String(map.pitch_hi);
    pitchSlider.value = String(controller.pitch);
    pitchLabel.textContent = `MIDI ${controller.pitch}`;
    statusEl.textContent = `idle (${map.points.length} training points)`;
  } catch (err) {
    errorBanner.textContent = `map fetch failed: ${String(err)}`;
    errorBanner.classList.remove("hidden");
  }
}

void bootstrap();
