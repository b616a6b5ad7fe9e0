/** Minimal RIFF/WAV inspection for validating server responses. */

export interface WavInfo {
  sampleRate: number;
  channels: number;
  bitsPerSample: number;
  sampleCount: number;
}

export function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  return new Uint8Array(Buffer.from(b64, "base64"));
}

export function parseWav(bytes: Uint8Array): WavInfo {
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const tag = (off: number) =>
    String.fromCharCode(bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]);
  if (tag(0) !== "RIFF" || tag(8) !== "WAVE") {
    throw new Error("not a RIFF/WAVE container");
  }
  let off = 12;
  let info: Partial<WavInfo> = {};
  while (off + 8 <= bytes.byteLength) {
    const id = tag(off);
    const size = view.getUint32(off + 4, true);
    if (id === "fmt ") {
      info.channels = view.getUint16(off + 10, true);
      info.sampleRate = view.getUint32(off + 12, true);
      info.bitsPerSample = view.getUint16(off + 22, true);
    } else if (id === "data") {
      const bytesPerSample = ((info.bitsPerSample ?? 16) / 8) * (info.channels ?? 1);
      info.sampleCount = size / bytesPerSample;
    }
    off += 8 + size + (size % 2);
  }
  if (
    info.sampleRate === undefined ||
    info.channels === undefined ||
    info.sampleCount === undefined
  ) {
    throw new Error("missing fmt or data chunk");
  }
  return info as WavInfo;
}
