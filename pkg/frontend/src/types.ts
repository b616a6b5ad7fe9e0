export interface ScatterPoint {
  x: number;
  y: number;
  instrument_id: number;
  family_id: number;
  pitch: number;
}

export interface MapPayload {
  points: ScatterPoint[];
  pitch_lo: number;
  pitch_hi: number;
  config_digest: string;
}

export interface GenerateRequest {
  x: number;
  y: number;
  pitch: number;
}

export interface GenerateResponse {
  wav: string; // base64 RIFF
  latency_ms: number;
  x: number; // server-clamped point, echoed back
  y: number;
  pitch: number;
}

export interface ApiError {
  error: string;
  pitch_lo?: number;
  pitch_hi?: number;
}

export type PlaybackState = "idle" | "loading" | "playing";
