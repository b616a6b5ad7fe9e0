"""HTTP service behind the latent-map explorer.

Endpoints (JSON): GET /api/map, GET /api/health, POST /api/generate.
Checkpoints load in a background thread after the socket binds; requests
answered 503 until ready. Models are immutable after load, so concurrent
generate calls are safe and deterministic. Query points outside the unit disc
are radially clamped and the clamped point is echoed back.
"""

from __future__ import annotations

import base64
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import codec
from . import evaluate as ev
from .checkpoint import file_digest
from .config import RunConfig
from .dataset import generate_dataset, load_dataset
from .transformer import ConditioningInput, load_transformer
from .vae import load_vae

MAX_BODY_BYTES = 64 * 1024


class TimbreMapService:
    """Loaded models plus the precomputed map payload."""

    def __init__(self, cfg: RunConfig, vae_path: str, transformer_path: str,
                 dataset_dir: str | None = None):
        self.cfg = cfg
        self.vae_path = vae_path
        self.transformer_path = transformer_path
        self.dataset_dir = dataset_dir
        self.ready = False
        self.load_error: str | None = None
        self.vae = None
        self.transformer = None
        self.map_payload: dict | None = None

    def load(self) -> None:
        try:
            self.vae = load_vae(self.vae_path, self.cfg)
            self.transformer = load_transformer(self.transformer_path, self.cfg)
            root = Path(self.dataset_dir or self.cfg.paths.dataset_dir)
            if (root / "manifest.json").exists():
                records, _ = load_dataset(root)
            else:
                records, _ = generate_dataset(self.cfg.dataset)
            points = ev.export_latent_scatter(self.vae, records, "train")
            self.map_payload = {
                "points": points,
                "pitch_lo": self.cfg.dataset.pitch_lo,
                "pitch_hi": self.cfg.dataset.pitch_hi,
                "config_digest": self.cfg.digest(),
            }
            self.ready = True
        except Exception as exc:  # surfaced via /api/health
            self.load_error = f"{type(exc).__name__}: {exc}"

    def health(self) -> dict:
        status = "ok" if self.ready else ("error" if self.load_error else "loading")
        out = {"status": status, "digests": {}}
        if self.ready:
            out["digests"] = {"vae": file_digest(self.vae_path),
                              "transformer": file_digest(self.transformer_path)}
        if self.load_error:
            out["error"] = self.load_error
        return out

    def generate(self, x: float, y: float, pitch: int) -> dict:
        t0 = time.perf_counter()
        lo, hi = self.cfg.dataset.pitch_lo, self.cfg.dataset.pitch_hi
        if not isinstance(pitch, int) or not lo <= pitch <= hi:
            raise PitchRangeError(lo, hi)
        z = np.array([x, y], dtype=np.float32)
        norm = float(np.linalg.norm(z))
        if norm > 1.0:
            z = z / norm
        emb = self.transformer.generate(ConditioningInput(z=z, pitch_index=pitch - lo))
        waveform = codec.decode(emb, self.cfg.dataset)
        blob = codec.wav_bytes(waveform, self.cfg.dataset.sample_rate)
        return {
            "wav": base64.b64encode(blob).decode("ascii"),
            "latency_ms": (time.perf_counter() - t0) * 1000.0,
            "x": float(z[0]),
            "y": float(z[1]),
            "pitch": pitch,
        }


class PitchRangeError(ValueError):
    def __init__(self, lo: int, hi: int):
        self.lo, self.hi = lo, hi
        super().__init__(f"pitch must be an integer in [{lo}, {hi}]")


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "timbremap"

    @property
    def service(self) -> TimbreMapService:
        return self.server.service

    def log_message(self, fmt, *args):
        if self.server.verbose:
            super().log_message(fmt, *args)

    def _send_json(self, code: int, payload: dict) -> None:
        blob = json.dumps(payload).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(blob)

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        if self.path == "/api/health":
            return self._send_json(200, self.service.health())
        if self.path == "/api/map":
            if not self.service.ready:
                return self._send_json(503, {"error": "models loading"})
            return self._send_json(200, self.service.map_payload)
        if self.path.startswith("/api/"):
            return self._send_json(404, {"error": f"unknown endpoint {self.path}"})
        return self._serve_static()

    def do_POST(self):
        if self.path != "/api/generate":
            return self._send_json(404, {"error": f"unknown endpoint {self.path}"})
        if not self.service.ready:
            return self._send_json(503, {"error": "models loading"})
        length = int(self.headers.get("Content-Length", 0))
        if length <= 0 or length > MAX_BODY_BYTES:
            return self._send_json(422, {"error": "missing or oversized body"})
        try:
            body = json.loads(self.rfile.read(length))
            x = float(body["x"])
            y = float(body["y"])
            pitch = body["pitch"]
            if isinstance(pitch, bool) or not isinstance(pitch, int):
                raise TypeError("pitch must be an integer MIDI note")
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            return self._send_json(422, {"error": f"malformed body: {exc}"})
        try:
            return self._send_json(200, self.service.generate(x, y, pitch))
        except PitchRangeError as exc:
            return self._send_json(422, {"error": str(exc),
                                         "pitch_lo": exc.lo, "pitch_hi": exc.hi})

    def _serve_static(self):
        root = self.server.static_dir
        if root is None:
            return self._send_json(404, {"error": "no static frontend configured"})
        rel = self.path.split("?")[0].lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            return self._send_json(404, {"error": "not found"})
        ctype = {
            ".html": "text/html", ".js": "text/javascript", ".css": "text/css",
            ".svg": "image/svg+xml", ".json": "application/json",
        }.get(target.suffix, "application/octet-stream")
        blob = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(blob)))
        self.end_headers()
        self.wfile.write(blob)


def make_server(cfg: RunConfig, vae_path: str, transformer_path: str, port: int,
                host: str = "127.0.0.1", static_dir: str | None = None,
                dataset_dir: str | None = None, verbose: bool = False) -> ThreadingHTTPServer:
    """Bind the socket and kick off background model loading; caller runs
    serve_forever (or polls handle_request in tests)."""
    service = TimbreMapService(cfg, vae_path, transformer_path, dataset_dir)
    httpd = ThreadingHTTPServer((host, port), _Handler)
    httpd.service = service
    httpd.verbose = verbose
    if static_dir is None and Path("frontend/dist").is_dir():
        static_dir = "frontend/dist"
    httpd.static_dir = Path(static_dir) if static_dir else None
    threading.Thread(target=service.load, daemon=True).start()
    return httpd


def serve(cfg: RunConfig, vae_path: str, transformer_path: str, port: int,
          host: str = "127.0.0.1", static_dir: str | None = None,
          dataset_dir: str | None = None) -> None:
    httpd = make_server(cfg, vae_path, transformer_path, port, host,
                        static_dir, dataset_dir, verbose=True)
    print(f"timbremap service on http://{host}:{port} (ctrl-c to stop)")
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
