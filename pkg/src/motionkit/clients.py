"""Clients for the external model services (detector, tracker, MLLM, VQAScore).

All model inference happens on the other side of an HTTP boundary. Each
client serializes a request dict, hands it to a transport, and parses the
response dict. Transports come in three flavors:

  * HttpTransport      - real POSTs, URLs resolved from env vars
  * ReplayTransport    - offline, answers from recorded JSONL transcripts
  * RecordingTransport - wraps another transport and writes transcripts

A transcript line is {"request": ..., "response": ...}; replay matches the
first unconsumed line whose request equals the one being sent, so recorded
fixtures stay valid even if independent calls are reordered.
"""

from __future__ import annotations

import base64
import io
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import requests
from PIL import Image

from .trajectory import BBox
from .video import Frame

SERVICE_ENV_VARS = {
    "detector": "DETECTOR_URL",
    "tracker": "TRACKER_URL",
    "mllm": "MLLM_URL",
    "vqascore": "VQASCORE_URL",
}


class TransportError(RuntimeError):
    """A service call failed after retries; message carries the request id."""


class ReplayError(RuntimeError):
    """No recorded response matches the request being replayed."""


def encode_frame_png(frame: Frame) -> str:
    """Frame -> base64 PNG string, the wire format for all image payloads."""
    buf = io.BytesIO()
    Image.fromarray(frame.pixels, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class HttpTransport:
    """POSTs JSON to per-service URLs, retrying transient failures."""

    def __init__(self, urls: Optional[dict[str, str]] = None, retries: int = 3, backoff: float = 0.2):
        self.urls = dict(urls) if urls else {}
        self.retries = retries
        self.backoff = backoff
        self._counter = 0

    def _url(self, service: str) -> str:
        if service in self.urls:
            return self.urls[service]
        env = SERVICE_ENV_VARS.get(service)
        url = os.environ.get(env, "") if env else ""
        if not url:
            raise TransportError(f"no URL configured for service {service!r} (set {env})")
        return url

    def post(self, service: str, payload: dict) -> dict:
        self._counter += 1
        request_id = f"{service}-{self._counter}"
        url = self._url(service)
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = requests.post(url, json=payload, timeout=60)
                if resp.status_code >= 500:
                    last_error = TransportError(f"{request_id}: HTTP {resp.status_code}")
                else:
                    resp.raise_for_status()
                    return resp.json()
            except requests.RequestException as exc:
                last_error = exc
            if attempt < self.retries - 1:
                time.sleep(self.backoff * (attempt + 1))
        raise TransportError(f"request {request_id} to {url} failed: {last_error}")


class ReplayTransport:
    """Serves recorded responses from {service}.jsonl files in a directory."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise ReplayError(f"no replay directory: {self.directory}")
        self._entries: dict[str, list[dict]] = {}
        self._consumed: dict[str, list[bool]] = {}

    def _load(self, service: str) -> None:
        path = self.directory / f"{service}.jsonl"
        if not path.is_file():
            raise ReplayError(f"no transcript for service {service!r}: {path}")
        entries = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
        self._entries[service] = entries
        self._consumed[service] = [False] * len(entries)

    def post(self, service: str, payload: dict) -> dict:
        if service not in self._entries:
            self._load(service)
        entries, consumed = self._entries[service], self._consumed[service]
        for i, entry in enumerate(entries):
            if not consumed[i] and entry["request"] == payload:
                consumed[i] = True
                return entry["response"]
        raise ReplayError(
            f"no unconsumed recorded response matches a {service} request "
            f"(transcript has {len(entries)} entries)"
        )


class RecordingTransport:
    """Delegates to another transport and appends transcripts per service."""

    def __init__(self, inner, directory: str | Path):
        self.inner = inner
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def post(self, service: str, payload: dict) -> dict:
        response = self.inner.post(service, payload)
        line = json.dumps({"request": payload, "response": response}, ensure_ascii=False)
        with open(self.directory / f"{service}.jsonl", "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
        return response


class DetectorClient:
    """Grounded detection: frame + category list -> labeled boxes."""

    def __init__(self, transport):
        self.transport = transport

    def detect(
        self,
        frame: Frame,
        categories: Sequence[str],
        box_threshold: float,
        text_threshold: float,
    ) -> list[BBox]:
        payload = {
            "image": encode_frame_png(frame),
            "categories": list(categories),
            "box_threshold": box_threshold,
            "text_threshold": text_threshold,
        }
        response = self.transport.post("detector", payload)
        boxes = [BBox.from_dict(b) for b in response["boxes"]]
        allowed = set(categories)
        for box in boxes:
            if box.label not in allowed:
                raise ValueError(f"detector returned label {box.label!r} outside {sorted(allowed)}")
        return boxes


class TrackerClient:
    """Propagates seed boxes across frames; returns boxes per object per position."""

    def __init__(self, transport):
        self.transport = transport

    def track(self, frames: Sequence[Frame], seeds) -> dict[int, dict[int, BBox]]:
        """seeds: (object_id, label, BBox at the first frame) triples.

        The response keys frames by 1-based position within `frames`.
        """
        payload = {
            "frames": [encode_frame_png(f) for f in frames],
            "seeds": [
                {"object_id": oid, "label": label, "box": box.to_dict()}
                for oid, label, box in seeds
            ],
        }
        response = self.transport.post("tracker", payload)
        tracks: dict[int, dict[int, BBox]] = {}
        for entry in response["tracks"]:
            label = str(entry["label"])
            boxes = {
                int(pos): BBox.from_dict({**box, "label": box.get("label", label)})
                for pos, box in entry["boxes"].items()
            }
            tracks[int(entry["object_id"])] = boxes
        return tracks


class MLLMClient:
    """Chat with a multimodal model: interleaved text and base64 PNG images."""

    def __init__(self, transport, temperature: float = 0.0):
        self.transport = transport
        self.temperature = temperature

    def chat(self, messages: list[dict]) -> str:
        payload = {"messages": messages, "temperature": self.temperature}
        response = self.transport.post("mllm", payload)
        return response["text"]


class VQAScoreClient:
    """Scalar text-video consistency score in [0, 1]."""

    def __init__(self, transport):
        self.transport = transport

    def score(self, video_ref: str, text: str) -> float:
        response = self.transport.post("vqascore", {"video": video_ref, "text": text})
        return float(response["score"])


@dataclass
class ServiceClients:
    """The full client bundle a pipeline run needs."""

    detector: DetectorClient
    tracker: TrackerClient
    mllm: MLLMClient
    vqascore: VQAScoreClient


def make_clients(
    replay_dir: Optional[str | Path] = None,
    record_dir: Optional[str | Path] = None,
    urls: Optional[dict[str, str]] = None,
) -> ServiceClients:
    """Build the client bundle: live HTTP by default, replay when a dir is given."""
    transport = ReplayTransport(replay_dir) if replay_dir else HttpTransport(urls=urls)
    if record_dir:
        transport = RecordingTransport(transport, record_dir)
    return ServiceClients(
        detector=DetectorClient(transport),
        tracker=TrackerClient(transport),
        mllm=MLLMClient(transport),
        vqascore=VQAScoreClient(transport),
    )
