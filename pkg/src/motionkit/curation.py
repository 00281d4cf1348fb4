"""Dataset curation: quality scores, threshold bucketing, SFT/DPO assembly.

Clips flow through two gates. The prefilter drops blurry or static clips
using cheap pixel statistics (flow_score, clarity_score, both strict >).
Surviving annotated clips are bucketed by an external VQAScore: below 0.3
is discarded (L), above the per-source/aspect threshold becomes preference
data (H), the middle band becomes instruction data (S). H clips pair the
original annotation against a baseline re-annotation with a randomized
presentation side; S clips get a question drawn from a fixed pool. The
softplus form of the preference loss is included as a reference
computation for sanity-checking exported pairs.
"""

from __future__ import annotations

import dataclasses
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .video import Clip

OBJECT_QUESTIONS = (
    "What objects are moving in this video?",
    "Can you describe the motion of objects in this video?",
    "What is happening to the objects in this scene?",
    "How are the objects moving in this video?",
    "Describe the movements of the main subjects in this clip.",
    "What actions are being performed by the objects in this video?",
    "How would you characterize the object motion in this scene?",
    "What kind of movement do you observe from the objects in this video?",
    "Describe the trajectory of the moving objects in this clip.",
    "How do the objects interact with each other in this video?",
)

CAMERA_QUESTIONS = (
    "How is the camera moving in this video?",
    "Describe the camera motion in this video.",
    "What camera techniques are used in this video?",
    "Is the camera stationary or moving in this clip?",
    "How does the camera angle change throughout this video?",
    "What kind of camera movements can you identify in this footage?",
    "How would you characterize the camera work in this video?",
    "Does the camera follow any specific subject in this video?",
    "What perspective does the camera provide in this scene?",
    "How does the camera movement contribute to the viewing experience?",
)

MIXED_QUESTIONS = (
    "Describe the primary object's specific action, including its fine-grained "
    "motion. How does the camera's movement (e.g., tracking, zoom, pan) follow "
    "or frame this object's action, and what are the object's key visual "
    "attributes highlighted by this interplay?",
    "Considering the primary object's movement and its interaction with other "
    "elements, what is its implied goal? How does the camera's perspective "
    "(e.g., close-up, wide shot, point-of-view) and any dynamic changes in its "
    "movement contribute to or obscure this implied intention?",
    "Analyze a significant change in the primary object's motion or behavior. "
    "How does the camera's operation (e.g., a sudden zoom, a switch to slow "
    "motion, a change in focus) coincide with and emphasize this specific "
    "change in the object's action?",
    "Discuss the overall pattern of the primary object's movement throughout a "
    "key segment of the video. Correlate this with the dominant camera "
    "movement strategy used in that segment. How does this combined "
    "object-camera choreography affect the scene's narrative or the "
    "information conveyed about the object's activity?",
)

QUESTION_POOLS = {
    "object": OBJECT_QUESTIONS,
    "camera": CAMERA_QUESTIONS,
    "mixed": MIXED_QUESTIONS,
}

# Per (source, aspect) VQAScore bars for the high-quality bucket.
DEFAULT_HIGH_THRESHOLDS = {
    ("Kinetics-700", "object"): 0.75,
    ("Kinetics-700", "camera"): 0.70,
    ("ActivityNet", "object"): 0.75,
    ("ActivityNet", "camera"): 0.72,
    ("Charades", "object"): 0.72,
    ("Charades", "camera"): 0.70,
    ("Charades-Ego", "object"): 0.72,
    ("Charades-Ego", "camera"): 0.70,
    ("SSV2", "object"): 0.68,
    ("SSV2", "camera"): 0.68,
    ("OpenVid-1M", "object"): 0.70,
    ("OpenVid-1M", "camera"): 0.70,
}

DOWNSAMPLE_MAX_DIM = 128


@dataclass(frozen=True)
class ThresholdTable:
    """Prefilter bars plus the VQAScore bucketing thresholds."""

    tau_f: float
    tau_c: float
    tau_v_low: float = 0.3
    high: dict[tuple[str, str], float] = dataclasses.field(
        default_factory=lambda: dict(DEFAULT_HIGH_THRESHOLDS)
    )

    def __post_init__(self):
        for key, value in self.high.items():
            if not 0 <= value <= 1:
                raise ValueError(f"high threshold {key} must be in [0,1], got {value}")
        if self.high and not 0 <= self.tau_v_low < min(self.high.values()):
            raise ValueError(
                f"tau_v_low {self.tau_v_low} must be below every high threshold"
            )

    def high_threshold(self, source: str, aspect: str) -> float:
        try:
            return self.high[(source, aspect)]
        except KeyError:
            raise ValueError(f"no high threshold for source {source!r}, aspect {aspect!r}")

    @classmethod
    def from_json(cls, path: str | Path) -> "ThresholdTable":
        data = json.loads(Path(path).read_text())
        high = {
            (src, aspect): float(v)
            for src, aspects in data.get("high", {}).items()
            for aspect, v in aspects.items()
        }
        return cls(
            tau_f=float(data["tau_f"]),
            tau_c=float(data["tau_c"]),
            tau_v_low=float(data.get("tau_v_low", 0.3)),
            high=high or dict(DEFAULT_HIGH_THRESHOLDS),
        )

    def to_json(self, path: str | Path) -> None:
        high: dict[str, dict[str, float]] = {}
        for (src, aspect), v in self.high.items():
            high.setdefault(src, {})[aspect] = v
        data = {"tau_f": self.tau_f, "tau_c": self.tau_c, "tau_v_low": self.tau_v_low, "high": high}
        Path(path).write_text(json.dumps(data, indent=2) + "\n")


@dataclass(frozen=True)
class CurationRecord:
    """Per-clip curation state; scores fill in as stages run."""

    clip_id: str
    source: str
    aspect: str  # object | camera | mixed
    flow_score: Optional[float] = None
    clarity_score: Optional[float] = None
    vqa_score: Optional[float] = None
    bucket: Optional[str] = None  # P-rejected | H | L | S
    annotation_text: Optional[str] = None

    def __post_init__(self):
        if self.vqa_score is not None and not 0 <= self.vqa_score <= 1:
            raise ValueError(f"vqa_score must be in [0,1], got {self.vqa_score}")
        if self.bucket not in (None, "P-rejected", "H", "L", "S"):
            raise ValueError(f"unknown bucket {self.bucket!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CurationRecord":
        return cls(**{k: d.get(k) for k in (f.name for f in dataclasses.fields(cls))})


@dataclass(frozen=True)
class SFTSample:
    clip_id: str
    aspect: str
    question: str
    answer: str


@dataclass(frozen=True)
class PreferencePair:
    """A chosen/reject text pair with its blinded presentation side."""

    pair_id: str
    clip_id: str
    question: str
    chosen: str
    reject: str
    presentation: str  # which of A/B displays the chosen text
    annotator_choice: Optional[str] = None

    def __post_init__(self):
        if self.chosen == self.reject:
            raise ValueError("chosen and reject texts must differ")
        if self.presentation not in ("A", "B"):
            raise ValueError(f"presentation must be A or B, got {self.presentation!r}")

    @property
    def option_a(self) -> str:
        return self.chosen if self.presentation == "A" else self.reject

    @property
    def option_b(self) -> str:
        return self.reject if self.presentation == "A" else self.chosen


@dataclass(frozen=True)
class DPOParams:
    beta: float = 0.1

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")


def _gray_small(pixels: np.ndarray) -> np.ndarray:
    """Grayscale float copy, downsampled so max(W, H) <= 128."""
    h, w = pixels.shape[:2]
    if max(h, w) > DOWNSAMPLE_MAX_DIM:
        scale = DOWNSAMPLE_MAX_DIM / max(h, w)
        new_w = max(1, round(w * scale))
        new_h = max(1, round(h * scale))
        img = Image.fromarray(pixels, mode="RGB").resize((new_w, new_h), Image.BILINEAR)
        pixels = np.asarray(img, dtype=np.uint8)
    p = pixels.astype(np.float64)
    return 0.299 * p[:, :, 0] + 0.587 * p[:, :, 1] + 0.114 * p[:, :, 2]


def flow_score(clip: Clip) -> float:
    """Motion proxy: mean absolute grayscale difference of consecutive frames.

    Frames are downsampled to max dimension 128 first. 0 for a static clip,
    255 for alternating black/white frames.
    """
    if len(clip) < 2:
        raise ValueError("flow_score needs at least two frames")
    grays = [_gray_small(f.pixels) for f in clip.frames]
    diffs = [float(np.mean(np.abs(b - a))) for a, b in zip(grays, grays[1:])]
    return float(np.mean(diffs))


def clarity_score(clip: Clip) -> float:
    """Sharpness proxy: variance of the 3x3 Laplacian on the middle frame.

    Frames too small for a 3x3 neighborhood score 0.
    """
    frame = clip.frames[(len(clip) - 1) // 2]
    p = frame.pixels.astype(np.float64)
    g = 0.299 * p[:, :, 0] + 0.587 * p[:, :, 1] + 0.114 * p[:, :, 2]
    if g.shape[0] < 3 or g.shape[1] < 3:
        return 0.0
    lap = g[:-2, 1:-1] + g[2:, 1:-1] + g[1:-1, :-2] + g[1:-1, 2:] - 4 * g[1:-1, 1:-1]
    return float(lap.var())


def prefilter(
    records: Sequence[CurationRecord], tau_f: float, tau_c: float
) -> tuple[list[CurationRecord], list[CurationRecord]]:
    """Split records into (kept, rejected) on strict score thresholds.

    A record passes only if flow_score > tau_f AND clarity_score > tau_c;
    rejected records come back with bucket "P-rejected".
    """
    kept, rejected = [], []
    for rec in records:
        if rec.flow_score is None or rec.clarity_score is None:
            raise ValueError(f"record {rec.clip_id} is missing prefilter scores")
        if rec.flow_score > tau_f and rec.clarity_score > tau_c:
            kept.append(rec)
        else:
            rejected.append(dataclasses.replace(rec, bucket="P-rejected"))
    return kept, rejected


def categorize(record: CurationRecord, table: ThresholdTable) -> str:
    """Bucket one annotated record by VQAScore: L below 0.3, H above the
    (source, aspect) bar, S in between (threshold hits fall to S)."""
    if record.vqa_score is None:
        raise ValueError(f"record {record.clip_id} has no vqa_score")
    if record.vqa_score < table.tau_v_low:
        return "L"
    if record.vqa_score > table.high_threshold(record.source, record.aspect):
        return "H"
    return "S"


def bucket_records(
    records: Sequence[CurationRecord], table: ThresholdTable
) -> list[CurationRecord]:
    """categorize() applied across a record list, returning updated copies."""
    return [dataclasses.replace(rec, bucket=categorize(rec, table)) for rec in records]


def _rng_for(clip_id: str, seed: int) -> random.Random:
    # String seeding keeps draws identical across platforms and runs.
    return random.Random(f"{clip_id}:{seed}")


def make_sft_sample(record: CurationRecord, seed: int = 0) -> SFTSample:
    """Instruction sample for an S-bucket record: pooled question, annotation answer.

    The question draw depends only on (clip_id, seed).
    """
    if record.bucket != "S":
        raise ValueError(f"SFT samples come from bucket S, record is {record.bucket!r}")
    if not record.annotation_text:
        raise ValueError(f"record {record.clip_id} has no annotation_text")
    if record.aspect not in QUESTION_POOLS:
        raise ValueError(f"no question pool for aspect {record.aspect!r}")
    rng = _rng_for(record.clip_id, seed)
    question = rng.choice(QUESTION_POOLS[record.aspect])
    return SFTSample(
        clip_id=record.clip_id, aspect=record.aspect, question=question, answer=record.annotation_text
    )


def make_preference_pair(
    record: CurationRecord,
    chosen_text: str,
    baseline_text: str,
    seed: int = 0,
    question: Optional[str] = None,
) -> PreferencePair:
    """Preference pair for an H-bucket record with a seeded presentation side.

    The question defaults to a pool draw from the record's aspect; both the
    draw and the side depend only on (clip_id, seed).
    """
    if record.bucket != "H":
        raise ValueError(f"preference pairs come from bucket H, record is {record.bucket!r}")
    if chosen_text == baseline_text:
        raise ValueError("chosen and baseline texts are identical")
    rng = _rng_for(record.clip_id, seed)
    presentation = rng.choice(("A", "B"))  # drawn before any optional question draw
    if question is None:
        if record.aspect not in QUESTION_POOLS:
            raise ValueError(f"no question pool for aspect {record.aspect!r}")
        question = rng.choice(QUESTION_POOLS[record.aspect])
    return PreferencePair(
        pair_id=f"pair-{record.clip_id}",
        clip_id=record.clip_id,
        question=question,
        chosen=chosen_text,
        reject=baseline_text,
        presentation=presentation,
    )


def dpo_loss(
    logp_policy_chosen,
    logp_ref_chosen,
    logp_policy_reject,
    logp_ref_reject,
    params: DPOParams = DPOParams(),
) -> float:
    """Mean preference loss softplus(-z) with
    z = beta * ((logp_pc - logp_rc) - (logp_pr - logp_rr)).

    Accepts scalars or equal-length sequences; z = 0 gives ln 2. Inputs
    must be finite.
    """
    arrays = [
        np.atleast_1d(np.asarray(a, dtype=np.float64))
        for a in (logp_policy_chosen, logp_ref_chosen, logp_policy_reject, logp_ref_reject)
    ]
    if len({a.shape for a in arrays}) != 1:
        raise ValueError("log-probability inputs must have matching shapes")
    if not all(np.isfinite(a).all() for a in arrays):
        raise ValueError("log-probability inputs must be finite")
    lpc, lrc, lpr, lrr = arrays
    z = params.beta * ((lpc - lrc) - (lpr - lrr))
    # softplus(-z) = log(1 + exp(-z)), evaluated stably for large |z|
    losses = np.logaddexp(0.0, -z)
    return float(losses.mean())


def export_jsonl(items: Sequence, path: str | Path, include_orientation: bool = True) -> Path:
    """Write SFT samples or preference pairs as one JSON object per line.

    Pair rows carry chosen_is (which side holds the chosen text) unless
    include_orientation is False — the annotator-facing variant.
    """
    if not items:
        raise ValueError("nothing to export")
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for item in items:
            if isinstance(item, SFTSample):
                row = {
                    "clip_id": item.clip_id,
                    "aspect": item.aspect,
                    "question": item.question,
                    "answer": item.answer,
                }
            elif isinstance(item, PreferencePair):
                row = {
                    "pair_id": item.pair_id,
                    "clip_id": item.clip_id,
                    "question": item.question,
                    "option_a": item.option_a,
                    "option_b": item.option_b,
                }
                if include_orientation:
                    row["chosen_is"] = item.presentation
            else:
                raise TypeError(f"cannot export {type(item).__name__}")
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return out


def records_to_jsonl(records: Sequence[CurationRecord], path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")
    return out


def records_from_jsonl(path: str | Path) -> list[CurationRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [CurationRecord.from_dict(json.loads(line)) for line in lines if line.strip()]
