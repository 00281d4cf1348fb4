"""Preference-annotation backend: blinded pair serving, choice log, DPO export.

Annotators see Option A / Option B with no hint of which side is the
pre-assigned chosen text. Choices are appended to a JSONL log before being
acknowledged; the export maps each annotator's A/B through the pair's
recorded presentation, takes a majority across annotators, and holds ties
back for adjudication. Replaying the log against the same pairs file
reproduces the export exactly.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from pydantic import BaseModel

# Annotation rubric served to the front-end (GET /api/criteria).
CRITERIA = (
    {
        "criterion": "Accuracy",
        "guideline": "Prefer more accurate identification & description of primary motion(s).",
        "key_questions": (
            "Core action correctly identified?",
            "Agents/objects in motion correct?",
            "Avoids misinterpreting actions?",
        ),
    },
    {
        "criterion": "Granularity",
        "guideline": "Prefer more fine-grained & detailed account of motion, capturing nuances.",
        "key_questions": (
            "Complex movements broken down?",
            "Specific body/object details?",
            "Overly general or specific?",
        ),
    },
    {
        "criterion": "Temporal Dynamics",
        "guideline": "Prefer better capture of temporal aspects (sequence, duration, speed, rhythm).",
        "key_questions": (
            "Sub-actions order correct?",
            "Pace/intensity conveyed?",
            "Speed/tempo changes reflected?",
        ),
    },
    {
        "criterion": "Camera Movement",
        "guideline": (
            "Prefer description that accurately identifies & describes significant "
            "camera movements (e.g., pan, tilt, zoom, tracking)."
        ),
        "key_questions": (
            "Camera movement (pan, tilt, zoom, dolly, static) correctly identified?",
            "Effect of camera movement on scene understanding clear?",
            "Distinguished from object motion?",
        ),
    },
    {
        "criterion": "Factual Correctness",
        "guideline": "Prefer response factually grounded in visual evidence, no hallucinations.",
        "key_questions": (
            "Only visible elements/actions?",
            "Contradicts visual information?",
            "Infers unobservable intent?",
        ),
    },
)


@dataclass(frozen=True)
class ChoiceRecord:
    pair_id: str
    annotator_id: str
    displayed_order: str  # which side held the chosen text (the pair's presentation)
    choice: str  # A | B as clicked
    resolved_preference: str  # chosen | reject
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "annotator_id": self.annotator_id,
            "displayed_order": self.displayed_order,
            "choice": self.choice,
            "resolved_preference": self.resolved_preference,
            "timestamp": self.timestamp,
        }


class AnnotationService:
    """In-memory pair queue plus an append-only choice log.

    Pairs are dicts with keys pair_id, clip_id, question, option_a,
    option_b, chosen_is, the orientation-bearing export format of
    curation.export_jsonl.
    """

    def __init__(self, pairs: list[dict], choice_log: Optional[str | Path] = None):
        ids = [p["pair_id"] for p in pairs]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate pair_id in pairs")
        self.pairs = {p["pair_id"]: dict(p) for p in pairs}
        self.order = ids
        self.choice_log = Path(choice_log) if choice_log else None
        self.choices: list[ChoiceRecord] = []
        self._answered: dict[str, set[str]] = {}  # annotator -> pair_ids
        self._lock = threading.Lock()
        if self.choice_log and self.choice_log.is_file():
            for line in self.choice_log.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._restore(json.loads(line))

    def _restore(self, row: dict) -> None:
        record = ChoiceRecord(**row)
        self.choices.append(record)
        self._answered.setdefault(record.annotator_id, set()).add(record.pair_id)

    @classmethod
    def from_files(
        cls, pairs_path: str | Path, choice_log: Optional[str | Path] = None
    ) -> "AnnotationService":
        lines = Path(pairs_path).read_text(encoding="utf-8").splitlines()
        pairs = [json.loads(line) for line in lines if line.strip()]
        for p in pairs:
            if "chosen_is" not in p:
                raise ValueError(f"pair {p.get('pair_id')!r} lacks chosen_is; "
                                 "load the orientation-bearing pairs file, not the blinded one")
        return cls(pairs, choice_log=choice_log)

    def register(self, annotator_id: str) -> None:
        with self._lock:
            self._answered.setdefault(annotator_id, set())

    def next_pair(self, annotator_id: str) -> Optional[dict]:
        """First pair this annotator has not answered, blinded, or None when done."""
        with self._lock:
            if annotator_id not in self._answered:
                raise KeyError(f"unknown annotator {annotator_id!r}")
            answered = self._answered[annotator_id]
            for pair_id in self.order:
                if pair_id not in answered:
                    p = self.pairs[pair_id]
                    return {
                        "pair_id": p["pair_id"],
                        "clip_id": p["clip_id"],
                        "question": p["question"],
                        "option_a": p["option_a"],
                        "option_b": p["option_b"],
                    }
            return None

    def submit_choice(self, annotator_id: str, pair_id: str, choice: str) -> ChoiceRecord:
        """Record one A/B choice; appends to the log before acknowledging."""
        if choice not in ("A", "B"):
            raise ValueError(f"choice must be A or B, got {choice!r}")
        with self._lock:
            if annotator_id not in self._answered:
                raise KeyError(f"unknown annotator {annotator_id!r}")
            if pair_id not in self.pairs:
                raise KeyError(f"unknown pair {pair_id!r}")
            if pair_id in self._answered[annotator_id]:
                raise ValueError(f"annotator {annotator_id!r} already answered {pair_id!r}")
            pair = self.pairs[pair_id]
            resolved = "chosen" if choice == pair["chosen_is"] else "reject"
            record = ChoiceRecord(
                pair_id=pair_id,
                annotator_id=annotator_id,
                displayed_order=pair["chosen_is"],
                choice=choice,
                resolved_preference=resolved,
                timestamp=datetime.now(timezone.utc).isoformat(),
            )
            if self.choice_log:
                with open(self.choice_log, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
            self.choices.append(record)
            self._answered[annotator_id].add(pair_id)
            return record

    def export_rows(self) -> list[dict]:
        """Majority-resolved (question, chosen, reject) rows with vote counts.

        A majority for "chosen" keeps the original orientation, a majority
        for "reject" swaps it, and a tie is emitted unresolved with status
        needs-adjudication. Pairs nobody answered are omitted.
        """
        if not self.choices:
            raise ValueError("no choices recorded")
        votes: dict[str, list[str]] = {}
        for record in self.choices:
            votes.setdefault(record.pair_id, []).append(record.resolved_preference)
        rows = []
        for pair_id in self.order:
            if pair_id not in votes:
                continue
            p = self.pairs[pair_id]
            for_chosen = votes[pair_id].count("chosen")
            for_reject = votes[pair_id].count("reject")
            row = {
                "pair_id": pair_id,
                "clip_id": p["clip_id"],
                "question": p["question"],
                "votes_for_chosen": for_chosen,
                "votes_for_reject": for_reject,
            }
            chosen = p["option_a"] if p["chosen_is"] == "A" else p["option_b"]
            reject = p["option_b"] if p["chosen_is"] == "A" else p["option_a"]
            if for_chosen > for_reject:
                row.update(status="ok", chosen=chosen, reject=reject)
            elif for_reject > for_chosen:
                row.update(status="ok", chosen=reject, reject=chosen)
            else:
                row.update(status="needs-adjudication", option_a=p["option_a"],
                           option_b=p["option_b"])
            rows.append(row)
        return rows

    def export_dpo(self, path: str | Path) -> Path:
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            for row in self.export_rows():
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        return out


# Module-level so FastAPI can resolve the endpoint's deferred annotation.
class ChoiceBody(BaseModel):
    pair_id: str
    choice: str
    annotator_id: str


def create_app(
    service: AnnotationService,
    clips_dir: Optional[str | Path] = None,
    allow_origins: Optional[list[str]] = None,
):
    """FastAPI wrapper; sessions auto-register on first contact.

    Pass allow_origins when the browser frontend is served from a different
    host than this API; without it, cross-origin requests stay blocked.
    """
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import FileResponse

    clips_root = Path(clips_dir) if clips_dir else None
    app = FastAPI(title="preference annotation")
    if allow_origins:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=allow_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def frame_count(clip_id: str) -> int:
        if clips_root is None:
            return 0
        d = clips_root / clip_id
        if not d.is_dir():
            return 0
        return sum(1 for p in d.iterdir() if p.suffix.lower() == ".png")

    @app.get("/api/session/{annotator}/next")
    def next_pair(annotator: str):
        service.register(annotator)
        pair = service.next_pair(annotator)
        if pair is None:
            return {"pair": None}
        pair["frame_count"] = frame_count(pair["clip_id"])
        return {"pair": pair}

    @app.post("/api/choice")
    def submit_choice(body: ChoiceBody):
        try:
            service.submit_choice(body.annotator_id, body.pair_id, body.choice)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        # The resolved orientation stays server-side; leaking it would unblind the pair.
        return {"recorded": True, "pair_id": body.pair_id}

    @app.get("/api/clips/{clip_id}/frames/{n}.png")
    def clip_frame(clip_id: str, n: int):
        if clips_root is None:
            raise HTTPException(status_code=404, detail="no clips directory configured")
        path = clips_root / clip_id / f"{n:06d}.png"
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"no frame {n} for clip {clip_id!r}")
        return FileResponse(path, media_type="image/png")

    @app.get("/api/criteria")
    def criteria():
        return {"criteria": [
            {**row, "key_questions": list(row["key_questions"])} for row in CRITERIA
        ]}

    return app
