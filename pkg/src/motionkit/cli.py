"""Command-line entry points.

One executable, subcommand per stage: sampling, blur, spotlight, the full
QA pipeline, the curation steps, the annotation server, and the DPO
export. Frame directories everywhere follow the zero-padded PNG layout
(000001.png, ...).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import annotation, curation
from .blur import BlurParams, apply_motion_blur
from .clients import make_clients
from .focus import AggregatorConfig, aggregate, build_frame_unions, spotlight, tracked_variance
from .pipeline import PipelineConfig, Query, run_pipeline
from .trajectory import BBox, Trajectory
from .video import (
    SampledSequence,
    SampleSpec,
    load_clip,
    manifest_dict,
    sample,
    sampled_from_manifest,
    write_frames,
)


def _write_json(path: str | Path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def cmd_sample(args) -> int:
    clip = load_clip(args.in_dir, fps=args.fps)
    spec = SampleSpec.fixed_count(args.count) if args.count else SampleSpec.fixed_rate(args.rate)
    sampled = sample(clip, spec)
    _write_json(args.out, manifest_dict(clip, sampled))
    print(f"sampled {len(sampled)} of {len(clip)} frames -> {args.out}")
    return 0


def cmd_blur(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    clip = load_clip(args.in_dir, fps=float(manifest.get("fps", 30.0)))
    sampled = sampled_from_manifest(clip, manifest)
    blurred = apply_motion_blur(clip, sampled, BlurParams(gamma=args.gamma, window=args.window))
    paths = write_frames(args.out, blurred.frames)
    print(f"wrote {len(paths)} blurred frames -> {args.out}")
    return 0


def _trajectories_from_tracks(data: dict) -> tuple[Trajectory, ...]:
    trajectories = []
    for entry in data["tracks"]:
        label = str(entry["label"])
        boxes = {
            int(pos): BBox.from_dict({**box, "label": box.get("label", label)})
            for pos, box in entry["boxes"].items()
        }
        trajectories.append(
            Trajectory(object_id=int(entry["object_id"]), label=label, boxes=boxes)
        )
    return tuple(trajectories)


def cmd_spotlight(args) -> int:
    clip = load_clip(args.in_dir, fps=30.0)  # fps is irrelevant to compositing
    sampled = SampledSequence(
        timestamps=tuple(range(1, len(clip) + 1)), frames=clip.frames
    )
    trajectories = _trajectories_from_tracks(json.loads(Path(args.tracks).read_text()))
    cfg = AggregatorConfig(beta=args.beta)
    regions = aggregate(
        build_frame_unions(trajectories, sampled),
        tracked_variance(trajectories),
        cfg,
        (clip.width, clip.height),
    )
    lit = spotlight(sampled.frames, regions, cfg.beta)
    paths = write_frames(args.out, lit)
    print(f"wrote {len(paths)} spotlit frames -> {args.out}")
    return 0


def cmd_pipeline(args) -> int:
    clip = load_clip(args.clip, fps=args.fps)
    clients = make_clients(replay_dir=args.replay, record_dir=args.record)
    query = Query(text=args.question, options=tuple(args.option or ()), task=args.task)
    record = run_pipeline(clip, query, clients, PipelineConfig(frame_count=args.frames))
    _write_json(args.out, record.to_dict())
    print(f"gate={record.gate} -> {args.out}")
    return 0


def _load_thresholds(args) -> curation.ThresholdTable:
    if args.thresholds:
        return curation.ThresholdTable.from_json(args.thresholds)
    return curation.ThresholdTable(tau_f=0.0, tau_c=0.0)


def cmd_curate_score(args) -> int:
    existing = {r.clip_id: r for r in curation.records_from_jsonl(args.records)} if args.records else {}
    records = []
    root = Path(args.clips)
    for clip_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        clip = load_clip(clip_dir, fps=args.fps)
        base = existing.get(
            clip_dir.name,
            curation.CurationRecord(clip_id=clip_dir.name, source=args.source, aspect=args.aspect),
        )
        records.append(
            dataclasses.replace(
                base,
                flow_score=curation.flow_score(clip),
                clarity_score=curation.clarity_score(clip),
            )
        )
    curation.records_to_jsonl(records, args.out)
    print(f"scored {len(records)} clips -> {args.out}")
    return 0


def cmd_curate_vqa(args) -> int:
    clients = make_clients(replay_dir=args.replay)
    records = []
    for rec in curation.records_from_jsonl(args.records):
        if rec.annotation_text:
            score = clients.vqascore.score(rec.clip_id, rec.annotation_text)
            rec = dataclasses.replace(rec, vqa_score=score)
        records.append(rec)
    curation.records_to_jsonl(records, args.out)
    print(f"vqa-scored {len(records)} records -> {args.out}")
    return 0


def cmd_curate_prefilter(args) -> int:
    table = _load_thresholds(args)
    records = curation.records_from_jsonl(args.records)
    kept, rejected = curation.prefilter(records, table.tau_f, table.tau_c)
    curation.records_to_jsonl(kept, args.out)
    if args.rejected:
        curation.records_to_jsonl(rejected, args.rejected)
    print(f"kept {len(kept)}, rejected {len(rejected)}")
    return 0


def cmd_curate_bucket(args) -> int:
    table = _load_thresholds(args)
    records = curation.bucket_records(curation.records_from_jsonl(args.records), table)
    curation.records_to_jsonl(records, args.out)
    counts = {b: sum(1 for r in records if r.bucket == b) for b in ("H", "L", "S")}
    print(json.dumps(counts))
    return 0


def cmd_curate_make_sft(args) -> int:
    records = curation.records_from_jsonl(args.records)
    samples = [
        curation.make_sft_sample(r, seed=args.seed) for r in records if r.bucket == "S"
    ]
    curation.export_jsonl(samples, args.out)
    print(f"wrote {len(samples)} SFT samples -> {args.out}")
    return 0


def cmd_curate_make_pairs(args) -> int:
    baselines = {}
    for line in Path(args.baselines).read_text(encoding="utf-8").splitlines():
        if line.strip():
            row = json.loads(line)
            baselines[row["clip_id"]] = row["text"]
    pairs = []
    for rec in curation.records_from_jsonl(args.records):
        if rec.bucket != "H":
            continue
        if rec.clip_id not in baselines:
            raise SystemExit(f"no baseline text for H-bucket clip {rec.clip_id!r}")
        pairs.append(
            curation.make_preference_pair(
                rec, rec.annotation_text, baselines[rec.clip_id], seed=args.seed
            )
        )
    curation.export_jsonl(pairs, args.out, include_orientation=True)
    if args.blinded:
        curation.export_jsonl(pairs, args.blinded, include_orientation=False)
    print(f"wrote {len(pairs)} pairs -> {args.out}")
    return 0


def cmd_curate_dpo_loss(args) -> int:
    rows = [
        json.loads(line)
        for line in Path(args.logps).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    if not rows:
        raise SystemExit("no log-probability rows")
    loss = curation.dpo_loss(
        [r["logp_policy_chosen"] for r in rows],
        [r["logp_ref_chosen"] for r in rows],
        [r["logp_policy_reject"] for r in rows],
        [r["logp_ref_reject"] for r in rows],
        curation.DPOParams(beta=args.beta),
    )
    print(json.dumps({"loss": loss, "pairs": len(rows)}))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    service = annotation.AnnotationService.from_files(args.pairs, choice_log=args.choices)
    app = annotation.create_app(
        service, clips_dir=args.clips, allow_origins=args.allow_origin
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_export_dpo(args) -> int:
    service = annotation.AnnotationService.from_files(args.pairs, choice_log=args.choices)
    out = service.export_dpo(args.out)
    print(f"exported {len(service.export_rows())} rows -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="motionkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="pick frame timestamps from a clip directory")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--fps", type=float, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--count", type=int)
    group.add_argument("--rate", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("blur", help="synthesize motion blur at sampled timestamps")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--gamma", type=float, default=0.65)
    p.add_argument("--window", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_blur)

    p = sub.add_parser("spotlight", help="darken outside tracked focus regions")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--tracks", required=True)
    p.add_argument("--beta", type=float, default=0.9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spotlight)

    p = sub.add_parser("pipeline", help="answer a motion question about a clip")
    p.add_argument("--clip", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--option", action="append", help="multiple-choice option (repeatable)")
    p.add_argument("--task", default="auto",
                   choices=["auto", "object-motion", "camera-motion", "mixed"])
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--replay", help="replay transcripts from this directory")
    p.add_argument("--record", help="record transcripts into this directory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pipeline)

    c = sub.add_parser("curate", help="dataset curation steps")
    csub = c.add_subparsers(dest="curate_command", required=True)

    p = csub.add_parser("score", help="compute flow/clarity scores per clip directory")
    p.add_argument("--clips", required=True)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--source", default="other")
    p.add_argument("--aspect", default="object", choices=["object", "camera", "mixed"])
    p.add_argument("--records", help="existing records to update")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curate_score)

    p = csub.add_parser("vqa", help="fill vqa_score from the scoring service")
    p.add_argument("--records", required=True)
    p.add_argument("--replay")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curate_vqa)

    p = csub.add_parser("prefilter", help="drop low-flow / low-clarity records")
    p.add_argument("--records", required=True)
    p.add_argument("--thresholds")
    p.add_argument("--out", required=True)
    p.add_argument("--rejected")
    p.set_defaults(func=cmd_curate_prefilter)

    p = csub.add_parser("bucket", help="assign H/L/S buckets by VQAScore")
    p.add_argument("--records", required=True)
    p.add_argument("--thresholds")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curate_bucket)

    p = csub.add_parser("make-sft", help="instruction samples from bucket S")
    p.add_argument("--records", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curate_make_sft)

    p = csub.add_parser("make-pairs", help="preference pairs from bucket H")
    p.add_argument("--records", required=True)
    p.add_argument("--baselines", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--blinded", help="also write the annotator-facing file (no orientation)")
    p.set_defaults(func=cmd_curate_make_pairs)

    p = csub.add_parser("dpo-loss", help="reference preference loss over logged logps")
    p.add_argument("--logps", required=True)
    p.add_argument("--beta", type=float, default=0.1)
    p.set_defaults(func=cmd_curate_dpo_loss)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--pairs", required=True)
    p.add_argument("--clips")
    p.add_argument("--choices", help="choice log path (JSONL, appended)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--allow-origin", action="append",
                   help="origin allowed for cross-origin requests (repeatable); "
                        "needed when the annotation UI is hosted elsewhere")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export-dpo", help="resolve choices into DPO rows")
    p.add_argument("--pairs", required=True)
    p.add_argument("--choices", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_dpo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
