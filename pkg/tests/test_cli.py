import json
import math
from pathlib import Path

import numpy as np
import pytest

from helpers import make_clip
from motionkit import curation
from motionkit.annotation import AnnotationService
from motionkit.cli import main
from motionkit.video import Frame, load_clip, write_frames

FIXTURES = Path(__file__).parent / "fixtures"


def write_clip_dir(path, values, width=6, height=4):
    clip = make_clip(values, width=width, height=height)
    write_frames(path, clip.frames)
    return clip


def test_sample_fixed_count(tmp_path, capsys):
    write_clip_dir(tmp_path / "clip", [0, 10, 20, 30, 40, 50, 60, 70, 80, 90])
    out = tmp_path / "manifest.json"
    assert main(["sample", "--in", str(tmp_path / "clip"), "--fps", "5",
                 "--count", "5", "--out", str(out)]) == 0
    manifest = json.loads(out.read_text())
    assert manifest["timestamps"] == [1, 3, 5, 7, 9]
    assert manifest["fps"] == 5.0
    assert manifest["length"] == 10
    assert "sampled 5 of 10 frames" in capsys.readouterr().out


def test_sample_fixed_rate(tmp_path):
    write_clip_dir(tmp_path / "clip", list(range(0, 90)))
    out = tmp_path / "manifest.json"
    main(["sample", "--in", str(tmp_path / "clip"), "--fps", "30",
          "--rate", "1", "--out", str(out)])
    assert json.loads(out.read_text())["timestamps"] == [1, 31, 61]


def test_sample_requires_count_or_rate(tmp_path):
    with pytest.raises(SystemExit):
        main(["sample", "--in", str(tmp_path), "--fps", "5", "--out", "x.json"])


def test_blur_command(tmp_path):
    write_clip_dir(tmp_path / "clip", [100, 100, 100])
    manifest = tmp_path / "manifest.json"
    main(["sample", "--in", str(tmp_path / "clip"), "--fps", "30",
          "--count", "3", "--out", str(manifest)])
    out_dir = tmp_path / "blurred"
    main(["blur", "--in", str(tmp_path / "clip"), "--manifest", str(manifest),
          "--gamma", "0.5", "--window", "2", "--out", str(out_dir)])
    blurred = load_clip(out_dir, fps=30.0)
    # Frame 1 misses its predecessor: 100 * 2/3 rounds to 67. Later frames
    # average two identical frames back to 100.
    assert blurred.frames[0].pixels[0, 0, 0] == 67
    assert blurred.frames[1].pixels[0, 0, 0] == 100
    assert blurred.frames[2].pixels[0, 0, 0] == 100


def test_spotlight_command(tmp_path):
    write_clip_dir(tmp_path / "clip", [200, 200], width=10, height=8)
    box = {"x_min": 2, "y_min": 2, "x_max": 6, "y_max": 6, "confidence": 0.9, "label": "thing"}
    tracks = {"tracks": [{"object_id": 1, "label": "thing", "boxes": {"1": box, "2": box}}]}
    (tmp_path / "tracks.json").write_text(json.dumps(tracks))
    out_dir = tmp_path / "lit"
    main(["spotlight", "--in", str(tmp_path / "clip"), "--tracks",
          str(tmp_path / "tracks.json"), "--beta", "0.5", "--out", str(out_dir)])
    lit = load_clip(out_dir, fps=30.0)
    for frame in lit.frames:
        assert frame.pixels[3, 3, 0] == 200     # inside the box, untouched
        assert frame.pixels[0, 0, 0] == 100     # outside, halved
        assert frame.pixels[6, 6, 0] == 100     # pixel center 6.5 falls outside


def test_pipeline_replay_matches_golden(tmp_path):
    out = tmp_path / "answer.json"
    assert main([
        "pipeline",
        "--clip", str(FIXTURES / "clips" / "cat"),
        "--question", "What is the cat doing?",
        "--fps", "30", "--frames", "8",
        "--replay", str(FIXTURES / "replay" / "cat"),
        "--out", str(out),
    ]) == 0
    golden = (FIXTURES / "golden" / "cat_answer.json").read_text(encoding="utf-8")
    assert out.read_text(encoding="utf-8") == golden


def test_curate_score_and_prefilter(tmp_path, capsys):
    clips = tmp_path / "clips"
    write_clip_dir(clips / "still", [50, 50, 50])
    rng = np.random.default_rng(9)
    textured = [
        # textured and changing: clears both the flow and the clarity bar
        Frame(pixels=rng.integers(0, 256, size=(4, 6, 3), dtype=np.uint8), index=i)
        for i in (1, 2, 3)
    ]
    write_frames(clips / "moving", textured)

    records_path = tmp_path / "records.jsonl"
    main(["curate", "score", "--clips", str(clips), "--source", "Kinetics-700",
          "--out", str(records_path)])
    records = {r.clip_id: r for r in curation.records_from_jsonl(records_path)}
    assert records["still"].flow_score == 0.0
    assert records["moving"].flow_score > 1.0
    assert records["moving"].clarity_score > 0.0

    thresholds = tmp_path / "thresholds.json"
    curation.ThresholdTable(tau_f=1.0, tau_c=0.0).to_json(thresholds)
    kept_path = tmp_path / "kept.jsonl"
    rejected_path = tmp_path / "rejected.jsonl"
    main(["curate", "prefilter", "--records", str(records_path), "--thresholds",
          str(thresholds), "--out", str(kept_path), "--rejected", str(rejected_path)])
    assert "kept 1, rejected 1" in capsys.readouterr().out
    kept = curation.records_from_jsonl(kept_path)
    assert [r.clip_id for r in kept] == ["moving"]
    assert [r.bucket for r in curation.records_from_jsonl(rejected_path)] == ["P-rejected"]


def seeded_records(tmp_path):
    rows = [
        curation.CurationRecord(clip_id="hi", source="Kinetics-700", aspect="object",
                                vqa_score=0.9, annotation_text="a cat jumps"),
        curation.CurationRecord(clip_id="mid", source="Kinetics-700", aspect="object",
                                vqa_score=0.5, annotation_text="a dog sits"),
        curation.CurationRecord(clip_id="lo", source="Kinetics-700", aspect="object",
                                vqa_score=0.1, annotation_text="blurry mess"),
    ]
    path = tmp_path / "scored.jsonl"
    curation.records_to_jsonl(rows, path)
    return path


def test_curate_vqa_replay(tmp_path):
    rows = [
        curation.CurationRecord(clip_id="c1", source="SSV2", aspect="object",
                                annotation_text="a hand waves"),
    ]
    records_path = tmp_path / "records.jsonl"
    curation.records_to_jsonl(rows, records_path)
    replay = tmp_path / "replay"
    replay.mkdir()
    (replay / "vqascore.jsonl").write_text(json.dumps({
        "request": {"video": "c1", "text": "a hand waves"},
        "response": {"score": 0.42},
    }) + "\n")
    out = tmp_path / "with_vqa.jsonl"
    main(["curate", "vqa", "--records", str(records_path), "--replay", str(replay),
          "--out", str(out)])
    assert curation.records_from_jsonl(out)[0].vqa_score == 0.42


def test_curate_bucket_sft_pairs(tmp_path, capsys):
    scored = seeded_records(tmp_path)
    bucketed = tmp_path / "bucketed.jsonl"
    main(["curate", "bucket", "--records", str(scored), "--out", str(bucketed)])
    assert json.loads(capsys.readouterr().out) == {"H": 1, "L": 1, "S": 1}

    sft = tmp_path / "sft.jsonl"
    main(["curate", "make-sft", "--records", str(bucketed), "--seed", "3", "--out", str(sft)])
    rows = [json.loads(line) for line in sft.read_text().splitlines()]
    assert [r["clip_id"] for r in rows] == ["mid"]
    assert rows[0]["answer"] == "a dog sits"
    assert rows[0]["question"] in curation.OBJECT_QUESTIONS

    baselines = tmp_path / "baselines.jsonl"
    baselines.write_text(json.dumps({"clip_id": "hi", "text": "something moves"}) + "\n")
    pairs = tmp_path / "pairs.jsonl"
    blinded = tmp_path / "blinded.jsonl"
    main(["curate", "make-pairs", "--records", str(bucketed), "--baselines", str(baselines),
          "--seed", "3", "--out", str(pairs), "--blinded", str(blinded)])
    pair_row = json.loads(pairs.read_text().splitlines()[0])
    assert pair_row["chosen_is"] in ("A", "B")
    chosen_text = pair_row["option_a"] if pair_row["chosen_is"] == "A" else pair_row["option_b"]
    assert chosen_text == "a cat jumps"
    blind_row = json.loads(blinded.read_text().splitlines()[0])
    assert "chosen_is" not in blind_row


def test_curate_make_pairs_missing_baseline(tmp_path):
    scored = seeded_records(tmp_path)
    bucketed = tmp_path / "bucketed.jsonl"
    main(["curate", "bucket", "--records", str(scored), "--out", str(bucketed)])
    empty = tmp_path / "none.jsonl"
    empty.write_text("")
    with pytest.raises(SystemExit, match="no baseline"):
        main(["curate", "make-pairs", "--records", str(bucketed),
              "--baselines", str(empty), "--out", str(tmp_path / "pairs.jsonl")])


def test_curate_dpo_loss(tmp_path, capsys):
    logps = tmp_path / "logps.jsonl"
    rows = [
        {"logp_policy_chosen": 2.0, "logp_ref_chosen": 0.0,
         "logp_policy_reject": -1.0, "logp_ref_reject": 0.0},
        {"logp_policy_chosen": 1.0, "logp_ref_chosen": 1.0,
         "logp_policy_reject": 2.0, "logp_ref_reject": 2.0},
    ]
    logps.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    main(["curate", "dpo-loss", "--logps", str(logps), "--beta", "0.1"])
    got = json.loads(capsys.readouterr().out)
    assert got["pairs"] == 2
    expected = (math.log(1 + math.exp(-0.3)) + math.log(2)) / 2
    assert abs(got["loss"] - expected) < 1e-12


def test_export_dpo_command(tmp_path, capsys):
    pair = {"pair_id": "p1", "clip_id": "c", "question": "q",
            "option_a": "good", "option_b": "bad", "chosen_is": "A"}
    pairs_path = tmp_path / "pairs.jsonl"
    pairs_path.write_text(json.dumps(pair) + "\n")
    log = tmp_path / "choices.jsonl"
    svc = AnnotationService([pair], choice_log=log)
    svc.register("ann-1")
    svc.submit_choice("ann-1", "p1", "A")

    out = tmp_path / "dpo.jsonl"
    main(["export-dpo", "--pairs", str(pairs_path), "--choices", str(log),
          "--out", str(out)])
    assert "exported 1 rows" in capsys.readouterr().out
    row = json.loads(out.read_text().splitlines()[0])
    assert row["status"] == "ok"
    assert row["chosen"] == "good"
