"""Toolkit for fine-grained video motion analysis with MLLMs.

Two halves:

* A zero-shot visual-prompting pipeline that routes a motion question to
  object-motion handling (object referring -> tracking -> focus spotlight)
  and/or camera-motion handling (synthetic motion blur), then assembles the
  enhanced frame streams into a templated multimodal prompt.
* A dataset-curation workflow that prefilters clips by motion/clarity
  scores, buckets annotated clips by an external consistency score into
  preference / instruction / reject sets, generates SFT samples and blinded
  preference pairs, and serves a human annotation backend.

All model inference (detection, tracking, chat, scoring) lives behind HTTP
client interfaces with record/replay support; nothing here loads a model.
"""

from motionkit.video import Clip, Frame, SampledSequence, SampleSpec, load_clip, sample
from motionkit.blur import BlurParams, BlurredSequence, apply_motion_blur, kernel_weights
from motionkit.trajectory import (
    BBox,
    RedetectConfig,
    Trajectory,
    build_tracked_set,
    iou,
    merge_redetected,
    schedule_redetections,
)
from motionkit.focus import (
    AggregatorConfig,
    FocusRegionSequence,
    FrameUnionSequence,
    Rect,
    aggregate,
    build_frame_unions,
    frame_union,
    positional_variance,
    spotlight,
)
from motionkit.pipeline import (
    AnswerRecord,
    ObjectReferral,
    PipelineConfig,
    PromptBundle,
    Query,
    answer_camera_motion,
    answer_object_motion,
    build_prompt,
    gate_motion_type,
    refer_objects,
    run_pipeline,
)
from motionkit.curation import (
    CurationRecord,
    DPOParams,
    PreferencePair,
    SFTSample,
    ThresholdTable,
    categorize,
    clarity_score,
    dpo_loss,
    export_jsonl,
    flow_score,
    make_preference_pair,
    make_sft_sample,
    prefilter,
)

__all__ = [
    "Frame", "Clip", "SampleSpec", "SampledSequence", "load_clip", "sample",
    "BlurParams", "BlurredSequence", "kernel_weights", "apply_motion_blur",
    "BBox", "Trajectory", "RedetectConfig",
    "schedule_redetections", "iou", "merge_redetected", "build_tracked_set",
    "Rect", "AggregatorConfig", "FrameUnionSequence", "FocusRegionSequence",
    "positional_variance", "frame_union", "build_frame_unions", "aggregate", "spotlight",
    "Query", "ObjectReferral", "PromptBundle", "AnswerRecord", "PipelineConfig",
    "gate_motion_type", "refer_objects", "build_prompt",
    "answer_object_motion", "answer_camera_motion", "run_pipeline",
    "CurationRecord", "ThresholdTable", "SFTSample", "PreferencePair", "DPOParams",
    "flow_score", "clarity_score", "prefilter", "categorize",
    "make_sft_sample", "make_preference_pair", "dpo_loss", "export_jsonl",
]
