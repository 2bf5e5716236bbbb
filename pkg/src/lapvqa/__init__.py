"""Laparoscopic video-quality research toolkit.

Pipeline: synthesize a distortion corpus from reference clips, identify
each video's distortion type from no-reference indices, score videos with
full-reference metrics, aggregate pairwise subjective studies into MOS,
and evaluate metric-MOS correlation.
"""

from .classify import (
    ClassificationReport,
    ClassifierThresholds,
    anisotropy_ratio,
    classify_video,
    lmr,
    noise_sigma,
    pbi,
    smoke_probability,
)
from .evalcorr import (
    CorrelationReport,
    CorrelationRow,
    LogisticFit,
    build_report,
    fit_logistic,
    plcc,
    srocc,
)
from .frameio import (
    ClipIOError,
    Frame,
    FrameSizeMismatchError,
    LumaPlane,
    MalformedHeaderError,
    TruncatedStreamError,
    VideoClip,
    luma_planes,
    read_clip,
    to_luma,
    write_clip,
)
from .metrics import Metric, MetricScore, psnr, score_clip, ssim, vif
from .references import (
    DEFAULT_STYLES,
    ReferenceStyle,
    make_default_references,
    make_reference_clip,
)
from .subjective import (
    Choice,
    MosTable,
    PreferenceRecord,
    SessionPlan,
    SubjectiveError,
    Trial,
    TrialResult,
    aggregate_mos,
    count_circular_triads,
    detect_outliers,
    plan_session,
    score_observer,
)
from .synth import (
    CONTENT_CATEGORIES,
    LEVELS,
    DistortionKind,
    DistortionSpec,
    LevelTableError,
    ReferenceEntry,
    apply_awgn,
    apply_defocus_blur,
    apply_distortion,
    apply_motion_blur,
    apply_smoke,
    apply_uneven_illumination,
    default_level_table,
    gen_smoke_clip,
    make_illumination_mask,
    motion_kernel,
    read_manifest,
    synthesize_corpus,
    write_manifest,
)

__version__ = "0.1.0"

__all__ = [
    "CONTENT_CATEGORIES",
    "Choice",
    "ClassificationReport",
    "ClassifierThresholds",
    "ClipIOError",
    "CorrelationReport",
    "CorrelationRow",
    "DEFAULT_STYLES",
    "DistortionKind",
    "DistortionSpec",
    "Frame",
    "FrameSizeMismatchError",
    "LEVELS",
    "LevelTableError",
    "LogisticFit",
    "LumaPlane",
    "MalformedHeaderError",
    "Metric",
    "MetricScore",
    "MosTable",
    "PreferenceRecord",
    "ReferenceEntry",
    "ReferenceStyle",
    "SessionPlan",
    "SubjectiveError",
    "Trial",
    "TrialResult",
    "TruncatedStreamError",
    "VideoClip",
    "aggregate_mos",
    "anisotropy_ratio",
    "apply_awgn",
    "apply_defocus_blur",
    "apply_distortion",
    "apply_motion_blur",
    "apply_smoke",
    "apply_uneven_illumination",
    "build_report",
    "classify_video",
    "count_circular_triads",
    "default_level_table",
    "detect_outliers",
    "fit_logistic",
    "gen_smoke_clip",
    "lmr",
    "luma_planes",
    "make_default_references",
    "make_illumination_mask",
    "make_reference_clip",
    "motion_kernel",
    "noise_sigma",
    "pbi",
    "plan_session",
    "plcc",
    "psnr",
    "read_clip",
    "read_manifest",
    "score_clip",
    "score_observer",
    "smoke_probability",
    "srocc",
    "ssim",
    "synthesize_corpus",
    "to_luma",
    "vif",
    "write_clip",
    "write_manifest",
]
