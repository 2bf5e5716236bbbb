"""Shared fixtures.

The expensive fixtures are session-scoped and computed once:

* ``default_refs``: the ten 512x288 reference clips at 10 frames.
* ``corpus_results``: streaming pass over the regenerated default corpus
  (10 refs x 5 kinds x 4 levels, in memory, one clip at a time) collecting
  per-cell classification decisions, PSNR, and mean luma, plus timing data
  for the runtime extrapolation.  Nothing heavier than one clip is held at
  a time so the suite stays within a few hundred MB.

The 10-frame geometry is the desk-scale stand-in for the 10-second corpus;
classifier decisions are per-frame medians, so they are stable in the
frame count by construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import pytest

from lapvqa.classify import ClassifierThresholds, classify_video
from lapvqa.frameio import VideoClip, write_clip
from lapvqa.metrics import Metric, score_clip
from lapvqa.references import DEFAULT_STYLES, make_default_references, make_reference_clip
from lapvqa.synth import (
    DistortionKind,
    DistortionSpec,
    apply_distortion,
    default_level_table,
    gen_smoke_clip,
)

CORPUS_SEED = 20240
CORPUS_NFRAMES = 10


@dataclass
class CellResult:
    """Outcome for one (reference, kind, level) corpus cell."""

    reference: str
    kind: DistortionKind
    level: int
    decision: DistortionKind | None
    indices: dict[str, float]
    psnr: float
    mean_luma: float


@dataclass
class CorpusResults:
    references: list[str]
    pristine_decisions: dict[str, DistortionKind | None]
    cells: list[CellResult] = field(default_factory=list)
    synth_seconds: float = 0.0
    synth_video_frames: int = 0

    def cell(self, reference: str, kind: DistortionKind, level: int) -> CellResult:
        for c in self.cells:
            if (c.reference, c.kind, c.level) == (reference, kind, level):
                return c
        raise KeyError((reference, kind, level))

    def accuracy_pct(self, kind: DistortionKind) -> float:
        hits = [c.decision == kind for c in self.cells if c.kind == kind]
        return 100.0 * sum(hits) / len(hits)


@pytest.fixture(scope="session")
def default_refs():
    return make_default_references(nframes=CORPUS_NFRAMES, seed=CORPUS_SEED)


@pytest.fixture(scope="session")
def corpus_results(default_refs) -> CorpusResults:
    thresholds = ClassifierThresholds()
    table = default_level_table()
    results = CorpusResults(
        references=[r.label for r in default_refs],
        pristine_decisions={
            r.label: classify_video(r.clip, thresholds).decision for r in default_refs
        },
    )
    for ri, ref in enumerate(default_refs):
        t0 = time.perf_counter()
        smoke_seed = int(
            np.random.SeedSequence((CORPUS_SEED, ri, 4)).generate_state(1)[0]
        )
        smoke = gen_smoke_clip(
            ref.clip.width, ref.clip.height, ref.clip.nframes, smoke_seed
        )
        distorted: dict[tuple[DistortionKind, int], VideoClip] = {}
        for kind in DistortionKind:
            for level in (1, 2, 3, 4):
                spec = DistortionSpec(kind, level, dict(table[kind][level - 1]))
                vid_seed = int(
                    np.random.SeedSequence((CORPUS_SEED, ri, level)).generate_state(1)[0]
                )
                distorted[(kind, level)] = apply_distortion(
                    ref.clip, spec, vid_seed, smoke=smoke
                )
        results.synth_seconds += time.perf_counter() - t0
        results.synth_video_frames += 20 * ref.clip.nframes
        for (kind, level), clip in distorted.items():
            report = classify_video(clip, thresholds)
            results.cells.append(
                CellResult(
                    reference=ref.label,
                    kind=kind,
                    level=level,
                    decision=report.decision,
                    indices={
                        "pbi": report.pbi,
                        "p_smoke": report.p_smoke,
                        "sigma_n": report.sigma_n,
                        "lmr": report.lmr,
                        "anisotropy": report.anisotropy,
                    },
                    psnr=score_clip(ref.clip, clip, Metric.PSNR).video_score,
                    mean_luma=float(np.mean(clip.data.astype(np.float64))),
                )
            )
        distorted.clear()
    return results


@pytest.fixture(scope="session")
def mini_refs_dir(tmp_path_factory):
    """Two small (96x64x4) reference clips on disk, for CLI plumbing tests."""
    root = tmp_path_factory.mktemp("minirefs")
    for si, style in enumerate(DEFAULT_STYLES[:2]):
        clip = make_reference_clip(style, 96, 64, 4, seed=100 + si)
        write_clip(clip, root / f"{style.category}01.y4m")
    return root
