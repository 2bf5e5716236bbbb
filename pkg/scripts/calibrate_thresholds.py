#!/usr/bin/env python3
"""Measure classifier indices over the default corpus and report accuracy.

Builds the ten references in memory, applies every (kind, level) cell, and
prints per-cell index values, decisions, per-kind accuracy, and the cells
sitting closest to each decision threshold.  Use it to re-tune
ClassifierThresholds or reference styles after changing either.
"""

import argparse
import time

import numpy as np

from lapvqa.classify import ClassifierThresholds, classify_video
from lapvqa.references import make_default_references
from lapvqa.synth import (
    DistortionKind,
    DistortionSpec,
    apply_distortion,
    default_level_table,
    gen_smoke_clip,
)

INDEX_FOR = {
    DistortionKind.NOISE: ("sigma_n", "noise_sigma"),
    DistortionKind.SMOKE: ("p_smoke", "smoke_tc"),
    DistortionKind.UNEVEN_ILLUMINATION: ("lmr", "lmr"),
    DistortionKind.DEFOCUS_BLUR: ("pbi", "pbi_blur"),
    DistortionKind.MOTION_BLUR: ("pbi", "pbi_blur"),
}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nframes", type=int, default=10)
    parser.add_argument("--seed", type=int, default=20240)
    parser.add_argument("--frame-step", type=int, default=1)
    args = parser.parse_args()

    t0 = time.time()
    thresholds = ClassifierThresholds()
    refs = make_default_references(nframes=args.nframes, seed=args.seed)
    table = default_level_table()

    print("pristine decisions (all should be None):")
    for ref in refs:
        report = classify_video(ref.clip, thresholds, frame_step=args.frame_step)
        mark = "" if report.decision is None else "  <-- MISFIRE"
        print(f"  {ref.label}: pbi={report.pbi:.2f} p_smoke={report.p_smoke:.3f} "
              f"sigma_n={report.sigma_n:.2f} lmr={report.lmr:.3f} "
              f"-> {report.decision}{mark}")

    accuracy = {}
    for kind in DistortionKind:
        index_name, _ = INDEX_FOR[kind]
        correct = 0
        print(f"\n{kind.value} ({index_name} per level; * = correct):")
        for ri, ref in enumerate(refs):
            smoke_seed = int(np.random.SeedSequence((args.seed, ri, 4)).generate_state(1)[0])
            smoke = gen_smoke_clip(ref.clip.width, ref.clip.height,
                                   ref.clip.nframes, smoke_seed)
            cells = []
            for level in (1, 2, 3, 4):
                spec = DistortionSpec(kind, level, dict(table[kind][level - 1]))
                vid_seed = int(
                    np.random.SeedSequence((args.seed, ri, level)).generate_state(1)[0]
                )
                distorted = apply_distortion(ref.clip, spec, vid_seed, smoke=smoke)
                report = classify_video(distorted, thresholds, frame_step=args.frame_step)
                ok = report.decision == kind
                correct += ok
                value = getattr(report, index_name)
                cells.append(f"L{level}={value:7.3f}{'*' if ok else ' '}")
            print(f"  {ref.label}: " + "  ".join(cells))
        accuracy[kind.value] = 100.0 * correct / (4 * len(refs))

    print("\naccuracy (%):")
    for kind, pct in accuracy.items():
        print(f"  {kind:22s} {pct:5.1f}")
    print(f"\nthresholds: {thresholds}")
    print(f"elapsed {time.time() - t0:.1f}s")


if __name__ == "__main__":
    main()
