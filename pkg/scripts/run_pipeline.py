#!/usr/bin/env python3
"""End-to-end demo: references -> corpus -> classify -> score -> simulated
observers -> MOS -> correlation report.

Observers are simulated: each mostly prefers the less-distorted clip, with a
per-observer lapse rate, plus a few purely random "clickers" that the
screening stage should flag.  Defaults are sized to run in a few minutes;
pass --full for the 250-frame 512x288 study geometry.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from lapvqa.cli import main as lapvqa
from lapvqa.frameio import write_clip
from lapvqa.references import make_default_references
from lapvqa.subjective import Choice, PreferenceRecord, TrialResult, read_plan, write_record
from lapvqa.synth import read_manifest


def simulate_observer(plan, level_of, rng, lapse: float, random_clicker: bool) -> PreferenceRecord:
    results = []
    for trial in plan.trials:
        la, lb = level_of[trial.video_a_id], level_of[trial.video_b_id]
        if random_clicker:
            choice = Choice(rng.choice(["A", "B", "EQUAL"]))
        elif rng.random() < lapse:
            choice = Choice(rng.choice(["A", "B", "EQUAL"]))
        else:
            choice = Choice.A if la < lb else Choice.B
        results.append(TrialResult(trial.idx, choice))
    return PreferenceRecord(plan.observer_id, tuple(results))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="pipeline_out")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--observers", type=int, default=12)
    parser.add_argument("--clickers", type=int, default=1)
    parser.add_argument("--full", action="store_true",
                        help="use the full 512x288x250 geometry (slow)")
    args = parser.parse_args()

    work = Path(args.workdir)
    refs_dir = work / "refs"
    corpus = work / "corpus"
    plans_dir = work / "plans"
    records_dir = work / "records"
    for d in (refs_dir, plans_dir, records_dir):
        d.mkdir(parents=True, exist_ok=True)

    geometry = dict(width=512, height=288, nframes=250) if args.full else dict(
        width=512, height=288, nframes=10
    )
    print(f"[1/6] rendering references {geometry} ...")
    for ref in make_default_references(seed=20240, **geometry):
        write_clip(ref.clip, refs_dir / f"{ref.label}.y4m")

    print("[2/6] synthesizing corpus ...")
    assert lapvqa(["synth", "--refs", str(refs_dir), "--out", str(corpus),
                   "--seed", str(args.seed)]) == 0

    print("[3/6] classifying ...")
    assert lapvqa(["classify", "--corpus", str(corpus)]) == 0

    print("[4/6] scoring ...")
    assert lapvqa(["score", "--corpus", str(corpus)]) == 0

    print("[5/6] simulating observers ...")
    manifest = read_manifest(corpus / "manifest.json")
    level_of = {e["id"]: e["level"] for e in manifest}
    rng = np.random.default_rng(args.seed)
    for i in range(args.observers):
        obs = f"obs{i:02d}"
        plan_path = plans_dir / f"{obs}.json"
        assert lapvqa(["plan", "--corpus", str(corpus), "--observer", obs,
                       "--seed", str(args.seed), "--out", str(plan_path)]) == 0
        plan = read_plan(plan_path)
        record = simulate_observer(
            plan, level_of, rng,
            lapse=float(rng.uniform(0.02, 0.12)),
            random_clicker=i < args.clickers,
        )
        write_record(record, records_dir / f"{obs}.json")

    print("[6/6] aggregating and reporting ...")
    mos_csv = work / "mos.csv"
    assert lapvqa(["aggregate", "--plans", str(plans_dir), "--records", str(records_dir),
                   "--out", str(mos_csv), "--cohort", "nonexpert"]) == 0
    assert lapvqa(["report", "--scores", str(corpus / "scores.json"), "--mos", str(mos_csv),
                   "--corpus", str(corpus), "--out", str(work / "report")]) == 0

    accuracy = json.loads((corpus / "classification.json").read_text())["accuracy_pct"]
    print("classification accuracy (%):", {k: v for k, v in accuracy.items()})
    print(f"artifacts in {work}/")


if __name__ == "__main__":
    main()
