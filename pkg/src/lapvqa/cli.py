"""Command-line pipeline driver.

Subcommands::

    synth      references -> distorted corpus + manifest
    classify   corpus -> per-video distortion decisions + accuracy vs manifest
    score      corpus -> PSNR/SSIM/VIF scores JSON
    plan       manifest -> one observer's randomized session plan
    aggregate  plans + records -> screened MOS table CSV
    report     scores + MOS -> PLCC/SROCC tables (CSV + Markdown)
    serve      plans/records over HTTP for the browser study runner

Exit codes: 0 success, 1 usage error, 2 data error.  Every source of
randomness takes an explicit seed, so reruns are byte-identical.

Flags override values from ``--config`` (a JSON object whose keys are the
flag names with underscores); built-in defaults fill the rest.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from .classify import ClassifierThresholds, classify_video
from .evalcorr import EvalCorrError, build_report
from .frameio import ClipIOError, read_clip
from .metrics import Metric, MetricScore, score_clip
from .session_server import build_server
from .subjective import (
    MosTable,
    SubjectiveError,
    aggregate_mos,
    detect_outliers,
    plan_session,
    read_plan,
    read_record,
    score_observer,
    write_plan,
    _atomic_write_text,
)
from .synth import (
    CONTENT_CATEGORIES,
    DistortionKind,
    LevelTableError,
    ReferenceEntry,
    default_level_table,
    read_manifest,
    synthesize_corpus,
)

__all__ = ["PipelineConfig", "main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

_REQUIRED_PARAMS: dict[DistortionKind, tuple[str, ...]] = {
    DistortionKind.NOISE: ("variance",),
    DistortionKind.DEFOCUS_BLUR: ("sigma", "ksize"),
    DistortionKind.MOTION_BLUR: ("length", "angle"),
    DistortionKind.UNEVEN_ILLUMINATION: ("radius_frac", "floor", "falloff_frac"),
    DistortionKind.SMOKE: ("opacity",),
}


class DataError(Exception):
    """Bad input data (missing files, broken joins, malformed tables)."""


class UsageError(Exception):
    """Command invoked without settings it needs."""


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved settings for one command run.

    Precedence: command-line flags > ``--config`` JSON > these defaults.
    """

    refs_dir: str | None = None
    corpus_dir: str | None = None
    manifest: str | None = None
    scores: str | None = None
    plans_dir: str | None = None
    records_dir: str | None = None
    mos: str | None = None
    out: str | None = None
    seed: int = 0
    cohort: str = "nonexpert"
    observer: str | None = None
    metrics: str = "psnr,ssim,vif"
    frame_step: int = 1
    levels: str | None = None
    thresholds: str | None = None
    keep_outliers: bool = False
    static_dir: str | None = None
    host: str = "127.0.0.1"
    port: int = 8008

    @classmethod
    def resolve(cls, args: argparse.Namespace) -> "PipelineConfig":
        field_names = {f.name for f in dataclasses.fields(cls)}
        merged: dict[str, object] = {}
        config_path = getattr(args, "config", None)
        if config_path:
            try:
                loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise DataError(f"cannot read config {config_path}: {exc}") from exc
            if not isinstance(loaded, Mapping):
                raise DataError("config file must hold a JSON object")
            unknown = sorted(set(loaded) - field_names)
            if unknown:
                raise DataError(f"unknown config keys: {unknown}")
            merged.update(loaded)
        for name in field_names:
            value = getattr(args, name, None)
            if value is not None:
                merged[name] = value
        try:
            return cls(**merged)  # type: ignore[arg-type]
        except TypeError as exc:
            raise DataError(f"bad config value: {exc}") from exc

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) in (None, "")]
        if missing:
            flags = ", ".join("--" + n.replace("_", "-") for n in missing)
            raise UsageError(f"missing required setting(s): {flags}")


def _load_level_table(config: PipelineConfig) -> dict[DistortionKind, list[dict]]:
    if config.levels is None:
        return default_level_table()
    try:
        raw = json.loads(Path(config.levels).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read level table {config.levels}: {exc}") from exc
    if not isinstance(raw, Mapping):
        raise DataError("level table file must hold a JSON object keyed by kind")
    table: dict[DistortionKind, list[dict]] = {}
    for kind in DistortionKind:
        rows = raw.get(kind.value)
        if not isinstance(rows, list) or len(rows) != 4:
            raise DataError(f"level table must give 4 levels for kind {kind.value!r}")
        for level, params in enumerate(rows, start=1):
            if not isinstance(params, Mapping):
                raise DataError(
                    f"level table cell ({kind.value}, level {level}) must be an object"
                )
            for key in _REQUIRED_PARAMS[kind]:
                if key not in params:
                    raise DataError(
                        f"level table cell ({kind.value}, level {level}) "
                        f"is missing parameter {key!r}"
                    )
        table[kind] = [dict(p) for p in rows]
    return table


def _load_thresholds(config: PipelineConfig) -> ClassifierThresholds:
    if config.thresholds is None:
        return ClassifierThresholds()
    try:
        raw = json.loads(Path(config.thresholds).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read thresholds {config.thresholds}: {exc}") from exc
    try:
        return ClassifierThresholds.from_json_obj(raw)
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad thresholds file: {exc}") from exc


def _load_references(refs_dir: str) -> list[ReferenceEntry]:
    root = Path(refs_dir)
    if not root.is_dir():
        raise DataError(f"references directory {refs_dir} does not exist")
    entries: list[ReferenceEntry] = []
    for item in sorted(root.iterdir()):
        if item.name.startswith("."):
            continue
        if not (item.is_dir() or item.suffix == ".y4m"):
            continue
        label = item.stem if item.is_file() else item.name
        category = label[:2].upper()
        if category not in CONTENT_CATEGORIES:
            raise DataError(
                f"reference {label!r}: leading two letters must be a content "
                f"category from {CONTENT_CATEGORIES}"
            )
        entries.append(ReferenceEntry(label=label, category=category, clip=read_clip(item)))
    if not entries:
        raise DataError(f"no references (*.y4m or frame directories) in {refs_dir}")
    return entries


def _manifest_path(config: PipelineConfig) -> Path:
    if config.manifest:
        return Path(config.manifest)
    if config.corpus_dir:
        return Path(config.corpus_dir) / "manifest.json"
    raise DataError("missing required setting(s): --manifest or --corpus-dir")


def _read_manifest_checked(path: Path) -> list[dict]:
    try:
        manifest = read_manifest(path)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    if not manifest:
        raise DataError(f"manifest {path} is empty: nothing to process")
    return manifest


def cmd_synth(config: PipelineConfig) -> int:
    config.require("refs_dir", "corpus_dir")
    references = _load_references(config.refs_dir)
    table = _load_level_table(config)
    manifest = synthesize_corpus(references, table, config.seed, config.corpus_dir)
    print(
        f"synthesized {len(manifest)} videos from {len(references)} references "
        f"into {config.corpus_dir} (seed {config.seed})"
    )
    return EXIT_OK


def cmd_classify(config: PipelineConfig) -> int:
    config.require("corpus_dir")
    manifest_path = _manifest_path(config)
    manifest = _read_manifest_checked(manifest_path)
    thresholds = _load_thresholds(config)
    base = manifest_path.parent
    kinds = [k.value for k in DistortionKind]
    videos: list[dict] = []
    failures: list[dict] = []
    confusion: dict[str, dict[str, int]] = {k: {} for k in kinds}
    totals = {k: 0 for k in kinds}
    correct = {k: 0 for k in kinds}
    for entry in manifest:
        video_id = str(entry["id"])
        true_kind = str(entry["kind"])
        if true_kind not in totals:
            raise DataError(f"manifest entry {video_id!r} has unknown kind {true_kind!r}")
        totals[true_kind] += 1
        try:
            clip = read_clip(base / entry["path"])
        except (ClipIOError, OSError) as exc:
            failures.append({"id": video_id, "error": str(exc)})
            confusion[true_kind]["<failure>"] = confusion[true_kind].get("<failure>", 0) + 1
            continue
        report = classify_video(clip, thresholds, frame_step=config.frame_step)
        decision = report.decision.value if report.decision is not None else None
        summary = report.summary_json_obj()
        summary["id"] = video_id
        summary["true_kind"] = true_kind
        summary["correct"] = decision == true_kind
        videos.append(summary)
        key = decision if decision is not None else "<none>"
        confusion[true_kind][key] = confusion[true_kind].get(key, 0) + 1
        if decision == true_kind:
            correct[true_kind] += 1
    accuracy = {
        k: (100.0 * correct[k] / totals[k]) if totals[k] else None for k in kinds
    }
    out_path = Path(config.out) if config.out else base / "classification.json"
    payload = {
        "thresholds": thresholds.to_json_obj(),
        "videos": videos,
        "failures": failures,
        "confusion_matrix": confusion,
        "accuracy_pct": accuracy,
    }
    _atomic_write_text(out_path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    for k in kinds:
        shown = "n/a" if accuracy[k] is None else f"{accuracy[k]:.1f}%"
        print(f"{k:22s} {shown:>7s}  ({correct[k]}/{totals[k]})")
    if failures:
        print(f"failures: {len(failures)} (see {out_path})")
    print(f"wrote {out_path}")
    return EXIT_OK


def _parse_metrics(selector: str) -> list[Metric]:
    names = [s.strip().lower() for s in selector.split(",") if s.strip()]
    if not names:
        raise DataError("empty --metrics selection")
    try:
        return [Metric(name) for name in names]
    except ValueError as exc:
        raise DataError(f"unknown metric in {selector!r}: {exc}") from exc


def cmd_score(config: PipelineConfig) -> int:
    config.require("corpus_dir")
    manifest_path = _manifest_path(config)
    manifest = _read_manifest_checked(manifest_path)
    metrics = _parse_metrics(config.metrics)
    base = manifest_path.parent
    ref_cache: dict[str, object] = {}
    rows: list[dict] = []
    for entry in manifest:
        video_id = str(entry["id"])
        ref_path = str(entry["reference_path"])
        if ref_path not in ref_cache:
            ref_cache[ref_path] = read_clip(base / ref_path)
        ref = ref_cache[ref_path]
        dist = read_clip(base / entry["path"])
        for metric in metrics:
            rows.append(score_clip(ref, dist, metric).to_json_obj(video_id))
    out_path = Path(config.out) if config.out else base / "scores.json"
    _atomic_write_text(out_path, json.dumps(rows, indent=2, sort_keys=True) + "\n")
    print(f"scored {len(manifest)} videos x {len(metrics)} metrics -> {out_path}")
    return EXIT_OK


def cmd_plan(config: PipelineConfig) -> int:
    config.require("observer", "out")
    manifest = _read_manifest_checked(_manifest_path(config))
    plan = plan_session(manifest, config.observer, config.seed)
    write_plan(plan, config.out)
    print(f"planned {len(plan.trials)} trials for observer {config.observer!r} -> {config.out}")
    return EXIT_OK


def cmd_aggregate(config: PipelineConfig) -> int:
    config.require("plans_dir", "records_dir", "out")
    plans_dir = Path(config.plans_dir)
    records_dir = Path(config.records_dir)
    if not plans_dir.is_dir():
        raise DataError(f"plans directory {plans_dir} does not exist")
    if not records_dir.is_dir():
        raise DataError(f"records directory {records_dir} does not exist")
    plans = [read_plan(p) for p in sorted(plans_dir.glob("*.json"))]
    if not plans:
        raise DataError(f"no plan files in {plans_dir}")
    records = {}
    for p in sorted(records_dir.glob("*.json")):
        record = read_record(p)
        if record.observer_id in records:
            raise DataError(f"duplicate record for observer {record.observer_id!r}")
        records[record.observer_id] = record
    sessions = []
    for plan in plans:
        record = records.get(plan.observer_id)
        if record is None:
            print(f"skipping observer {plan.observer_id!r}: no record", file=sys.stderr)
            continue
        try:
            score_observer(plan, record)  # completeness check
        except SubjectiveError as exc:
            print(f"skipping observer {plan.observer_id!r}: {exc}", file=sys.stderr)
            continue
        sessions.append((plan, record))
    if not sessions:
        raise DataError("no complete (plan, record) sessions to aggregate")
    flagged = [] if config.keep_outliers else detect_outliers(sessions)
    kept = [s for s in sessions if s[0].observer_id not in flagged]
    if not kept:
        raise DataError("all observers were flagged as outliers; nothing to aggregate")
    table = aggregate_mos(kept, cohort=config.cohort)
    table.write_csv(config.out)
    print(
        f"aggregated {table.n_observers} observers "
        f"({len(flagged)} flagged: {flagged}) over {len(table.video_ids)} videos "
        f"-> {config.out}"
    )
    return EXIT_OK


def cmd_report(config: PipelineConfig) -> int:
    config.require("scores", "mos", "out")
    manifest = _read_manifest_checked(_manifest_path(config))
    try:
        raw_scores = json.loads(Path(config.scores).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read scores {config.scores}: {exc}") from exc
    if not isinstance(raw_scores, list):
        raise DataError("scores file must hold a JSON array")
    scores: dict[str, dict[str, float]] = {}
    for obj in raw_scores:
        video_id, score = MetricScore.from_json_obj(obj)
        scores.setdefault(score.metric.value, {})[video_id] = score.video_score
    mos = MosTable.read_csv(config.mos)
    cohort = config.cohort if config.cohort != "nonexpert" else mos.cohort
    report = build_report(scores, mos, manifest, cohort=cohort)
    out_base = Path(config.out)
    csv_path = out_base.with_suffix(".csv")
    md_path = out_base.with_suffix(".md")
    _atomic_write_text(csv_path, report.to_csv_text())
    _atomic_write_text(md_path, report.to_markdown_text() + "\n")
    print(report.to_markdown_text())
    print(f"wrote {csv_path} and {md_path}")
    return EXIT_OK


def cmd_serve(config: PipelineConfig) -> int:
    config.require("plans_dir", "records_dir")
    server = build_server(
        config.plans_dir,
        config.records_dir,
        static_dir=config.static_dir,
        host=config.host,
        port=config.port,
    )
    host, port = server.server_address[:2]
    print(f"session server on http://{host}:{port}/ (Ctrl-C to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """argparse with the documented exit-code contract (usage errors -> 1)."""

    def error(self, message: str) -> "argparse.NoReturn":  # type: ignore[name-defined]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="lapvqa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_common(p: _Parser) -> None:
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, help="RNG seed (default 0)")

    p_synth = sub.add_parser("synth", help="render the distorted corpus")
    add_common(p_synth)
    p_synth.add_argument("--refs", dest="refs_dir", help="directory of reference clips")
    p_synth.add_argument("--out", dest="corpus_dir", help="corpus output directory")
    p_synth.add_argument("--levels", help="JSON level table override")

    p_classify = sub.add_parser("classify", help="identify each video's distortion")
    add_common(p_classify)
    p_classify.add_argument("--corpus", dest="corpus_dir", help="corpus directory")
    p_classify.add_argument("--manifest", help="manifest path (default corpus/manifest.json)")
    p_classify.add_argument("--thresholds", help="JSON thresholds override")
    p_classify.add_argument("--frame-step", dest="frame_step", type=int,
                            help="classify every Nth frame (default 1)")
    p_classify.add_argument("--out", help="report JSON path")

    p_score = sub.add_parser("score", help="score corpus videos against references")
    add_common(p_score)
    p_score.add_argument("--corpus", dest="corpus_dir", help="corpus directory")
    p_score.add_argument("--manifest", help="manifest path (default corpus/manifest.json)")
    p_score.add_argument("--metrics", help="comma list from psnr,ssim,vif (default all)")
    p_score.add_argument("--out", help="scores JSON path")

    p_plan = sub.add_parser("plan", help="build one observer's session plan")
    add_common(p_plan)
    p_plan.add_argument("--manifest", help="corpus manifest path")
    p_plan.add_argument("--corpus", dest="corpus_dir", help="corpus directory")
    p_plan.add_argument("--observer", help="observer id")
    p_plan.add_argument("--out", help="plan JSON path")

    p_agg = sub.add_parser("aggregate", help="screen observers and compute MOS")
    add_common(p_agg)
    p_agg.add_argument("--plans", dest="plans_dir", help="directory of plan JSON files")
    p_agg.add_argument("--records", dest="records_dir", help="directory of record JSON files")
    p_agg.add_argument("--cohort", help="cohort label (default nonexpert)")
    p_agg.add_argument("--keep-outliers", dest="keep_outliers", action="store_const",
                       const=True, help="skip outlier screening")
    p_agg.add_argument("--out", help="MOS CSV path")

    p_report = sub.add_parser("report", help="correlate metric scores with MOS")
    add_common(p_report)
    p_report.add_argument("--scores", help="scores JSON from `score`")
    p_report.add_argument("--mos", help="MOS CSV from `aggregate`")
    p_report.add_argument("--manifest", help="corpus manifest path")
    p_report.add_argument("--corpus", dest="corpus_dir", help="corpus directory")
    p_report.add_argument("--cohort", help="override cohort label")
    p_report.add_argument("--out", help="output base path (writes .csv and .md)")

    p_serve = sub.add_parser("serve", help="serve plans/records for the study UI")
    add_common(p_serve)
    p_serve.add_argument("--plans", dest="plans_dir", help="directory of plan JSON files")
    p_serve.add_argument("--records", dest="records_dir", help="directory for record JSON files")
    p_serve.add_argument("--static", dest="static_dir", help="static site directory")
    p_serve.add_argument("--host", help="bind host (default 127.0.0.1)")
    p_serve.add_argument("--port", type=int, help="bind port (default 8008)")

    return parser


_COMMANDS = {
    "synth": cmd_synth,
    "classify": cmd_classify,
    "score": cmd_score,
    "plan": cmd_plan,
    "aggregate": cmd_aggregate,
    "report": cmd_report,
    "serve": cmd_serve,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = PipelineConfig.resolve(args)
        return _COMMANDS[args.command](config)
    except UsageError as exc:
        print(f"lapvqa {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        DataError,
        ClipIOError,
        LevelTableError,
        SubjectiveError,
        EvalCorrError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"lapvqa {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
