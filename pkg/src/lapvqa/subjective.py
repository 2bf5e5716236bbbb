"""Pairwise-comparison study tooling: session planning, preference scoring,
consistency-based outlier screening, and mean-opinion-score aggregation.

Wire formats (shared with the browser study runner):

* plan JSON::

    {"observer_id": str, "seed": int,
     "trials": [{"idx": int, "a": video_id, "b": video_id, "group": str}, ...]}

* record JSON::

    {"observer_id": str, "results": [{"idx": int, "choice": "A"|"B"|"EQUAL"}, ...]}

A group is the set of four severity levels of one (reference, distortion kind)
pair; every trial compares two videos from the same group.  The winner of a
trial earns one point; an ``EQUAL`` verdict awards half a point to each side.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
import tempfile
import warnings
import zlib
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

__all__ = [
    "Choice",
    "LEVEL_PAIRS",
    "MosTable",
    "PreferenceRecord",
    "SessionPlan",
    "SubjectiveError",
    "Trial",
    "TrialResult",
    "aggregate_mos",
    "count_circular_triads",
    "detect_outliers",
    "plan_session",
    "read_plan",
    "read_record",
    "score_observer",
    "write_plan",
    "write_record",
]

#: Unordered level pairs compared within each group: C(4, 2) = 6 trials.
LEVEL_PAIRS: tuple[tuple[int, int], ...] = (
    (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4),
)

_GROUP_SIZE = 4  # severity levels per group


class SubjectiveError(ValueError):
    """Raised for malformed plans, records, or inconsistent aggregation input."""


class Choice(Enum):
    """Observer verdict for one trial."""

    A = "A"
    B = "B"
    EQUAL = "EQUAL"


@dataclass(frozen=True)
class Trial:
    """One pairwise comparison: video A vs video B within a group."""

    idx: int
    video_a_id: str
    video_b_id: str
    group: str

    def __post_init__(self) -> None:
        if not isinstance(self.idx, int) or self.idx < 0:
            raise SubjectiveError(f"trial idx must be a non-negative int, got {self.idx!r}")
        if not self.video_a_id or not self.video_b_id:
            raise SubjectiveError("trial video ids must be non-empty")
        if self.video_a_id == self.video_b_id:
            raise SubjectiveError(f"trial compares a video with itself: {self.video_a_id!r}")
        if not self.group:
            raise SubjectiveError("trial group must be non-empty")


@dataclass(frozen=True)
class SessionPlan:
    """Ordered trial list for one observer, reproducible from its seed."""

    observer_id: str
    seed: int
    trials: tuple[Trial, ...]

    def __post_init__(self) -> None:
        if not self.observer_id:
            raise SubjectiveError("observer_id must be non-empty")
        idxs = [t.idx for t in self.trials]
        if len(set(idxs)) != len(idxs):
            raise SubjectiveError("plan contains duplicate trial idx values")

    @property
    def video_ids(self) -> frozenset[str]:
        out: set[str] = set()
        for t in self.trials:
            out.add(t.video_a_id)
            out.add(t.video_b_id)
        return frozenset(out)

    def to_json_obj(self) -> dict[str, Any]:
        return {
            "observer_id": self.observer_id,
            "seed": self.seed,
            "trials": [
                {"idx": t.idx, "a": t.video_a_id, "b": t.video_b_id, "group": t.group}
                for t in self.trials
            ],
        }

    @classmethod
    def from_json_obj(cls, obj: Mapping[str, Any]) -> "SessionPlan":
        if not isinstance(obj, Mapping):
            raise SubjectiveError("plan JSON must be an object")
        try:
            observer_id = obj["observer_id"]
            seed = obj["seed"]
            raw_trials = obj["trials"]
        except KeyError as exc:
            raise SubjectiveError(f"plan JSON missing key {exc.args[0]!r}") from exc
        if not isinstance(raw_trials, Sequence) or isinstance(raw_trials, (str, bytes)):
            raise SubjectiveError("plan 'trials' must be an array")
        trials = []
        for raw in raw_trials:
            if not isinstance(raw, Mapping):
                raise SubjectiveError("each plan trial must be an object")
            try:
                trials.append(Trial(idx=int(raw["idx"]), video_a_id=str(raw["a"]),
                                    video_b_id=str(raw["b"]), group=str(raw["group"])))
            except KeyError as exc:
                raise SubjectiveError(f"plan trial missing key {exc.args[0]!r}") from exc
        return cls(observer_id=str(observer_id), seed=int(seed), trials=tuple(trials))


@dataclass(frozen=True)
class TrialResult:
    """Observer verdict for the plan trial with the same ``idx``."""

    idx: int
    choice: Choice

    def __post_init__(self) -> None:
        if not isinstance(self.idx, int) or self.idx < 0:
            raise SubjectiveError(f"result idx must be a non-negative int, got {self.idx!r}")
        if not isinstance(self.choice, Choice):
            raise SubjectiveError(f"result choice must be a Choice, got {self.choice!r}")


@dataclass(frozen=True)
class PreferenceRecord:
    """Complete set of verdicts from one observer's session."""

    observer_id: str
    results: tuple[TrialResult, ...]

    def __post_init__(self) -> None:
        if not self.observer_id:
            raise SubjectiveError("observer_id must be non-empty")
        idxs = [r.idx for r in self.results]
        if len(set(idxs)) != len(idxs):
            raise SubjectiveError("record contains duplicate result idx values")

    def choice_by_idx(self) -> dict[int, Choice]:
        return {r.idx: r.choice for r in self.results}

    def to_json_obj(self) -> dict[str, Any]:
        return {
            "observer_id": self.observer_id,
            "results": [{"idx": r.idx, "choice": r.choice.value} for r in self.results],
        }

    @classmethod
    def from_json_obj(cls, obj: Mapping[str, Any]) -> "PreferenceRecord":
        if not isinstance(obj, Mapping):
            raise SubjectiveError("record JSON must be an object")
        try:
            observer_id = obj["observer_id"]
            raw_results = obj["results"]
        except KeyError as exc:
            raise SubjectiveError(f"record JSON missing key {exc.args[0]!r}") from exc
        if not isinstance(raw_results, Sequence) or isinstance(raw_results, (str, bytes)):
            raise SubjectiveError("record 'results' must be an array")
        results = []
        for raw in raw_results:
            if not isinstance(raw, Mapping):
                raise SubjectiveError("each record result must be an object")
            try:
                raw_choice = raw["choice"]
                idx = int(raw["idx"])
            except KeyError as exc:
                raise SubjectiveError(f"record result missing key {exc.args[0]!r}") from exc
            try:
                choice = Choice(raw_choice)
            except ValueError as exc:
                raise SubjectiveError(f"invalid choice {raw_choice!r}") from exc
            results.append(TrialResult(idx=idx, choice=choice))
        return cls(observer_id=str(observer_id), results=tuple(results))


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_plan(plan: SessionPlan, path: str | Path) -> None:
    _atomic_write_text(Path(path), json.dumps(plan.to_json_obj(), indent=2, sort_keys=True) + "\n")


def read_plan(path: str | Path) -> SessionPlan:
    with open(path, encoding="utf-8") as fh:
        return SessionPlan.from_json_obj(json.load(fh))


def write_record(record: PreferenceRecord, path: str | Path) -> None:
    _atomic_write_text(Path(path), json.dumps(record.to_json_obj(), indent=2, sort_keys=True) + "\n")


def read_record(path: str | Path) -> PreferenceRecord:
    with open(path, encoding="utf-8") as fh:
        return PreferenceRecord.from_json_obj(json.load(fh))


def _observer_rng(seed: int, observer_id: str) -> np.random.Generator:
    # Mix the observer id into the stream so a shared study seed still gives
    # each observer an independent trial order.
    return np.random.default_rng((int(seed), zlib.crc32(observer_id.encode("utf-8"))))


def _groups_from_manifest(
    manifest: Sequence[Mapping[str, Any]],
) -> dict[str, dict[int, str]]:
    """Map group key -> {level: video_id}, validating completeness."""
    groups: dict[str, dict[int, str]] = {}
    for entry in manifest:
        try:
            ref = str(entry["reference_label"])
            kind = str(entry["kind"])
            level = int(entry["level"])
            video_id = str(entry["id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SubjectiveError(f"malformed manifest entry: {entry!r}") from exc
        key = f"{ref}:{kind}"
        by_level = groups.setdefault(key, {})
        if level in by_level:
            raise SubjectiveError(f"duplicate manifest entry for group {key!r} level {level}")
        by_level[level] = video_id
    if not groups:
        raise SubjectiveError("manifest is empty")
    for key, by_level in groups.items():
        if sorted(by_level) != [1, 2, 3, 4]:
            raise SubjectiveError(
                f"group {key!r} is incomplete: has levels {sorted(by_level)}, needs [1, 2, 3, 4]"
            )
    return groups


def plan_session(
    manifest: Sequence[Mapping[str, Any]], observer_id: str, seed: int
) -> SessionPlan:
    """Build one observer's randomized session over every complete group.

    Each group of four severity levels contributes its six unordered pairs;
    the combined trial list is shuffled and each pair's screen sides (A/B)
    are assigned at random, all reproducibly from ``(seed, observer_id)``.
    """
    if not observer_id:
        raise SubjectiveError("observer_id must be non-empty")
    groups = _groups_from_manifest(manifest)
    rng = _observer_rng(seed, observer_id)
    pairs: list[tuple[str, str, str]] = []  # (group, low-level id, high-level id)
    for key in sorted(groups):
        by_level = groups[key]
        for lo, hi in LEVEL_PAIRS:
            pairs.append((key, by_level[lo], by_level[hi]))
    order = rng.permutation(len(pairs))
    trials = []
    for idx, pair_i in enumerate(order):
        group, first, second = pairs[pair_i]
        if rng.random() < 0.5:
            first, second = second, first
        trials.append(Trial(idx=idx, video_a_id=first, video_b_id=second, group=group))
    return SessionPlan(observer_id=observer_id, seed=int(seed), trials=tuple(trials))


def _check_record_matches_plan(plan: SessionPlan, record: PreferenceRecord) -> None:
    if record.observer_id != plan.observer_id:
        raise SubjectiveError(
            f"record observer {record.observer_id!r} does not match plan observer "
            f"{plan.observer_id!r}"
        )
    plan_idxs = {t.idx for t in plan.trials}
    rec_idxs = {r.idx for r in record.results}
    missing = sorted(plan_idxs - rec_idxs)
    extra = sorted(rec_idxs - plan_idxs)
    if missing or extra:
        raise SubjectiveError(
            f"record does not cover the plan exactly: missing idx {missing}, extra idx {extra}"
        )


def score_observer(plan: SessionPlan, record: PreferenceRecord) -> dict[str, float]:
    """Per-video raw points for one complete session.

    The preferred video gets 1 point; an EQUAL verdict gives 0.5 to each.
    Every video in the plan appears in the result, including zero scorers.
    """
    _check_record_matches_plan(plan, record)
    choices = record.choice_by_idx()
    scores: dict[str, float] = {vid: 0.0 for vid in sorted(plan.video_ids)}
    for trial in plan.trials:
        choice = choices[trial.idx]
        if choice is Choice.A:
            scores[trial.video_a_id] += 1.0
        elif choice is Choice.B:
            scores[trial.video_b_id] += 1.0
        else:
            scores[trial.video_a_id] += 0.5
            scores[trial.video_b_id] += 0.5
    return scores


def count_circular_triads(plan: SessionPlan, record: PreferenceRecord) -> int:
    """Total number of cyclic preference triples (a>b, b>c, c>a) over all groups.

    EQUAL verdicts contribute no edge, so a triple containing one can never
    form a cycle.
    """
    _check_record_matches_plan(plan, record)
    choices = record.choice_by_idx()
    edges_by_group: dict[str, set[tuple[str, str]]] = {}
    nodes_by_group: dict[str, set[str]] = {}
    for trial in plan.trials:
        nodes = nodes_by_group.setdefault(trial.group, set())
        nodes.add(trial.video_a_id)
        nodes.add(trial.video_b_id)
        choice = choices[trial.idx]
        if choice is Choice.EQUAL:
            continue
        winner, loser = (
            (trial.video_a_id, trial.video_b_id)
            if choice is Choice.A
            else (trial.video_b_id, trial.video_a_id)
        )
        edges_by_group.setdefault(trial.group, set()).add((winner, loser))
    total = 0
    for group, nodes in nodes_by_group.items():
        edges = edges_by_group.get(group, set())
        for triple in itertools.combinations(sorted(nodes), 3):
            out_deg = {n: 0 for n in triple}
            n_edges = 0
            for u, v in itertools.permutations(triple, 2):
                if (u, v) in edges:
                    out_deg[u] += 1
                    n_edges += 1
            if n_edges == 3 and all(d == 1 for d in out_deg.values()):
                total += 1
    return total


def detect_outliers(
    sessions: Sequence[tuple[SessionPlan, PreferenceRecord]],
) -> list[str]:
    """Flag observers whose circular-triad count exceeds mean + 2*stddev.

    With fewer than 3 observers no screening is possible: a warning is
    emitted and nobody is flagged.  Returns flagged observer ids, sorted.
    """
    observers = [plan.observer_id for plan, _ in sessions]
    if len(set(observers)) != len(observers):
        raise SubjectiveError("duplicate observer ids in sessions")
    if len(sessions) < 3:
        warnings.warn(
            "outlier screening skipped: need at least 3 observers",
            stacklevel=2,
        )
        return []
    counts = {
        plan.observer_id: count_circular_triads(plan, record)
        for plan, record in sessions
    }
    values = np.array(list(counts.values()), dtype=np.float64)
    threshold = float(values.mean() + 2.0 * values.std())
    return sorted(obs for obs, c in counts.items() if c > threshold)


@dataclass(frozen=True)
class MosTable:
    """Per-video mean opinion scores for one observer cohort.

    ``raw_scores[i][j]`` is video ``video_ids[i]``'s total from observer
    ``observers[j]``; it is empty when the table was loaded from CSV.
    ``mos`` averages each video's totals over the N observers and lies in
    [0, 3]; ``mos_normalized`` divides by 3 into [0, 1].
    """

    cohort: str
    observers: tuple[str, ...]
    video_ids: tuple[str, ...]
    raw_scores: tuple[tuple[float, ...], ...]
    mos: tuple[float, ...]
    mos_normalized: tuple[float, ...]
    n_observers: int

    def __post_init__(self) -> None:
        if not self.cohort:
            raise SubjectiveError("cohort label must be non-empty")
        if len(set(self.video_ids)) != len(self.video_ids):
            raise SubjectiveError("duplicate video ids in MOS table")
        n = len(self.video_ids)
        if len(self.mos) != n or len(self.mos_normalized) != n:
            raise SubjectiveError("MOS column lengths do not match video ids")
        if self.raw_scores and len(self.raw_scores) != n:
            raise SubjectiveError("raw score rows do not match video ids")
        for row in self.raw_scores:
            if len(row) != len(self.observers):
                raise SubjectiveError("raw score row width does not match observers")
        if self.n_observers < 1:
            raise SubjectiveError("n_observers must be >= 1")
        for m, mn in zip(self.mos, self.mos_normalized):
            if not (0.0 <= m <= 3.0):
                raise SubjectiveError(f"MOS {m} outside [0, 3]")
            if not (0.0 <= mn <= 1.0):
                raise SubjectiveError(f"normalized MOS {mn} outside [0, 1]")

    def mos_of(self, video_id: str) -> float:
        try:
            return self.mos[self.video_ids.index(video_id)]
        except ValueError as exc:
            raise SubjectiveError(f"video {video_id!r} not in MOS table") from exc

    def as_mapping(self) -> dict[str, float]:
        return dict(zip(self.video_ids, self.mos))

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["video_id", "mos", "mos_normalized", "n_observers", "cohort"])
        for vid, m, mn in zip(self.video_ids, self.mos, self.mos_normalized):
            # repr gives the shortest digits that parse back to the same float
            writer.writerow([vid, repr(float(m)), repr(float(mn)), self.n_observers, self.cohort])
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        _atomic_write_text(Path(path), self.to_csv_text())

    @classmethod
    def from_csv_text(cls, text: str) -> "MosTable":
        reader = csv.reader(io.StringIO(text))
        rows = list(reader)
        if not rows or rows[0] != ["video_id", "mos", "mos_normalized", "n_observers", "cohort"]:
            raise SubjectiveError("malformed MOS CSV header")
        video_ids: list[str] = []
        mos: list[float] = []
        mos_norm: list[float] = []
        n_values: set[int] = set()
        cohorts: set[str] = set()
        for row in rows[1:]:
            if not row:
                continue
            if len(row) != 5:
                raise SubjectiveError(f"malformed MOS CSV row: {row!r}")
            video_ids.append(row[0])
            mos.append(float(row[1]))
            mos_norm.append(float(row[2]))
            n_values.add(int(row[3]))
            cohorts.add(row[4])
        if not video_ids:
            raise SubjectiveError("MOS CSV has no data rows")
        if len(n_values) != 1 or len(cohorts) != 1:
            raise SubjectiveError("MOS CSV mixes observer counts or cohorts")
        return cls(
            cohort=cohorts.pop(),
            observers=(),
            video_ids=tuple(video_ids),
            raw_scores=(),
            mos=tuple(mos),
            mos_normalized=tuple(mos_norm),
            n_observers=n_values.pop(),
        )

    @classmethod
    def read_csv(cls, path: str | Path) -> "MosTable":
        with open(path, encoding="utf-8") as fh:
            return cls.from_csv_text(fh.read())


def aggregate_mos(
    sessions: Sequence[tuple[SessionPlan, PreferenceRecord]],
    cohort: str = "nonexpert",
) -> MosTable:
    """Average per-video totals over N observers: MOS_i = (1/N) sum_j score_ij.

    All sessions must cover the same video set (same corpus).  Outlier
    screening is the caller's job: pass only the sessions to keep.
    """
    if not sessions:
        raise SubjectiveError("empty cohort: no sessions to aggregate")
    observers = [plan.observer_id for plan, _ in sessions]
    if len(set(observers)) != len(observers):
        raise SubjectiveError("duplicate observer ids in sessions")
    video_sets = {plan.video_ids for plan, _ in sessions}
    if len(video_sets) != 1:
        raise SubjectiveError("sessions cover different video sets; cannot aggregate")
    per_observer = sorted(
        ((plan.observer_id, score_observer(plan, record)) for plan, record in sessions),
        key=lambda item: item[0],
    )
    observer_ids = tuple(obs for obs, _ in per_observer)
    video_ids = tuple(sorted(video_sets.pop()))
    n = len(per_observer)
    raw_rows = tuple(
        tuple(scores[vid] for _, scores in per_observer) for vid in video_ids
    )
    mos = tuple(sum(row) / n for row in raw_rows)
    return MosTable(
        cohort=cohort,
        observers=observer_ids,
        video_ids=video_ids,
        raw_scores=raw_rows,
        mos=mos,
        mos_normalized=tuple(m / 3.0 for m in mos),
        n_observers=n,
    )
