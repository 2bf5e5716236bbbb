"""Metric-vs-MOS agreement evaluation.

Workflow: fit a 5-parameter logistic mapping from objective metric scores to
subjective scores, then report Pearson correlation of the fitted values
(PLCC) and Spearman rank correlation of the raw values (SROCC), per
distortion subset and overall.

The logistic family is

    f(x) = b1 * (0.5 - 1 / (1 + exp(b2 * (x - b3)))) + b4 * x + b5

which contains every affine map (b1 = 0) and is closed under affine
post-composition; ``fit_logistic`` exploits both properties (a linear start
and an exact affine polish) so the fitted PLCC can never fall below the
plain linear-regression PLCC.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.special import expit
from scipy.stats import pearsonr, spearmanr

from .metrics import MetricScore

__all__ = [
    "CorrelationReport",
    "CorrelationRow",
    "EvalCorrError",
    "KIND_SUBSETS",
    "LogisticFit",
    "OVERALL_SUBSET",
    "SUBSET_ORDER",
    "build_report",
    "fit_logistic",
    "logistic5",
    "plcc",
    "srocc",
]


class EvalCorrError(ValueError):
    """Raised for degenerate inputs or broken joins."""


#: Display names for the per-distortion report columns, keyed by the
#: distortion kind strings used in corpus manifests.
KIND_SUBSETS: dict[str, str] = {
    "noise": "Noise",
    "defocus_blur": "Defocus Blur",
    "motion_blur": "Motion Blur",
    "uneven_illumination": "Uneven illumination",
    "smoke": "Smoke",
}

OVERALL_SUBSET = "Overall"

SUBSET_ORDER: tuple[str, ...] = (
    "Noise",
    "Defocus Blur",
    "Motion Blur",
    "Uneven illumination",
    "Smoke",
    OVERALL_SUBSET,
)


def logistic5(beta: Sequence[float], x: np.ndarray) -> np.ndarray:
    """Evaluate the 5-parameter logistic at ``x`` (vectorized, overflow-safe)."""
    b1, b2, b3, b4, b5 = (float(b) for b in beta)
    x = np.asarray(x, dtype=np.float64)
    u = b2 * (x - b3)
    # 1 / (1 + exp(u)) == expit(-u), which saturates instead of overflowing.
    return b1 * (0.5 - expit(-u)) + b4 * x + b5


def _jacobian(beta: Sequence[float], x: np.ndarray) -> np.ndarray:
    b1, b2, b3, _b4, _b5 = (float(b) for b in beta)
    u = b2 * (x - b3)
    s = expit(-u)
    ss = s * (1.0 - s)
    jac = np.empty((x.size, 5), dtype=np.float64)
    jac[:, 0] = 0.5 - s
    jac[:, 1] = b1 * ss * (x - b3)
    jac[:, 2] = -b1 * ss * b2
    jac[:, 3] = x
    jac[:, 4] = 1.0
    return jac


def _sse(beta: Sequence[float], x: np.ndarray, y: np.ndarray) -> float:
    r = y - logistic5(beta, x)
    return float(r @ r)


def _gauss_newton(
    start: np.ndarray, x: np.ndarray, y: np.ndarray, max_iter: int, tol: float
) -> tuple[np.ndarray, float, bool]:
    """Damped (Levenberg-style) Gauss-Newton from one start.

    Only improving steps are accepted, so the returned SSE never exceeds the
    start's SSE.  Returns (beta, sse, converged).
    """
    beta = start.astype(np.float64).copy()
    sse = _sse(beta, x, y)
    lam = 1e-3
    converged = False
    for _ in range(max_iter):
        jac = _jacobian(beta, x)
        r = y - logistic5(beta, x)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        stepped = False
        while lam <= 1e12:
            damp = lam * np.diag(np.diag(jtj)) + 1e-12 * np.eye(5)
            try:
                delta = np.linalg.solve(jtj + damp, jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = beta + delta
            sse_trial = _sse(trial, x, y)
            if np.isfinite(sse_trial) and sse_trial < sse:
                improved_by = sse - sse_trial
                beta, sse = trial, sse_trial
                lam = max(lam / 3.0, 1e-12)
                stepped = True
                if improved_by <= tol * max(sse, 1e-30):
                    converged = True
                break
            lam *= 10.0
        if not stepped:
            # No damping level yields an improvement: local optimum.
            converged = True
            break
        if converged:
            break
    return beta, sse, converged


def _affine_polish(
    beta: np.ndarray, x: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, float]:
    """Exactly re-fit y ~ a*f(x) + b and fold (a, b) back into beta.

    The family is closed under affine post-composition (b1, b4, b5 scale and
    shift), so this step stays inside the model while reaching the best
    affine image of the current prediction in closed form.
    """
    f = logistic5(beta, x)
    var = float(np.var(f))
    if var <= 0.0 or not np.isfinite(var):
        return beta, _sse(beta, x, y)
    a = float(np.cov(f, y, bias=True)[0, 1]) / var
    b = float(y.mean() - a * f.mean())
    polished = np.array(
        [beta[0] * a, beta[1], beta[2], beta[3] * a, beta[4] * a + b],
        dtype=np.float64,
    )
    sse_p = _sse(polished, x, y)
    sse_0 = _sse(beta, x, y)
    return (polished, sse_p) if sse_p <= sse_0 else (beta, sse_0)


@dataclass(frozen=True)
class LogisticFit:
    """Result of a 5-parameter logistic least-squares fit."""

    beta: tuple[float, float, float, float, float]
    converged: bool
    residual: float  # RMSE on the training points

    def __post_init__(self) -> None:
        if len(self.beta) != 5:
            raise EvalCorrError("beta must have exactly 5 entries")
        if self.converged and not all(np.isfinite(b) for b in self.beta):
            raise EvalCorrError("converged fit must have finite parameters")
        if not (self.residual >= 0.0):
            raise EvalCorrError(f"residual must be non-negative, got {self.residual}")

    def predict(self, x: Sequence[float] | np.ndarray) -> np.ndarray:
        return logistic5(self.beta, np.asarray(x, dtype=np.float64))


def fit_logistic(
    x: Sequence[float] | np.ndarray,
    y: Sequence[float] | np.ndarray,
    *,
    max_iter: int = 1000,
    tol: float = 1e-10,
) -> LogisticFit:
    """Least-squares 5-parameter logistic fit via damped Gauss-Newton.

    Multi-start: the documented heuristic start (both signs of b1) plus an
    exact linear-regression start (b1 = 0).  Each run only accepts improving
    steps and the best run is affine-polished, so the final SSE is never
    above the plain linear fit's SSE.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise EvalCorrError("x and y must be 1-D arrays of equal length")
    if x.size < 6:
        raise EvalCorrError(f"need at least 6 points to fit 5 parameters, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise EvalCorrError("x and y must be finite")
    x_std = float(x.std())
    if x_std == 0.0:
        raise EvalCorrError("x is constant; logistic fit is degenerate")

    span = float(y.max() - y.min())
    median = float(np.median(x))
    mean_y = float(y.mean())
    slope, intercept = np.polyfit(x, y, 1)
    starts = [
        np.array([span, 1.0 / x_std, median, 0.0, mean_y]),
        np.array([-span, 1.0 / x_std, median, 0.0, mean_y]),
        np.array([0.0, 1.0 / x_std, median, slope, intercept]),
    ]
    best: tuple[np.ndarray, float, bool] | None = None
    for start in starts:
        beta, sse, converged = _gauss_newton(start, x, y, max_iter, tol)
        if best is None or sse < best[1]:
            best = (beta, sse, converged)
    assert best is not None
    beta, sse, converged = best
    beta, sse = _affine_polish(beta, x, y)
    return LogisticFit(
        beta=tuple(float(b) for b in beta),
        converged=bool(converged),
        residual=float(np.sqrt(sse / x.size)),
    )


def _check_corr_input(x: np.ndarray, y: np.ndarray, name: str) -> None:
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise EvalCorrError(f"{name}: x and y must be 1-D arrays of equal length")
    if x.size < 3:
        raise EvalCorrError(f"{name}: need at least 3 points, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise EvalCorrError(f"{name}: inputs must be finite")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise EvalCorrError(f"{name}: constant input has undefined correlation")


def plcc(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> float:
    """Pearson linear correlation coefficient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_corr_input(x, y, "plcc")
    return float(pearsonr(x, y).statistic)


def srocc(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> float:
    """Spearman rank-order correlation coefficient (mid-ranks for ties)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_corr_input(x, y, "srocc")
    value = spearmanr(x, y).statistic
    if not np.isfinite(value):
        raise EvalCorrError("srocc: undefined for the given input")
    return float(value)


@dataclass(frozen=True)
class CorrelationRow:
    """PLCC/SROCC of one metric on one subset of the corpus."""

    metric: str
    subset: str
    plcc: float
    srocc: float
    n_points: int

    def __post_init__(self) -> None:
        if self.subset not in SUBSET_ORDER:
            raise EvalCorrError(f"unknown subset {self.subset!r}")
        for name, value in (("plcc", self.plcc), ("srocc", self.srocc)):
            if not (-1.0 - 1e-9 <= value <= 1.0 + 1e-9):
                raise EvalCorrError(f"{name} {value} outside [-1, 1]")
        if self.n_points < 3:
            raise EvalCorrError("correlation rows need n_points >= 3")


@dataclass(frozen=True)
class CorrelationReport:
    """Per-(metric, subset) correlation rows for one observer cohort."""

    cohort: str
    rows: tuple[CorrelationRow, ...]

    def __post_init__(self) -> None:
        if not self.cohort:
            raise EvalCorrError("cohort label must be non-empty")
        seen = {(r.metric, r.subset) for r in self.rows}
        if len(seen) != len(self.rows):
            raise EvalCorrError("duplicate (metric, subset) rows in report")
        # Overall must cover the union of the per-distortion subsets.
        for metric in {r.metric for r in self.rows}:
            per = [r for r in self.rows if r.metric == metric]
            overall = [r for r in per if r.subset == OVERALL_SUBSET]
            partial = [r for r in per if r.subset != OVERALL_SUBSET]
            if overall and partial:
                if overall[0].n_points != sum(r.n_points for r in partial):
                    raise EvalCorrError(
                        f"metric {metric!r}: overall n_points != sum of subset n_points"
                    )

    def metrics(self) -> tuple[str, ...]:
        seen: list[str] = []
        for row in self.rows:
            if row.metric not in seen:
                seen.append(row.metric)
        return tuple(seen)

    def row(self, metric: str, subset: str) -> CorrelationRow:
        for r in self.rows:
            if r.metric == metric and r.subset == subset:
                return r
        raise EvalCorrError(f"no row for metric {metric!r} subset {subset!r}")

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["cohort", "metric", "subset", "plcc", "srocc", "n_points"])
        for r in self.rows:
            writer.writerow(
                [self.cohort, r.metric, r.subset, f"{r.plcc:.6f}", f"{r.srocc:.6f}", r.n_points]
            )
        return buf.getvalue()

    def to_markdown_text(self) -> str:
        """Two tables (PLCC, SROCC): metrics as rows, subsets as columns.

        The best two values in each column are bold, ties included.
        """
        metrics = self.metrics()
        subsets = [s for s in SUBSET_ORDER if any(r.subset == s for r in self.rows)]
        lines: list[str] = []
        for stat in ("plcc", "srocc"):
            lines.append(f"## {stat.upper()} ({self.cohort})")
            lines.append("")
            lines.append("| Metric | " + " | ".join(subsets) + " |")
            lines.append("|" + "---|" * (len(subsets) + 1))
            # Bold threshold per column: the second-highest distinct ranking value.
            bold_cut: dict[str, float] = {}
            for subset in subsets:
                vals = sorted(
                    (getattr(self.row(m, subset), stat) for m in metrics), reverse=True
                )
                bold_cut[subset] = vals[min(1, len(vals) - 1)]
            for metric in metrics:
                cells = []
                for subset in subsets:
                    value = getattr(self.row(metric, subset), stat)
                    text = f"{value:.4f}"
                    if len(metrics) > 2 and value >= bold_cut[subset]:
                        text = f"**{text}**"
                    cells.append(text)
                lines.append("| " + metric + " | " + " | ".join(cells) + " |")
            lines.append("")
        return "\n".join(lines)


def _scores_as_floats(
    scores: Mapping[str, Mapping[str, Any]],
) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    for metric, by_video in scores.items():
        metric_name = str(metric)
        out[metric_name] = {}
        for video_id, value in by_video.items():
            score = value.video_score if isinstance(value, MetricScore) else float(value)
            if not np.isfinite(score):
                raise EvalCorrError(
                    f"metric {metric_name!r} has non-finite score for video {video_id!r}"
                )
            out[metric_name][str(video_id)] = float(score)
    return out


def build_report(
    scores: Mapping[str, Mapping[str, Any]],
    mos: "Mapping[str, float] | Any",
    manifest: Sequence[Mapping[str, Any]],
    *,
    cohort: str | None = None,
) -> CorrelationReport:
    """Join metric scores with MOS and produce the correlation table.

    ``scores`` maps metric name -> video id -> score (floats or MetricScore).
    ``mos`` is a MosTable or a plain video id -> MOS mapping.  The manifest
    supplies each video's distortion kind for the per-subset rows; a single
    separate fit over all videos fills the Overall column.
    """
    score_map = _scores_as_floats(scores)
    if not score_map:
        raise EvalCorrError("no metric scores given")
    if cohort is None:
        cohort = getattr(mos, "cohort", None) or "unknown"
    mos_map: Mapping[str, float]
    if hasattr(mos, "as_mapping"):
        mos_map = mos.as_mapping()
    else:
        mos_map = {str(k): float(v) for k, v in mos.items()}

    kind_by_video: dict[str, str] = {}
    for entry in manifest:
        kind_by_video[str(entry["id"])] = str(entry["kind"])

    video_sets = {frozenset(by_video) for by_video in score_map.values()}
    if len(video_sets) != 1:
        raise EvalCorrError("metrics score different video sets")
    video_ids = sorted(video_sets.pop())
    if not video_ids:
        raise EvalCorrError("no scored videos")
    missing_mos = [v for v in video_ids if v not in mos_map]
    if missing_mos:
        raise EvalCorrError(f"videos missing MOS: {missing_mos[:5]} ...")
    missing_manifest = [v for v in video_ids if v not in kind_by_video]
    if missing_manifest:
        raise EvalCorrError(f"videos missing manifest entries: {missing_manifest[:5]} ...")
    unknown_kinds = sorted(
        {kind_by_video[v] for v in video_ids} - set(KIND_SUBSETS)
    )
    if unknown_kinds:
        raise EvalCorrError(f"unknown distortion kinds in manifest: {unknown_kinds}")

    subsets: dict[str, list[str]] = {name: [] for name in SUBSET_ORDER}
    for video_id in video_ids:
        subsets[KIND_SUBSETS[kind_by_video[video_id]]].append(video_id)
        subsets[OVERALL_SUBSET].append(video_id)

    rows: list[CorrelationRow] = []
    for metric in sorted(score_map):
        by_video = score_map[metric]
        for subset in SUBSET_ORDER:
            members = subsets[subset]
            if not members:
                continue
            x = np.array([by_video[v] for v in members])
            y = np.array([mos_map[v] for v in members])
            fit = fit_logistic(x, y)
            rows.append(
                CorrelationRow(
                    metric=metric,
                    subset=subset,
                    plcc=plcc(fit.predict(x), y),
                    srocc=srocc(x, y),
                    n_points=len(members),
                )
            )
    return CorrelationReport(cohort=cohort, rows=tuple(rows))
