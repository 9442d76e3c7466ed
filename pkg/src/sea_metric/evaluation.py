"""Benchmark and agreement statistics.

Element-level VQA scoring against ground-truth annotations (precision,
recall, F1, accuracy, specificity, optionally per category), rank/linear
agreement between score lists (Spearman, Pearson, Kendall tau-b, concordance
correlation), and score-distribution summaries (mean, population std, 100-bin
histogram mode, four equal-width bin proportions).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import ScoreBreakdown
from .dataset import SketchRecord
from .providers import VqaResult

__all__ = [
    "AlignmentError",
    "ConfusionCounts",
    "VqaMetrics",
    "VqaScore",
    "AgreementReport",
    "DistributionSummary",
    "LevelStats",
    "score_vqa",
    "agreement",
    "summarize_distribution",
    "seva_level_table",
]


class AlignmentError(ValueError):
    """Predictions and ground truth do not describe the same judgments."""


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def add(self, predicted: bool, actual: bool) -> None:
        if predicted and actual:
            self.tp += 1
        elif predicted and not actual:
            self.fp += 1
        elif not predicted and actual:
            self.fn += 1
        else:
            self.tn += 1


@dataclass(frozen=True)
class VqaMetrics:
    precision: float | None
    recall: float | None
    f1: float | None
    accuracy: float | None
    specificity: float | None

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "accuracy": self.accuracy, "specificity": self.specificity}


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def metrics_from_counts(c: ConfusionCounts) -> VqaMetrics:
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    if precision is None or recall is None or (precision + recall) == 0:
        f1 = None
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return VqaMetrics(precision=precision, recall=recall, f1=f1,
                      accuracy=_ratio(c.tp + c.tn, c.total),
                      specificity=_ratio(c.tn, c.tn + c.fp))


@dataclass
class VqaScore:
    counts: ConfusionCounts
    metrics: VqaMetrics
    per_category: dict[str, tuple[ConfusionCounts, VqaMetrics]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"tp": self.counts.tp, "fp": self.counts.fp, "tn": self.counts.tn,
               "fn": self.counts.fn, **self.metrics.to_dict()}
        if self.per_category:
            out["per_category"] = {
                cat: {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn, **m.to_dict()}
                for cat, (c, m) in sorted(self.per_category.items())}
        return out


def score_vqa(predictions: list[VqaResult], truth: list[SketchRecord],
              categories: dict[str, str] | None = None) -> VqaScore:
    """Confusion counts and the five headline metrics for element-level VQA.

    Predictions and truth are aligned by sketch_id and must cover identical
    element sets per sketch. When a class -> category map is supplied, a
    per-category breakdown (by the sketch's class) is included.
    """
    truth_by_id = {rec.sketch_id: rec for rec in truth}
    if len(truth_by_id) != len(truth):
        raise AlignmentError("duplicate sketch_id in ground truth")
    counts = ConfusionCounts()
    per_cat: dict[str, ConfusionCounts] = {}
    for pred in predictions:
        rec = truth_by_id.get(pred.sketch_id)
        if rec is None:
            raise AlignmentError(f"prediction for unknown sketch {pred.sketch_id!r}")
        if set(pred.presence) != set(rec.presence):
            raise AlignmentError(
                f"sketch {pred.sketch_id!r}: predicted element set differs from truth")
        bucket = None
        if categories is not None:
            cat = categories.get(rec.class_name)
            if cat is not None:
                bucket = per_cat.setdefault(cat, ConfusionCounts())
        for elem_id, actual in rec.presence.items():
            predicted = pred.presence[elem_id]
            counts.add(predicted, actual)
            if bucket is not None:
                bucket.add(predicted, actual)
    return VqaScore(counts=counts, metrics=metrics_from_counts(counts),
                    per_category={cat: (c, metrics_from_counts(c))
                                  for cat, c in per_cat.items()})


@dataclass(frozen=True)
class AgreementReport:
    """Four agreement coefficients; zero-variance cases are reported as None
    and named in `undefined` instead of propagating NaN."""

    spearman: float | None
    pearson: float | None
    kendall: float | None
    ccc: float | None
    n: int
    undefined: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"spearman": self.spearman, "pearson": self.pearson,
                "kendall": self.kendall, "ccc": self.ccc, "n": self.n,
                "undefined": list(self.undefined)}

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kwargs)


def concordance_correlation(x: np.ndarray, y: np.ndarray) -> float | None:
    """CCC = 2 cov(x,y) / (var x + var y + (mean x - mean y)^2), population moments."""
    mx, my = float(np.mean(x)), float(np.mean(y))
    vx, vy = float(np.var(x)), float(np.var(y))
    cov = float(np.mean((x - mx) * (y - my)))
    denom = vx + vy + (mx - my) ** 2
    if denom == 0.0:
        return None
    return 2.0 * cov / denom


def agreement(x, y) -> AgreementReport:
    """Spearman, Pearson, Kendall tau-b, and concordance correlation of two
    equally long score lists (n >= 2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("agreement expects 1-D score lists")
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ValueError(f"need at least 2 samples, got {len(x)}")
    undefined: list[str] = []
    constant = np.ptp(x) == 0.0 or np.ptp(y) == 0.0
    if constant:
        spearman = pearson = kendall = None
        undefined += ["spearman", "pearson", "kendall"]
    else:
        spearman = float(stats.spearmanr(x, y).statistic)
        pearson = float(stats.pearsonr(x, y).statistic)
        kendall = float(stats.kendalltau(x, y, variant="b").statistic)
    ccc = concordance_correlation(x, y)
    if ccc is None:
        undefined.append("ccc")
    return AgreementReport(spearman=spearman, pearson=pearson, kendall=kendall,
                           ccc=ccc, n=len(x), undefined=tuple(undefined))


@dataclass(frozen=True)
class DistributionSummary:
    """Mean, population std, histogram mode, and four equal-width bin shares."""

    mean: float
    std: float
    mode: float
    quartile_bins: tuple[float, float, float, float]
    n: int
    value_range: tuple[float, float]

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "mode": self.mode,
                "quartile_bins": list(self.quartile_bins), "n": self.n,
                "value_range": list(self.value_range)}


def summarize_distribution(scores, value_range: tuple[float, float],
                           mode_bins: int = 100) -> DistributionSummary:
    """Distribution statistics over a fixed range.

    The mode is the midpoint of the fullest of `mode_bins` equal-width
    histogram bins; quartile_bins are the sample proportions of four
    equal-width bins spanning the range.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValueError("empty score list")
    lo, hi = float(value_range[0]), float(value_range[1])
    if not (lo < hi):
        raise ValueError(f"invalid range {value_range!r}")
    if scores.min() < lo or scores.max() > hi:
        raise ValueError(f"scores outside range [{lo}, {hi}]")
    hist, edges = np.histogram(scores, bins=mode_bins, range=(lo, hi))
    top = int(np.argmax(hist))
    mode = float(0.5 * (edges[top] + edges[top + 1]))
    quartile_hist, _ = np.histogram(scores, bins=4, range=(lo, hi))
    quartile_bins = tuple(float(c) / scores.size for c in quartile_hist)
    return DistributionSummary(mean=float(np.mean(scores)),
                               std=float(np.std(scores)),
                               mode=mode, quartile_bins=quartile_bins,
                               n=int(scores.size), value_range=(lo, hi))


@dataclass(frozen=True)
class LevelStats:
    level: object
    n: int
    sea_mean: float
    sea_std: float
    reward_mean: float
    reward_std: float
    penalty_mean: float
    penalty_std: float
    v_mean: float
    v_std: float
    p_mean: float | None = None
    p_std: float | None = None

    def to_dict(self) -> dict:
        return {"level": self.level, "n": self.n,
                "sea": [self.sea_mean, self.sea_std],
                "reward": [self.reward_mean, self.reward_std],
                "penalty": [self.penalty_mean, self.penalty_std],
                "v": [self.v_mean, self.v_std],
                "P": [self.p_mean, self.p_std]}


def seva_level_table(scored, levels: list | None = None) -> list[LevelStats]:
    """Per-level mean/std of score, reward, penalty, visual ratio, and P.

    `scored` holds (level, ScoreBreakdown) pairs or (level, ScoreBreakdown, P)
    triples; P statistics are reported only when every record carries one.
    `levels`, when given, is the allow-list of valid level labels; a record
    tagged with anything else raises. Levels are reported sorted ascending.
    """
    groups: dict[object, list[tuple[ScoreBreakdown, float | None]]] = {}
    allowed = set(levels) if levels is not None else None
    for item in scored:
        level, breakdown = item[0], item[1]
        p = item[2] if len(item) > 2 else None
        if allowed is not None and level not in allowed:
            raise ValueError(f"unknown level label {level!r}")
        groups.setdefault(level, []).append((breakdown, p))
    out = []
    for level in sorted(groups):
        rows = [b for b, _ in groups[level]]
        ps = [p for _, p in groups[level]]
        seas = np.array([b.sea for b in rows])
        rewards = np.array([b.reward for b in rows])
        penalties = np.array([b.penalty for b in rows])
        vs = np.array([b.v for b in rows])
        if all(p is not None for p in ps):
            p_arr = np.array(ps, dtype=float)
            p_mean, p_std = float(p_arr.mean()), float(p_arr.std())
        else:
            p_mean = p_std = None
        out.append(LevelStats(level=level, n=len(rows),
                              sea_mean=float(seas.mean()), sea_std=float(seas.std()),
                              reward_mean=float(rewards.mean()), reward_std=float(rewards.std()),
                              penalty_mean=float(penalties.mean()), penalty_std=float(penalties.std()),
                              v_mean=float(vs.mean()), v_std=float(vs.std()),
                              p_mean=p_mean, p_std=p_std))
    return out
