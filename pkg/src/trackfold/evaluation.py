"""Verification metrics for distance scores.

Convention: a pair is accepted as "same person" when its distance is at or
below the threshold. FAR is the share of different-person pairs accepted,
FRR the share of same-person pairs rejected.
"""
from __future__ import annotations

import json
import math
import statistics
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .aggregation import aggregate
from .core import TrackDataset
from .dissimilarity import (
    TrackDistanceMethod,
    pairwise_average_distance,
    representation_distance,
)
from .errors import DegenerateLabelsError, InvalidConfigError, UnknownTrackError

# absorbs float error in far_target * n_diff (0.01 * 100 is not exactly 1)
_COUNT_SLACK = 1e-9


@dataclass(frozen=True)
class VerificationPair:
    track_a: str
    track_b: str
    same: bool
    fold: int = 0

    def __post_init__(self):
        if self.track_a == self.track_b:
            raise InvalidConfigError(f"pair compares track {self.track_a!r} with itself")
        if self.fold < 0:
            raise InvalidConfigError(f"fold must be >= 0, got {self.fold}")


class ScoredPair(NamedTuple):
    pair: VerificationPair
    distance: float


@dataclass(frozen=True, eq=False)
class RocCurve:
    """FAR/FRR at every candidate threshold, thresholds increasing.

    Candidate thresholds are -inf, every distinct distance, and +inf. The
    integer accept/reject counts are kept so areas can be computed exactly.
    """

    thresholds: np.ndarray
    far: np.ndarray
    frr: np.ndarray
    false_accepts: np.ndarray
    false_rejects: np.ndarray
    n_same: int
    n_diff: int

    @property
    def points(self) -> list:
        return list(zip(self.thresholds.tolist(), self.far.tolist(), self.frr.tolist()))

    def __len__(self):
        return self.thresholds.shape[0]


def _split(scored) -> tuple:
    same, diff = [], []
    for item in scored:
        if isinstance(item, ScoredPair):
            is_same, d = item.pair.same, item.distance
        else:
            is_same, d = item
        (same if is_same else diff).append(float(d))
    return np.asarray(same, dtype=np.float64), np.asarray(diff, dtype=np.float64)


def roc(scored: Iterable) -> RocCurve:
    """ROC over ``(same, distance)`` items (or :class:`ScoredPair`)."""
    same, diff = _split(scored)
    if same.size == 0 or diff.size == 0:
        raise DegenerateLabelsError(
            f"need both classes, got {same.size} same and {diff.size} different pairs")
    if not (np.all(np.isfinite(same)) and np.all(np.isfinite(diff))):
        raise ValueError("distances must be finite")
    finite = np.unique(np.concatenate([same, diff]))
    thresholds = np.concatenate([[-np.inf], finite, [np.inf]])
    fa = np.searchsorted(np.sort(diff), thresholds, side="right")
    tr = same.size - np.searchsorted(np.sort(same), thresholds, side="right")
    return RocCurve(thresholds, fa / diff.size, tr / same.size, fa, tr, same.size, diff.size)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under TAR = 1 - FRR against FAR.

    Evaluated on integer counts, so ties get exactly half credit and the
    result matches the pair-concordance estimator.
    """
    ta = curve.n_same - curve.false_rejects
    dfa = np.diff(curve.false_accepts)
    # each trapezoid: width dfa, heights ta[k], ta[k+1]; doubled to stay integral
    doubled = int(np.sum(dfa * (ta[:-1] + ta[1:])))
    return doubled / (2 * curve.n_same * curve.n_diff)


def eer(curve: RocCurve) -> float:
    """Equal error rate, interpolating linearly between neighbouring points."""
    gap = curve.far - curve.frr
    exact = np.flatnonzero(gap == 0)
    if exact.size:
        return float(curve.far[exact[0]])
    k = int(np.flatnonzero(gap > 0)[0])  # gap[0] = -1 and gap[-1] = 1 always
    g0, g1 = gap[k - 1], gap[k]
    t = -g0 / (g1 - g0)
    return float(curve.far[k - 1] + t * (curve.far[k] - curve.far[k - 1]))


def _allowed_false_accepts(far_target: float, n_diff: int) -> int:
    return int(math.floor(far_target * n_diff + _COUNT_SLACK))


def _operating_index(curve: RocCurve, far_target: float) -> int:
    allowed = _allowed_false_accepts(far_target, curve.n_diff)
    return int(np.flatnonzero(curve.false_accepts <= allowed)[-1])


def frr_at_far(curve: RocCurve, far_target: float = 0.01) -> float:
    """FRR at the largest threshold whose FAR does not exceed ``far_target``."""
    if not 0 < far_target < 1:
        raise InvalidConfigError(f"far_target must be in (0, 1), got {far_target}")
    return float(curve.frr[_operating_index(curve, far_target)])


def calibrate_threshold(scored_train: Iterable, far_target: float = 0.01) -> float:
    """Largest different-pair distance whose training FAR is at most ``far_target``.

    Only different-pair distances are candidates, so same pairs in the
    training set do not move the threshold. When even the smallest different-pair distance would overshoot the
    target, the threshold sits just below that distance.
    """
    if not 0 < far_target < 1:
        raise InvalidConfigError(f"far_target must be in (0, 1), got {far_target}")
    _, diff = _split(scored_train)
    if diff.size == 0:
        raise DegenerateLabelsError("calibration needs different-person pairs")
    allowed = _allowed_false_accepts(far_target, diff.size)
    values = np.unique(diff)
    accepted = np.searchsorted(np.sort(diff), values, side="right")
    ok = np.flatnonzero(accepted <= allowed)
    if ok.size == 0:
        return float(np.nextafter(values[0], -np.inf))
    return float(values[ok[-1]])


def score_pairs(dataset: TrackDataset, pairs: Sequence[VerificationPair],
                method: TrackDistanceMethod, map_fn: Callable = map) -> list:
    """Distance for every pair, in input order.

    Representation methods aggregate each referenced track once.
    """
    pairs = list(pairs)
    for p in pairs:
        for tid in (p.track_a, p.track_b):
            if tid not in dataset:
                raise UnknownTrackError(f"pair references unknown track {tid!r}")

    if method.kind == TrackDistanceMethod.PAIRWISE:
        def one(p):
            return pairwise_average_distance(dataset[p.track_a], dataset[p.track_b],
                                             method.frame_normalization, method.metric)
    else:
        needed = sorted({t for p in pairs for t in (p.track_a, p.track_b)})
        reps = dict(zip(needed, map_fn(
            lambda tid: aggregate(dataset[tid], method.aggregation, method.metric), needed)))

        def one(p):
            return representation_distance(reps[p.track_a], reps[p.track_b], method.metric)

    return [ScoredPair(p, d) for p, d in zip(pairs, map_fn(one, pairs))]


class FoldMetrics(NamedTuple):
    fold: int
    auc: float
    eer: float
    frr_at_far: float


@dataclass
class MetricReport:
    """Mean and sample standard deviation across folds, in percent."""

    auc_mean: float
    auc_std: float
    eer_mean: float
    eer_std: float
    frr_at_far_mean: float
    frr_at_far_std: float
    far_operating_point: float = 0.01
    method: str = ""
    n_folds: int = 0
    folds: list = field(default_factory=list)

    def cell(self, metric: str, digits: int = 1) -> str:
        mean, std = getattr(self, f"{metric}_mean"), getattr(self, f"{metric}_std")
        return f"{mean:.{digits}f}±{std:.{digits}f}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["folds"] = [dict(f._asdict()) if hasattr(f, "_asdict") else dict(f) for f in self.folds]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        d = dict(d)
        d["folds"] = [FoldMetrics(**f) for f in d.get("folds", [])]
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def fold_metrics(scored: Iterable, far_target: float = 0.01, fold: int = 0) -> FoldMetrics:
    curve = roc(scored)
    return FoldMetrics(fold, auc(curve), eer(curve), frr_at_far(curve, far_target))


def _mean_std(values: list) -> tuple:
    mean = statistics.fmean(values) if len(set(values)) > 1 else values[0]
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def summarize_folds(per_fold: Sequence[FoldMetrics], far_target: float = 0.01,
                    method: str = "") -> MetricReport:
    """Combine per-fold metrics into a percent-scaled mean ± sample-std report."""
    if not per_fold:
        raise DegenerateLabelsError("no folds to summarize")
    cols = {}
    for name in ("auc", "eer", "frr_at_far"):
        vals = [100.0 * getattr(f, name) for f in per_fold]
        cols[name] = _mean_std(vals)
    return MetricReport(
        auc_mean=cols["auc"][0], auc_std=cols["auc"][1],
        eer_mean=cols["eer"][0], eer_std=cols["eer"][1],
        frr_at_far_mean=cols["frr_at_far"][0], frr_at_far_std=cols["frr_at_far"][1],
        far_operating_point=far_target, method=method, n_folds=len(per_fold),
        folds=list(per_fold))


def kfold_report_scored(scored: Sequence[ScoredPair], far_target: float = 0.01,
                        method: str = "") -> MetricReport:
    by_fold = {}
    for sp in scored:
        by_fold.setdefault(sp.pair.fold, []).append(sp)
    per_fold = []
    for k in sorted(by_fold):
        try:
            per_fold.append(fold_metrics(by_fold[k], far_target, k))
        except DegenerateLabelsError as exc:
            raise DegenerateLabelsError(f"fold {k}: {exc}") from None
    return summarize_folds(per_fold, far_target, method)


def kfold_report(dataset: TrackDataset, pairs: Sequence[VerificationPair],
                 method: TrackDistanceMethod, far_target: float = 0.01,
                 map_fn: Callable = map) -> MetricReport:
    """Score pairs, compute AUC/EER/FRR@FAR per fold and report mean ± std.

    A single fold is accepted and reported with zero deviation.
    """
    scored = score_pairs(dataset, pairs, method, map_fn)
    return kfold_report_scored(scored, far_target, method.name or method.label)


def assign_folds(n_same: int, n_diff: int, folds: int) -> tuple:
    """Round-robin fold ids for same pairs and for different pairs."""
    if folds < 1:
        raise InvalidConfigError("need at least one fold")
    return [i % folds for i in range(n_same)], [j % folds for j in range(n_diff)]


def format_table(reports: Sequence[MetricReport], digits: int = 1) -> str:
    """Plain-text table: one row per method, cells "mean±std"."""
    far_pct = reports[0].far_operating_point * 100 if reports else 1.0
    headers = ["Method", "AUC(%)", "EER(%)", f"FRR@FAR={far_pct:g}%"]
    rows = [[r.method, r.cell("auc", digits), r.cell("eer", digits),
             r.cell("frr_at_far", digits)] for r in reports]
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"
