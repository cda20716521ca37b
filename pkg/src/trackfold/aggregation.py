"""Fixed-size track representations: medoid and average pooling.

Both pools are computed so that the result does not depend on frame order,
bit for bit: column sums are taken over sorted columns, and each frame's
medoid cost is summed over its sorted distance row.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .core import Track, l1_normalize, l2_normalize, l2_normalize_rows
from .dissimilarity import DistanceKind, distance_matrix
from .errors import EmptyTrackError, LengthMismatchError

MEDOID_TIE_TOL = 1e-12


class PoolKind(enum.Enum):
    MEDOID = "medoid"
    AVEPOOL = "avepool"


class Normalization(enum.Enum):
    NONE = "none"
    NORMALIZE_THEN_AGGREGATE = "l2-first"
    AGGREGATE_THEN_NORMALIZE = "l2-last"


@dataclass(frozen=True)
class AggregationMethod:
    kind: PoolKind
    normalization: Normalization = Normalization.NONE

    @property
    def label(self) -> str:
        base = "Medoid" if self.kind is PoolKind.MEDOID else "AvePool"
        if self.normalization is Normalization.NORMALIZE_THEN_AGGREGATE:
            return f"L2-norm -> {base}"
        if self.normalization is Normalization.AGGREGATE_THEN_NORMALIZE:
            return f"{base} -> L2-norm"
        return base

    @property
    def ends_with_l2(self) -> bool:
        return self.normalization is Normalization.AGGREGATE_THEN_NORMALIZE

    @property
    def unit_norm_output(self) -> bool:
        """True when every representation built this way has unit L2 norm."""
        return (self.ends_with_l2 or (self.kind is PoolKind.MEDOID and self.normalization
                                      is Normalization.NORMALIZE_THEN_AGGREGATE))


ALL_AGGREGATIONS = tuple(AggregationMethod(k, n) for k in PoolKind for n in Normalization)


@dataclass(frozen=True, eq=False)
class TrackRepresentation:
    """Aggregate of one track.

    ``pooled`` is the aggregate before any final L2 step (identical to
    ``vector`` otherwise); cluster updates weight it by ``frame_count``.
    """

    track_id: str
    vector: np.ndarray
    method: AggregationMethod
    frame_count: int = 1
    pooled: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.array(self.vector, dtype=np.float64)
        v.flags.writeable = False
        object.__setattr__(self, "vector", v)
        p = v if self.pooled is None else np.array(self.pooled, dtype=np.float64)
        p.flags.writeable = False
        object.__setattr__(self, "pooled", p)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]

    def __eq__(self, other):
        if not isinstance(other, TrackRepresentation):
            return NotImplemented
        return (self.track_id == other.track_id and self.method == other.method
                and self.frame_count == other.frame_count
                and np.array_equal(self.vector, other.vector)
                and np.array_equal(self.pooled, other.pooled))

    __hash__ = None


def _frames_of(t) -> np.ndarray:
    frames = t.frames if isinstance(t, Track) else np.atleast_2d(np.asarray(t, dtype=np.float64))
    if frames.shape[0] == 0:
        name = t.track_id if isinstance(t, Track) else "<array>"
        raise EmptyTrackError(f"track {name!r} has no frames")
    return frames


def order_free_sum(frames: np.ndarray) -> np.ndarray:
    """Column sums that are bitwise independent of row order."""
    return np.sort(frames, axis=0).sum(axis=0)


def order_free_mean(frames: np.ndarray) -> np.ndarray:
    """Column means, bitwise independent of row order and exact for constant columns."""
    base = frames.min(axis=0)
    return base + order_free_sum(frames - base) / frames.shape[0]


def medoid_costs(frames: np.ndarray, metric: DistanceKind = DistanceKind.EUCLIDEAN) -> np.ndarray:
    """Sum of distances from each frame to every frame of the same track."""
    costs = np.empty(frames.shape[0])
    for _, sl, block in _row_blocks(frames, metric):
        costs[sl] = np.sort(block, axis=1).sum(axis=1)
    return costs


def _row_blocks(frames, metric, block=1024):
    for start in range(0, frames.shape[0], block):
        sl = slice(start, min(start + block, frames.shape[0]))
        yield start, sl, distance_matrix(frames[sl], frames, metric)


def medoid_index(frames, metric: DistanceKind = DistanceKind.EUCLIDEAN) -> int:
    """Row index of the medoid.

    Frames whose cost is within 1e-12 (relative to the cost scale) of the
    minimum are tied; the lexicographically smallest tied vector wins, and
    among bitwise-equal vectors the first occurrence.
    """
    frames = _frames_of(frames)
    if frames.shape[0] == 1:
        return 0
    costs = medoid_costs(frames, metric)
    best = costs.min()
    tied = np.flatnonzero(costs <= best + MEDOID_TIE_TOL * max(1.0, abs(best)))
    if tied.size == 1:
        return int(tied[0])
    cand = frames[tied]
    # lexsort keys: last key is primary
    order = np.lexsort(cand.T[::-1])
    return int(tied[order[0]])


def medoid(t, metric: DistanceKind = DistanceKind.EUCLIDEAN) -> np.ndarray:
    """The frame that minimizes the summed distance to all frames of ``t``."""
    frames = _frames_of(t)
    return frames[medoid_index(frames, metric)].copy()


def average_pool(t) -> np.ndarray:
    """Componentwise mean of the frames of ``t``."""
    return order_free_mean(_frames_of(t))


def _pool(frames: np.ndarray, kind: PoolKind, metric: DistanceKind) -> np.ndarray:
    if kind is PoolKind.MEDOID:
        return frames[medoid_index(frames, metric)].copy()
    return order_free_mean(frames)


def aggregate(t: Track, method: AggregationMethod,
              metric: DistanceKind = DistanceKind.EUCLIDEAN) -> TrackRepresentation:
    """Build the representation of ``t`` under one normalization ordering.

    ``metric`` only affects the medoid's cost function.
    """
    frames = _frames_of(t)
    if method.normalization is Normalization.NORMALIZE_THEN_AGGREGATE:
        frames = t.unit_frames if isinstance(t, Track) else l2_normalize_rows(frames)
    pooled = _pool(frames, method.kind, metric)
    vector = l2_normalize(pooled) if method.ends_with_l2 else pooled
    track_id = t.track_id if isinstance(t, Track) else ""
    return TrackRepresentation(track_id, vector, method, frames.shape[0], pooled)


def aggregate_all(tracks: Iterable[Track], method: AggregationMethod,
                  metric: DistanceKind = DistanceKind.EUCLIDEAN,
                  map_fn: Callable = map) -> list:
    """Aggregate many tracks; ``map_fn`` may be a parallel map (order must be kept)."""
    return list(map_fn(lambda t: aggregate(t, method, metric), list(tracks)))


def aggregate_probabilities(t, probs) -> np.ndarray:
    """Mean of per-frame posteriors, re-L1-normalized."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    n = t.n_frames if isinstance(t, Track) else int(t)
    if probs.shape[0] != n:
        raise LengthMismatchError(f"{probs.shape[0]} posterior rows for {n} frames")
    if n == 0:
        raise EmptyTrackError("cannot pool posteriors of an empty track")
    return l1_normalize(order_free_mean(probs))


def medoid_order_agreement(t, metric: DistanceKind = DistanceKind.EUCLIDEAN) -> bool:
    """Whether normalizing frames before or after the medoid picks the same frame.

    The two orderings agree whenever all frame norms are equal; otherwise the
    argmin can move.
    """
    frames = _frames_of(t)
    return medoid_index(frames, metric) == medoid_index(l2_normalize_rows(frames), metric)
