"""Distances between frames, probability vectors, representations and tracks.

All frame-level Euclidean values come from one kernel
(:func:`scipy.spatial.distance.cdist`), so a single-frame track distance is
bitwise the frame distance and ``d(a, b) == d(b, a)`` holds exactly.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .core import Track, as_vector, l2_normalize_rows
from .errors import (
    DimensionMismatchError,
    EmptyTrackError,
    MethodMismatchError,
    NegativeComponentError,
)

KL_EPS = 1e-10

# rows per block when streaming the frame-pair double sum
ROW_BLOCK = 512


class DistanceKind(enum.Enum):
    EUCLIDEAN = "euclidean"
    KL_SYMMETRIC = "kl"


class FrameNormalization(enum.Enum):
    RAW = "raw"
    L2_PER_FRAME = "l2"


class DistanceCounter:
    """Tally of frame-distance evaluations, for cost accounting."""

    def __init__(self):
        self.evaluations = 0

    def add(self, n):
        self.evaluations += int(n)

    def reset(self):
        self.evaluations = 0


def _check_dims(a: np.ndarray, b: np.ndarray):
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatchError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def _smooth(p: np.ndarray) -> np.ndarray:
    if np.any(p < 0):
        raise NegativeComponentError("KL divergence needs nonnegative components")
    p = p + KL_EPS
    return p / p.sum(axis=-1, keepdims=True)


def _kl_matrix(P: np.ndarray, Q: np.ndarray, symmetric: bool) -> np.ndarray:
    Ps, Qs = _smooth(P), _smooth(Q)
    lp, lq = np.log(Ps), np.log(Qs)
    forward = np.sum(Ps[:, None, :] * (lp[:, None, :] - lq[None, :, :]), axis=-1)
    if not symmetric:
        return np.maximum(forward, 0.0)
    backward = np.sum(Qs[None, :, :] * (lq[None, :, :] - lp[:, None, :]), axis=-1)
    return np.maximum((forward + backward) / 2.0, 0.0)


def distance_matrix(A, B, kind: DistanceKind = DistanceKind.EUCLIDEAN) -> np.ndarray:
    """All frame-pair distances between the rows of ``A`` and ``B``."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    _check_dims(A, B)
    if kind is DistanceKind.EUCLIDEAN:
        D = cdist(A, B, "euclidean")
        zero = D == 0
        if zero.any():
            _fix_underflow(D, zero, A, B)
        return D
    if kind is DistanceKind.KL_SYMMETRIC:
        return _kl_matrix(A, B, symmetric=True)
    raise ValueError(f"unsupported distance kind {kind!r}")


def _fix_underflow(D, zero, A, B):
    """Recompute zero entries whose squared differences underflowed (|a - b| < 1e-154)."""
    i, j = np.nonzero(zero)
    diff = A[i] - B[j]
    scale = np.abs(diff).max(axis=1)
    hit = scale > 0
    if hit.any():
        d = diff[hit] / scale[hit, None]
        D[i[hit], j[hit]] = scale[hit] * np.sqrt(np.einsum("ij,ij->i", d, d))


def euclidean(a, b) -> float:
    a, b = as_vector(a), as_vector(b)
    _check_dims(a, b)
    return float(distance_matrix(a[None, :], b[None, :])[0, 0])


def kl_divergence(p, q, symmetric: bool = True) -> float:
    """KL divergence in nats after additive 1e-10 smoothing and renormalization.

    With ``symmetric=True`` returns ``(KL(p||q) + KL(q||p)) / 2``.
    """
    p, q = as_vector(p), as_vector(q)
    _check_dims(p, q)
    return float(_kl_matrix(p[None, :], q[None, :], symmetric)[0, 0])


def frame_distance(a, b, kind: DistanceKind = DistanceKind.EUCLIDEAN) -> float:
    if kind is DistanceKind.EUCLIDEAN:
        return euclidean(a, b)
    return kl_divergence(a, b, symmetric=True)


def _track_frames(t, normalization: FrameNormalization) -> np.ndarray:
    frames = t.frames if isinstance(t, Track) else np.atleast_2d(np.asarray(t, dtype=np.float64))
    if frames.shape[0] == 0:
        name = t.track_id if isinstance(t, Track) else "<array>"
        raise EmptyTrackError(f"track {name!r} has no frames")
    if normalization is FrameNormalization.L2_PER_FRAME:
        frames = t.unit_frames if isinstance(t, Track) else l2_normalize_rows(frames)
    return frames


def pairwise_row_blocks(A, B, kind=DistanceKind.EUCLIDEAN, block=ROW_BLOCK):
    """Yield ``(row_slice, distances)`` blocks covering the full ``A x B`` grid.

    Blocks are independent of one another, so callers may evaluate them in
    parallel and combine the results.
    """
    for start in range(0, A.shape[0], block):
        sl = slice(start, min(start + block, A.shape[0]))
        yield sl, distance_matrix(A[sl], B, kind)


def pairwise_average_distance(t1, t2, frame_norm: FrameNormalization = FrameNormalization.RAW,
                              kind: DistanceKind = DistanceKind.EUCLIDEAN,
                              counter: Optional[DistanceCounter] = None) -> float:
    """Mean distance over every frame pair of two tracks.

    Performs exactly ``len(t1) * len(t2)`` frame-distance evaluations. The
    double sum is accumulated with :func:`math.fsum`, which makes the value
    independent of summation order and therefore exactly symmetric.
    """
    A = _track_frames(t1, frame_norm)
    B = _track_frames(t2, frame_norm)
    _check_dims(A, B)
    if A.shape[0] <= ROW_BLOCK:
        total = math.fsum(distance_matrix(A, B, kind).ravel().tolist())
    else:
        total = math.fsum(itertools.chain.from_iterable(
            b.ravel().tolist() for _, b in pairwise_row_blocks(A, B, kind)))
    if counter is not None:
        counter.add(A.shape[0] * B.shape[0])
    return total / (A.shape[0] * B.shape[0])


@dataclass(frozen=True)
class TrackDistanceMethod:
    """How two tracks are compared.

    ``PAIRWISE`` averages all frame-pair distances (frames optionally
    L2-normalized first); ``REPRESENTATION`` compares one aggregate per track.
    """

    kind: str  # "pairwise" | "representation"
    aggregation: Optional[object] = None  # AggregationMethod, required for representation
    frame_normalization: FrameNormalization = FrameNormalization.RAW
    metric: DistanceKind = DistanceKind.EUCLIDEAN

    PAIRWISE = "pairwise"
    REPRESENTATION = "representation"

    def __post_init__(self):
        if self.kind not in (self.PAIRWISE, self.REPRESENTATION):
            raise ValueError(f"unknown track distance kind {self.kind!r}")
        if (self.kind == self.REPRESENTATION) != (self.aggregation is not None):
            raise ValueError("aggregation is required for representation methods only")

    @property
    def label(self) -> str:
        if self.kind == self.PAIRWISE:
            if self.frame_normalization is FrameNormalization.L2_PER_FRAME:
                return "L2-norm -> Distance"
            return "Distance"
        return self.aggregation.label

    @property
    def name(self) -> Optional[str]:
        from .methods import METHODS
        for k, v in METHODS.items():
            if v == self.with_metric(DistanceKind.EUCLIDEAN):
                return k
        return None

    def with_metric(self, metric: DistanceKind) -> "TrackDistanceMethod":
        return TrackDistanceMethod(self.kind, self.aggregation, self.frame_normalization, metric)


def representation_distance(r1, r2, kind: Optional[DistanceKind] = None) -> float:
    """Distance between two track representations built with the same method."""
    if r1.method != r2.method:
        raise MethodMismatchError(f"cannot compare {r1.method.label!r} with {r2.method.label!r}")
    if kind is None or kind is DistanceKind.EUCLIDEAN:
        return euclidean(r1.vector, r2.vector)
    return kl_divergence(r1.vector, r2.vector, symmetric=True)


def track_distance(t1: Track, t2: Track, method: TrackDistanceMethod) -> float:
    """Dispatch to the pairwise average or to representation matching."""
    if method.kind == TrackDistanceMethod.PAIRWISE:
        return pairwise_average_distance(t1, t2, method.frame_normalization, method.metric)
    from .aggregation import aggregate
    r1 = aggregate(t1, method.aggregation, metric=method.metric)
    r2 = aggregate(t2, method.aggregation, metric=method.metric)
    return representation_distance(r1, r2, method.metric)
