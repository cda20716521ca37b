"""Grouping track representations into person clusters.

Two strategies are provided: a single-pass online assignment (each arriving
track joins its nearest cluster when that cluster is within the threshold)
and offline average-linkage agglomerative clustering cut at the threshold.
"""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .aggregation import AggregationMethod, PoolKind, TrackRepresentation, medoid_index
from .core import l1_normalize, l2_normalize
from .dissimilarity import TrackDistanceMethod, distance_matrix
from .errors import (
    DuplicateTrackError,
    InvalidConfigError,
    MethodMismatchError,
    MissingLabelError,
    MissingPosteriorsError,
)

HAC_TIE_TOL = 1e-12


class Linkage(enum.Enum):
    NEAREST_CLUSTER = "online"
    AVERAGE_LINKAGE = "hac"


class Gender(enum.IntEnum):
    MALE = 0
    FEMALE = 1


@dataclass(frozen=True)
class ClusteringConfig:
    threshold: float
    method: TrackDistanceMethod
    linkage: Linkage = Linkage.NEAREST_CLUSTER

    def __post_init__(self):
        if not self.threshold >= 0:
            raise InvalidConfigError(f"threshold must be >= 0, got {self.threshold!r}")
        if self.method.kind != TrackDistanceMethod.REPRESENTATION:
            raise InvalidConfigError("clustering needs a representation-based method")

    @property
    def aggregation(self) -> AggregationMethod:
        return self.method.aggregation


class TrackPosteriors(NamedTuple):
    """Pooled age and gender posteriors of one track."""

    age: np.ndarray
    gender: np.ndarray


@dataclass(frozen=True, eq=False)
class Cluster:
    """A group of tracks believed to show the same person.

    The running means (``_pooled_mean``, ``_age_mean``, ``_gender_mean``)
    are frame-count weighted; ``representation`` and the posteriors are
    derived from them.
    """

    cluster_id: int
    track_ids: tuple
    representation: np.ndarray
    total_frames: int
    method: AggregationMethod
    age_posterior: Optional[np.ndarray] = None
    gender_posterior: Optional[np.ndarray] = None
    _pooled_mean: Optional[np.ndarray] = None
    _members: tuple = ()
    _age_mean: Optional[np.ndarray] = None
    _gender_mean: Optional[np.ndarray] = None
    _posterior_frames: int = 0

    @property
    def size(self) -> int:
        return len(self.track_ids)

    def __repr__(self):
        return (f"Cluster(id={self.cluster_id}, tracks={list(self.track_ids)}, "
                f"total_frames={self.total_frames})")


def _as_posteriors(probs) -> Optional[TrackPosteriors]:
    if probs is None:
        return None
    age, gender = probs
    return TrackPosteriors(np.asarray(age, dtype=np.float64), np.asarray(gender, dtype=np.float64))


def new_cluster(cluster_id: int, r: TrackRepresentation, probs=None) -> Cluster:
    """Singleton cluster holding one track."""
    probs = _as_posteriors(probs)
    age = gender = None
    if probs is not None:
        age, gender = l1_normalize(probs.age), l1_normalize(probs.gender)
    return Cluster(
        cluster_id=cluster_id,
        track_ids=(r.track_id,),
        representation=r.vector,
        total_frames=r.frame_count,
        method=r.method,
        age_posterior=age,
        gender_posterior=gender,
        _pooled_mean=r.pooled,
        _members=(r.vector,),
        _age_mean=None if probs is None else probs.age,
        _gender_mean=None if probs is None else probs.gender,
        _posterior_frames=0 if probs is None else r.frame_count,
    )


def _running_mean(mean, weight, x, w):
    if mean is None:
        return x, w
    total = weight + w
    return mean + (w / total) * (x - mean), total


def update_cluster(c: Cluster, r: TrackRepresentation, probs=None) -> Cluster:
    """Add one track to a cluster and recompute its aggregate.

    AvePool clusters keep the frame-weighted mean of member pooled vectors
    (L2-normalized again if the method ends in normalization); medoid
    clusters take the medoid of member representations. Posteriors become
    frame-weighted means, re-L1-normalized.
    """
    if r.track_id in c.track_ids:
        raise DuplicateTrackError(f"track {r.track_id!r} is already in cluster {c.cluster_id}")
    if r.method != c.method:
        raise MethodMismatchError(f"cluster uses {c.method.label!r}, track uses {r.method.label!r}")

    members = c._members + (r.vector,)
    pooled_mean = c._pooled_mean
    if c.method.kind is PoolKind.AVEPOOL:
        pooled_mean, _ = _running_mean(c._pooled_mean, c.total_frames, r.pooled, r.frame_count)
        rep = l2_normalize(pooled_mean) if c.method.ends_with_l2 else pooled_mean
    else:
        rep = members[medoid_index(np.vstack(members))]

    probs = _as_posteriors(probs)
    age_mean, gender_mean, pw = c._age_mean, c._gender_mean, c._posterior_frames
    if probs is not None:
        age_mean, _ = _running_mean(c._age_mean, pw, probs.age, r.frame_count)
        gender_mean, pw = _running_mean(c._gender_mean, pw, probs.gender, r.frame_count)

    return Cluster(
        cluster_id=c.cluster_id,
        track_ids=c.track_ids + (r.track_id,),
        representation=rep,
        total_frames=c.total_frames + r.frame_count,
        method=c.method,
        age_posterior=None if age_mean is None else l1_normalize(age_mean),
        gender_posterior=None if gender_mean is None else l1_normalize(gender_mean),
        _pooled_mean=pooled_mean,
        _members=members,
        _age_mean=age_mean,
        _gender_mean=gender_mean,
        _posterior_frames=pw,
    )


def build_cluster(cluster_id: int, reps: Sequence[TrackRepresentation], posteriors=None) -> Cluster:
    """Cluster of several tracks, added in the given order."""
    posteriors = posteriors or {}
    c = new_cluster(cluster_id, reps[0], posteriors.get(reps[0].track_id))
    for r in reps[1:]:
        c = update_cluster(c, r, posteriors.get(r.track_id))
    return c


def _check_stream(reps, cfg: ClusteringConfig):
    for r in reps:
        if r.method != cfg.aggregation:
            raise MethodMismatchError(
                f"track {r.track_id!r} was aggregated with {r.method.label!r}, "
                f"config expects {cfg.aggregation.label!r}")
    dims = {r.dim for r in reps}
    if len(dims) > 1:
        from .errors import DimensionMismatchError
        raise DimensionMismatchError(f"representations have mixed dims {sorted(dims)}")
    ids = [r.track_id for r in reps]
    if len(set(ids)) != len(ids):
        raise DuplicateTrackError("duplicate track ids in clustering input")


def online_cluster(stream: Sequence[TrackRepresentation], cfg: ClusteringConfig,
                   posteriors: Optional[Mapping] = None) -> list:
    """Single-pass clustering in arrival order.

    Each track is compared with every existing cluster representation; it
    joins the nearest one (lowest id on ties) if the distance is at most
    ``cfg.threshold``, otherwise it founds a new cluster.
    """
    stream = list(stream)
    _check_stream(stream, cfg)
    posteriors = posteriors or {}
    metric = cfg.method.metric
    clusters = []
    reps = None  # stacked cluster representations, one row per cluster
    for r in stream:
        probs = posteriors.get(r.track_id)
        if clusters:
            d = distance_matrix(r.vector[None, :], reps, metric)[0]
            k = int(np.argmin(d))
            if d[k] <= cfg.threshold:
                clusters[k] = update_cluster(clusters[k], r, probs)
                reps[k] = clusters[k].representation
                continue
        clusters.append(new_cluster(len(clusters), r, probs))
        row = clusters[-1].representation[None, :]
        reps = row.copy() if reps is None else np.vstack([reps, row])
    return clusters


def hac_cluster(reps: Sequence[TrackRepresentation], cfg: ClusteringConfig,
                posteriors: Optional[Mapping] = None) -> list:
    """Average-linkage agglomerative clustering, stopped at ``cfg.threshold``.

    The closest pair of clusters is merged while its average inter-cluster
    distance is at most the threshold. Pairs within 1e-12 of the minimum are
    tied and the pair with the smallest ids wins; a merged cluster keeps the
    smaller id. Output clusters are renumbered by their first member.
    """
    reps = list(reps)
    _check_stream(reps, cfg)
    n = len(reps)
    if n == 0:
        return []
    X = np.vstack([r.vector for r in reps])
    D = distance_matrix(X, X, cfg.method.metric)
    np.fill_diagonal(D, np.inf)
    sizes = np.ones(n)
    members = [[i] for i in range(n)]
    active = np.ones(n, dtype=bool)

    for _ in range(n - 1):
        best = D.min()
        if not np.isfinite(best) or best > cfg.threshold:
            break
        tol = HAC_TIE_TOL * max(1.0, best)
        rows, cols = np.nonzero(D <= best + tol)
        upper = rows < cols
        i, j = int(rows[upper][0]), int(cols[upper][0])
        merged = (sizes[i] * D[i] + sizes[j] * D[j]) / (sizes[i] + sizes[j])
        merged[~active] = np.inf
        merged[i] = merged[j] = np.inf
        D[i, :] = merged
        D[:, i] = merged
        D[j, :] = np.inf
        D[:, j] = np.inf
        sizes[i] += sizes[j]
        members[i].extend(members[j])
        members[j] = []
        active[j] = False

    groups = sorted((sorted(m) for m in members if m), key=lambda m: m[0])
    return [build_cluster(cid, [reps[i] for i in g], posteriors) for cid, g in enumerate(groups)]


def cluster(reps, cfg: ClusteringConfig, posteriors=None) -> list:
    if cfg.linkage is Linkage.AVERAGE_LINKAGE:
        return hac_cluster(reps, cfg, posteriors)
    return online_cluster(reps, cfg, posteriors)


def estimate_demographics(c: Cluster) -> tuple:
    """Most probable gender and age category of a cluster (lower index wins ties)."""
    if c.age_posterior is None or c.gender_posterior is None:
        raise MissingPosteriorsError(f"cluster {c.cluster_id} has no posteriors")
    return Gender(int(np.argmax(c.gender_posterior))), int(np.argmax(c.age_posterior))


class PurityResult(NamedTuple):
    purity: float
    impure_clusters: int
    n_clusters: int
    n_tracks: int


def purity(clusters: Sequence, labels: Mapping[str, str]) -> PurityResult:
    """Majority-subject purity of a clustering and the number of mixed clusters.

    ``clusters`` may hold :class:`Cluster` objects or plain lists of track ids.
    """
    majority = impure = total = 0
    for c in clusters:
        ids = c.track_ids if isinstance(c, Cluster) else list(c)
        try:
            counts = Counter(labels[t] for t in ids)
        except KeyError as exc:
            raise MissingLabelError(f"no subject label for track {exc.args[0]!r}") from None
        majority += max(counts.values())
        impure += len(counts) > 1
        total += len(ids)
    value = majority / total if total else 1.0
    return PurityResult(value, impure, len(clusters), total)


def pool_track_posteriors(dataset, frame_posteriors: Mapping) -> dict:
    """Pooled ``(age, gender)`` posteriors per track from per-frame posteriors."""
    from .aggregation import aggregate_probabilities
    out = {}
    for t in dataset:
        fp = frame_posteriors.get(t.track_id)
        if fp is None:
            continue
        out[t.track_id] = TrackPosteriors(aggregate_probabilities(t, fp.age),
                                          aggregate_probabilities(t, fp.gender))
    return out
