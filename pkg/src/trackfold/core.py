"""Track and feature containers, normalization primitives and dataset checks.

Feature vectors are plain 1-D ``float64`` numpy arrays; a track stores its
frames as a read-only ``(n_frames, dim)`` array.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import NegativeComponentError, ZeroNormError

ZERO_NORM_EPS = 1e-30


def as_vector(v) -> np.ndarray:
    """Return ``v`` as a 1-D float64 array (copy only when needed)."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


def l2_normalize(v) -> np.ndarray:
    """Divide a vector by its Euclidean norm.

    Raises:
      ZeroNormError: if the norm is at or below 1e-30.
      ValueError: if ``v`` has non-finite entries.
    """
    v = as_vector(v)
    if not np.all(np.isfinite(v)):
        raise ValueError("feature vector has non-finite values")
    norm = np.linalg.norm(v)
    if norm <= ZERO_NORM_EPS:
        raise ZeroNormError(f"cannot L2-normalize a vector with norm {norm!r}")
    return v / norm


def l2_normalize_rows(frames) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    sq = np.einsum("ij,ij->i", frames, frames)
    if not np.isfinite(sq).all():
        if not np.isfinite(frames).all():
            raise ValueError("frames contain non-finite values")
        # squares overflowed; rescale rows by their largest entry first
        return l2_normalize_rows(frames / np.abs(frames).max(axis=1, keepdims=True))
    norms = np.sqrt(sq)
    if norms.min(initial=np.inf) <= ZERO_NORM_EPS:
        bad = int(np.flatnonzero(norms <= ZERO_NORM_EPS)[0])
        raise ZeroNormError(f"frame {bad} has zero norm")
    return frames / norms[:, None]


def l1_normalize(v) -> np.ndarray:
    """Rescale a nonnegative vector so that its components sum to one."""
    v = as_vector(v)
    if not np.all(np.isfinite(v)):
        raise ValueError("probability vector has non-finite values")
    if np.any(v < 0):
        raise NegativeComponentError("L1 normalization needs nonnegative components")
    total = v.sum()
    if total <= ZERO_NORM_EPS:
        raise ZeroNormError("cannot L1-normalize an all-zero vector")
    out = v / total
    # one correction pass pulls the sum onto 1 to within an ulp or two
    out = out / out.sum()
    return out


@dataclass(frozen=True, eq=False)
class Track:
    """Frames of one person segment.

    ``end_frame`` is derived as ``start_frame + n_frames - 1`` so the frame
    span always agrees with the stored frames.
    """

    track_id: str
    frames: np.ndarray
    start_frame: int = 0
    subject_id: Optional[str] = None

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim == 1 and frames.size == 0:
            frames = frames.reshape(0, 0)
        if frames.ndim != 2:
            raise ValueError(
                f"track {self.track_id!r}: frames must be 2-D, got shape {frames.shape}")
        object.__setattr__(self, "frames", _frozen(frames))
        object.__setattr__(self, "start_frame", int(self.start_frame))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    @property
    def end_frame(self) -> int:
        return self.start_frame + self.n_frames - 1

    @functools.cached_property
    def unit_frames(self) -> np.ndarray:
        """Frames scaled to unit L2 norm (computed once; frames are immutable)."""
        return _frozen(l2_normalize_rows(self.frames))

    def __len__(self):
        return self.n_frames

    def __eq__(self, other):
        if not isinstance(other, Track):
            return NotImplemented
        return (self.track_id == other.track_id
                and self.start_frame == other.start_frame
                and self.subject_id == other.subject_id
                and self.frames.shape == other.frames.shape
                and np.array_equal(self.frames, other.frames))

    def __hash__(self):
        return hash((self.track_id, self.start_frame, self.n_frames))

    def __repr__(self):
        return (f"Track({self.track_id!r}, n_frames={self.n_frames}, dim={self.dim}, "
                f"start_frame={self.start_frame}, subject_id={self.subject_id!r})")


@dataclass(frozen=True)
class TrackDataset:
    tracks: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        index = {}
        for i, t in enumerate(self.tracks):
            index.setdefault(t.track_id, i)
        object.__setattr__(self, "_index", index)

    @property
    def track_count(self) -> int:
        return len(self.tracks)

    @property
    def total_frames(self) -> int:
        return sum(t.n_frames for t in self.tracks)

    @property
    def track_ids(self) -> list:
        return [t.track_id for t in self.tracks]

    @property
    def dim(self) -> Optional[int]:
        for t in self.tracks:
            if t.n_frames:
                return t.dim
        return None

    def __len__(self):
        return len(self.tracks)

    def __iter__(self):
        return iter(self.tracks)

    def __contains__(self, track_id):
        return track_id in self._index

    def __getitem__(self, track_id: str) -> Track:
        from .errors import UnknownTrackError
        try:
            return self.tracks[self._index[track_id]]
        except KeyError:
            raise UnknownTrackError(f"unknown track id {track_id!r}") from None

    def labels(self) -> dict:
        return {t.track_id: t.subject_id for t in self.tracks if t.subject_id is not None}

    def with_labels(self, labels: dict) -> "TrackDataset":
        """Copy of the dataset with ``subject_id`` filled from ``labels``."""
        return TrackDataset(tuple(
            Track(t.track_id, t.frames, t.start_frame, labels.get(t.track_id, t.subject_id))
            for t in self.tracks))


@dataclass(frozen=True)
class Finding:
    kind: str  # DimensionMismatch | DuplicateId | EmptyTrack | NonFinite
    message: str
    track_ids: tuple = ()


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.findings

    def __bool__(self):
        return bool(self.findings)

    def __len__(self):
        return len(self.findings)

    def __iter__(self):
        return iter(self.findings)

    def kinds(self) -> list:
        return [f.kind for f in self.findings]


def validate_dataset(dataset: TrackDataset | Iterable[Track]) -> ValidationReport:
    """Collect every structural problem in a dataset without raising.

    The dataset is acceptable iff the returned report is empty. The reference
    dimension is the first non-empty track's; every non-empty track with a
    different dimension is reported against it.
    """
    tracks: Sequence[Track] = (dataset.tracks if isinstance(dataset, TrackDataset)
                               else tuple(dataset))
    findings = []

    seen = {}
    for t in tracks:
        if t.track_id in seen:
            findings.append(Finding(
                "DuplicateId", f"track id {t.track_id!r} appears more than once",
                (t.track_id,)))
        seen.setdefault(t.track_id, t)

    ref = None
    for t in tracks:
        if t.n_frames == 0:
            findings.append(Finding("EmptyTrack", f"track {t.track_id!r} has no frames",
                                    (t.track_id,)))
            continue
        if ref is None:
            ref = t
        elif t.dim != ref.dim:
            findings.append(Finding(
                "DimensionMismatch",
                f"track {t.track_id!r} has dim {t.dim}, track {ref.track_id!r} has dim {ref.dim}",
                (ref.track_id, t.track_id)))
        if not np.all(np.isfinite(t.frames)):
            n_bad = int((~np.isfinite(t.frames)).any(axis=1).sum())
            findings.append(Finding(
                "NonFinite", f"track {t.track_id!r} has {n_bad} frame(s) with NaN/Inf",
                (t.track_id,)))
    return ValidationReport(tuple(findings))


@dataclass(frozen=True, eq=False)
class FramePosteriors:
    """Per-frame age (8 categories) and gender (male, female) posteriors of one track."""

    age: np.ndarray
    gender: np.ndarray
    start_frame: int = 0

    def __post_init__(self):
        age = np.atleast_2d(np.asarray(self.age, dtype=np.float64))
        gender = np.atleast_2d(np.asarray(self.gender, dtype=np.float64))
        if age.shape[0] != gender.shape[0]:
            from .errors import LengthMismatchError
            raise LengthMismatchError(
                f"{age.shape[0]} age rows but {gender.shape[0]} gender rows")
        object.__setattr__(self, "age", _frozen(age))
        object.__setattr__(self, "gender", _frozen(gender))
        object.__setattr__(self, "start_frame", int(self.start_frame))

    @property
    def n_frames(self) -> int:
        return self.age.shape[0]

    def combined(self) -> np.ndarray:
        """Age and gender blocks side by side, one row per frame."""
        return np.hstack([self.age, self.gender])

    def __eq__(self, other):
        if not isinstance(other, FramePosteriors):
            return NotImplemented
        return (self.start_frame == other.start_frame
                and self.age.shape == other.age.shape
                and self.gender.shape == other.gender.shape
                and np.array_equal(self.age, other.age)
                and np.array_equal(self.gender, other.gender))

    __hash__ = None
