"""Seeded synthetic face-track embeddings with ground truth.

Each identity gets a prototype on the unit sphere, a gender and an age
category. A frame is ``gain * (prototype + noise)`` with Gaussian noise and a
per-frame gain drawn from ``[1 - gain_spread, 1 + gain_spread]``; the gain is
what makes the order of L2 normalization and pooling matter.

Randomness comes from numpy's PCG64 bit generator (seeded through
``np.random.default_rng(seed)``), and draws happen in a fixed order, so a
seed pins every output bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .core import FramePosteriors, Track, TrackDataset
from .errors import InsufficientTracksError, InvalidConfigError
from .evaluation import VerificationPair

N_AGE = 8
N_GENDER = 2


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    dim: int = 64
    identities: int = 50
    tracks_per_identity: int = 3
    frames_per_track: tuple = (20, 20)
    noise_sigma: float = 0.3
    gain_spread: float = 0.5
    demographics_noise: float = 0.3

    def __post_init__(self):
        fpt = self.frames_per_track
        if isinstance(fpt, int):
            fpt = (fpt, fpt)
        object.__setattr__(self, "frames_per_track", tuple(int(x) for x in fpt))
        self.validate()

    def validate(self):
        lo, hi = self.frames_per_track
        problems = []
        if self.dim < 1:
            problems.append("dim must be positive")
        if self.identities < 1:
            problems.append("identities must be positive")
        if self.tracks_per_identity < 1:
            problems.append("tracks_per_identity must be positive")
        if lo < 1 or hi < lo:
            problems.append(f"frames_per_track must satisfy 1 <= min <= max, got {(lo, hi)}")
        if not self.noise_sigma >= 0:
            problems.append("noise_sigma must be >= 0")
        if not 0 <= self.gain_spread < 1:
            problems.append("gain_spread must be in [0, 1)")
        if not 0 <= self.demographics_noise <= 1:
            problems.append("demographics_noise must be in [0, 1]")
        if problems:
            raise InvalidConfigError("; ".join(problems))


class Demographics(NamedTuple):
    gender: int  # 0 = male, 1 = female
    age_category: int


class SynthData(NamedTuple):
    dataset: TrackDataset
    labels: dict  # track_id -> subject_id
    posteriors: dict  # track_id -> FramePosteriors
    demographics: dict  # subject_id -> Demographics


def _noisy_onehot(rng, category: int, k: int, n: int, mix: float) -> np.ndarray:
    onehot = np.zeros((n, k))
    onehot[:, category] = 1.0
    noise = rng.dirichlet(np.ones(k), size=n)
    p = (1.0 - mix) * onehot + mix * noise
    return p / p.sum(axis=1, keepdims=True)


def subject_name(c: int, n: int) -> str:
    return f"s{c:0{max(3, len(str(n - 1)))}d}"


def track_name(m: int, n: int) -> str:
    return f"t{m:0{max(4, len(str(n - 1)))}d}"


def generate(cfg: SynthConfig, prototypes: Optional[np.ndarray] = None) -> SynthData:
    """Draw a labelled dataset.

    Args:
      cfg: generator settings.
      prototypes: optional ``(identities, dim)`` array replacing the random
        identity prototypes (used as given, not renormalized).

    Returns:
      SynthData with tracks in a shuffled arrival order. Track ids follow
      that order and frame spans are laid end to end as in one video.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    C, D = cfg.identities, cfg.dim

    protos = rng.standard_normal((C, D))
    protos /= np.linalg.norm(protos, axis=1, keepdims=True)
    if prototypes is not None:
        prototypes = np.asarray(prototypes, dtype=np.float64)
        if prototypes.shape != (C, D):
            raise InvalidConfigError(f"prototypes must have shape {(C, D)}, got {prototypes.shape}")
        protos = prototypes
    genders = rng.integers(0, N_GENDER, size=C)
    ages = rng.integers(0, N_AGE, size=C)

    lo, hi = cfg.frames_per_track
    raw = []
    for c in range(C):
        for _ in range(cfg.tracks_per_identity):
            n = int(rng.integers(lo, hi + 1))
            noise = cfg.noise_sigma * rng.standard_normal((n, D))
            gains = rng.uniform(1.0 - cfg.gain_spread, 1.0 + cfg.gain_spread, size=n)
            frames = gains[:, None] * (protos[c] + noise)
            age = _noisy_onehot(rng, int(ages[c]), N_AGE, n, cfg.demographics_noise)
            gender = _noisy_onehot(rng, int(genders[c]), N_GENDER, n, cfg.demographics_noise)
            raw.append((c, frames, age, gender))

    order = rng.permutation(len(raw))
    tracks, labels, posteriors = [], {}, {}
    start = 0
    for m, idx in enumerate(order):
        c, frames, age, gender = raw[idx]
        tid, sid = track_name(m, len(raw)), subject_name(c, C)
        tracks.append(Track(tid, frames, start, sid))
        labels[tid] = sid
        posteriors[tid] = FramePosteriors(age, gender, start)
        start += frames.shape[0]

    demographics = {subject_name(c, C): Demographics(int(genders[c]), int(ages[c]))
                    for c in range(C)}
    return SynthData(TrackDataset(tracks), labels, posteriors, demographics)


def make_pairs(labels: dict, n_same: int, n_diff: int, folds: int = 10,
               seed: int = 0) -> list:
    """Sample distinct same-subject and different-subject track pairs.

    Pairs are drawn without replacement; same pair ``i`` goes to fold
    ``i % folds`` and different pair ``j`` to fold ``j % folds``. Each pair
    is ordered by track id. Same pairs come first in the output.
    """
    if folds < 1:
        raise InvalidConfigError("folds must be positive")
    if n_same < 0 or n_diff < 0:
        raise InvalidConfigError("pair counts must be nonnegative")
    rng = np.random.default_rng(seed)
    ids = sorted(labels)
    subj = np.array([labels[t] for t in ids])
    n = len(ids)
    ia, ib = np.triu_indices(n, k=1)
    same_mask = subj[ia] == subj[ib]
    same_idx = np.flatnonzero(same_mask)
    diff_idx = np.flatnonzero(~same_mask)
    if n_same > same_idx.size:
        raise InsufficientTracksError(
            f"asked for {n_same} same pairs but only {same_idx.size} exist")
    if n_diff > diff_idx.size:
        raise InsufficientTracksError(
            f"asked for {n_diff} different pairs but only {diff_idx.size} exist")

    pick_same = same_idx[rng.choice(same_idx.size, size=n_same, replace=False)]
    pick_diff = diff_idx[rng.choice(diff_idx.size, size=n_diff, replace=False)]
    pairs = [VerificationPair(ids[ia[k]], ids[ib[k]], True, i % folds)
             for i, k in enumerate(pick_same)]
    pairs += [VerificationPair(ids[ia[k]], ids[ib[k]], False, j % folds)
              for j, k in enumerate(pick_diff)]
    return pairs


def posterior_dataset(dataset: TrackDataset, posteriors: dict) -> TrackDataset:
    """Tracks whose frame features are the 10-dim age+gender posteriors."""
    return TrackDataset(tuple(
        Track(t.track_id, posteriors[t.track_id].combined(), t.start_frame, t.subject_id)
        for t in dataset))
