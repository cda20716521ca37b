"""Cost of comparing tracks frame by frame versus through one representation.

The frame-pair average touches ``L * L`` frame pairs per track pair; a
representation method aggregates each track once and then needs a single
vector distance per pair. Timings here exclude that one-off aggregation
(reported separately).
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .aggregation import aggregate
from .core import Track
from .dissimilarity import DistanceCounter, TrackDistanceMethod, pairwise_average_distance, \
    representation_distance
from .methods import METHOD_NAMES, METHODS

BASELINE = "l2-pairwise"


@dataclass
class BenchRow:
    method: str
    seconds_per_pair: float
    frame_distances_per_pair: float
    aggregation_seconds_per_track: float
    speedup_vs_baseline: float = float("nan")


def random_track_pairs(frames_per_track: int, dim: int, n_pairs: int, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n_pairs):
        a = Track(f"a{i}", rng.standard_normal((frames_per_track, dim)))
        b = Track(f"b{i}", rng.standard_normal((frames_per_track, dim)))
        pairs.append((a, b))
    return pairs


def _time_pairs(fn, pairs, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for a, b in pairs:
            fn(a, b)
        best = min(best, time.perf_counter() - t0)
    return best / len(pairs)


def bench_method(method: TrackDistanceMethod, pairs, repeats: int = 3, name: str = "") -> BenchRow:
    if method.kind == TrackDistanceMethod.PAIRWISE:
        counter = DistanceCounter()
        for a, b in pairs:
            pairwise_average_distance(a, b, method.frame_normalization, method.metric, counter)
        per_pair = _time_pairs(
            lambda a, b: pairwise_average_distance(a, b, method.frame_normalization,
                                                   method.metric),
            pairs, repeats)
        return BenchRow(name or method.label, per_pair, counter.evaluations / len(pairs), 0.0)

    tracks = [t for pair in pairs for t in pair]
    t0 = time.perf_counter()
    reps = {t.track_id: aggregate(t, method.aggregation, method.metric) for t in tracks}
    agg = (time.perf_counter() - t0) / len(tracks)
    rep_pairs = [(reps[a.track_id], reps[b.track_id]) for a, b in pairs]
    per_pair = _time_pairs(lambda x, y: representation_distance(x, y, method.metric),
                           rep_pairs, repeats)
    return BenchRow(name or method.label, per_pair, 1.0, agg)


def run_benchmark(frames_per_track: int = 50, dim: int = 256, n_pairs: int = 100,
                  methods: Sequence[str] = METHOD_NAMES, seed: int = 0,
                  repeats: int = 3) -> list:
    """Per-pair matching time of each named method on random tracks.

    Speedups are relative to ``l2-pairwise``, which is always measured.
    """
    if min(frames_per_track, dim, n_pairs, repeats) < 1:
        raise ValueError("benchmark parameters must be positive")
    pairs = random_track_pairs(frames_per_track, dim, n_pairs, seed)
    names = list(methods)
    rows = {name: bench_method(METHODS[name], pairs, repeats, name) for name in names}
    base = rows.get(BASELINE) or bench_method(METHODS[BASELINE], pairs, repeats, BASELINE)
    for row in rows.values():
        row.speedup_vs_baseline = base.seconds_per_pair / row.seconds_per_pair
    return [rows[n] for n in names]


def format_bench(rows: Sequence[BenchRow]) -> str:
    headers = ["method", "us/pair", "frame dists/pair", "agg us/track", f"speedup vs {BASELINE}"]
    body = [[r.method, f"{r.seconds_per_pair * 1e6:.2f}", f"{r.frame_distances_per_pair:g}",
             f"{r.aggregation_seconds_per_track * 1e6:.2f}", f"{r.speedup_vs_baseline:.1f}x"]
            for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.ljust(w) for c, w in zip(b, widths)).rstrip() for b in body]
    return "\n".join(lines) + "\n"


def rows_as_dicts(rows) -> list:
    return [asdict(r) for r in rows]
