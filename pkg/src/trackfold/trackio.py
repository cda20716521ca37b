"""Readers and writers for the on-disk formats.

Tracks, labels, pairs, posteriors and representations are CSV with a
header row; clusters are JSON Lines; reports are JSON plus a text table.
Files are UTF-8 with ``\\n`` line endings. Floats in CSV are written with 17
significant digits, which round-trips every 64-bit value.

Readers never repair input: any violation raises :class:`ParseError` (or a
subclass) carrying the 1-based line number, header included.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .aggregation import AggregationMethod, Normalization, PoolKind, TrackRepresentation
from .core import FramePosteriors, Track, TrackDataset
from .errors import DuplicateFrameError, FileDimensionMismatchError, ParseError
from .evaluation import MetricReport, VerificationPair, format_table

N_AGE = 8
N_GENDER = 2
POSTERIOR_SUM_TOL = 1e-4
GENDER_NAMES = ("male", "female")


def fmt_float(x: float) -> str:
    return "%.17g" % x


def _open_write(path):
    return open(path, "w", encoding="utf-8", newline="")


def _writer(f):
    return csv.writer(f, lineterminator="\n")


def _parse_float(text: str, line: int, path) -> float:
    try:
        x = float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", line, path) from None
    if not math.isfinite(x):
        raise ParseError(f"non-finite value {text!r}", line, path)
    return x


def _parse_int(text: str, line: int, path, what="integer") -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"expected {what}, got {text!r}", line, path) from None


def _read_rows(path):
    """Yield ``(line_number, row)`` after the header; return the header first."""
    f = open(path, encoding="utf-8", newline="")
    reader = csv.reader(f)
    try:
        header = next(reader)
    except StopIteration:
        f.close()
        raise ParseError("empty file, header expected", 1, path) from None

    def rows():
        with f:
            for row in reader:
                if not row:
                    raise ParseError("blank line", reader.line_num, path)
                yield reader.line_num, row

    return header, rows()


class _FrameBlocks:
    """Groups sorted ``(track_id, frame_index, values)`` rows into tracks."""

    def __init__(self, path):
        self.path = path
        self.done = {}
        self.order = []
        self.cur_id = None
        self.cur_start = None
        self.cur_rows = []
        self.last_index = None

    def add(self, line, track_id, frame_index, values):
        if track_id != self.cur_id:
            if self.cur_id is not None:
                if track_id in self.done or track_id < self.cur_id:
                    raise ParseError(
                        f"rows not sorted by track_id ({track_id!r} after {self.cur_id!r})",
                        line, self.path)
                self._flush()
            self.cur_id, self.cur_start, self.last_index = track_id, frame_index, frame_index
            self.cur_rows = [values]
            return
        if frame_index == self.last_index:
            raise DuplicateFrameError(
                f"duplicate frame {frame_index} in track {track_id!r}", line, self.path)
        if frame_index != self.last_index + 1:
            raise ParseError(
                f"frame_index {frame_index} in track {track_id!r} does not follow "
                f"{self.last_index}", line, self.path)
        self.last_index = frame_index
        self.cur_rows.append(values)

    def _flush(self):
        self.done[self.cur_id] = (self.cur_start, self.cur_rows)
        self.order.append(self.cur_id)

    def finish(self):
        if self.cur_id is not None:
            self._flush()
            self.cur_id = None
        return [(tid, *self.done[tid]) for tid in self.order]


def _check_header(header, prefix, path):
    if header[:len(prefix)] != list(prefix):
        raise ParseError(f"header must start with {','.join(prefix)}", 1, path)


# -- tracks -------------------------------------------------------------------

def write_tracks(dataset: TrackDataset | Iterable[Track], path) -> None:
    """Write tracks sorted by id; frame indices run from each track's start."""
    tracks = sorted(dataset, key=lambda t: t.track_id)
    dims = {t.dim for t in tracks}
    if len(dims) > 1:
        raise ValueError(f"tracks have mixed dimensions {sorted(dims)}")
    for t in tracks:
        if t.n_frames == 0:
            raise ValueError(f"track {t.track_id!r} is empty and cannot be written")
    D = dims.pop() if dims else 0
    with _open_write(path) as f:
        w = _writer(f)
        w.writerow(["track_id", "frame_index"] + [f"v{i}" for i in range(D)])
        for t in tracks:
            for k, row in enumerate(t.frames):
                w.writerow([t.track_id, t.start_frame + k] + [fmt_float(x) for x in row])


def read_tracks(path, labels: Optional[dict] = None) -> TrackDataset:
    header, rows = _read_rows(path)
    _check_header(header, ("track_id", "frame_index"), path)
    D = len(header) - 2
    if header[2:] != [f"v{i}" for i in range(D)]:
        raise ParseError("feature columns must be named v0..v{D-1}", 1, path)
    if D < 1:
        raise ParseError("no feature columns", 1, path)
    blocks = _FrameBlocks(path)
    for line, row in rows:
        if len(row) != D + 2:
            raise FileDimensionMismatchError(
                f"row has {len(row) - 2} feature values, header declares {D}", line, path)
        fi = _parse_int(row[1], line, path, "integer frame_index")
        blocks.add(line, row[0], fi, [_parse_float(x, line, path) for x in row[2:]])
    labels = labels or {}
    return TrackDataset(tuple(
        Track(tid, np.array(vals, dtype=np.float64), start, labels.get(tid))
        for tid, start, vals in blocks.finish()))


# -- labels -------------------------------------------------------------------

def write_labels(labels: dict, path) -> None:
    with _open_write(path) as f:
        w = _writer(f)
        w.writerow(["track_id", "subject_id"])
        for tid in sorted(labels):
            w.writerow([tid, labels[tid]])


def read_labels(path) -> dict:
    header, rows = _read_rows(path)
    if header != ["track_id", "subject_id"]:
        raise ParseError("header must be track_id,subject_id", 1, path)
    out = {}
    for line, row in rows:
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", line, path)
        if row[0] in out:
            raise ParseError(f"duplicate track_id {row[0]!r}", line, path)
        out[row[0]] = row[1]
    return out


# -- pairs --------------------------------------------------------------------

def write_pairs(pairs: Sequence[VerificationPair], path) -> None:
    with _open_write(path) as f:
        w = _writer(f)
        w.writerow(["track_a", "track_b", "same", "fold"])
        for p in pairs:
            w.writerow([p.track_a, p.track_b, int(bool(p.same)), p.fold])


def read_pairs(path, track_ids=None) -> list:
    """Read verification pairs; with ``track_ids`` given, unknown ids are rejected."""
    header, rows = _read_rows(path)
    if header != ["track_a", "track_b", "same", "fold"]:
        raise ParseError("header must be track_a,track_b,same,fold", 1, path)
    known = None if track_ids is None else set(track_ids)
    out = []
    for line, row in rows:
        if len(row) != 4:
            raise ParseError(f"expected 4 fields, got {len(row)}", line, path)
        a, b, same, fold = row
        if same not in ("0", "1"):
            raise ParseError(f"same must be 0 or 1, got {same!r}", line, path)
        fold_i = _parse_int(fold, line, path, "integer fold")
        if fold_i < 0:
            raise ParseError(f"fold must be >= 0, got {fold_i}", line, path)
        if a == b:
            raise ParseError(f"pair compares track {a!r} with itself", line, path)
        if known is not None:
            for tid in (a, b):
                if tid not in known:
                    raise ParseError(f"unknown track {tid!r}", line, path)
        out.append(VerificationPair(a, b, same == "1", fold_i))
    return out


# -- posteriors ---------------------------------------------------------------

_POSTERIOR_HEADER = (["track_id", "frame_index"] + [f"age{i}" for i in range(N_AGE)]
                     + [f"gender{i}" for i in range(N_GENDER)])


def write_posteriors(posteriors: dict, path) -> None:
    with _open_write(path) as f:
        w = _writer(f)
        w.writerow(_POSTERIOR_HEADER)
        for tid in sorted(posteriors):
            fp = posteriors[tid]
            for k in range(fp.n_frames):
                w.writerow([tid, fp.start_frame + k]
                           + [fmt_float(x) for x in fp.age[k]]
                           + [fmt_float(x) for x in fp.gender[k]])


def read_posteriors(path) -> dict:
    header, rows = _read_rows(path)
    if header != _POSTERIOR_HEADER:
        raise ParseError(f"header must be {','.join(_POSTERIOR_HEADER)}", 1, path)
    blocks = _FrameBlocks(path)
    width = len(_POSTERIOR_HEADER)
    for line, row in rows:
        if len(row) != width:
            raise ParseError(f"expected {width} fields, got {len(row)}", line, path)
        vals = [_parse_float(x, line, path) for x in row[2:]]
        if any(v < 0 or v > 1 for v in vals):
            raise ParseError("posterior outside [0, 1]", line, path)
        age, gender = vals[:N_AGE], vals[N_AGE:]
        if abs(math.fsum(age) - 1) > POSTERIOR_SUM_TOL:
            raise ParseError(f"age block sums to {math.fsum(age)!r}", line, path)
        if abs(math.fsum(gender) - 1) > POSTERIOR_SUM_TOL:
            raise ParseError(f"gender block sums to {math.fsum(gender)!r}", line, path)
        blocks.add(line, row[0], _parse_int(row[1], line, path, "integer frame_index"), vals)
    out = {}
    for tid, start, vals in blocks.finish():
        arr = np.array(vals, dtype=np.float64)
        out[tid] = FramePosteriors(arr[:, :N_AGE], arr[:, N_AGE:], start)
    return out


# -- representations ----------------------------------------------------------

_METHOD_CODES = {
    AggregationMethod(k, n): f"{k.value}/{n.value}" for k in PoolKind for n in Normalization}
_CODE_METHODS = {v: k for k, v in _METHOD_CODES.items()}


def write_representations(reps: Sequence[TrackRepresentation], path) -> None:
    reps = sorted(reps, key=lambda r: r.track_id)
    D = reps[0].dim if reps else 0
    with _open_write(path) as f:
        w = _writer(f)
        w.writerow(["track_id", "method", "frame_count"] + [f"v{i}" for i in range(D)])
        for r in reps:
            if r.dim != D:
                raise ValueError("representations have mixed dimensions")
            w.writerow([r.track_id, _METHOD_CODES[r.method], r.frame_count]
                       + [fmt_float(x) for x in r.vector])


def read_representations(path) -> list:
    header, rows = _read_rows(path)
    _check_header(header, ("track_id", "method", "frame_count"), path)
    D = len(header) - 3
    if header[3:] != [f"v{i}" for i in range(D)]:
        raise ParseError("feature columns must be named v0..v{D-1}", 1, path)
    out, seen = [], set()
    for line, row in rows:
        if len(row) != D + 3:
            raise FileDimensionMismatchError(
                f"row has {len(row) - 3} values, header declares {D}", line, path)
        tid, code, fc = row[:3]
        if tid in seen:
            raise ParseError(f"duplicate track_id {tid!r}", line, path)
        seen.add(tid)
        if code not in _CODE_METHODS:
            raise ParseError(f"unknown method code {code!r}", line, path)
        out.append(TrackRepresentation(
            tid, [_parse_float(x, line, path) for x in row[3:]], _CODE_METHODS[code],
            _parse_int(fc, line, path, "integer frame_count")))
    return out


# -- clusters -----------------------------------------------------------------

@dataclass(frozen=True)
class ClusterRecord:
    """One line of a clusters file."""

    cluster_id: int
    track_ids: tuple
    total_frames: int
    gender: Optional[str]
    age_category: Optional[int]
    representation: tuple

    def to_json(self) -> str:
        return json.dumps({
            "cluster_id": self.cluster_id,
            "track_ids": list(self.track_ids),
            "total_frames": self.total_frames,
            "gender": self.gender,
            "age_category": self.age_category,
            "representation": list(self.representation),
        }, ensure_ascii=False)


def cluster_record(c) -> ClusterRecord:
    if isinstance(c, ClusterRecord):
        return c
    gender = age = None
    if c.gender_posterior is not None and c.age_posterior is not None:
        from .clustering import estimate_demographics
        g, age = estimate_demographics(c)
        gender = GENDER_NAMES[int(g)]
    return ClusterRecord(int(c.cluster_id), tuple(c.track_ids), int(c.total_frames), gender,
                         age, tuple(float(x) for x in c.representation))


def write_clusters(clusters: Iterable, path) -> None:
    with _open_write(path) as f:
        for c in clusters:
            f.write(cluster_record(c).to_json() + "\n")


def read_clusters(path) -> list:
    out, owner = [], {}
    with open(path, encoding="utf-8", newline="") as f:
        for line_no, line in enumerate(f, start=1):
            text = line.rstrip("\n")
            if not text:
                raise ParseError("blank line", line_no, path)
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line_no, path) from None
            missing = {"cluster_id", "track_ids", "total_frames", "gender", "age_category",
                       "representation"} - set(obj)
            if missing:
                raise ParseError(f"missing keys {sorted(missing)}", line_no, path)
            if obj["gender"] not in (None, *GENDER_NAMES):
                raise ParseError(f"bad gender {obj['gender']!r}", line_no, path)
            if not obj["track_ids"]:
                raise ParseError("cluster has no tracks", line_no, path)
            for tid in obj["track_ids"]:
                if tid in owner:
                    raise ParseError(
                        f"track {tid!r} already belongs to cluster {owner[tid]}", line_no, path)
                owner[tid] = obj["cluster_id"]
            out.append(ClusterRecord(obj["cluster_id"], tuple(obj["track_ids"]),
                                     obj["total_frames"], obj["gender"], obj["age_category"],
                                     tuple(float(x) for x in obj["representation"])))
    return out


# -- reports ------------------------------------------------------------------

def write_report(reports, path, text_path=None) -> None:
    """Write metric reports as JSON and, optionally, as a text table."""
    if isinstance(reports, MetricReport):
        reports = [reports]
    payload = {"reports": [r.to_dict() for r in reports]}
    with _open_write(path) as f:
        f.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if text_path is not None:
        with _open_write(text_path) as f:
            f.write(format_table(reports))


def read_report(path) -> list:
    with open(path, encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, path) from None
    try:
        return [MetricReport.from_dict(d) for d in payload["reports"]]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed report: {exc}", None, path) from None


def write_synth(data, out_dir) -> dict:
    """Write tracks, labels and posteriors of a synthetic dataset into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"tracks": out_dir / "tracks.csv", "labels": out_dir / "labels.csv",
             "posteriors": out_dir / "posteriors.csv"}
    write_tracks(data.dataset, paths["tracks"])
    write_labels(data.labels, paths["labels"])
    write_posteriors(data.posteriors, paths["posteriors"])
    return paths
