"""Command-line entry point: ``trackfold <subcommand> ...``.

Exit codes: 0 success, 1 invalid input or arguments, 2 I/O failure.
Results go to stdout or files; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import functools
import json
import sys
from pathlib import Path

from . import trackio
from .aggregation import aggregate
from .bench import format_bench, rows_as_dicts, run_benchmark
from .clustering import (
    ClusteringConfig,
    Linkage,
    cluster,
    pool_track_posteriors,
    purity,
)
from .dissimilarity import DistanceKind, TrackDistanceMethod
from .errors import TrackfoldError
from .evaluation import calibrate_threshold, format_table, kfold_report, score_pairs
from .methods import METHOD_NAMES, METHODS
from .parallel import parallel_map
from .synthdata import SynthConfig, generate, make_pairs, posterior_dataset

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


class _UsageError(TrackfoldError):
    pass


def _method(name: str, metric: str = "euclidean") -> TrackDistanceMethod:
    if name not in METHODS:
        raise _UsageError(f"unknown method {name!r}; valid names: {', '.join(METHOD_NAMES)}")
    return METHODS[name].with_metric(DistanceKind(metric))


def _frames_range(text: str) -> tuple:
    parts = text.replace("-", ":").split(":")
    try:
        vals = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or MIN:MAX, got {text!r}") from None
    if len(vals) == 1:
        return vals[0], vals[0]
    if len(vals) == 2:
        return vals[0], vals[1]
    raise argparse.ArgumentTypeError(f"expected N or MIN:MAX, got {text!r}")


def _load_dataset(args):
    """Tracks to match: embeddings, or the age+gender posteriors when asked."""
    dataset = trackio.read_tracks(args.tracks)
    if getattr(args, "features", "embedding") == "posteriors":
        if not args.posteriors:
            raise _UsageError("--features posteriors needs --posteriors")
        dataset = posterior_dataset(dataset, trackio.read_posteriors(args.posteriors))
    return dataset


def cmd_synth(args) -> int:
    cfg = SynthConfig(seed=args.seed, dim=args.dim, identities=args.identities,
                      tracks_per_identity=args.tracks_per_id, frames_per_track=args.frames,
                      noise_sigma=args.noise, gain_spread=args.gain_spread,
                      demographics_noise=args.demographics_noise)
    data = generate(cfg)
    paths = trackio.write_synth(data, args.out_dir)
    if args.n_same or args.n_diff:
        pairs = make_pairs(data.labels, args.n_same, args.n_diff, args.folds, args.seed)
        paths["pairs"] = Path(args.out_dir) / "pairs.csv"
        trackio.write_pairs(pairs, paths["pairs"])
    for kind, p in paths.items():
        print(f"{kind}\t{p}")
    return EXIT_OK


def cmd_aggregate(args) -> int:
    method = _method(args.method, args.metric)
    if method.kind != TrackDistanceMethod.REPRESENTATION:
        raise _UsageError(f"method {args.method!r} matches all frame pairs and has no "
                          f"track representation")
    dataset = _load_dataset(args)
    with parallel_map() as pmap:
        reps = list(pmap(lambda t: aggregate(t, method.aggregation, method.metric),
                         list(dataset)))
    trackio.write_representations(reps, args.out)
    print(f"wrote {len(reps)} representations to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    names = args.method or list(METHOD_NAMES)
    methods = [(n, _method(n, args.metric)) for n in names]
    dataset = _load_dataset(args)
    pairs = trackio.read_pairs(args.pairs, dataset.track_ids)
    reports = []
    with parallel_map() as pmap:
        for name, m in methods:
            r = kfold_report(dataset, pairs, m, args.far, pmap)
            r.method = name
            reports.append(r)
    table = format_table(reports)
    sys.stdout.write(table)
    if args.report:
        text_path = Path(args.report).with_suffix(".txt")
        trackio.write_report(reports, args.report, text_path)
    return EXIT_OK


def _check_far(far):
    if not 0 < far < 1:
        raise _UsageError(f"--far must be in (0, 1), got {far}")


def cmd_calibrate(args) -> int:
    _check_far(args.far)
    method = _method(args.method, args.metric)
    dataset = _load_dataset(args)
    pairs = trackio.read_pairs(args.pairs, dataset.track_ids)
    with parallel_map() as pmap:
        scored = score_pairs(dataset, pairs, method, pmap)
    print(trackio.fmt_float(calibrate_threshold(scored, args.far)))
    return EXIT_OK


def cmd_cluster(args) -> int:
    method = _method(args.method, args.metric)
    if method.kind != TrackDistanceMethod.REPRESENTATION:
        raise _UsageError("clustering needs a representation method "
                          f"(one of {', '.join(n for n in METHOD_NAMES if 'pairwise' not in n)})")
    dataset = trackio.read_tracks(args.tracks)
    if args.threshold is not None:
        threshold = args.threshold
    else:
        if not args.train_pairs:
            raise _UsageError("--auto-far needs --train-pairs")
        _check_far(args.auto_far)
        train = trackio.read_tracks(args.train_tracks) if args.train_tracks else dataset
        pairs = trackio.read_pairs(args.train_pairs, train.track_ids)
        threshold = calibrate_threshold(score_pairs(train, pairs, method), args.auto_far)
        print(f"calibrated threshold {trackio.fmt_float(threshold)} at FAR {args.auto_far}",
              file=sys.stderr)

    posteriors = None
    if args.posteriors:
        posteriors = pool_track_posteriors(dataset, trackio.read_posteriors(args.posteriors))
    cfg = ClusteringConfig(threshold, method, Linkage(args.mode))
    with parallel_map() as pmap:
        reps = list(pmap(lambda t: aggregate(t, method.aggregation, method.metric),
                         list(dataset)))
    clusters = cluster(reps, cfg, posteriors)
    trackio.write_clusters(clusters, args.out)
    summary = {"clusters": len(clusters), "tracks": len(reps), "threshold": threshold,
               "mode": args.mode}
    if args.labels:
        p = purity(clusters, trackio.read_labels(args.labels))
        summary.update(purity=p.purity, impure_clusters=p.impure_clusters)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_bench(args) -> int:
    names = args.methods or list(METHOD_NAMES)
    for n in names:
        _method(n)
    rows = run_benchmark(args.frames_per_track, args.dim, args.pairs, names, args.seed,
                         args.repeats)
    sys.stdout.write(format_bench(rows))
    if args.json:
        with open(args.json, "w", encoding="utf-8", newline="") as f:
            f.write(json.dumps({"frames_per_track": args.frames_per_track, "dim": args.dim,
                                "pairs": args.pairs, "rows": rows_as_dicts(rows)},
                               indent=2) + "\n")
    return EXIT_OK


def _add_method(p, required=True, multiple=False):
    kw = {"action": "append"} if multiple else {"required": required}
    p.add_argument("--method", metavar="NAME", **kw,
                   help=f"one of: {', '.join(METHOD_NAMES)}")
    p.add_argument("--metric", choices=[k.value for k in DistanceKind], default="euclidean",
                   help="frame/representation distance (kl = symmetric KL on posteriors)")


def _add_features(p):
    p.add_argument("--features", choices=["embedding", "posteriors"], default="embedding",
                   help="match embeddings or the age+gender posteriors")
    p.add_argument("--posteriors", help="posteriors CSV (for --features posteriors)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trackfold", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic labelled dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--identities", type=int, default=50)
    p.add_argument("--tracks-per-id", type=int, default=3)
    p.add_argument("--frames", type=_frames_range, default=(20, 20), help="N or MIN:MAX")
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--gain-spread", type=float, default=0.5)
    p.add_argument("--demographics-noise", type=float, default=0.3)
    p.add_argument("--n-same", type=int, default=0, help="also write this many same pairs")
    p.add_argument("--n-diff", type=int, default=0, help="and this many different pairs")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("aggregate", help="write one representation per track")
    p.add_argument("--tracks", required=True)
    _add_method(p)
    _add_features(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("eval", help="k-fold AUC / EER / FRR@FAR report")
    p.add_argument("--tracks", required=True)
    p.add_argument("--pairs", required=True)
    _add_method(p, multiple=True)
    _add_features(p)
    p.add_argument("--far", type=float, default=0.01)
    p.add_argument("--report", help="JSON report path; a .txt table is written alongside")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("calibrate", help="distance threshold at a target FAR")
    p.add_argument("--tracks", required=True)
    p.add_argument("--pairs", required=True)
    _add_method(p)
    _add_features(p)
    p.add_argument("--far", type=float, default=0.01)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("cluster", help="group tracks into persons")
    p.add_argument("--tracks", required=True)
    p.add_argument("--posteriors")
    _add_method(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--threshold", type=float)
    g.add_argument("--auto-far", type=float)
    p.add_argument("--train-pairs")
    p.add_argument("--train-tracks", help="tracks for --train-pairs (default: --tracks)")
    p.add_argument("--mode", choices=["online", "hac"], default="online")
    p.add_argument("--labels", help="labels CSV; prints purity when given")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("bench", help="time frame-pair vs representation matching")
    p.add_argument("--frames-per-track", type=int, default=50)
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--methods", nargs="+", metavar="NAME")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--json")
    p.set_defaults(func=cmd_bench)
    return parser


@functools.lru_cache(maxsize=None)
def _shared_parser() -> argparse.ArgumentParser:
    return build_parser()


def main(argv=None) -> int:
    args = _shared_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"trackfold: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TrackfoldError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"trackfold {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
