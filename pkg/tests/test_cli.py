import json

import numpy as np
import pytest

from trackfold import aggregate, get_method, trackio
from trackfold.cli import main
from trackfold.clustering import ClusteringConfig, Linkage, cluster, purity
from trackfold.evaluation import (
    VerificationPair,
    calibrate_threshold,
    format_table,
    kfold_report,
    score_pairs,
)
from trackfold.methods import METHOD_NAMES
from trackfold.synthdata import SynthConfig, generate, make_pairs


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--seed", "0", "--identities", "20", "--n-same", "40",
                 "--n-diff", "40", "--folds", "4", "--out-dir", str(out)]) == 0
    return out


def test_synth_writes_file_set(synth_dir):
    assert sorted(p.name for p in synth_dir.iterdir()) == [
        "labels.csv", "pairs.csv", "posteriors.csv", "tracks.csv"]


def test_synth_matches_library(synth_dir):
    data = generate(SynthConfig(seed=0, identities=20))
    back = trackio.read_tracks(synth_dir / "tracks.csv")
    assert back.track_ids == data.dataset.track_ids
    assert all(np.array_equal(a.frames, b.frames) for a, b in zip(back, data.dataset))
    assert trackio.read_pairs(synth_dir / "pairs.csv") == make_pairs(data.labels, 40, 40, 4, 0)


def test_synth_byte_identical_reruns(tmp_path):
    for d in ("a", "b"):
        assert main(["synth", "--seed", "3", "--identities", "4", "--frames", "2:5",
                     "--out-dir", str(tmp_path / d)]) == 0
    for name in ("tracks.csv", "labels.csv", "posteriors.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_synth_invalid_config(tmp_path, capsys):
    assert main(["synth", "--identities", "0", "--out-dir", str(tmp_path)]) == 1
    assert "identities must be positive" in capsys.readouterr().err


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as info:
        main(["synth", "--bogus", "1", "--out-dir", "x"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 1


def test_io_error_exit_code(tmp_path, capsys):
    assert main(["aggregate", "--tracks", str(tmp_path / "missing.csv"), "--method",
                 "avepool", "--out", str(tmp_path / "r.csv")]) == 2
    assert "I/O error" in capsys.readouterr().err


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "t.csv"
    bad.write_text("track_id,frame_index,v0\na,0,1,2\n")
    assert main(["aggregate", "--tracks", str(bad), "--method", "avepool",
                 "--out", str(tmp_path / "r.csv")]) == 1
    assert ":2:" in capsys.readouterr().err


def test_aggregate_single_frame_unit_track(tmp_path):
    tracks = tmp_path / "t.csv"
    tracks.write_text("track_id,frame_index,v0,v1\na,0,0.6,0.8\n")
    out = tmp_path / "r.csv"
    assert main(["aggregate", "--tracks", str(tracks), "--method", "avepool-l2",
                 "--out", str(out)]) == 0
    rep = trackio.read_representations(out)[0]
    assert rep.vector.tolist() == [0.6, 0.8]


def test_aggregate_unknown_method(tmp_path, capsys, synth_dir):
    assert main(["aggregate", "--tracks", str(synth_dir / "tracks.csv"), "--method", "max",
                 "--out", str(tmp_path / "r.csv")]) == 1
    err = capsys.readouterr().err
    assert all(n in err for n in METHOD_NAMES)


def test_aggregate_rejects_pairwise(tmp_path, synth_dir):
    assert main(["aggregate", "--tracks", str(synth_dir / "tracks.csv"), "--method",
                 "raw-pairwise", "--out", str(tmp_path / "r.csv")]) == 1


@pytest.mark.parametrize("name", [n for n in METHOD_NAMES if "pairwise" not in n])
def test_aggregate_matches_library(tmp_path, synth_dir, name):
    out = tmp_path / "r.csv"
    assert main(["aggregate", "--tracks", str(synth_dir / "tracks.csv"), "--method", name,
                 "--out", str(out)]) == 0
    ds = trackio.read_tracks(synth_dir / "tracks.csv")
    got = trackio.read_representations(out)
    m = get_method(name).aggregation
    for r in got:
        assert np.array_equal(r.vector, aggregate(ds[r.track_id], m).vector)


def test_eval_matches_in_process(tmp_path, synth_dir, capsys):
    report = tmp_path / "rep.json"
    assert main(["eval", "--tracks", str(synth_dir / "tracks.csv"), "--pairs",
                 str(synth_dir / "pairs.csv"), "--report", str(report)]) == 0
    out = capsys.readouterr().out
    ds = trackio.read_tracks(synth_dir / "tracks.csv")
    pairs = trackio.read_pairs(synth_dir / "pairs.csv")
    expected = [kfold_report(ds, pairs, get_method(n)) for n in METHOD_NAMES]
    assert out == format_table(expected)
    assert trackio.read_report(report) == expected
    assert report.with_suffix(".txt").read_text() == out


def test_eval_separable_and_single_fold(tmp_path, capsys):
    tracks = tmp_path / "t.csv"
    tracks.write_text("track_id,frame_index,v0\na,0,0\nb,1,0.1\nc,2,5\nd,3,5.1\n")
    pairs = tmp_path / "p.csv"
    trackio.write_pairs([VerificationPair("a", "b", True), VerificationPair("c", "d", True),
                         VerificationPair("a", "c", False), VerificationPair("b", "d", False)],
                        pairs)
    assert main(["eval", "--tracks", str(tracks), "--pairs", str(pairs), "--method",
                 "avepool"]) == 0
    row = capsys.readouterr().out.splitlines()[2].split()
    assert row == ["avepool", "100.0±0.0", "0.0±0.0", "0.0±0.0"]


def test_eval_posterior_features(tmp_path, synth_dir, capsys):
    assert main(["eval", "--tracks", str(synth_dir / "tracks.csv"), "--pairs",
                 str(synth_dir / "pairs.csv"), "--method", "avepool", "--metric", "kl",
                 "--features", "posteriors", "--posteriors",
                 str(synth_dir / "posteriors.csv")]) == 0
    assert capsys.readouterr().out.splitlines()[2].startswith("avepool")
    assert main(["eval", "--tracks", str(synth_dir / "tracks.csv"), "--pairs",
                 str(synth_dir / "pairs.csv"), "--features", "posteriors"]) == 1


def test_calibrate_example(tmp_path, capsys):
    rows = [f"d{k:03d},{k},{k}" for k in range(1, 101)] + ["z,0,0"]
    tracks = tmp_path / "t.csv"
    tracks.write_text("track_id,frame_index,v0\n" + "\n".join(rows) + "\n")
    pairs = tmp_path / "p.csv"
    trackio.write_pairs([VerificationPair("z", f"d{k:03d}", False) for k in range(1, 101)],
                        pairs)
    assert main(["calibrate", "--tracks", str(tracks), "--pairs", str(pairs), "--method",
                 "avepool", "--far", "0.01"]) == 0
    assert capsys.readouterr().out.strip() == "1"
    assert main(["calibrate", "--tracks", str(tracks), "--pairs", str(pairs), "--method",
                 "avepool", "--far", "1.0"]) == 1


def test_calibrate_matches_library(synth_dir, capsys):
    assert main(["calibrate", "--tracks", str(synth_dir / "tracks.csv"), "--pairs",
                 str(synth_dir / "pairs.csv"), "--method", "medoid-l2"]) == 0
    ds = trackio.read_tracks(synth_dir / "tracks.csv")
    pairs = trackio.read_pairs(synth_dir / "pairs.csv")
    expected = calibrate_threshold(score_pairs(ds, pairs, get_method("medoid-l2")), 0.01)
    assert float(capsys.readouterr().out) == expected


def _cluster(args, capsys):
    code = main(["cluster"] + args)
    return code, capsys.readouterr()


def test_cluster_threshold_extremes(tmp_path, synth_dir, capsys):
    out = tmp_path / "c.jsonl"
    base = ["--tracks", str(synth_dir / "tracks.csv"), "--method", "avepool-l2",
            "--out", str(out)]
    code, cap = _cluster(base + ["--threshold", "0"], capsys)
    assert code == 0 and json.loads(cap.out)["clusters"] == 60
    code, cap = _cluster(base + ["--threshold", "10"], capsys)
    assert code == 0 and json.loads(cap.out)["clusters"] == 1
    code, cap = _cluster(base + ["--threshold", "1e9", "--mode", "hac"], capsys)
    assert json.loads(cap.out)["clusters"] == 1


def test_cluster_auto_far_matches_library(tmp_path, synth_dir, capsys):
    train = tmp_path / "train"
    assert main(["synth", "--seed", "100", "--identities", "20", "--n-same", "60",
                 "--n-diff", "600", "--folds", "1", "--out-dir", str(train)]) == 0
    capsys.readouterr()
    out = tmp_path / "c.jsonl"
    code, cap = _cluster(["--tracks", str(synth_dir / "tracks.csv"), "--method", "avepool-l2",
                          "--auto-far", "0.01", "--train-tracks", str(train / "tracks.csv"),
                          "--train-pairs", str(train / "pairs.csv"), "--labels",
                          str(synth_dir / "labels.csv"), "--posteriors",
                          str(synth_dir / "posteriors.csv"), "--out", str(out)], capsys)
    assert code == 0
    summary = json.loads(cap.out)

    m = get_method("avepool-l2")
    tr = trackio.read_tracks(train / "tracks.csv")
    thr = calibrate_threshold(score_pairs(tr, trackio.read_pairs(train / "pairs.csv"), m), 0.01)
    ds = trackio.read_tracks(synth_dir / "tracks.csv")
    reps = [aggregate(t, m.aggregation) for t in ds]
    clusters = cluster(reps, ClusteringConfig(thr, m, Linkage.NEAREST_CLUSTER))
    p = purity(clusters, trackio.read_labels(synth_dir / "labels.csv"))
    assert summary["threshold"] == thr
    assert summary["clusters"] == len(clusters)
    assert summary["purity"] == p.purity
    records = trackio.read_clusters(out)
    assert [r.track_ids for r in records] == [c.track_ids for c in clusters]
    assert all(r.gender in ("male", "female") for r in records)


def test_cluster_needs_train_pairs(tmp_path, synth_dir):
    assert main(["cluster", "--tracks", str(synth_dir / "tracks.csv"), "--method", "avepool",
                 "--auto-far", "0.01", "--out", str(tmp_path / "c.jsonl")]) == 1


def test_cluster_rejects_pairwise(tmp_path, synth_dir):
    assert main(["cluster", "--tracks", str(synth_dir / "tracks.csv"), "--method",
                 "l2-pairwise", "--threshold", "1", "--out", str(tmp_path / "c.jsonl")]) == 1


def test_bench(tmp_path, capsys):
    js = tmp_path / "b.json"
    assert main(["bench", "--frames-per-track", "5", "--dim", "8", "--pairs", "4",
                 "--repeats", "1", "--methods", "l2-pairwise", "avepool-l2",
                 "--json", str(js)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[2].split()[0] == "l2-pairwise" and lines[3].split()[0] == "avepool-l2"
    rows = json.loads(js.read_text())["rows"]
    assert [r["frame_distances_per_pair"] for r in rows] == [25.0, 1.0]
    assert main(["bench", "--pairs", "0"]) == 1
    assert main(["bench", "--methods", "nope"]) == 1
