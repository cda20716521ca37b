import math

import numpy as np
import pytest

import oracles
from trackfold import (
    METHODS,
    DistanceCounter,
    FrameNormalization,
    Track,
    aggregate,
    euclidean,
    kl_divergence,
    pairwise_average_distance,
    representation_distance,
    track_distance,
)
from trackfold.errors import (
    DimensionMismatchError,
    EmptyTrackError,
    MethodMismatchError,
    ZeroNormError,
)
from trackfold.methods import METHOD_NAMES, get_method
from trackfold.synthdata import SynthConfig, generate

RAW, L2 = FrameNormalization.RAW, FrameNormalization.L2_PER_FRAME


def test_euclidean_examples(rng):
    assert euclidean([0, 0], [3, 4]) == 5.0
    v = rng.standard_normal(10)
    assert euclidean(v, v) == 0.0
    a, b = rng.standard_normal(256), rng.standard_normal(256)
    assert euclidean(a, b) == pytest.approx(oracles.euclid(a, b), rel=1e-13)


def test_euclidean_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        euclidean([1, 2], [1, 2, 3])


def test_kl_identity():
    p = [0.1, 0.2, 0.7]
    assert kl_divergence(p, p) == 0.0
    assert kl_divergence(p, p, symmetric=False) == 0.0


def test_kl_known_value():
    # 0.5 ln 2 + 0.5 ln(2/3), evaluated directly
    forward = 0.14384103622589042
    backward = 0.13081203594113697
    assert kl_divergence([0.5, 0.5], [0.25, 0.75], symmetric=False) == pytest.approx(
        forward, abs=1e-9)
    assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(
        (forward + backward) / 2, abs=1e-9)
    assert kl_divergence([0.5, 0.5], [0.25, 0.75], symmetric=False) == pytest.approx(
        oracles.kl([0.5, 0.5], [0.25, 0.75]), abs=1e-14)


def test_kl_handles_zeros():
    d = kl_divergence([1.0, 0.0], [0.0, 1.0])
    assert math.isfinite(d) and d > 20


def test_pairwise_single_frames():
    assert pairwise_average_distance(Track("a", [[0, 0]]), Track("b", [[3, 4]])) == 5.0


def test_pairwise_two_by_one():
    assert pairwise_average_distance(Track("a", [[0, 0], [0, 2]]), Track("b", [[0, 4]])) == 3.0


def test_pairwise_matches_nested_loop(rng):
    A, B = rng.standard_normal((6, 12)), rng.standard_normal((6, 12))
    assert pairwise_average_distance(A, B) == pytest.approx(
        oracles.pairwise_average(A.tolist(), B.tolist()), rel=1e-12)


def test_pairwise_l2_per_frame(rng):
    A = rng.standard_normal((4, 5)) * 3
    B = rng.standard_normal((3, 5)) * 0.2
    expected = oracles.pairwise_average([oracles.unit(a) for a in A],
                                        [oracles.unit(b) for b in B])
    assert pairwise_average_distance(A, B, L2) == pytest.approx(expected, rel=1e-12)


def test_pairwise_counts_every_frame_pair(rng):
    counter = DistanceCounter()
    pairwise_average_distance(rng.standard_normal((7, 3)), rng.standard_normal((5, 3)),
                              counter=counter)
    assert counter.evaluations == 35


def test_pairwise_errors():
    with pytest.raises(EmptyTrackError):
        pairwise_average_distance(Track("e", np.empty((0, 2))), Track("b", [[1, 1]]))
    with pytest.raises(DimensionMismatchError):
        pairwise_average_distance(Track("a", [[1, 1]]), Track("b", [[1, 1, 1]]))
    with pytest.raises(ZeroNormError):
        pairwise_average_distance(Track("a", [[0, 0]]), Track("b", [[1, 1]]), L2)


def test_representation_distance_examples():
    m = get_method("avepool-l2").aggregation
    r1 = aggregate(Track("a", [[1.0, 0.0]]), m)
    r2 = aggregate(Track("b", [[0.0, 1.0]]), m)
    assert representation_distance(r1, r1) == 0.0
    assert representation_distance(r1, r2) == pytest.approx(math.sqrt(2), abs=1e-15)


def test_representation_distance_method_mismatch():
    r1 = aggregate(Track("a", [[1.0, 0.0]]), get_method("avepool").aggregation)
    r2 = aggregate(Track("b", [[1.0, 0.0]]), get_method("medoid").aggregation)
    with pytest.raises(MethodMismatchError):
        representation_distance(r1, r2)


def test_representation_distance_separates_identities():
    data = generate(SynthConfig(seed=3, identities=10))
    m = get_method("avepool-l2").aggregation
    reps = {t.track_id: aggregate(t, m) for t in data.dataset}
    same, diff = [], []
    ids = sorted(reps)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            d = representation_distance(reps[a], reps[b])
            (same if data.labels[a] == data.labels[b] else diff).append(d)
    assert np.mean(same) < np.mean(diff)


def test_method_vocabulary():
    assert METHOD_NAMES == ("raw-pairwise", "l2-pairwise", "medoid", "medoid-l2",
                            "avepool", "l2-avepool", "avepool-l2")
    labels = [METHODS[n].label for n in METHOD_NAMES]
    assert labels == ["Distance", "L2-norm -> Distance", "Medoid", "Medoid -> L2-norm",
                      "AvePool", "L2-norm -> AvePool", "AvePool -> L2-norm"]
    assert all(METHODS[n].name == n for n in METHOD_NAMES)
    with pytest.raises(KeyError, match="valid names"):
        get_method("nope")


def test_track_distance_l2_pairwise_single_unit_frames():
    a = Track("a", [[0.6, 0.8]])
    b = Track("b", [[1.0, 0.0]])
    assert track_distance(a, b, get_method("l2-pairwise")) == euclidean([0.6, 0.8], [1, 0])


def test_track_distance_avepool_l2_constant_frames():
    a = Track("a", [[2, 0], [2, 0]])
    b = Track("b", [[0, 3]])
    assert track_distance(a, b, get_method("avepool-l2")) == pytest.approx(
        math.sqrt(2), abs=1e-15)


def _oracle_track_distance(name, A, B):
    A, B = A.tolist(), B.tolist()
    if name == "raw-pairwise":
        return oracles.pairwise_average(A, B)
    if name == "l2-pairwise":
        return oracles.pairwise_average([oracles.unit(a) for a in A],
                                        [oracles.unit(b) for b in B])
    if name == "medoid":
        return oracles.euclid(A[oracles.medoid_index(A)], B[oracles.medoid_index(B)])
    if name == "medoid-l2":
        return oracles.euclid(oracles.unit(A[oracles.medoid_index(A)]),
                              oracles.unit(B[oracles.medoid_index(B)]))
    if name == "avepool":
        return oracles.euclid(oracles.mean_rows(A), oracles.mean_rows(B))
    if name == "l2-avepool":
        return oracles.euclid(oracles.mean_rows([oracles.unit(a) for a in A]),
                              oracles.mean_rows([oracles.unit(b) for b in B]))
    if name == "avepool-l2":
        return oracles.euclid(oracles.unit(oracles.mean_rows(A)),
                              oracles.unit(oracles.mean_rows(B)))
    raise KeyError(name)


@pytest.mark.parametrize("name", METHOD_NAMES)
def test_track_distance_every_method_matches_composed_oracle(name):
    rng = np.random.default_rng(77)
    A = rng.standard_normal((6, 10)) * rng.uniform(0.3, 2.0, size=(6, 1))
    B = rng.standard_normal((5, 10)) * rng.uniform(0.3, 2.0, size=(5, 1))
    d = track_distance(Track("a", A), Track("b", B), METHODS[name])
    assert d == pytest.approx(_oracle_track_distance(name, A, B), rel=1e-12)
    assert d == track_distance(Track("b", B), Track("a", A), METHODS[name])
