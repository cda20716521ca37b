"""Named track-comparison methods (the CLI vocabulary)."""
from .aggregation import AggregationMethod, Normalization, PoolKind
from .dissimilarity import FrameNormalization, TrackDistanceMethod

_REP = TrackDistanceMethod.REPRESENTATION

METHODS = {
    "raw-pairwise": TrackDistanceMethod(TrackDistanceMethod.PAIRWISE),
    "l2-pairwise": TrackDistanceMethod(TrackDistanceMethod.PAIRWISE,
                                       frame_normalization=FrameNormalization.L2_PER_FRAME),
    "medoid": TrackDistanceMethod(_REP, AggregationMethod(PoolKind.MEDOID, Normalization.NONE)),
    "medoid-l2": TrackDistanceMethod(
        _REP, AggregationMethod(PoolKind.MEDOID, Normalization.AGGREGATE_THEN_NORMALIZE)),
    "avepool": TrackDistanceMethod(_REP, AggregationMethod(PoolKind.AVEPOOL, Normalization.NONE)),
    "l2-avepool": TrackDistanceMethod(
        _REP, AggregationMethod(PoolKind.AVEPOOL, Normalization.NORMALIZE_THEN_AGGREGATE)),
    "avepool-l2": TrackDistanceMethod(
        _REP, AggregationMethod(PoolKind.AVEPOOL, Normalization.AGGREGATE_THEN_NORMALIZE)),
}
METHOD_NAMES = tuple(METHODS)


def get_method(name: str) -> TrackDistanceMethod:
    try:
        return METHODS[name]
    except KeyError:
        raise KeyError(f"unknown method {name!r}; valid names: {', '.join(METHOD_NAMES)}") from None
