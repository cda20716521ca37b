"""Aggregate, match, cluster and evaluate video face tracks."""
from .aggregation import (
    ALL_AGGREGATIONS,
    AggregationMethod,
    Normalization,
    PoolKind,
    TrackRepresentation,
    aggregate,
    aggregate_all,
    aggregate_probabilities,
    average_pool,
    medoid,
    medoid_index,
    medoid_order_agreement,
)
from .clustering import (
    Cluster,
    ClusteringConfig,
    Gender,
    Linkage,
    TrackPosteriors,
    estimate_demographics,
    hac_cluster,
    online_cluster,
    pool_track_posteriors,
    purity,
    update_cluster,
)
from .core import (
    FramePosteriors,
    Track,
    TrackDataset,
    ValidationReport,
    l1_normalize,
    l2_normalize,
    validate_dataset,
)
from .dissimilarity import (
    DistanceCounter,
    DistanceKind,
    FrameNormalization,
    TrackDistanceMethod,
    euclidean,
    kl_divergence,
    pairwise_average_distance,
    representation_distance,
    track_distance,
)
from .evaluation import (
    MetricReport,
    RocCurve,
    VerificationPair,
    auc,
    calibrate_threshold,
    eer,
    frr_at_far,
    kfold_report,
    roc,
    score_pairs,
)
from .methods import METHOD_NAMES, METHODS, get_method
from .synthdata import SynthConfig, SynthData, generate, make_pairs

__version__ = "0.1.0"
