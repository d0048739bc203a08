"""Sequence linkage across event-log domains.

Links event sequences ("views") that belong to the same hidden entity
across two data sets, even when co-referent sequences share few or no
common events.  The core pipeline learns a topic model over the shared
event space with online variational inference, maps every view onto the
topic simplex, and ranks candidate matches by Jensen-Shannon score.
Baseline scorers, a synthetic-world generator with ground truth, a
recall harness, and a numerical verification bench ship alongside.
"""

from seqlink.corpus import (
    ActivityRecord,
    Granularity,
    View,
    Vocabulary,
    bin_spatial,
    bin_temporal,
    build_event_space,
    l1_distance,
    overlap_stats,
    parse_activity_log,
    relative_frequency,
)
from seqlink.estimators import EventTopicModel, RankKLinker
from seqlink.lda import (
    EStepResult,
    LdaConfig,
    TopicModel,
    dirichlet_expectation_log,
    e_step,
    elbo,
    fit_batch,
    fit_omniscient,
    fit_online,
    learning_rate,
)
from seqlink.linkage import (
    LinkageResult,
    ScoreMatrix,
    TopicProportion,
    infer_proportions,
    js_divergence,
    link,
    rank_k,
    score_matrix,
)
from seqlink.synth import GroundTruth, SynthConfig, SyntheticWorld, generate_world, zero_overlap_world

__version__ = "0.1.0"

__all__ = [
    "ActivityRecord",
    "EStepResult",
    "EventTopicModel",
    "Granularity",
    "GroundTruth",
    "LdaConfig",
    "LinkageResult",
    "RankKLinker",
    "ScoreMatrix",
    "SynthConfig",
    "SyntheticWorld",
    "TopicModel",
    "TopicProportion",
    "View",
    "Vocabulary",
    "bin_spatial",
    "bin_temporal",
    "build_event_space",
    "dirichlet_expectation_log",
    "e_step",
    "elbo",
    "fit_batch",
    "fit_omniscient",
    "fit_online",
    "generate_world",
    "infer_proportions",
    "js_divergence",
    "l1_distance",
    "learning_rate",
    "link",
    "overlap_stats",
    "parse_activity_log",
    "rank_k",
    "relative_frequency",
    "score_matrix",
    "zero_overlap_world",
]
