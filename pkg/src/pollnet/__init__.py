"""Peer-to-peer poll dissemination over social graphs, with structure-only
detection of ineligible participants from the recorded dissemination graph."""

from .analytics import (
    StructureReport,
    average_clustering,
    betweenness,
    betweenness_for_ranking,
    degree_centrality,
    louvain_communities,
    modularity,
    rich_club,
    rich_club_curve,
    structure_report,
)
from .classifier import (
    Metrics,
    SageModel,
    Split,
    TrainParams,
    evaluate,
    sage_forward,
    stratified_split,
    train_classifier,
)
from .embeddings import (
    EmbeddingMatrix,
    WalkCorpus,
    generate_walks,
    sgns_pair_loss,
    train_skipgram,
)
from .experiment import (
    DatasetSpec,
    EmbeddingParams,
    ExperimentSpec,
    StageError,
    run_experiment,
    sweep,
)
from .graphs import (
    AttributeLaw,
    EligibilityRule,
    GraphFormatError,
    SocialGraph,
    apply_eligibility,
    attach_attributes,
    generate_synthetic_graph,
    largest_connected_component,
    load_canonical,
    load_edge_list,
    rule_for_fraction,
    save_canonical,
)
from .simulate import (
    BallotState,
    DisseminationGraph,
    DisseminationTrace,
    NodeProfile,
    NodeProfiles,
    ParticipationHistogram,
    SimulationConfig,
    assign_roles,
    build_dissemination_graph,
    coverage,
    participation_histogram,
    participation_rate,
    run_dissemination,
    sample_participation_budget,
    sample_participation_budgets,
    select_forward_targets,
)

__version__ = "0.1.0"
