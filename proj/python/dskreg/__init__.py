"""Knowledge-graph recommendation with differentiable top-K neighbor sampling.

Thin Python surface over the C++ core: graph loading, co-graph construction,
Gumbel-Softmax K-hot sampling, preference-aware aggregation, BPR training and
top-N ranking metrics.
"""

from ._core import (  # noqa: F401
    CoGraph,
    DatasetSplit,
    InteractionGraph,
    KHotSelection,
    KnowledgeGraph,
    MetricTable,
    ParamStore,
    RankedList,
    RelationalGraph,
    RelevanceDistribution,
    SyntheticConfig,
    TrainConfig,
    aggregate_item,
    aggregate_user,
    ablation_scores,
    build_cograph,
    degree_stats,
    deterministic_topk,
    evaluate,
    gumbel_topk,
    init_params,
    load_checkpoint,
    load_interactions,
    load_triples,
    map_entities_to_items,
    ndcg_at,
    precision_at,
    predict,
    rank_items,
    recall_at,
    relevance_scores,
    save_checkpoint,
    softmax,
    split_interactions,
    train_epoch,
    unify,
    write_synthetic_dataset,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
