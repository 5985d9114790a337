from .metrics import hit_rate, ndcg, ndcg_values, domain_metrics, group_ndcg
from .grouping import GroupSpec, GroupResult, BucketResult, transition_rate, assign_bucket, group_metrics
from .rankers import BaseRanker, ModelRanker, PopularityRanker
from .evaluator import RankedList, EvalResult, positive_rank, evaluate_instance, evaluate
from .report import MetricsReport, DomainMetrics, BucketMetrics, TimingReport, build_report, write_report, write_rank_dump

# evaluation.timing drives the trainer and is imported directly.

__all__ = [
    "hit_rate",
    "ndcg",
    "ndcg_values",
    "domain_metrics",
    "group_ndcg",
    "GroupSpec",
    "GroupResult",
    "BucketResult",
    "transition_rate",
    "assign_bucket",
    "group_metrics",
    "BaseRanker",
    "ModelRanker",
    "PopularityRanker",
    "RankedList",
    "EvalResult",
    "positive_rank",
    "evaluate_instance",
    "evaluate",
    "MetricsReport",
    "DomainMetrics",
    "BucketMetrics",
    "TimingReport",
    "build_report",
    "write_report",
    "write_rank_dump",
]
