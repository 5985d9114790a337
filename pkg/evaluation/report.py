"""
MetricsReport: the JSON document every evaluation emits.

The schema is the pydantic model below (`MetricsReport.model_json_schema()`).
"""
import os
import sys
from typing import Annotated, Dict, Optional, Sequence

import pandas as pd
from pydantic import BaseModel, Field

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from .evaluator import EvalResult
from .grouping import GroupResult

UnitFloat = Annotated[float, Field(ge=0.0, le=1.0)]


class DomainMetrics(BaseModel):
    hr5: UnitFloat
    hr10: UnitFloat
    ndcg5: UnitFloat
    ndcg10: UnitFloat
    count: int = Field(ge=0)


class BucketMetrics(BaseModel):
    size: int = Field(ge=0)
    ndcg10: Optional[float] = Field(default=None, ge=0.0, le=1.0)


class TimingReport(BaseModel):
    """Wall-clock medians in seconds."""
    runs: int = Field(ge=1)
    batch_size: int = Field(ge=1)
    train_batches: int = Field(ge=0)
    train_epoch_seconds: float = Field(ge=0.0)
    infer_batch_seconds: Dict[str, float] = {}


class MetricsReport(BaseModel):
    split: str
    ranker: str
    seed: int
    config_hash: str
    steps: int = Field(ge=1)
    num_instances: int = Field(ge=0)
    num_candidates: int = Field(ge=1)
    per_domain: Dict[str, DomainMetrics]
    group_ndcg10: UnitFloat
    groups: Dict[str, Dict[str, BucketMetrics]] = {}
    timing: Optional[TimingReport] = None


def build_report(
    result: EvalResult,
    *,
    split: str,
    ranker: str,
    seed: int,
    config_hash: str,
    steps: int,
    groups: Sequence[GroupResult] = (),
    timing: Optional[TimingReport] = None,
) -> MetricsReport:
    per_domain = {
        str(d): DomainMetrics(
            hr5=row["hr@5"], hr10=row["hr@10"], ndcg5=row["ndcg@5"], ndcg10=row["ndcg@10"], count=row["count"]
        )
        for d, row in result.per_domain.items()
    }
    return MetricsReport(
        split=split,
        ranker=ranker,
        seed=seed,
        config_hash=config_hash,
        steps=steps,
        num_instances=len(result.ranked),
        num_candidates=max((r.num_candidates for r in result.ranked), default=1),
        per_domain=per_domain,
        group_ndcg10=result.group_ndcg10,
        groups={
            g.kind: {label: BucketMetrics(size=b.size, ndcg10=b.ndcg10) for label, b in g.buckets.items()}
            for g in groups
        },
        timing=timing,
    )


def write_report(report: MetricsReport, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(report.model_dump_json(indent=2))
    return path


def write_rank_dump(result: EvalResult, path: str) -> str:
    """Per-instance ranks as CSV `instance_id,domain,rank`."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame = pd.DataFrame([r.to_dict() for r in result.ranked], columns=["instance_id", "domain", "rank"])
    frame.to_csv(path, index=False, lineterminator="\n")
    return path
