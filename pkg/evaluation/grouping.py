"""
Instance groupings for the transition, domain-count and few-shot analyses.

Every grouping assigns each instance to exactly one bucket, and every
bucket label is reported even when empty.
"""
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config.run_config import GroupConfig
from core.exceptions import ConfigError
from data.records import Instance
from .metrics import ndcg_values

GROUP_KINDS = ("target-transition", "transition-rate", "domain-count", "few-shot")


@dataclass
class GroupSpec:
    kind: str
    boundaries: Tuple[float, ...] = ()
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in GROUP_KINDS:
            raise ConfigError(f"unknown grouping kind: {self.kind}")

    @classmethod
    def from_config(cls, kind: str, cfg: Optional[GroupConfig] = None) -> "GroupSpec":
        cfg = cfg or GroupConfig()
        if kind == "target-transition":
            return cls(kind, (), ("w/ transition", "w/o transition"))
        if kind == "transition-rate":
            return cls(kind, (cfg.transition_low, cfg.transition_high), ("low", "mid", "high"))
        if kind == "domain-count":
            return cls(kind, (), ("1", "2", "3", "4+"))
        return cls(kind, (float(cfg.few_shot_threshold),), ("few-shot", "regular"))


@dataclass
class BucketResult:
    size: int
    ndcg10: Optional[float]


@dataclass
class GroupResult:
    kind: str
    buckets: Dict[str, BucketResult] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Dict[str, object]]:
        return {label: {"size": b.size, "ndcg@10": b.ndcg10} for label, b in self.buckets.items()}


def transition_rate(domains: Sequence[int]) -> float:
    """Fraction of adjacent pairs whose domains differ; 0 for a single item."""
    d = np.asarray(domains)
    if d.size < 2:
        return 0.0
    return float((d[1:] != d[:-1]).sum() / (d.size - 1))


def assign_bucket(inst: Instance, spec: GroupSpec) -> str:
    if spec.kind == "target-transition":
        crosses = bool(inst.prefix_domains) and inst.prefix_domains[-1] != inst.target_domain
        return spec.labels[0] if crosses else spec.labels[1]
    if spec.kind == "transition-rate":
        low, high = spec.boundaries
        r = transition_rate(inst.prefix_domains)
        if r < low:
            return "low"
        return "mid" if r < high else "high"
    if spec.kind == "domain-count":
        n = len(set(inst.prefix_domains))
        return str(n) if n < 4 else "4+"
    in_domain = sum(1 for d in inst.prefix_domains if d == inst.target_domain)
    return spec.labels[0] if in_domain < spec.boundaries[0] else spec.labels[1]


def group_metrics(instances: Sequence[Instance], ranks: Sequence[int], spec: GroupSpec) -> GroupResult:
    """Per-bucket mean NDCG@10 and bucket sizes."""
    values = ndcg_values(ranks, 10) if len(ranks) else np.zeros(0)
    members: Dict[str, List[int]] = {label: [] for label in spec.labels}
    for i, inst in enumerate(instances):
        members[assign_bucket(inst, spec)].append(i)
    result = GroupResult(kind=spec.kind)
    for label, idx in members.items():
        score = float(values[idx].mean()) if idx else None
        result.buckets[label] = BucketResult(size=len(idx), ndcg10=score)
    return result
