"""
Ranking metrics for a single relevant item per instance.

With one positive the ideal DCG is 1, so NDCG@K reduces to
1 / log2(rank + 1) inside the cutoff and 0 outside it.
"""
import os
import sys
from typing import Dict, Sequence

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.exceptions import ConfigError, EmptyEvalError

CUTOFFS = (5, 10)


def _as_ranks(ranks: Sequence[int], K: int) -> np.ndarray:
    if K < 1:
        raise ConfigError(f"cutoff K must be at least 1, got {K}")
    ranks = np.asarray(ranks, dtype=np.int64)
    if ranks.size == 0:
        raise EmptyEvalError("no ranks to evaluate")
    return ranks


def hit_rate(ranks: Sequence[int], K: int) -> float:
    """Fraction of instances whose positive ranks within the top K."""
    ranks = _as_ranks(ranks, K)
    return float((ranks <= K).mean())


def ndcg_values(ranks: Sequence[int], K: int) -> np.ndarray:
    ranks = _as_ranks(ranks, K)
    return np.where(ranks <= K, 1.0 / np.log2(ranks + 1.0), 0.0)


def ndcg(ranks: Sequence[int], K: int) -> float:
    """Mean NDCG@K."""
    return float(ndcg_values(ranks, K).mean())


def domain_metrics(ranks: Sequence[int], domains: Sequence[int]) -> Dict[int, Dict[str, float]]:
    """HR@5/10 and NDCG@5/10 per target domain present in the input."""
    ranks = np.asarray(ranks, dtype=np.int64)
    domains = np.asarray(domains, dtype=np.int64)
    if ranks.size == 0:
        raise EmptyEvalError("no ranks to evaluate")
    out = {}
    for d in np.unique(domains):
        sel = ranks[domains == d]
        row = {}
        for k in CUTOFFS:
            row[f"hr@{k}"] = hit_rate(sel, k)
            row[f"ndcg@{k}"] = ndcg(sel, k)
        row["count"] = int(sel.size)
        out[int(d)] = row
    return out


def group_ndcg(per_domain: Dict[int, Dict[str, float]], K: int = 10) -> float:
    """Unweighted mean of per-domain NDCG@K."""
    if not per_domain:
        raise EmptyEvalError("no domains to average")
    return float(np.mean([row[f"ndcg@{K}"] for row in per_domain.values()]))
