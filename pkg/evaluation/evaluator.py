"""
Sampled-candidate evaluation: rank the positive among its negatives.
"""
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config import settings
from core.exceptions import EmptyEvalError
from data.records import Instance
from .metrics import domain_metrics, group_ndcg
from .rankers import BaseRanker

logger = logging.getLogger(__name__)


@dataclass
class RankedList:
    instance_id: int
    domain: int
    rank: int
    num_candidates: int

    def to_dict(self) -> Dict[str, int]:
        return {"instance_id": self.instance_id, "domain": self.domain, "rank": self.rank}


@dataclass
class EvalResult:
    ranked: List[RankedList] = field(default_factory=list)
    per_domain: Dict[int, Dict[str, float]] = field(default_factory=dict)
    group_ndcg10: float = 0.0

    @property
    def ranks(self) -> np.ndarray:
        return np.array([r.rank for r in self.ranked], dtype=np.int64)

    @property
    def domains(self) -> np.ndarray:
        return np.array([r.domain for r in self.ranked], dtype=np.int64)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "per_domain": {str(d): row for d, row in self.per_domain.items()},
            "group_ndcg@10": self.group_ndcg10,
        }


def positive_rank(scores: np.ndarray) -> int:
    """Rank of scores[0] among all entries; ties count against the positive."""
    scores = np.asarray(scores)
    positive, negatives = scores[0], scores[1:]
    return int(1 + (negatives > positive).sum() + (negatives == positive).sum())


def evaluate_instance(inst: Instance, ranker: BaseRanker) -> RankedList:
    scores = ranker.score([inst])[0]
    return RankedList(inst.instance_id, inst.target_domain, positive_rank(scores), len(scores))


def _rank_chunk(ranker: BaseRanker, chunk: Sequence[Instance]) -> List[RankedList]:
    return [
        RankedList(inst.instance_id, inst.target_domain, positive_rank(scores), len(scores))
        for inst, scores in zip(chunk, ranker.score(chunk))
    ]


def evaluate(
    instances: Sequence[Instance],
    ranker: BaseRanker,
    batch_size: int = 256,
    threads: int = 1,
) -> EvalResult:
    """
    Rank every instance and reduce to per-domain and group metrics.

    Chunks run on a thread pool of `threads` workers; results are
    reassembled in instance order.

    Raises:
        EmptyEvalError: no instances
    """
    if not instances:
        raise EmptyEvalError("no evaluation instances")
    chunks = [instances[i:i + batch_size] for i in range(0, len(instances), batch_size)]
    show = settings.show_progress() and len(chunks) > 1
    ranked: List[RankedList] = []
    if threads <= 1:
        for chunk in tqdm(chunks, desc=f"eval[{ranker.name}]", disable=not show, leave=False):
            ranked.extend(_rank_chunk(ranker, chunk))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = pool.map(lambda c: _rank_chunk(ranker, c), chunks)
            for part in tqdm(results, total=len(chunks), desc=f"eval[{ranker.name}]", disable=not show, leave=False):
                ranked.extend(part)

    result = EvalResult(ranked=ranked)
    result.per_domain = domain_metrics(result.ranks, result.domains)
    result.group_ndcg10 = group_ndcg(result.per_domain)
    logger.debug("%s: group NDCG@10 %.4f over %d instances", ranker.name, result.group_ndcg10, len(ranked))
    return result
