"""
Candidate scorers sharing one interface, so the trained model, an
untrained model and a popularity baseline run through the same
evaluation path.
"""
import os
import sys
from abc import ABC, abstractmethod
from typing import List, Optional, Sequence

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.model import GMFlowRecModel
from data.records import Instance, Vocab


class BaseRanker(ABC):
    """Base class for everything that scores evaluation candidates."""

    name: str = "ranker"

    @abstractmethod
    def score(self, instances: Sequence[Instance]) -> List[np.ndarray]:
        """Scores of [positive, *negatives] per instance (positive at index 0)."""
        pass


class ModelRanker(BaseRanker):
    """
    Scores candidates with x̂0 from the GM-ODE solver.

    Args:
        model: Trained or freshly initialised model
        steps: Solver steps; the model's configured T when omitted
    """

    def __init__(self, model: GMFlowRecModel, steps: Optional[int] = None, name: str = "gmflowrec"):
        self.model = model
        self.steps = steps
        self.name = name

    def score(self, instances: Sequence[Instance]) -> List[np.ndarray]:
        return self.model.score_candidates(instances, steps=self.steps)


class PopularityRanker(BaseRanker):
    """Item interaction counts over the training instances (targets and prefixes)."""

    name = "popularity"

    def __init__(self, vocab: Vocab, train: Sequence[Instance]):
        counts = np.zeros(vocab.num_items, dtype=np.float64)
        # one window per user: the longest holds the whole training history
        longest = {}
        for inst in train:
            if inst.user_id not in longest or inst.prefix_length > longest[inst.user_id].prefix_length:
                longest[inst.user_id] = inst
        for inst in longest.values():
            np.add.at(counts, np.asarray(inst.prefix_items, dtype=np.int64), 1.0)
            counts[inst.target_item] += 1.0
        self.counts = counts

    def score(self, instances: Sequence[Instance]) -> List[np.ndarray]:
        out = []
        for inst in instances:
            candidates = np.concatenate([[inst.target_item], np.asarray(inst.negatives, dtype=np.int64)])
            out.append(self.counts[candidates])
        return out
