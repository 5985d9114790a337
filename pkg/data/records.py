"""
Core data types shared by the data pipeline, the model and evaluation.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np


@dataclass(frozen=True)
class InteractionRecord:
    """One raw interaction row."""
    user_id: str
    item_id: str
    domain_id: int
    timestamp: int


@dataclass
class Vocab:
    """
    Disjoint per-domain item vocabularies with one contiguous global index.

    Domain d owns the global index range [offsets[d], offsets[d] + len(domain_items[d])).
    """
    domain_items: List[List[str]]

    def __post_init__(self):
        self.offsets: List[int] = []
        self._index: Dict[str, int] = {}
        start = 0
        domain_of = []
        for d, items in enumerate(self.domain_items):
            self.offsets.append(start)
            for local, item_id in enumerate(items):
                if item_id in self._index:
                    raise ValueError(f"item {item_id} appears in more than one domain")
                self._index[item_id] = start + local
            domain_of.extend([d] * len(items))
            start += len(items)
        self.domain_of = np.asarray(domain_of, dtype=np.int64)

    @property
    def num_domains(self) -> int:
        return len(self.domain_items)

    @property
    def num_items(self) -> int:
        return len(self._index)

    def domain_size(self, domain: int) -> int:
        return len(self.domain_items[domain])

    def domain_range(self, domain: int) -> Tuple[int, int]:
        start = self.offsets[domain]
        return start, start + len(self.domain_items[domain])

    def index(self, item_id: str) -> int:
        return self._index[item_id]

    def item_id(self, global_index: int) -> str:
        d = int(self.domain_of[global_index])
        return self.domain_items[d][global_index - self.offsets[d]]

    def domain_mask(self, domains: np.ndarray) -> np.ndarray:
        """Boolean (B, |V|) mask: True where item belongs to domains[b]."""
        return self.domain_of[None, :] == np.asarray(domains)[:, None]

    def to_dict(self) -> Dict[str, Any]:
        return {"domain_items": self.domain_items}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "Vocab":
        return cls(domain_items=[list(items) for items in payload["domain_items"]])


@dataclass
class UserSequence:
    """Chronological multi-domain interaction list of one user (global item indices)."""
    user_id: str
    items: List[int]
    domains: List[int]

    @property
    def length(self) -> int:
        return len(self.items)


@dataclass
class Instance:
    """
    One prediction case: a prefix and the item that follows it.

    Evaluation instances also carry their negative candidates.
    """
    user_id: str
    prefix_items: List[int]
    prefix_domains: List[int]
    target_item: int
    target_domain: int
    negatives: Optional[np.ndarray] = None
    instance_id: int = 0

    @property
    def prefix_length(self) -> int:
        return len(self.prefix_items)


@dataclass
class SplitDataset:
    """Leave-one-out split of a set of user sequences."""
    vocab: Vocab
    train: List[Instance] = field(default_factory=list)
    valid: List[Instance] = field(default_factory=list)
    test: List[Instance] = field(default_factory=list)
    num_negatives: int = 999
    seed: int = 0
    max_len: int = 50

    def counts(self) -> Dict[str, int]:
        return {
            "train": len(self.train),
            "valid": len(self.valid),
            "test": len(self.test),
            "items": self.vocab.num_items,
            "domains": self.vocab.num_domains,
        }
