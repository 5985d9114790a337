"""
Leave-one-out splitting and negative sampling.
"""
import hashlib
import logging
import os
import sys
from typing import List, Sequence

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.exceptions import InsufficientCandidatesError
from .records import Instance, SplitDataset, UserSequence, Vocab

logger = logging.getLogger(__name__)

SPLIT_CODES = {"train": 0, "valid": 1, "test": 2}


def user_key(user_id: str) -> int:
    """Stable 32-bit key for seeding per-user generators."""
    return int(hashlib.sha256(user_id.encode("utf-8")).hexdigest()[:8], 16)


def instance_rng(seed: int, user_id: str, split: str) -> np.random.Generator:
    return np.random.default_rng([seed, user_key(user_id), SPLIT_CODES[split]])


def sample_negatives(
    vocab: Vocab,
    domain: int,
    positive: int,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Distinct in-domain items other than the positive, without replacement.

    Raises:
        InsufficientCandidatesError: the domain has fewer than count + 1 items
    """
    start, stop = vocab.domain_range(domain)
    available = stop - start - 1
    if available < count:
        raise InsufficientCandidatesError(
            f"domain {domain} has {available} candidates, {count} negatives requested"
        )
    candidates = np.arange(start, stop - 1, dtype=np.int64)
    # Skip over the positive so the candidate range stays contiguous
    candidates[candidates >= positive] += 1
    return np.sort(rng.choice(candidates, size=count, replace=False))


def _window(items: Sequence[int], domains: Sequence[int], max_len: int):
    return list(items[-max_len:]), list(domains[-max_len:])


def leave_one_out_split(
    sequences: List[UserSequence],
    vocab: Vocab,
    seed: int = 0,
    num_negatives: int = 999,
    max_len: int = 50,
) -> SplitDataset:
    """
    Last item to test, second-to-last to validation, sliding windows over the rest to training.

    Sequences shorter than 3 are excluded with a warning.
    """
    split = SplitDataset(vocab=vocab, num_negatives=num_negatives, seed=seed, max_len=max_len)
    excluded = 0
    for seq in sequences:
        if seq.length < 3:
            excluded += 1
            continue
        items, domains = seq.items, seq.domains

        for name, cut in (("valid", seq.length - 2), ("test", seq.length - 1)):
            rng = instance_rng(seed, seq.user_id, name)
            prefix_items, prefix_domains = _window(items[:cut], domains[:cut], max_len)
            target, target_domain = items[cut], domains[cut]
            instances = getattr(split, name)
            instances.append(Instance(
                user_id=seq.user_id,
                prefix_items=prefix_items,
                prefix_domains=prefix_domains,
                target_item=target,
                target_domain=target_domain,
                negatives=sample_negatives(vocab, target_domain, target, num_negatives, rng),
                instance_id=len(instances),
            ))

        head = seq.length - 2
        for j in range(1, head):
            prefix_items, prefix_domains = _window(items[:j], domains[:j], max_len)
            split.train.append(Instance(
                user_id=seq.user_id,
                prefix_items=prefix_items,
                prefix_domains=prefix_domains,
                target_item=items[j],
                target_domain=domains[j],
                instance_id=len(split.train),
            ))

    if excluded:
        logger.warning("Excluded %d sequences shorter than 3 interactions", excluded)
    logger.info("Split: %s", split.counts())
    return split
