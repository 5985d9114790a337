"""
Core filtering and sequence construction.
"""
import logging
import os
import sys
from typing import List, Tuple

import pandas as pd

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.exceptions import ConfigError, EmptyDatasetError, FormatError
from .records import InteractionRecord, UserSequence, Vocab

logger = logging.getLogger(__name__)


def records_to_frame(records: List[InteractionRecord]) -> pd.DataFrame:
    """DataFrame with an `order` column holding the input position (tie-breaker)."""
    frame = pd.DataFrame(
        [(r.user_id, r.item_id, r.domain_id, r.timestamp) for r in records],
        columns=["user_id", "item_id", "domain_id", "timestamp"],
    )
    frame["order"] = range(len(frame))
    return frame


def build_vocab(frame: pd.DataFrame) -> Vocab:
    """
    Per-domain vocabularies, items sorted by id within each domain.

    Raises:
        FormatError: an item appears under more than one domain
    """
    domains_per_item = frame.groupby("item_id")["domain_id"].nunique()
    conflicting = domains_per_item[domains_per_item > 1]
    if len(conflicting):
        raise FormatError(
            f"{len(conflicting)} items appear in more than one domain, e.g. {conflicting.index[0]}"
        )
    num_domains = int(frame["domain_id"].max()) + 1
    domain_items = []
    for d in range(num_domains):
        items = frame.loc[frame["domain_id"] == d, "item_id"].unique()
        domain_items.append(sorted(items))
    return Vocab(domain_items=domain_items)


def filter_core(
    records: List[InteractionRecord],
    user_core: int = 10,
    item_core: int = 15,
) -> Tuple[List[InteractionRecord], Vocab]:
    """
    Alternate user and item core filters until nothing changes.

    Users need at least `user_core` interactions, items at least
    `item_core`; both bounds are inclusive.

    Returns:
        (surviving records in input order, Vocab built from them)

    Raises:
        EmptyDatasetError: no records survive (or none were given)
    """
    if not records:
        raise EmptyDatasetError("filter_core: no records to filter")

    frame = records_to_frame(records)
    rounds = 0
    while True:
        rounds += 1
        before = len(frame)
        user_counts = frame["user_id"].value_counts()
        frame = frame[frame["user_id"].isin(user_counts[user_counts >= user_core].index)]
        item_counts = frame["item_id"].value_counts()
        frame = frame[frame["item_id"].isin(item_counts[item_counts >= item_core].index)]
        if len(frame) == before:
            break

    if frame.empty:
        raise EmptyDatasetError(
            f"no interactions survive the {user_core}-core user / {item_core}-core item filter"
        )

    logger.info(
        "Core filter kept %d/%d records (%d users, %d items) after %d rounds",
        len(frame), len(records), frame["user_id"].nunique(), frame["item_id"].nunique(), rounds,
    )
    kept = [records[i] for i in frame["order"]]
    return kept, build_vocab(frame)


def build_sequences(
    records: List[InteractionRecord],
    vocab: Vocab,
    max_len: int = 50,
) -> List[UserSequence]:
    """
    Chronological per-user sequences holding the latest `max_len` interactions.

    Ties in timestamp keep input order. Users come out sorted by id.
    """
    if max_len < 3:
        raise ConfigError(f"max_len must be at least 3, got {max_len}")

    frame = records_to_frame(records)
    frame = frame.sort_values(["user_id", "timestamp", "order"], kind="mergesort")
    sequences = []
    for user_id, group in frame.groupby("user_id", sort=True):
        group = group.tail(max_len)
        items = [vocab.index(i) for i in group["item_id"]]
        domains = [int(d) for d in group["domain_id"]]
        sequences.append(UserSequence(user_id=str(user_id), items=items, domains=domains))
    return sequences
