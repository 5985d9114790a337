"""
On-disk split directories.

    manifest.json   counts, seed, config hash, num_negatives, max_len
    vocab.json      per-domain item ids in dense-index order
    train.npz       prefix matrix (left-aligned, -1 padded), lengths,
    valid.npz       prefix domains, targets, target domains, user ids,
    test.npz        negatives (evaluation splits only)
"""
import json
import os
import sys
from typing import Any, Dict, List, Optional

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.exceptions import IoError
from .records import Instance, SplitDataset, Vocab

MANIFEST = "manifest.json"
VOCAB = "vocab.json"
PAD = -1


def _pack(instances: List[Instance], num_negatives: int) -> Dict[str, np.ndarray]:
    n = len(instances)
    width = max((inst.prefix_length for inst in instances), default=0)
    items = np.full((n, width), PAD, dtype=np.int64)
    domains = np.full((n, width), PAD, dtype=np.int64)
    has_negatives = n > 0 and instances[0].negatives is not None
    negatives = np.zeros((n, num_negatives if has_negatives else 0), dtype=np.int64)
    for row, inst in enumerate(instances):
        items[row, :inst.prefix_length] = inst.prefix_items
        domains[row, :inst.prefix_length] = inst.prefix_domains
        if has_negatives:
            negatives[row] = inst.negatives
    return {
        "prefix_items": items,
        "prefix_domains": domains,
        "lengths": np.array([inst.prefix_length for inst in instances], dtype=np.int64),
        "targets": np.array([inst.target_item for inst in instances], dtype=np.int64),
        "target_domains": np.array([inst.target_domain for inst in instances], dtype=np.int64),
        "user_ids": np.array([inst.user_id for inst in instances], dtype=str),
        "negatives": negatives,
    }


def _unpack(arrays) -> List[Instance]:
    instances = []
    has_negatives = arrays["negatives"].shape[1] > 0
    for row, length in enumerate(arrays["lengths"]):
        instances.append(Instance(
            user_id=str(arrays["user_ids"][row]),
            prefix_items=arrays["prefix_items"][row, :length].tolist(),
            prefix_domains=arrays["prefix_domains"][row, :length].tolist(),
            target_item=int(arrays["targets"][row]),
            target_domain=int(arrays["target_domains"][row]),
            negatives=arrays["negatives"][row].copy() if has_negatives else None,
            instance_id=row,
        ))
    return instances


def save_split(split: SplitDataset, out_dir: str, extra: Optional[Dict[str, Any]] = None) -> str:
    """Write a split directory; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    for name in ("train", "valid", "test"):
        np.savez(os.path.join(out_dir, f"{name}.npz"), **_pack(getattr(split, name), split.num_negatives))
    with open(os.path.join(out_dir, VOCAB), "w", encoding="utf-8") as f:
        json.dump(split.vocab.to_dict(), f)
    manifest = {
        "counts": split.counts(),
        "seed": split.seed,
        "num_negatives": split.num_negatives,
        "max_len": split.max_len,
        **(extra or {}),
    }
    path = os.path.join(out_dir, MANIFEST)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return path


def load_split(split_dir: str) -> SplitDataset:
    """Read a split directory written by save_split."""
    manifest_path = os.path.join(split_dir, MANIFEST)
    if not os.path.exists(manifest_path):
        raise IoError(f"No split manifest in {split_dir}")
    with open(manifest_path, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    with open(os.path.join(split_dir, VOCAB), "r", encoding="utf-8") as f:
        vocab = Vocab.from_dict(json.load(f))

    split = SplitDataset(
        vocab=vocab,
        num_negatives=manifest["num_negatives"],
        seed=manifest["seed"],
        max_len=manifest["max_len"],
    )
    for name in ("train", "valid", "test"):
        with np.load(os.path.join(split_dir, f"{name}.npz")) as arrays:
            setattr(split, name, _unpack(arrays))
    return split


def split_exists(split_dir: Optional[str]) -> bool:
    return bool(split_dir) and os.path.exists(os.path.join(split_dir, MANIFEST))
