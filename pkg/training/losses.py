"""
Training objectives.

Recommendation and prior losses share one form: cross-entropy of the
target item under a softmax restricted to the target domain's
vocabulary, with logits z . Emb(j).
"""
import os
import sys
from dataclasses import dataclass
from typing import Dict

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from autodiff import ops
from autodiff.graph import Var
from config.run_config import LossWeights
from core.exceptions import DomainMismatchError
from data.records import Vocab


def _check_membership(vocab: Vocab, targets: np.ndarray, domains: np.ndarray) -> None:
    owners = vocab.domain_of[np.asarray(targets)]
    bad = np.flatnonzero(owners != np.asarray(domains))
    if bad.size:
        b = int(bad[0])
        raise DomainMismatchError(
            f"target item {int(np.asarray(targets)[b])} is not in domain {int(np.asarray(domains)[b])}"
        )


def domain_cross_entropy(
    z: Var,
    item_table: Var,
    targets: np.ndarray,
    domains: np.ndarray,
    vocab: Vocab,
) -> Var:
    """
    Per-row -log softmax_{j in V_d}(z . Emb(j))[target] as a (B,) Var.

    Raises:
        DomainMismatchError: a target lies outside its row's domain
    """
    _check_membership(vocab, targets, domains)
    logits = ops.matmul(z, ops.transpose(item_table))           # (B, |V|)
    log_norm = ops.logsumexp(logits, mask=vocab.domain_mask(domains))
    picked = ops.take_rows(logits, np.arange(len(targets)), np.asarray(targets))
    return ops.sub(log_norm, picked)


def _domain_ce_array(z: np.ndarray, target_item: int, target_domain: int, item_embeddings: np.ndarray, vocab: Vocab) -> float:
    _check_membership(vocab, np.array([target_item]), np.array([target_domain]))
    start, stop = vocab.domain_range(target_domain)
    logits = item_embeddings[start:stop] @ np.asarray(z, dtype=np.float64)
    m = logits.max()
    return float(m + np.log(np.exp(logits - m).sum()) - logits[target_item - start])


def prior_loss(h_DA: np.ndarray, target_item: int, target_domain: int, item_embeddings: np.ndarray, vocab: Vocab) -> float:
    """Cross-entropy of the target under the aligned prior."""
    return _domain_ce_array(h_DA, target_item, target_domain, item_embeddings, vocab)


def rec_loss(mu: np.ndarray, target_item: int, target_domain: int, item_embeddings: np.ndarray, vocab: Vocab) -> float:
    """Cross-entropy of the target under the mixture mean."""
    return _domain_ce_array(mu, target_item, target_domain, item_embeddings, vocab)


@dataclass
class LossTerms:
    """Per-instance loss Vars and the weighted batch mean."""
    rec: Var     # (B,)
    prior: Var   # (B,)
    gmm: Var     # (B,)
    per_instance: Var
    total: Var   # scalar

    def means(self) -> Dict[str, float]:
        return {
            "loss_rec": float(self.rec.value.mean()),
            "loss_prior": float(self.prior.value.mean()),
            "loss_gmm": float(self.gmm.value.mean()),
            "loss_total": float(self.total.value),
        }


def total_loss(rec: Var, prior: Var, gmm: Var, weights: LossWeights) -> LossTerms:
    """Mean over instances of rec + alpha * prior + beta * gmm."""
    per_instance = rec
    if weights.alpha != 0.0:
        per_instance = per_instance + ops.affine(prior, weights.alpha)
    if weights.beta != 0.0:
        per_instance = per_instance + ops.affine(gmm, weights.beta)
    return LossTerms(rec=rec, prior=prior, gmm=gmm, per_instance=per_instance, total=ops.mean(per_instance))


def grouped_total(per_instance: np.ndarray, domains: np.ndarray) -> float:
    """Sum the per-domain partial sums, then normalise by the instance count."""
    per_instance = np.asarray(per_instance)
    domains = np.asarray(domains)
    total = sum(per_instance[domains == d].sum() for d in np.unique(domains))
    return float(total / len(per_instance))
