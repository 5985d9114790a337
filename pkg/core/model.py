"""
GMFlowRec model: dual-masked encoder, aligned prior and mixture flow head
bound to one parameter store.
"""
import os
import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from autodiff import ops
from autodiff.graph import Graph, ParameterStore, Var
from config.run_config import RunConfig
from core.encoder import (
    Dropout,
    SequenceBatch,
    aligned_prior_batch,
    batch_masks,
    embed_batch,
    encode,
    last_states,
    make_batch,
)
from core.gmflow import SolverConfig, gm_ode_solve, gmm_head, gmm_head_graph, gmm_nll_graph, score_items
from core.params import init_parameters
from data.records import Instance, Vocab
from training.losses import LossTerms, domain_cross_entropy, total_loss


@dataclass
class EncodedBatch:
    x1: Var     # (B, d) last domain-invariant state
    h_da: Var   # (B, d) domain-aligned prior


class GMFlowRecModel:
    """
    Args:
        cfg: Run configuration (encoder, flow and loss sections are read)
        vocab: Item vocabulary the embedding table is sized for
        params: Existing parameters; freshly initialised from `seed` when omitted
        seed: Initialisation seed, defaults to cfg.seed
    """

    def __init__(
        self,
        cfg: RunConfig,
        vocab: Vocab,
        params: Optional[ParameterStore] = None,
        seed: Optional[int] = None,
    ):
        self.cfg = cfg
        self.vocab = vocab
        if params is None:
            params = init_parameters(
                vocab.num_items,
                vocab.num_domains,
                cfg.encoder,
                cfg.flow,
                seed=cfg.seed if seed is None else seed,
            )
        self.params = params

    @property
    def item_embeddings(self) -> np.ndarray:
        return self.params["emb.item"]

    def encode_batch(self, graph: Graph, batch: SequenceBatch, dropout: Optional[Dropout] = None) -> EncodedBatch:
        x = embed_batch(graph, batch)
        masks = batch_masks(batch)
        H_DI = encode(x, masks["di"], self.cfg.encoder, dropout)
        if self.cfg.flow.use_ds_prior:
            H_DS = encode(x, masks["ds"], self.cfg.encoder, dropout)
        else:
            H_DS = H_DI
        return EncodedBatch(x1=last_states(H_DI), h_da=aligned_prior_batch(graph, H_DS, batch))

    def forward_losses(
        self,
        graph: Graph,
        batch: SequenceBatch,
        t: np.ndarray,
        dropout: Optional[Dropout] = None,
    ) -> LossTerms:
        """One training step's forward pass: encoder, prior, flow head and all three losses."""
        enc = self.encode_batch(graph, batch, dropout)
        flow = self.cfg.flow
        d = enc.x1.shape[-1]

        x0 = ops.gather(graph.param("emb.item"), batch.target_items)
        t_col = np.repeat(np.asarray(t, dtype=np.float64)[:, None], d, axis=1)
        xt = x0 * graph.constant(1.0 - t_col) + enc.x1 * graph.constant(t_col)
        xbar = ops.affine(xt, flow.lam) + ops.affine(enc.x1, 1.0 - flow.lam)

        head = gmm_head_graph(xbar, enc.h_da, t, flow)
        item_table = graph.param("emb.item")
        rec = domain_cross_entropy(head.mu, item_table, batch.target_items, batch.target_domains, self.vocab)
        prior = domain_cross_entropy(enc.h_da, item_table, batch.target_items, batch.target_domains, self.vocab)
        gmm = gmm_nll_graph(head.logits, head.means, head.sigma, x0)
        weights = self.cfg.loss
        if not flow.use_aligned_prior:
            weights = weights.model_copy(update={"alpha": 0.0})
        return total_loss(rec, prior, gmm, weights)

    def infer(
        self,
        batch: SequenceBatch,
        steps: Optional[int] = None,
        velocity_mode: Optional[str] = None,
    ) -> np.ndarray:
        """Estimated target embeddings x̂0, one row per instance."""
        flow = self.cfg.flow
        graph = Graph(self.params)
        enc = self.encode_batch(graph, batch)
        x1 = enc.x1.value.copy()
        h_da = enc.h_da.value.copy()

        def head(xbar, h, t):
            return gmm_head(xbar, h, t, self.params, flow)

        solver = SolverConfig(
            steps=flow.steps if steps is None else steps,
            lam=flow.lam,
            velocity_mode=velocity_mode or flow.velocity_mode,
        )
        return gm_ode_solve(x1, h_da, head, solver)

    def score_candidates(self, instances: Sequence[Instance], steps: Optional[int] = None) -> List[np.ndarray]:
        """
        Scores of [positive, *negatives] for each evaluation instance.

        Index 0 of every returned array is the positive.
        """
        xhat0 = self.infer(make_batch(instances), steps=steps)
        table = self.item_embeddings
        out = []
        for row, inst in enumerate(instances):
            candidates = np.concatenate([[inst.target_item], np.asarray(inst.negatives, dtype=np.int64)])
            out.append(score_items(xhat0[row], table[candidates]))
        return out
