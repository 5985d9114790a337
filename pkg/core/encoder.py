"""
Dual-masked sequence encoder.

One transformer stack is run twice over the same embedded sequence:
under a causal mask (domain-invariant states) and under a causal
same-domain mask (domain-specific states). The domain-aligned prior is
read off the domain-specific states at the latest in-domain position.
"""
import os
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from autodiff import ops
from autodiff.graph import Graph, ParameterStore, Var
from config.run_config import EncoderConfig
from core.exceptions import ShapeError
from data.records import Instance, UserSequence


@dataclass
class EmbeddingTables:
    """Item, domain and positional embedding rows (read-only views)."""
    item: np.ndarray
    domain: np.ndarray
    pos: np.ndarray

    @classmethod
    def from_params(cls, params: ParameterStore) -> "EmbeddingTables":
        return cls(item=params["emb.item"], domain=params["emb.domain"], pos=params["emb.pos"])

    @property
    def dim(self) -> int:
        return self.item.shape[1]


@dataclass
class EncoderOutput:
    """Per-position states of one sequence plus its aligned prior."""
    H_DI: np.ndarray
    H_DS: np.ndarray
    h_DA: np.ndarray

    @property
    def last_state(self) -> np.ndarray:
        return self.H_DI[-1]


@dataclass
class SequenceBatch:
    """
    Right-aligned padded batch: real items occupy the last `lengths[b]` columns.

    Padding columns reuse index 0 for every table and are masked out of
    both attention masks, so they never reach a real position or a loss.
    """
    items: np.ndarray           # (B, L)
    domains: np.ndarray         # (B, L)
    positions: np.ndarray       # (B, L)
    valid: np.ndarray           # (B, L) bool
    lengths: np.ndarray         # (B,)
    target_items: np.ndarray    # (B,)
    target_domains: np.ndarray  # (B,)
    prior_index: np.ndarray     # (B,) column of the latest in-domain item, 0 when cold
    has_prior: np.ndarray       # (B,) bool

    @property
    def size(self) -> int:
        return self.items.shape[0]

    @property
    def width(self) -> int:
        return self.items.shape[1]


def make_batch(instances: Sequence[Instance]) -> SequenceBatch:
    B = len(instances)
    L = max(inst.prefix_length for inst in instances)
    items = np.zeros((B, L), dtype=np.int64)
    domains = np.zeros((B, L), dtype=np.int64)
    positions = np.zeros((B, L), dtype=np.int64)
    valid = np.zeros((B, L), dtype=bool)
    prior_index = np.zeros(B, dtype=np.int64)
    has_prior = np.zeros(B, dtype=bool)
    for b, inst in enumerate(instances):
        M = inst.prefix_length
        start = L - M
        items[b, start:] = inst.prefix_items
        domains[b, start:] = inst.prefix_domains
        positions[b, start:] = np.arange(M)
        valid[b, start:] = True
        hits = [m for m, d in enumerate(inst.prefix_domains) if d == inst.target_domain]
        if hits:
            prior_index[b] = start + hits[-1]
            has_prior[b] = True
    return SequenceBatch(
        items=items,
        domains=domains,
        positions=positions,
        valid=valid,
        lengths=np.array([inst.prefix_length for inst in instances], dtype=np.int64),
        target_items=np.array([inst.target_item for inst in instances], dtype=np.int64),
        target_domains=np.array([inst.target_domain for inst in instances], dtype=np.int64),
        prior_index=prior_index,
        has_prior=has_prior,
    )


# Masks

def build_di_mask(M: int) -> np.ndarray:
    """Causal mask: mask[m][n] = n <= m."""
    if M < 1:
        raise ShapeError("sequence length must be at least 1")
    return np.tril(np.ones((M, M), dtype=bool))


def build_ds_mask(domains: Sequence[int]) -> np.ndarray:
    """Causal same-domain mask: mask[m][n] = (domains[m] == domains[n]) and n <= m."""
    d = np.asarray(domains)
    same = d[:, None] == d[None, :]
    return build_di_mask(len(d)) & same


def batch_masks(batch: SequenceBatch) -> Dict[str, np.ndarray]:
    """(B, 1, L, L) masks for both passes; padding rows attend only to themselves."""
    L = batch.width
    causal = build_di_mask(L)[None]
    pair_valid = batch.valid[:, :, None] & batch.valid[:, None, :]
    eye = np.eye(L, dtype=bool)[None]
    di = (causal & pair_valid) | eye
    same = batch.domains[:, :, None] == batch.domains[:, None, :]
    ds = (causal & pair_valid & same) | eye
    return {"di": di[:, None], "ds": ds[:, None]}


# Embedding

def embed_sequence(seq: UserSequence, tables: EmbeddingTables) -> np.ndarray:
    """x_m = Emb(i_m) + D(d_m) + Pos(m), as an (M, d) array."""
    if seq.length > tables.pos.shape[0]:
        raise ShapeError(f"sequence length {seq.length} exceeds max_len {tables.pos.shape[0]}")
    items = np.asarray(seq.items, dtype=np.int64)
    domains = np.asarray(seq.domains, dtype=np.int64)
    for name, idx, table in (("item", items, tables.item), ("domain", domains, tables.domain)):
        if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
            raise IndexError(f"{name} index out of range [0, {table.shape[0]})")
    return tables.item[items] + tables.domain[domains] + tables.pos[np.arange(seq.length)]


def embed_batch(graph: Graph, batch: SequenceBatch) -> Var:
    item = ops.gather(graph.param("emb.item"), batch.items)
    domain = ops.gather(graph.param("emb.domain"), batch.domains)
    pos = ops.gather(graph.param("emb.pos"), batch.positions)
    return item + domain + pos


# Transformer

class Dropout:
    """Inverted dropout with masks drawn from a caller-owned generator; identity when off."""

    def __init__(self, rate: float, rng: Optional[np.random.Generator]):
        self.rate = rate
        self.rng = rng

    @property
    def active(self) -> bool:
        return self.rate > 0 and self.rng is not None

    def __call__(self, x: Var) -> Var:
        if not self.active:
            return x
        keep = (self.rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * x.graph.constant(keep)


def _split_heads(x: Var, heads: int, axes) -> Var:
    B, L, d = x.shape
    return ops.transpose(ops.reshape(x, (B, L, heads, d // heads)), axes)


def self_attention(x: Var, mask: np.ndarray, prefix: str, heads: int) -> Var:
    g = x.graph
    B, L, d = x.shape
    q = ops.linear(x, g.param(prefix + "wq"), g.param(prefix + "bq"))
    k = ops.linear(x, g.param(prefix + "wk"), g.param(prefix + "bk"))
    v = ops.linear(x, g.param(prefix + "wv"), g.param(prefix + "bv"))
    q = _split_heads(q, heads, (0, 2, 1, 3))   # (B, h, L, dh)
    k = _split_heads(k, heads, (0, 2, 3, 1))   # (B, h, dh, L)
    v = _split_heads(v, heads, (0, 2, 1, 3))
    scores = ops.affine(ops.matmul(q, k), 1.0 / np.sqrt(d // heads))
    probs = ops.masked_softmax(scores, mask)
    ctx = ops.transpose(ops.matmul(probs, v), (0, 2, 1, 3))
    ctx = ops.reshape(ctx, (B, L, d))
    return ops.linear(ctx, g.param(prefix + "wo"), g.param(prefix + "bo"))


def encode(x: Var, mask: np.ndarray, cfg: EncoderConfig, dropout: Optional[Dropout] = None) -> Var:
    """
    Pre-norm transformer over (B, L, d) inputs with a (B, 1, L, L) or (L, L) mask.

    Both mask passes call this with the same graph, hence the same bound
    parameter nodes.
    """
    if mask.shape[-1] != x.shape[-2] or not np.all(np.diagonal(mask, axis1=-2, axis2=-1)):
        raise ShapeError("attention mask must be square over the sequence with a true diagonal")
    g = x.graph
    drop = dropout or Dropout(0.0, None)
    h = drop(x)
    for layer in range(cfg.layers):
        p = f"enc.{layer}."
        a = ops.layer_norm(h, g.param(p + "ln1.gamma"), g.param(p + "ln1.beta"))
        h = h + drop(self_attention(a, mask, p + "attn.", cfg.heads))
        f = ops.layer_norm(h, g.param(p + "ln2.gamma"), g.param(p + "ln2.beta"))
        f = ops.linear(ops.gelu(ops.linear(f, g.param(p + "ffn.w1"), g.param(p + "ffn.b1"))),
                       g.param(p + "ffn.w2"), g.param(p + "ffn.b2"))
        h = h + drop(f)
    return ops.layer_norm(h, g.param("enc.final.gamma"), g.param("enc.final.beta"))


def encode_sequence(
    seq: UserSequence,
    params: ParameterStore,
    cfg: EncoderConfig,
    target_domain: int,
) -> EncoderOutput:
    """Both passes plus the aligned prior for one sequence, without dropout."""
    tables = EmbeddingTables.from_params(params)
    graph = Graph(params)
    x = graph.constant(embed_sequence(seq, tables)[None])
    H_DI = encode(x, build_di_mask(seq.length)[None, None], cfg).value[0]
    H_DS = encode(x, build_ds_mask(seq.domains)[None, None], cfg).value[0]
    h_DA = domain_aligned_prior(H_DS, seq.domains, target_domain, tables)
    return EncoderOutput(H_DI=H_DI.copy(), H_DS=H_DS.copy(), h_DA=h_DA)


# Domain-aligned prior

def domain_aligned_prior(
    H_DS: np.ndarray,
    domains: Sequence[int],
    target_domain: int,
    tables: EmbeddingTables,
) -> np.ndarray:
    """H_DS[m*] + D(target) for the latest in-domain position m*, else D(target) alone."""
    if not 0 <= target_domain < tables.domain.shape[0]:
        raise IndexError(f"target domain {target_domain} out of range")
    hits = [m for m, d in enumerate(domains) if d == target_domain]
    if not hits:
        return tables.domain[target_domain].copy()
    return H_DS[hits[-1]] + tables.domain[target_domain]


def aligned_prior_batch(graph: Graph, H: Var, batch: SequenceBatch) -> Var:
    """Batched prior: cold-start rows get exactly the domain embedding."""
    rows = np.arange(batch.size)
    state = ops.take_rows(H, rows, batch.prior_index)
    keep = np.repeat(batch.has_prior[:, None].astype(np.float64), H.shape[-1], axis=1)
    domain = ops.gather(graph.param("emb.domain"), batch.target_domains)
    return state * graph.constant(keep) + domain


def last_states(H: Var) -> Var:
    """Row L-1 of every sequence: the final state under right alignment."""
    B, L = H.shape[0], H.shape[1]
    return ops.take_rows(H, np.arange(B), np.full(B, L - 1))
