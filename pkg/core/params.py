"""
Parameter layout and initialisation.

Names are dotted paths: `emb.*` embedding tables, `enc.<layer>.*` the
shared transformer, `head.*` the Gaussian-mixture MLP.
"""
import os
import sys

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from autodiff.graph import ParameterStore
from config.run_config import EncoderConfig, FlowConfig


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def head_input_dim(dim: int, flow: FlowConfig) -> int:
    # [xbar || h_DA || time features]
    return 2 * dim + flow.time_features


def init_parameters(
    num_items: int,
    num_domains: int,
    encoder: EncoderConfig,
    flow: FlowConfig,
    seed: int = 0,
) -> ParameterStore:
    """Fresh parameters for the full model, deterministic in `seed`."""
    rng = np.random.default_rng([seed, 0x5EED])
    d = encoder.dim
    scale = 1.0 / np.sqrt(d)
    params = ParameterStore()

    params.add("emb.item", rng.normal(0.0, scale, size=(num_items, d)))
    params.add("emb.domain", rng.normal(0.0, scale, size=(num_domains, d)))
    params.add("emb.pos", rng.normal(0.0, scale, size=(encoder.max_len, d)))

    for layer in range(encoder.layers):
        p = f"enc.{layer}."
        params.add(p + "ln1.gamma", np.ones(d))
        params.add(p + "ln1.beta", np.zeros(d))
        for proj in ("q", "k", "v", "o"):
            params.add(p + f"attn.w{proj}", _xavier(rng, d, d))
            params.add(p + f"attn.b{proj}", np.zeros(d))
        params.add(p + "ln2.gamma", np.ones(d))
        params.add(p + "ln2.beta", np.zeros(d))
        params.add(p + "ffn.w1", _xavier(rng, d, d))
        params.add(p + "ffn.b1", np.zeros(d))
        params.add(p + "ffn.w2", _xavier(rng, d, d))
        params.add(p + "ffn.b2", np.zeros(d))
    params.add("enc.final.gamma", np.ones(d))
    params.add("enc.final.beta", np.zeros(d))

    hidden = flow.hidden_mult * d
    K = flow.num_components
    fan_in = head_input_dim(d, flow)
    params.add("head.w1", _xavier(rng, fan_in, hidden))
    params.add("head.b1", np.zeros(hidden))
    params.add("head.w2", _xavier(rng, hidden, hidden))
    params.add("head.b2", np.zeros(hidden))
    params.add("head.w_logit", _xavier(rng, hidden, K))
    params.add("head.b_logit", np.zeros(K))
    params.add("head.w_mean", _xavier(rng, hidden, K * d))
    params.add("head.b_mean", np.zeros(K * d))
    params.add("head.w_logscale", _xavier(rng, hidden, K))
    params.add("head.b_logscale", np.zeros(K))
    return params
