"""
Shared toy fixtures: a small synthetic split and a small model config.
"""
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config.run_config import (
    DataConfig,
    EncoderConfig,
    FlowConfig,
    LossWeights,
    RunConfig,
    SynthConfig,
    TrainConfig,
)
from data.preprocess import build_sequences
from data.records import Vocab
from data.split import leave_one_out_split
from data.synth import synth_generate

TOY_DOMAINS = 3
TOY_ITEMS = 12
TOY_NEGATIVES = 5


def toy_synth_config(num_users: int = 30, seed: int = 3) -> SynthConfig:
    return SynthConfig(
        num_domains=TOY_DOMAINS,
        items_per_domain=TOY_ITEMS,
        num_users=num_users,
        min_len=6,
        max_len=10,
        seed=seed,
    )


def toy_vocab() -> Vocab:
    return Vocab([[f"d{d}_i{i:04d}" for i in range(TOY_ITEMS)] for d in range(TOY_DOMAINS)])


def toy_split(num_users: int = 30, seed: int = 3):
    records = synth_generate(toy_synth_config(num_users, seed))
    vocab = toy_vocab()
    sequences = build_sequences(records, vocab, max_len=10)
    return leave_one_out_split(sequences, vocab, seed=seed, num_negatives=TOY_NEGATIVES, max_len=10)


def toy_run_config(**overrides) -> RunConfig:
    values = dict(
        data=DataConfig(user_core=1, item_core=1, max_len=10, num_negatives=TOY_NEGATIVES),
        encoder=EncoderConfig(dim=8, layers=1, heads=2, dropout=0.0, max_len=10),
        flow=FlowConfig(num_components=2, hidden_mult=2, time_features=4, steps=2),
        loss=LossWeights(alpha=0.1, beta=0.01),
        train=TrainConfig(lr=1e-3, batch_size=16, max_epochs=2, patience=2),
    )
    values.update(overrides)
    return RunConfig(**values)


@pytest.fixture
def split():
    return toy_split()


@pytest.fixture
def run_config():
    return toy_run_config()
