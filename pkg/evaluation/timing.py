"""
Wall-clock timing of training epochs and batched inference.

Training is timed on a copy of the parameters so the measured model is
left untouched.
"""
import logging
import os
import sys
import time
from typing import Iterable, Optional, Sequence

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.encoder import make_batch
from core.exceptions import EmptyDatasetError
from core.model import GMFlowRecModel
from data.records import Instance, SplitDataset
from training.optimizer import Adam, OptimizerState
from training.trainer import train_epoch
from .report import TimingReport

logger = logging.getLogger(__name__)

DEFAULT_STEPS = (1, 2, 4, 8, 16)


def epoch_seconds(
    model: GMFlowRecModel,
    instances: Sequence[Instance],
    runs: int = 3,
    batch_size: Optional[int] = None,
) -> float:
    """Median seconds of one training epoch over `instances`, each run on fresh parameter copies."""
    if not instances:
        raise EmptyDatasetError("no training instances to time")
    cfg = model.cfg
    train_cfg = cfg.train if batch_size is None else cfg.train.model_copy(update={"batch_size": batch_size})
    times = []
    for run in range(runs):
        scratch = GMFlowRecModel(cfg, model.vocab, params=model.params.copy())
        opt = Adam(cfg.train.lr, OptimizerState(cfg.train.adam_beta1, cfg.train.adam_beta2, cfg.train.adam_eps))
        stats = train_epoch(instances, scratch, opt, train_cfg, cfg.seed, epoch=run + 1)
        times.append(stats.seconds)
    return float(np.median(times))


def inference_seconds(model: GMFlowRecModel, instances: Sequence[Instance], steps: int, runs: int = 3) -> float:
    """Median seconds to infer x̂0 for one batch with `steps` solver steps."""
    batch = make_batch(instances)
    times = []
    for _ in range(runs):
        start = time.perf_counter()
        model.infer(batch, steps=steps)
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def timing_report(
    model: GMFlowRecModel,
    split: SplitDataset,
    batch_size: int,
    steps: Iterable[int] = DEFAULT_STEPS,
    runs: int = 3,
    max_train_instances: Optional[int] = None,
) -> TimingReport:
    """
    Per-epoch training seconds and per-batch inference seconds per T.

    `batch_size` sets both the training mini-batch and the inference batch.

    Raises:
        EmptyDatasetError: no training or test instances
    """
    runs = max(runs, 3)
    train = split.train[:max_train_instances] if max_train_instances else split.train
    eval_pool = split.test or split.valid
    if not eval_pool:
        raise EmptyDatasetError("no evaluation instances to time")
    infer_batch = eval_pool[:batch_size]

    per_epoch = epoch_seconds(model, train, runs, batch_size)
    per_batch = {str(T): inference_seconds(model, infer_batch, T, runs) for T in steps}
    logger.info("timing: %.3fs per epoch, inference %s", per_epoch, per_batch)
    n_batches = (len(train) + batch_size - 1) // batch_size
    return TimingReport(
        runs=runs,
        batch_size=batch_size,
        train_batches=n_batches,
        train_epoch_seconds=per_epoch,
        infer_batch_seconds=per_batch,
    )
