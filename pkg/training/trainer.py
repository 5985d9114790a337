"""
Training loop with validation-driven early stopping.

Each batch: sample t ~ U(0, 1) per instance, encode under both masks,
build the aligned prior, fuse the interpolated latent, run the mixture
head, compute the three losses, backpropagate and take one Adam step.
"""
import itertools
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from autodiff.checkpoint import save_checkpoint
from autodiff.graph import Graph
from config import settings
from config.run_config import RunConfig, TrainConfig
from core.encoder import Dropout, make_batch
from core.exceptions import EmptyDatasetError, NumericsError
from core.model import GMFlowRecModel
from data.records import Instance, SplitDataset
from evaluation.evaluator import evaluate
from evaluation.rankers import ModelRanker
from .optimizer import Adam, OptimizerState

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["epoch", "loss_rec", "loss_prior", "loss_gmm", "val_ndcg10", "seconds"]
CHECKPOINT_NAME = "best.ckpt"
LOG_NAME = "train_log.csv"


@dataclass
class EpochStats:
    epoch: int
    loss_rec: float
    loss_prior: float
    loss_gmm: float
    loss_total: float
    seconds: float
    n_batches: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class StopDecision:
    stop: bool
    best_index: int


@dataclass
class TrainResult:
    epochs: List[EpochStats] = field(default_factory=list)
    val_history: List[float] = field(default_factory=list)
    best_epoch: Optional[int] = None
    best_val_ndcg10: Optional[float] = None
    stopped_early: bool = False
    checkpoint_path: Optional[str] = None
    log_path: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epochs": [e.to_dict() for e in self.epochs],
            "val_history": self.val_history,
            "best_epoch": self.best_epoch,
            "best_val_ndcg10": self.best_val_ndcg10,
            "stopped_early": self.stopped_early,
            "checkpoint_path": self.checkpoint_path,
            "log_path": self.log_path,
        }


def early_stop(history: Sequence[float], patience: int) -> StopDecision:
    """
    Stop once `patience` evaluations in a row fail to beat the best so far.

    The first occurrence of the maximum is the best; equal values do not
    count as improvement.
    """
    if not history:
        raise ValueError("early_stop needs at least one evaluation")
    best = int(np.argmax(np.asarray(history)))
    return StopDecision(stop=len(history) - 1 - best >= patience, best_index=best)


def grid(cfg: TrainConfig) -> List[Dict[str, float]]:
    """All (alpha, beta, K) combinations of the configured grids."""
    return [
        {"alpha": a, "beta": b, "num_components": k}
        for a, b, k in itertools.product(cfg.alpha_grid, cfg.beta_grid, cfg.k_grid)
    ]


def sample_timesteps(rng: np.random.Generator, size: int) -> np.ndarray:
    """t ~ U(0, 1), one per instance."""
    return rng.random(size)


def train_epoch(
    instances: Sequence[Instance],
    model: GMFlowRecModel,
    optimizer: Adam,
    cfg: TrainConfig,
    seed: int,
    epoch: int,
    progress: bool = False,
) -> EpochStats:
    """
    One pass over the training instances in a seeded shuffled order.

    Returned losses are instance-weighted means over the epoch.

    Raises:
        EmptyDatasetError: no training instances
        NumericsError: a forward value became non-finite
    """
    if not instances:
        raise EmptyDatasetError("no training instances")
    order = np.random.default_rng([seed, epoch, 0]).permutation(len(instances))
    t_rng = np.random.default_rng([seed, epoch, 1])
    drop_rng = np.random.default_rng([seed, epoch, 2])
    dropout = Dropout(model.cfg.encoder.dropout, drop_rng)

    sums = {"loss_rec": 0.0, "loss_prior": 0.0, "loss_gmm": 0.0, "loss_total": 0.0}
    n_batches = 0
    start = time.perf_counter()
    starts = range(0, len(instances), cfg.batch_size)
    for s in tqdm(starts, desc=f"epoch {epoch}", disable=not progress, leave=False):
        batch = make_batch([instances[i] for i in order[s:s + cfg.batch_size]])
        t = sample_timesteps(t_rng, batch.size)
        graph = Graph(model.params)
        terms = model.forward_losses(graph, batch, t, dropout)
        grads = graph.backward(terms.total)
        optimizer.step(model.params, grads)
        for key, value in terms.means().items():
            sums[key] += value * batch.size
        n_batches += 1

    n = len(instances)
    return EpochStats(
        epoch=epoch,
        loss_rec=sums["loss_rec"] / n,
        loss_prior=sums["loss_prior"] / n,
        loss_gmm=sums["loss_gmm"] / n,
        loss_total=sums["loss_total"] / n,
        seconds=time.perf_counter() - start,
        n_batches=n_batches,
    )


class Trainer:
    """
    Fits a model on a split and keeps the best validation checkpoint.

    Args:
        cfg: Run configuration
        split: Leave-one-out split (train and valid are used)
        model: Model to train; built from cfg when omitted
        out_dir: Where the checkpoint and training log go; nothing is
            written when omitted
    """

    def __init__(
        self,
        cfg: RunConfig,
        split: SplitDataset,
        model: Optional[GMFlowRecModel] = None,
        out_dir: Optional[str] = None,
    ):
        self.cfg = cfg
        self.split = split
        self.model = model or GMFlowRecModel(cfg, split.vocab, seed=cfg.seed)
        self.out_dir = out_dir
        tc = cfg.train
        self.optimizer = Adam(tc.lr, OptimizerState(beta1=tc.adam_beta1, beta2=tc.adam_beta2, eps=tc.adam_eps))
        self._params_at_checkpoint = self.model.params.snapshot()
        self._optimizer_at_checkpoint = self.optimizer.state.snapshot()

    @property
    def checkpoint_path(self) -> Optional[str]:
        return os.path.join(self.out_dir, CHECKPOINT_NAME) if self.out_dir else None

    @property
    def log_path(self) -> Optional[str]:
        return os.path.join(self.out_dir, LOG_NAME) if self.out_dir else None

    def train_epoch(self, epoch: int) -> EpochStats:
        """Run one epoch; on NumericsError roll back to the last checkpoint and re-raise."""
        try:
            return train_epoch(
                self.split.train,
                self.model,
                self.optimizer,
                self.cfg.train,
                self.cfg.seed,
                epoch,
                progress=settings.show_progress(),
            )
        except NumericsError:
            logger.warning("Non-finite values in epoch %d; restoring the last checkpoint", epoch)
            self.model.params.restore(self._params_at_checkpoint)
            self.optimizer.state = self._optimizer_at_checkpoint.snapshot()
            raise

    def validate(self) -> float:
        """Group NDCG@10 on the validation split."""
        result = evaluate(
            self.split.valid,
            ModelRanker(self.model),
            batch_size=self.cfg.train.batch_size,
            threads=self.cfg.threads,
        )
        return result.group_ndcg10

    def metadata(self, epoch: int, val_ndcg10: Optional[float]) -> Dict[str, Any]:
        return {
            "config_hash": self.cfg.hash,
            "seed": self.cfg.seed,
            "epoch": epoch,
            "val_ndcg10": val_ndcg10,
            "num_items": self.split.vocab.num_items,
            "num_domains": self.split.vocab.num_domains,
        }

    def _checkpoint(self, epoch: int, val: float) -> None:
        self._params_at_checkpoint = self.model.params.snapshot()
        self._optimizer_at_checkpoint = self.optimizer.state.snapshot()
        if self.checkpoint_path:
            save_checkpoint(self.checkpoint_path, self.model.params, self.metadata(epoch, val))

    def _log_epoch(self, stats: EpochStats, val: float) -> None:
        if not self.log_path:
            return
        row = {
            "epoch": stats.epoch,
            "loss_rec": stats.loss_rec,
            "loss_prior": stats.loss_prior,
            "loss_gmm": stats.loss_gmm,
            "val_ndcg10": val,
            "seconds": stats.seconds,
        }
        pd.DataFrame([row], columns=LOG_COLUMNS).to_csv(
            self.log_path,
            mode="a",
            header=not os.path.exists(self.log_path),
            index=False,
            lineterminator="\n",
        )

    def fit(self) -> TrainResult:
        """
        Train for up to max_epochs with early stopping on validation NDCG@10.

        The model ends up holding the best validation parameters. With
        max_epochs == 0 nothing is trained or written.
        """
        result = TrainResult(checkpoint_path=self.checkpoint_path, log_path=self.log_path)
        max_epochs = self.cfg.train.max_epochs
        if max_epochs == 0:
            logger.info("max_epochs is 0; skipping training")
            result.checkpoint_path = None
            result.log_path = None
            return result
        if self.log_path and os.path.exists(self.log_path):
            os.remove(self.log_path)

        for epoch in range(1, max_epochs + 1):
            stats = self.train_epoch(epoch)
            val = self.validate()
            result.epochs.append(stats)
            result.val_history.append(val)
            self._log_epoch(stats, val)
            logger.info(
                "epoch %d: loss %.4f (rec %.4f prior %.4f gmm %.4f) val NDCG@10 %.4f [%.1fs]",
                epoch, stats.loss_total, stats.loss_rec, stats.loss_prior, stats.loss_gmm, val, stats.seconds,
            )

            decision = early_stop(result.val_history, self.cfg.train.patience)
            if decision.best_index == len(result.val_history) - 1:
                self._checkpoint(epoch, val)
            if decision.stop:
                logger.warning(
                    "Early stop after epoch %d: no improvement for %d evaluations",
                    epoch, self.cfg.train.patience,
                )
                result.stopped_early = True
                break

        best = int(np.argmax(result.val_history))
        result.best_epoch = best + 1
        result.best_val_ndcg10 = result.val_history[best]
        self.model.params.restore(self._params_at_checkpoint)
        return result
