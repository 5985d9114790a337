"""
Recommendation Pipeline

Orchestrates the end-to-end workflow: synthesis, preprocessing, training,
evaluation and the ablation analysis.
"""
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

import sys
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from autodiff.checkpoint import check_compatible, load_checkpoint
from config import settings
from config.run_config import RunConfig, SynthConfig, with_overrides
from core.exceptions import ConfigError
from core.model import GMFlowRecModel
from core.params import init_parameters
from data import (
    SplitDataset,
    build_sequences,
    empirical_transition_rate,
    filter_core,
    ingest,
    leave_one_out_split,
    load_split,
    save_split,
    split_exists,
    synth_generate,
    write_interactions,
)
from evaluation import (
    BaseRanker,
    GroupSpec,
    MetricsReport,
    ModelRanker,
    PopularityRanker,
    build_report,
    evaluate,
    group_metrics,
    write_rank_dump,
    write_report,
)
from evaluation.timing import DEFAULT_STEPS, timing_report
from training.trainer import TrainResult, Trainer

logger = logging.getLogger(__name__)

# Component ablations, applied on top of the run config
ABLATIONS: Dict[str, Dict[str, Any]] = {
    "full": {},
    "w/o gmm loss": {"loss": {"beta": 0.0}},
    "w/o prior loss": {"loss": {"alpha": 0.0}},
    "w/o ds prior": {"flow": {"use_ds_prior": False}},
    "w/o aligned prior": {"flow": {"use_aligned_prior": False}},
    "single gaussian": {"flow": {"num_components": 1}},
    "plain flow": {"flow": {"num_components": 1, "use_aligned_prior": False}},
}

# Variants the full model is expected to match or beat
ORDERING_CHECKS = ("w/o gmm loss", "w/o prior loss")

# Minimum relative margin of the trained model over the reference rankers
LEARNING_FLOOR = 0.2


@dataclass
class SynthResult:
    path: str
    manifest_path: str
    interactions: int
    users: int
    transition_rate: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "path": self.path,
            "manifest_path": self.manifest_path,
            "interactions": self.interactions,
            "users": self.users,
            "transition_rate": self.transition_rate,
        }


@dataclass
class TrainRunResult:
    train: TrainResult
    report: MetricsReport
    report_path: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "train": self.train.to_dict(),
            "report": self.report.model_dump(mode="json"),
            "report_path": self.report_path,
        }


@dataclass
class VariantSummary:
    name: str
    scores: List[float] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores))

    @property
    def std(self) -> float:
        return float(np.std(self.scores))

    def to_dict(self) -> Dict[str, Any]:
        return {"scores": self.scores, "mean": self.mean, "std": self.std}


@dataclass
class AnalysisResult:
    seeds: List[int] = field(default_factory=list)
    variants: Dict[str, VariantSummary] = field(default_factory=dict)
    baselines: Dict[str, VariantSummary] = field(default_factory=dict)
    checks: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    config_hash: str = ""
    processing_time_ms: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seeds": self.seeds,
            "config_hash": self.config_hash,
            "variants": {k: v.to_dict() for k, v in self.variants.items()},
            "baselines": {k: v.to_dict() for k, v in self.baselines.items()},
            "checks": self.checks,
            "processing_time_ms": self.processing_time_ms,
        }


class RecommendationPipeline:
    """
    Runs the workflow stages for one run config.

    Pipeline stages:
    1. Synthesis or ingestion of the interaction log
    2. k-core filtering, sequence building and leave-one-out split
    3. Training with early stopping on validation NDCG@10
    4. Test evaluation with optional grouping and timing sections
    5. Ablation and reference-ranker analysis over several seeds
    """

    def __init__(self, cfg: RunConfig, out_dir: Optional[str] = None):
        self.cfg = cfg
        self.out_dir = out_dir or cfg.out_dir or settings.default_out_dir
        self._split: Optional[SplitDataset] = None

    # Stage 1

    @staticmethod
    def synth(synth_cfg: SynthConfig, out_path: str, seed: Optional[int] = None) -> SynthResult:
        """Write a synthetic interaction log and its manifest next to it."""
        records = synth_generate(synth_cfg, seed=seed)
        write_interactions(records, out_path)
        manifest_path = os.path.splitext(out_path)[0] + ".manifest.json"
        result = SynthResult(
            path=out_path,
            manifest_path=manifest_path,
            interactions=len(records),
            users=synth_cfg.num_users,
            transition_rate=empirical_transition_rate(records),
        )
        manifest = {
            **result.to_dict(),
            "seed": synth_cfg.seed if seed is None else seed,
            "config": synth_cfg.model_dump(mode="json"),
        }
        with open(manifest_path, "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
        return result

    # Stage 2

    def check_inputs(self) -> None:
        """Fail with ConfigError before any compute when no usable dataset is configured."""
        data = self.cfg.data
        if split_exists(data.split_dir):
            return
        if data.interactions_path:
            if not os.path.exists(data.interactions_path):
                raise ConfigError(f"data.interactions_path: file not found: {data.interactions_path}")
            return
        if self.cfg.synth is not None:
            return
        if data.split_dir:
            raise ConfigError(f"data.split_dir: no split manifest in {data.split_dir}")
        raise ConfigError("data: set split_dir, interactions_path or a synth section")

    def split_dir(self) -> str:
        return self.cfg.data.split_dir or os.path.join(self.out_dir, "split")

    def prepare(self, save: bool = True) -> SplitDataset:
        """Load the configured split, or build it from the interaction log (or simulator)."""
        if self._split is not None:
            return self._split
        self.check_inputs()
        data = self.cfg.data
        if split_exists(data.split_dir):
            logger.info("Loading split from %s", data.split_dir)
            self._split = load_split(data.split_dir)
            return self._split

        if data.interactions_path:
            records = ingest(data.interactions_path, data.format)
        else:
            records = synth_generate(self.cfg.synth)
        kept, vocab = filter_core(records, data.user_core, data.item_core)
        sequences = build_sequences(kept, vocab, data.max_len)
        split = leave_one_out_split(
            sequences, vocab, seed=self.cfg.seed, num_negatives=data.num_negatives, max_len=data.max_len
        )
        if save:
            save_split(split, self.split_dir(), extra={"config_hash": self.cfg.hash})
        self._split = split
        return split

    # Stage 3

    def train(self, write_report_file: bool = True) -> TrainRunResult:
        """Train, keep the best validation checkpoint, then evaluate on test."""
        split = self.prepare()
        trainer = Trainer(self.cfg, split, out_dir=self.out_dir)
        result = trainer.fit()
        report = self.report_for(ModelRanker(trainer.model), split, "test")
        path = None
        if write_report_file:
            path = write_report(report, os.path.join(self.out_dir, "metrics_test.json"))
        return TrainRunResult(train=result, report=report, report_path=path)

    # Stage 4

    def load_model(self, checkpoint_path: str) -> GMFlowRecModel:
        """
        Rebuild the model from a checkpoint.

        Raises:
            CheckpointError: unreadable file or shapes incompatible with the config
        """
        split = self.prepare()
        params, meta = load_checkpoint(checkpoint_path)
        expected = init_parameters(
            split.vocab.num_items, split.vocab.num_domains, self.cfg.encoder, self.cfg.flow, seed=self.cfg.seed
        )
        check_compatible(params, expected)
        if meta.get("config_hash") not in (None, self.cfg.hash):
            logger.warning("Checkpoint config hash %s differs from run config %s", meta["config_hash"], self.cfg.hash)
        return GMFlowRecModel(self.cfg, split.vocab, params=params)

    def report_for(
        self,
        ranker: BaseRanker,
        split: SplitDataset,
        split_name: str,
        groups: Sequence[str] = (),
        steps: Optional[int] = None,
        timing_model: Optional[GMFlowRecModel] = None,
        dump_ranks: Optional[str] = None,
    ) -> MetricsReport:
        instances = getattr(split, split_name)
        result = evaluate(instances, ranker, batch_size=self.cfg.train.batch_size, threads=self.cfg.threads)
        group_results = [
            group_metrics(instances, result.ranks, GroupSpec.from_config(kind, self.cfg.groups))
            for kind in groups
        ]
        timing = None
        if timing_model is not None:
            timing = timing_report(timing_model, split, self.cfg.train.batch_size, steps=DEFAULT_STEPS)
        if dump_ranks:
            write_rank_dump(result, dump_ranks)
        return build_report(
            result,
            split=split_name,
            ranker=ranker.name,
            seed=self.cfg.seed,
            config_hash=self.cfg.hash,
            steps=steps or self.cfg.flow.steps,
            groups=group_results,
            timing=timing,
        )

    def evaluate(
        self,
        checkpoint_path: str,
        groups: Sequence[str] = (),
        timing: bool = False,
        steps: Optional[int] = None,
        dump_ranks: Optional[str] = None,
        split_name: str = "test",
    ) -> MetricsReport:
        """Evaluate a checkpoint; `steps` overrides the solver T."""
        model = self.load_model(checkpoint_path)
        split = self.prepare()
        return self.report_for(
            ModelRanker(model, steps=steps),
            split,
            split_name,
            groups=groups,
            steps=steps,
            timing_model=model if timing else None,
            dump_ranks=dump_ranks,
        )

    # Stage 5

    def _trained_score(self, cfg: RunConfig, split: SplitDataset) -> float:
        trainer = Trainer(cfg, split)
        trainer.fit()
        return evaluate(split.test, ModelRanker(trainer.model), cfg.train.batch_size, cfg.threads).group_ndcg10

    def analyze(
        self,
        seeds: Sequence[int] = (0, 1, 2),
        variants: Optional[Sequence[str]] = None,
        k_sweep: Sequence[int] = (),
    ) -> AnalysisResult:
        """
        Train each variant once per seed and compare test group NDCG@10.

        Popularity and untrained-model rankers are scored alongside; the
        learning-floor and ordering checks are reported whether they pass
        or not.
        """
        start = time.time()
        split = self.prepare()
        names = list(variants) if variants is not None else list(ABLATIONS)
        unknown = [n for n in names if n not in ABLATIONS]
        if unknown:
            raise ConfigError(f"unknown ablation variants: {unknown}")
        plan = {name: ABLATIONS[name] for name in names}
        for k in k_sweep:
            plan[f"K={k}"] = {"flow": {"num_components": int(k)}}

        result = AnalysisResult(seeds=list(seeds), config_hash=self.cfg.hash)
        popularity = evaluate(split.test, PopularityRanker(split.vocab, split.train), self.cfg.train.batch_size).group_ndcg10
        result.baselines["popularity"] = VariantSummary("popularity", [popularity] * len(seeds))
        result.baselines["untrained"] = VariantSummary("untrained")

        for seed in seeds:
            base = with_overrides(self.cfg, {"seed": int(seed)})
            untrained = GMFlowRecModel(base, split.vocab)
            result.baselines["untrained"].scores.append(
                evaluate(split.test, ModelRanker(untrained, name="untrained"), base.train.batch_size).group_ndcg10
            )
            for name, overrides in plan.items():
                cfg = with_overrides(base, overrides)
                score = self._trained_score(cfg, split)
                result.variants.setdefault(name, VariantSummary(name)).scores.append(score)
                logger.info("seed %d %-16s group NDCG@10 %.4f", seed, name, score)

        result.checks = self._checks(result)
        for name, check in result.checks.items():
            if not check["passed"]:
                logger.warning("Check failed: %s (%s)", name, check)
        result.processing_time_ms = int((time.time() - start) * 1000)
        return result

    @staticmethod
    def _checks(result: AnalysisResult) -> Dict[str, Dict[str, Any]]:
        checks: Dict[str, Dict[str, Any]] = {}
        full = result.variants.get("full")
        if full is None:
            return checks
        for ref_name, ref in result.baselines.items():
            floor = ref.mean * (1.0 + LEARNING_FLOOR)
            checks[f"full beats {ref_name}"] = {
                "full": full.mean,
                "reference": ref.mean,
                "required": floor,
                "passed": full.mean >= floor,
            }
        for name in ORDERING_CHECKS:
            other = result.variants.get(name)
            if other is None:
                continue
            tolerance = max(full.std, other.std)
            checks[f"full >= {name}"] = {
                "full": full.mean,
                "variant": other.mean,
                "tolerance": tolerance,
                "passed": full.mean + tolerance >= other.mean,
            }
        return checks
