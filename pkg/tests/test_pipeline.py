"""
Test cases for the recommendation pipeline.
"""
import os
import sys

import pytest

# Add parent to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config.run_config import TrainConfig, with_overrides
from core.exceptions import ConfigError
from core.pipeline import ABLATIONS, AnalysisResult, RecommendationPipeline, VariantSummary
from data import split_exists
from tests.conftest import toy_run_config, toy_synth_config


class TestPipelineStages:
    """Preparation and training stages."""

    def test_pipeline_initialization(self, tmp_path):
        """Output directory falls back to the config, then the settings default."""
        cfg = toy_run_config(out_dir=str(tmp_path))
        assert RecommendationPipeline(cfg).out_dir == str(tmp_path)
        assert RecommendationPipeline(cfg, out_dir="elsewhere").out_dir == "elsewhere"

    def test_no_dataset_configured(self, tmp_path):
        pipeline = RecommendationPipeline(toy_run_config(), out_dir=str(tmp_path))
        with pytest.raises(ConfigError):
            pipeline.check_inputs()

    def test_prepare_saves_and_reloads(self, tmp_path):
        cfg = toy_run_config(synth=toy_synth_config())
        pipeline = RecommendationPipeline(cfg, out_dir=str(tmp_path))
        split = pipeline.prepare()
        assert split_exists(pipeline.split_dir())

        reloaded = RecommendationPipeline(
            toy_run_config(data=cfg.data.model_copy(update={"split_dir": pipeline.split_dir()})),
            out_dir=str(tmp_path / "other"),
        ).prepare()
        assert reloaded.counts() == split.counts()

    def test_synth_manifest(self, tmp_path):
        result = RecommendationPipeline.synth(toy_synth_config(num_users=10), str(tmp_path / "log.csv"))
        assert result.users == 10
        assert os.path.exists(result.manifest_path)

    def test_train_report(self, tmp_path):
        cfg = toy_run_config(synth=toy_synth_config(), train=TrainConfig(lr=1e-3, batch_size=16, max_epochs=1, patience=1))
        result = RecommendationPipeline(cfg, out_dir=str(tmp_path)).train()
        assert result.report.split == "test"
        assert result.report.config_hash == cfg.hash
        assert os.path.exists(result.report_path)
        assert result.train.best_epoch == 1


class TestAnalysis:
    """Ablations over seeds and the reported checks."""

    def test_unknown_variant(self, tmp_path):
        pipeline = RecommendationPipeline(toy_run_config(synth=toy_synth_config()), out_dir=str(tmp_path))
        with pytest.raises(ConfigError):
            pipeline.analyze(seeds=[0], variants=["w/o encoder"])

    def test_analyze_small(self, tmp_path):
        cfg = toy_run_config(synth=toy_synth_config(), train=TrainConfig(lr=1e-3, batch_size=16, max_epochs=1, patience=1))
        result = RecommendationPipeline(cfg, out_dir=str(tmp_path)).analyze(
            seeds=[0, 1], variants=["full", "w/o gmm loss"], k_sweep=[1]
        )
        assert set(result.variants) == {"full", "w/o gmm loss", "K=1"}
        assert all(len(v.scores) == 2 for v in result.variants.values())
        assert set(result.baselines) == {"popularity", "untrained"}
        assert "full beats popularity" in result.checks
        assert "full >= w/o gmm loss" in result.checks
        assert result.to_dict()["variants"]["full"]["std"] >= 0.0

    def test_checks(self):
        result = AnalysisResult(
            variants={
                "full": VariantSummary("full", [0.30, 0.34]),
                "w/o prior loss": VariantSummary("w/o prior loss", [0.33, 0.33]),
            },
            baselines={"popularity": VariantSummary("popularity", [0.2, 0.2])},
        )
        checks = RecommendationPipeline._checks(result)
        assert checks["full beats popularity"]["passed"]
        assert checks["full >= w/o prior loss"]["passed"]
        assert checks["full >= w/o prior loss"]["tolerance"] == pytest.approx(0.02)

    def test_ablations_are_valid_overrides(self):
        base = toy_run_config()
        for overrides in ABLATIONS.values():
            with_overrides(base, overrides)

    def test_aligned_prior_variant_runs(self, tmp_path):
        """The mixture head without the aligned prior trains and is scored."""
        assert with_overrides(toy_run_config(), ABLATIONS["w/o aligned prior"]).flow.use_aligned_prior is False
        cfg = toy_run_config(synth=toy_synth_config(), train=TrainConfig(lr=1e-3, batch_size=16, max_epochs=1, patience=1))
        result = RecommendationPipeline(cfg, out_dir=str(tmp_path)).analyze(
            seeds=[0], variants=["full", "w/o aligned prior", "plain flow"]
        )
        for name in ("w/o aligned prior", "plain flow"):
            assert len(result.variants[name].scores) == 1
            assert 0.0 <= result.variants[name].mean <= 1.0
