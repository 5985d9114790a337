"""
Test cases for the command-line entry point.
"""
import json
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from cli import main
from core.exceptions import NumericsError
from training.trainer import Trainer
from tests.conftest import TOY_DOMAINS, TOY_ITEMS, TOY_NEGATIVES

TOY_RUN = {
    "synth": {
        "num_domains": TOY_DOMAINS,
        "items_per_domain": TOY_ITEMS,
        "num_users": 30,
        "min_len": 6,
        "max_len": 10,
        "seed": 3,
    },
    "data": {"user_core": 1, "item_core": 1, "max_len": 10, "num_negatives": TOY_NEGATIVES},
    "encoder": {"dim": 8, "layers": 1, "heads": 2, "dropout": 0.0, "max_len": 10},
    "flow": {"num_components": 2, "hidden_mult": 2, "time_features": 4, "steps": 2},
    "train": {"lr": 1e-3, "batch_size": 16, "max_epochs": 1, "patience": 1},
}


def _config(tmp_path, payload, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def _last_json(capsys):
    return json.loads(capsys.readouterr().out)


class TestConfigErrors:
    """Invalid configuration exits with code 2 before any compute."""

    def test_missing_config_flag(self):
        assert main(["train"]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "nope.json")]) == 2

    def test_missing_dataset(self, tmp_path):
        payload = {k: v for k, v in TOY_RUN.items() if k != "synth"}
        payload["data"] = dict(payload["data"], interactions_path=str(tmp_path / "absent.csv"))
        assert main(["train", "--config", _config(tmp_path, payload), "--out", str(tmp_path / "run")]) == 2
        assert not os.path.exists(tmp_path / "run")

    def test_unknown_field(self, tmp_path):
        payload = dict(TOY_RUN, learning_rate=0.1)
        assert main(["train", "--config", _config(tmp_path, payload)]) == 2

    def test_bad_transition_row(self, tmp_path):
        synth = dict(TOY_RUN["synth"], transition=[[1.0, 0.0, 0.0], [0.5, 0.6, 0.0], [0.0, 0.0, 1.0]])
        cfg = _config(tmp_path, {"synth": synth})
        assert main(["synth", "--config", cfg, "--out", str(tmp_path / "log.csv")]) == 2
        assert not os.path.exists(tmp_path / "log.csv")


class TestSynth:
    """Synthetic log generation."""

    def test_byte_identical_rerun(self, tmp_path, capsys):
        synth = dict(TOY_RUN["synth"], num_users=25, min_len=5, max_len=5)
        cfg = _config(tmp_path, synth, "synth.json")
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        assert main(["synth", "--config", cfg, "--out", a]) == 0
        summary = _last_json(capsys)
        assert main(["synth", "--config", cfg, "--out", b]) == 0
        assert open(a, "rb").read() == open(b, "rb").read()
        assert summary["interactions"] == 125
        assert len(open(a).read().splitlines()) == 126
        assert os.path.exists(summary["manifest_path"])

    def test_seed_flag_changes_output(self, tmp_path):
        cfg = _config(tmp_path, TOY_RUN["synth"], "synth.json")
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        main(["synth", "--config", cfg, "--out", a])
        main(["synth", "--config", cfg, "--out", b, "--seed", "4"])
        assert open(a, "rb").read() != open(b, "rb").read()


class TestPreprocess:
    def test_writes_split(self, tmp_path, capsys):
        out = str(tmp_path / "split")
        assert main(["preprocess", "--config", _config(tmp_path, TOY_RUN), "--out", out]) == 0
        summary = _last_json(capsys)
        assert summary["counts"]["test"] == 30
        assert os.path.exists(summary["manifest"])


class TestTrainAndEval:
    """End-to-end train then evaluate on the toy config."""

    def test_zero_epochs(self, tmp_path, capsys):
        payload = dict(TOY_RUN, train=dict(TOY_RUN["train"], max_epochs=0))
        out = tmp_path / "run"
        assert main(["train", "--config", _config(tmp_path, payload), "--out", str(out)]) == 0
        summary = _last_json(capsys)
        assert summary["checkpoint"] is None
        assert not os.path.exists(out / "best.ckpt")
        assert os.path.exists(out / "metrics_test.json")

    def test_train_then_eval(self, tmp_path, capsys):
        cfg = _config(tmp_path, TOY_RUN)
        out = tmp_path / "run"
        assert main(["train", "--config", cfg, "--out", str(out)]) == 0
        summary = _last_json(capsys)
        ckpt = summary["checkpoint"]
        assert os.path.exists(ckpt)
        assert os.path.exists(out / "train_log.csv")
        assert 0.0 <= summary["test_group_ndcg10"] <= 1.0

        for steps in ("1", "8"):
            assert main(["eval", "--config", cfg, "--out", str(out), "--checkpoint", ckpt, "--steps", steps]) == 0
            report = json.loads((out / f"metrics_test_T{steps}.json").read_text())
            assert report["steps"] == int(steps)
            assert report["num_candidates"] == TOY_NEGATIVES + 1
        capsys.readouterr()

        ranks = out / "ranks.csv"
        args = ["eval", "--config", cfg, "--out", str(out), "--checkpoint", ckpt, "--group", "--few-shot",
                "--dump-ranks", str(ranks)]
        assert main(args) == 0
        report = _last_json(capsys)
        assert set(report["groups"]) == {"target-transition", "transition-rate", "domain-count", "few-shot"}
        for buckets in report["groups"].values():
            assert sum(b["size"] for b in buckets.values()) == report["num_instances"]
        assert len(ranks.read_text().splitlines()) == report["num_instances"] + 1

    def test_numerics_failure_removes_partial_outputs(self, tmp_path, monkeypatch):
        """A NumericsError after the first checkpoint leaves no checkpoint or log behind."""
        original = Trainer.train_epoch

        def failing_second_epoch(self, epoch):
            if epoch == 2:
                raise NumericsError("loss became NaN")
            return original(self, epoch)

        monkeypatch.setattr(Trainer, "train_epoch", failing_second_epoch)
        payload = dict(TOY_RUN, train=dict(TOY_RUN["train"], max_epochs=3, patience=3))
        out = tmp_path / "run"
        assert main(["train", "--config", _config(tmp_path, payload), "--out", str(out)]) == 4
        assert not os.path.exists(out / "best.ckpt")
        assert not os.path.exists(out / "train_log.csv")

    def test_bad_checkpoint(self, tmp_path):
        junk = tmp_path / "junk.ckpt"
        junk.write_bytes(b"not a checkpoint")
        args = ["eval", "--config", _config(tmp_path, TOY_RUN), "--out", str(tmp_path / "run"), "--checkpoint", str(junk)]
        assert main(args) == 2


@pytest.mark.parametrize("command", ["synth", "preprocess", "train", "eval", "analyze"])
def test_help(command, capsys):
    with pytest.raises(SystemExit) as exc:
        main([command, "--help"])
    assert exc.value.code == 0
    assert "--config" in capsys.readouterr().out
