"""
Command-line entry point.

    python -m cli synth      --config synth.json --out data/interactions.csv
    python -m cli preprocess --config run.json
    python -m cli train      --config run.json --out runs/toy
    python -m cli eval       --config run.json --checkpoint runs/toy/best.ckpt --group --few-shot
    python -m cli analyze    --config run.json --seeds 0 1 2 --k-sweep 2 4 8

Exit codes: 0 success, 2 config/usage error, 3 data error, 4 numeric failure.
"""
import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config import settings
from config.run_config import RunConfig, load_run_config, load_synth_config
from core.exceptions import ConfigError, GMFlowRecError, NumericsError
from core.pipeline import ABLATIONS, RecommendationPipeline
from data.store import save_split
from evaluation.report import write_report
from training.trainer import CHECKPOINT_NAME, LOG_NAME

logger = logging.getLogger("gmflowrec")

GROUP_KINDS = ("target-transition", "transition-rate", "domain-count")


def setup_logging(level: Optional[str] = None) -> None:
    logging.basicConfig(
        format="[%(asctime)s.%(msecs)03d][%(levelname)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        level=(level or settings.log_level).upper(),
    )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="Run config JSON file")
    common.add_argument("--seed", type=int, help="Override the config seed")
    common.add_argument("--out", type=str, help="Output path (file for synth, directory otherwise)")
    common.add_argument("--threads", type=int, help="Worker threads for evaluation")
    common.add_argument("--log-level", type=str, help="Logging level (default from GMFR_LOG_LEVEL)")

    parser = argparse.ArgumentParser(
        prog="gmflowrec",
        description="Gaussian-mixture flow matching for multi-domain sequential recommendation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common], help="Generate a synthetic interaction log")
    sub.add_parser("preprocess", parents=[common], help="Filter, sequence and split an interaction log")
    sub.add_parser("train", parents=[common], help="Train and evaluate on the test split")

    ev = sub.add_parser("eval", parents=[common], help="Evaluate a checkpoint")
    ev.add_argument("--checkpoint", type=str, required=True, help="Checkpoint file")
    ev.add_argument("--split", choices=["valid", "test"], default="test")
    ev.add_argument("--group", action="store_true", help="Transition and domain-count groupings")
    ev.add_argument("--few-shot", action="store_true", help="Few-shot grouping")
    ev.add_argument("--timing", action="store_true", help="Training and inference timing section")
    ev.add_argument("--steps", type=int, help="Override solver steps T")
    ev.add_argument("--dump-ranks", type=str, help="Write per-instance ranks to this CSV")

    an = sub.add_parser("analyze", parents=[common], help="Ablations and reference rankers over seeds")
    an.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    an.add_argument("--variants", type=str, nargs="+", choices=sorted(ABLATIONS), help="Subset of ablations")
    an.add_argument("--k-sweep", type=int, nargs="*", default=[], help="Mixture sizes to sweep")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {"seed": args.seed, "threads": args.threads, "out_dir": args.out}


def _load(args: argparse.Namespace) -> RunConfig:
    if args.config is None:
        raise ConfigError("--config is required")
    return load_run_config(args.config, _overrides(args))


def _print_json(payload: Dict[str, Any]) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_synth(args: argparse.Namespace) -> int:
    if args.config is None:
        raise ConfigError("--config is required")
    synth_cfg = load_synth_config(args.config, {"seed": args.seed})
    out_path = args.out or os.path.join(settings.default_out_dir, "interactions.csv")
    result = RecommendationPipeline.synth(synth_cfg, out_path)
    _print_json(result.to_dict())
    return 0


def cmd_preprocess(args: argparse.Namespace) -> int:
    cfg = _load(args)
    pipeline = RecommendationPipeline(cfg)
    split = pipeline.prepare(save=False)
    out_dir = args.out or pipeline.split_dir()
    path = save_split(split, out_dir, extra={"config_hash": cfg.hash})
    _print_json({"manifest": path, "counts": split.counts(), "config_hash": cfg.hash})
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load(args)
    pipeline = RecommendationPipeline(cfg)
    pipeline.check_inputs()
    try:
        result = pipeline.train()
    except NumericsError:
        for name in (CHECKPOINT_NAME, LOG_NAME):
            path = os.path.join(pipeline.out_dir, name)
            if os.path.exists(path):
                os.remove(path)
                logger.warning("Removed partial output %s", path)
        raise
    _print_json({
        "checkpoint": result.train.checkpoint_path,
        "log": result.train.log_path,
        "report": result.report_path,
        "best_epoch": result.train.best_epoch,
        "test_group_ndcg10": result.report.group_ndcg10,
    })
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load(args)
    pipeline = RecommendationPipeline(cfg)
    groups: List[str] = list(GROUP_KINDS) if args.group else []
    if args.few_shot:
        groups.append("few-shot")
    report = pipeline.evaluate(
        args.checkpoint,
        groups=groups,
        timing=args.timing,
        steps=args.steps,
        dump_ranks=args.dump_ranks,
        split_name=args.split,
    )
    suffix = f"_T{args.steps}" if args.steps else ""
    path = os.path.join(pipeline.out_dir, f"metrics_{args.split}{suffix}.json")
    write_report(report, path)
    print(report.model_dump_json(indent=2))
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = _load(args)
    pipeline = RecommendationPipeline(cfg)
    result = pipeline.analyze(seeds=args.seeds, variants=args.variants, k_sweep=args.k_sweep)
    os.makedirs(pipeline.out_dir, exist_ok=True)
    path = os.path.join(pipeline.out_dir, "analysis.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(result.to_dict(), f, indent=2, sort_keys=True)
    _print_json(result.to_dict())
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "eval": cmd_eval,
    "analyze": cmd_analyze,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except GMFlowRecError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
