"""CLI: validate a dataset, run a fine-tuning job, run batch prediction."""

import argparse
import json
import sys

from meibotune import __version__
from meibotune.config import ConfigError, TrainConfig
from meibotune.data import DatasetError, validate_dataset
from meibotune.predict import predict
from meibotune.train import TrainError, read_loss_trace, train


def cmd_validate(args) -> int:
    stats = validate_dataset(args.dataset)
    print(json.dumps(stats.to_json_dict(), indent=2))
    return 0 if stats.ok else 1


def cmd_train(args) -> int:
    if args.config:
        cfg = TrainConfig.from_file(args.config)
    else:
        cfg = TrainConfig(output_dir=args.output_dir or "adapter")
    if args.output_dir:
        cfg.output_dir = args.output_dir
    cfg.validate()
    adapter = train(cfg, args.dataset, steps=args.steps)
    trace = read_loss_trace(adapter)
    print(
        json.dumps(
            {
                "adapter": str(adapter),
                "steps": len(trace),
                "initial_loss": trace[0],
                "final_loss": trace[-1],
            },
            indent=2,
        )
    )
    return 0


def cmd_predict(args) -> int:
    out = predict(args.adapter, args.questions, args.out, max_new_tokens=args.max_new_tokens)
    print(f"wrote predictions -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meibotune", description="Desk-scale trainer glue for clinical Q&A datasets"
    )
    parser.add_argument("--version", action="version", version=f"meibotune {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a train.jsonl dataset")
    p.add_argument("--dataset", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="run supervised fine-tuning")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", default=None, help="TrainConfig YAML/JSON file")
    p.add_argument("--output-dir", default=None)
    p.add_argument("--steps", type=int, default=None, help="override max_steps")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="answer question_only JSONL with an adapter")
    p.add_argument("--adapter", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-new-tokens", type=int, default=96)
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetError, TrainError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
