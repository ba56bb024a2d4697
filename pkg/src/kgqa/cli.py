"""Command-line entry point: index, extract, train, predict, evaluate, explain."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import format_score
from .pipeline import (PipelineConfig, StageError, cmd_evaluate, cmd_explain,
                       cmd_extract, cmd_index, cmd_predict, cmd_train)


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    if args.config:
        config = PipelineConfig.from_file(args.config)
    else:
        config = PipelineConfig()
    overrides = {
        "corpus": args.corpus,
        "index_dir": args.index_dir,
        "model_file": args.model,
        "predictions_file": getattr(args, "predictions", None),
        "report_file": getattr(args, "report", None),
        "triple_cache": getattr(args, "triple_cache", None),
    }
    for name, value in overrides.items():
        if value is not None:
            setattr(config, name, value)
    if getattr(args, "dataset", None):
        for item in args.dataset:
            split, _, path = item.partition("=")
            if not path:
                raise StageError("config", f"--dataset expects split=path, "
                                           f"got {item!r}")
            config.dataset_files[split] = path
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
        config.training = type(config.training)(
            lr=config.training.lr, batch_size=config.training.batch_size,
            epochs=config.training.epochs, optimizer=config.training.optimizer,
            seed=args.seed, shuffle=config.training.shuffle)
    if getattr(args, "k", None) is not None:
        config.retrieval_k = args.k
    if getattr(args, "triples_file", None) is not None:
        config.triples_file = args.triples_file
    if getattr(args, "extractor_mode", None) is not None:
        config.extractor_mode = args.extractor_mode
    return config


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON pipeline config file")
    parser.add_argument("--corpus", help="corpus file, one sentence per line")
    parser.add_argument("--index-dir", dest="index_dir", help="index directory")
    parser.add_argument("--model", help="model file path")
    parser.add_argument("--dataset", action="append", metavar="SPLIT=PATH",
                        help="dataset file for a split (repeatable)")
    parser.add_argument("--predictions", help="predictions output file")
    parser.add_argument("--report", help="report output file")
    parser.add_argument("--triple-cache", dest="triple_cache",
                        help="triple extraction cache file")
    parser.add_argument("--seed", type=int, help="run seed")
    parser.add_argument("--k", type=int, help="supports per hypothesis")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgqa",
        description="Science-exam QA over paired knowledge graphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build the corpus search index")
    _add_common(p)

    p = sub.add_parser("extract", help="extract triples for the whole corpus")
    _add_common(p)
    p.add_argument("--triples-file", dest="triples_file",
                   help="interchange output path")

    p = sub.add_parser("train", help="train the graph matcher")
    _add_common(p)
    p.add_argument("--extractor-mode", dest="extractor_mode",
                   choices=["builtin", "ingest"])
    p.add_argument("--triples-file", dest="triples_file",
                   help="ingested triples (extractor-mode=ingest)")

    p = sub.add_parser("predict", help="write predictions for a split")
    _add_common(p)
    p.add_argument("--split", default="test")
    p.add_argument("--extractor-mode", dest="extractor_mode",
                   choices=["builtin", "ingest"])
    p.add_argument("--triples-file", dest="triples_file")

    p = sub.add_parser("evaluate", help="score a split and print the result")
    _add_common(p)
    p.add_argument("--split", default="test")
    p.add_argument("--guess-all", action="store_true",
                   help="score the guess-all baseline instead of the model")
    p.add_argument("--upper-bound", type=float, metavar="SOLVED_FRACTION",
                   help="also print the solved+guessing ceiling score")
    p.add_argument("--extractor-mode", dest="extractor_mode",
                   choices=["builtin", "ingest"])
    p.add_argument("--triples-file", dest="triples_file")

    p = sub.add_parser("explain", help="trace one question end to end")
    _add_common(p)
    p.add_argument("--split", default="test")
    p.add_argument("--question-id", required=True)
    p.add_argument("--extractor-mode", dest="extractor_mode",
                   choices=["builtin", "ingest"])
    p.add_argument("--triples-file", dest="triples_file")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args)
        if args.command == "index":
            index_dir = cmd_index(config)
            print(f"index ready at {index_dir}")
        elif args.command == "extract":
            out = cmd_extract(config)
            print(f"triples written to {out}")
        elif args.command == "train":
            params, log, report = cmd_train(config)
            last = log.last()
            print(f"trained {config.training.epochs} epochs; "
                  f"final loss {last.mean_loss:.4f}, "
                  f"accuracy {last.accuracy:.3f}")
            print(f"model saved to {config.model_file} "
                  f"(checksum {params.checksum()[:16]}...)")
        elif args.command == "predict":
            predictions, _ = cmd_predict(config, args.split)
            print(f"{len(predictions)} predictions written"
                  + (f" to {config.predictions_file}"
                     if config.predictions_file else ""))
        elif args.command == "evaluate":
            report = cmd_evaluate(config, args.split,
                                  guess_all=args.guess_all,
                                  upper_bound=args.upper_bound)
            agg = report["aggregate"]
            print(f"{args.split} score: {agg['total_score']} "
                  f"({agg['n_questions']} questions)")
            if "upper_bound" in report:
                ub = report["upper_bound"]
                print(f"upper bound at {ub['solved_fraction']:.0%} solved: "
                      f"{ub['score']}")
        elif args.command == "explain":
            print(cmd_explain(config, args.question_id, args.split))
        return 0
    except StageError as exc:
        print(f"[{exc.stage}] {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"[{args.command}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
