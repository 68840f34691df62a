"""Command line entry point: ``apikg explore|construct|filter|eval|run``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import ApiKGError
from .pipeline import Pipeline, load_config


def _global_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--out", help="output directory (overrides out_dir)")
    p.add_argument("--provider", choices=("fixture", "http"), help="completion backend")
    p.add_argument("--fixtures", help="recorded responses for the fixture backend")
    p.add_argument("--endpoint", help="base URL for the http backend")
    p.add_argument("--model", help="model name for the http backend")
    p.add_argument("--budget", type=int, help="maximum number of provider calls")
    p.add_argument("--templates", help="prompt template directory")
    p.add_argument("--seed", help="seed corpus (JSONL)")
    p.add_argument("--target", help="target corpus (JSONL)")
    p.add_argument("--gold", help="gold triples (JSONL)")
    p.add_argument("--annotations", help="type-triple annotations (JSON)")
    p.add_argument("--trace", action="store_true", default=None, help="write per-unit transcripts")
    p.add_argument("--strict", action="store_true", default=None, help="treat unknown types and coverage gaps as fatal")
    p.add_argument("--force", action="store_true", help="rerun stages even when up to date")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _filter_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--support", type=float, help="support threshold (default 0.005)")
    p.add_argument("--confidence", type=float, help="confidence threshold (default 0.02)")
    p.add_argument("--lift", type=float, help="lift threshold (default 1.0)")
    p.add_argument("--inclusive", action="store_true", default=None, help="accept metrics equal to a threshold")
    p.add_argument("--count-mode", choices=("occurrence", "distinct"), help="how instance triples are counted")


def _eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eval-thresholds", type=float, nargs="+", help="similarity thresholds (default 0.9 0.92 0.94)")
    p.add_argument("--embedder", choices=("lexical", "sentence-transformers", "http"))
    p.add_argument("--relation-only", action="store_true", default=None, help="embed only the relation phrase")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apikg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("explore", "induce a potential schema from seed texts"),
        ("construct", "extract a schema-guided (unreliable) KG"),
        ("filter", "validate the schema and prune the KG"),
        ("eval", "score the reliable KG against gold triples"),
        ("run", "all stages in order"),
    ):
        p = sub.add_parser(name, help=help_)
        _global_flags(p)
        if name in ("filter", "run"):
            _filter_flags(p)
        if name in ("eval", "run"):
            _eval_flags(p)
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    thresholds = {"support": get("support"), "confidence": get("confidence"), "lift": get("lift")}
    embedder = {"kind": get("embedder"), "relation_only": get("relation_only")}
    return {
        "out_dir": get("out"),
        "seed_corpus": get("seed"),
        "target_corpus": get("target"),
        "gold": get("gold"),
        "annotations": get("annotations"),
        "template_dir": get("templates"),
        "provider": {
            "mode": get("provider"),
            "fixtures": get("fixtures"),
            "endpoint": get("endpoint"),
            "model": get("model"),
            "budget": get("budget"),
        },
        "thresholds": thresholds,
        "inclusive": get("inclusive"),
        "count_mode": get("count_mode"),
        "eval_thresholds": get("eval_thresholds"),
        "embedder": embedder,
        "trace": get("trace"),
        "strict": get("strict"),
    }


def _absolutize(overrides: dict) -> dict:
    # flag paths are relative to the working directory, not the config file
    for key in ("out_dir", "seed_corpus", "target_corpus", "gold", "annotations", "template_dir"):
        if overrides.get(key) is not None:
            overrides[key] = os.path.abspath(overrides[key])
    if overrides["provider"].get("fixtures") is not None:
        overrides["provider"]["fixtures"] = os.path.abspath(overrides["provider"]["fixtures"])
    return overrides


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config, _absolutize(overrides_from_args(args)))
        pipe = Pipeline(config)
        if args.command == "run":
            for stage in ("explore", "construct", "filter"):
                getattr(pipe, stage)(force=args.force)
            if config.gold is not None:
                pipe.eval(force=args.force)
        else:
            getattr(pipe, args.command)(force=args.force)
    except ApiKGError as exc:
        stage = args.command
        print(f"apikg {stage}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    for stage in pipe.executed:
        print(f"{stage}: ran")
    for stage in pipe.skipped:
        print(f"{stage}: up to date")
    if "eval" in pipe.executed or "eval" in pipe.skipped:
        print((config.out_dir / "eval_report.txt").read_text(encoding="utf-8"), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
