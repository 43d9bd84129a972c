"""
Command-line interface for TreeReply
"""

import argparse
import logging
import sys
from typing import List, Optional

from core.application import TreeReplyApp

DEFAULT_SEED = 1234


def _add_beam_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--global-beam", type=int, default=6, help="partial trees kept per round (G, default 6)")
    parser.add_argument("--local-beam", type=int, default=6, help="child groups tried per leaf (L, default 6)")
    parser.add_argument("--node-cap", type=int, default=64,
                        help="largest number of generated nodes in a partial tree (default 64)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treereply", description="Tree-structured response decoding")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = commands.add_parser("canonicalize", help="CoNLL-U to padded ternary trees")
    p.add_argument("input", help="CoNLL-U file")
    p.add_argument("output", help="tree file to write")

    p = commands.add_parser("roundtrip", help="check canonicalization is inverted exactly")
    p.add_argument("input", help="CoNLL-U file or tree file")

    p = commands.add_parser("enumerate", help="count SP, ordered and LCRS trees up to n")
    p.add_argument("n_max", type=int, help="largest tree size (at most 10)")

    p = commands.add_parser("stats", help="mean word depth per sentence length, as CSV")
    p.add_argument("input", nargs="?", help="tree file")
    p.add_argument("--random", type=int, metavar="COUNT", help="measure COUNT random dependency trees instead")
    p.add_argument("--min-length", type=int, default=10)
    p.add_argument("--max-length", type=int, default=60)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", help="write the CSV here instead of stdout")

    p = commands.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--vocab-size", type=int, help="override the config vocabulary size")
    p.add_argument("--max-epochs", type=int, help="override the config epoch limit")
    p.add_argument("--output-dir", help="override the config output directory")
    p.add_argument("--workers", type=int, help="gradient threads per batch")

    p = commands.add_parser("evaluate", help="perplexity of a checkpoint on an instance file")
    p.add_argument("checkpoint", help="model checkpoint")
    p.add_argument("instances", help="instance file, e.g. instances.txt from train")

    p = commands.add_parser("generate", help="ranked responses to a post")
    p.add_argument("checkpoint", help="model checkpoint")
    p.add_argument("post", help="post text, whitespace tokenized")
    _add_beam_flags(p)
    p.add_argument("--length-normalize", action="store_true", help="rank by score per generated node")

    p = commands.add_parser("chat-demo", help="interactive loop over generate")
    p.add_argument("checkpoint", help="model checkpoint")
    _add_beam_flags(p)

    p = commands.add_parser("toy-corpus", help="write the synthetic training corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--size", type=int, default=50)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    return parser


def _options(args: argparse.Namespace) -> dict:
    if args.command == "canonicalize":
        return {"in_path": args.input, "out_path": args.output}
    if args.command == "roundtrip":
        return {"in_path": args.input}
    if args.command == "enumerate":
        return {"n_max": args.n_max}
    if args.command == "stats":
        return {"in_path": args.input, "random_count": args.random, "min_length": args.min_length,
                "max_length": args.max_length, "seed": args.seed, "out_path": args.out}
    if args.command == "train":
        overrides = {"seed": args.seed, "vocab_size": args.vocab_size, "max_epochs": args.max_epochs,
                     "output_dir": args.output_dir, "workers": args.workers}
        return {"config_path": args.config, "overrides": overrides}
    if args.command == "evaluate":
        return {"checkpoint_path": args.checkpoint, "instances_path": args.instances}
    if args.command == "generate":
        return {"checkpoint_path": args.checkpoint, "post": args.post, "global_beam": args.global_beam,
                "local_beam": args.local_beam, "node_cap": args.node_cap,
                "length_normalize": args.length_normalize}
    if args.command == "chat-demo":
        return {"checkpoint_path": args.checkpoint, "global_beam": args.global_beam,
                "local_beam": args.local_beam, "node_cap": args.node_cap}
    return {"out_dir": args.out_dir, "size": args.size, "seed": args.seed}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    return TreeReplyApp().run(args.command, **_options(args))
