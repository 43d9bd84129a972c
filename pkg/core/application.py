"""
Main application class for TreeReply

One `cmd_*` method per command-line subcommand. Each returns an exit
status: 0 on success, 1 when a check fails, 2 on usage, I/O or config
errors.
"""

import logging
import os
from typing import Any, Dict, List, Optional, TextIO

import numpy as np

from config.settings import SettingsManager, TrainConfig
from core.checkpoint import load_checkpoint, save_checkpoint
from core.errors import ConfigError, CorpusError, TreeReplyError, TreeStructureError
from core.sampling import random_dependency_tree
from core.search import generate_response
from core.trainer import NAN_ABORT, perplexity, train
from core.tree_format import format_sp, format_ternary, parse_ternary
from core.tree_stats import MAX_ENUMERATION_SIZE, depth_stats, distinct_lcrs_images, theorem_rows
from core.trees import (
    EOB,
    canonicalize,
    decanonicalize,
    dep_to_sp,
    flatten_sp,
    flatten_ternary,
    pad_eob,
    strip_eob,
    trees_equal,
)
from corpus.conllu_reader import TOO_DEEP, ConlluReader, Rejection
from corpus.instances import InstanceBuilder, load_pairs
from corpus.toy_corpus import generate_toy_corpus, write_conllu, write_pairs_tsv
from corpus.vocabulary import build_vocabulary
from utils.file_operations import FileManager

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


class TreeReplyApp:
    """Main TreeReply application"""

    def __init__(self):
        self.files = FileManager()

    def run(self, command: str, **options) -> int:
        """Dispatch to cmd_<command>, mapping errors onto exit statuses"""
        handler = getattr(self, f"cmd_{command.replace('-', '_')}", None)
        if handler is None:
            log.error("Unknown command %s", command)
            return EXIT_USAGE
        try:
            return handler(**options)
        except TreeReplyError as e:
            log.error("%s: %s", command, e)
            return EXIT_USAGE
        except OSError as e:
            log.error("%s: %s", command, e)
            return EXIT_USAGE

    def _print_rejections(self, rejections: List[Rejection]):
        for rejection in rejections:
            print(f"  rejected {rejection.describe()}")

    # Tree pipeline

    def cmd_canonicalize(self, in_path: str, out_path: str) -> int:
        """Write the padded ternary tree of every accepted sentence"""
        reader = ConlluReader()
        with open(in_path, "r", encoding="utf-8") as f:
            trees = reader.read(f)
        rejections = list(reader.rejections)
        padded = []
        for tree in trees:
            try:
                padded.append(pad_eob(canonicalize(dep_to_sp(tree))))
            except TreeStructureError as e:
                rejections.append(Rejection(tree.block_index, 0, str(e), tree.sent_id))
            except RecursionError:
                rejections.append(Rejection(tree.block_index, 0, TOO_DEEP, tree.sent_id))
        rejections.sort(key=lambda r: r.index)
        self.files.write_trees(out_path, padded)
        print(f"Accepted {len(padded)} sentences, rejected {len(rejections)}")
        self._print_rejections(rejections)
        return EXIT_OK

    def cmd_roundtrip(self, in_path: str) -> int:
        """Canonicalize and invert every sentence (or tree); exit 1 on any mismatch"""
        text = self.files.read_file(in_path)
        first = next((line.strip() for line in text.splitlines() if line.strip()), "")
        if first.startswith("("):
            checked, failures = self._roundtrip_trees(text)
        else:
            checked, failures = self._roundtrip_conllu(in_path)
        for label, expected, actual in failures:
            print(f"MISMATCH {label}")
            print(f"  - {expected}")
            print(f"  + {actual}")
        print(f"Round-tripped {checked - len(failures)}/{checked} trees")
        return EXIT_CHECK_FAILED if failures else EXIT_OK

    def _roundtrip_conllu(self, in_path: str):
        reader = ConlluReader()
        with open(in_path, "r", encoding="utf-8") as f:
            trees = reader.read(f)
        self._print_rejections(reader.rejections)
        failures = []
        checked = 0
        for tree in trees:
            label = f"sentence {tree.block_index + 1}" + (f" ({tree.sent_id})" if tree.sent_id else "")
            try:
                sp = dep_to_sp(tree)
            except TreeStructureError as e:
                print(f"  skipped {label}: {e}")
                continue
            checked += 1
            try:
                padded = pad_eob(canonicalize(sp))
                restored = decanonicalize(strip_eob(padded))
                surface = flatten_ternary(padded)
            except RecursionError:
                failures.append((label, " ".join(tree.tokens), TOO_DEEP))
                continue
            if not trees_equal(restored, sp):
                failures.append((label, format_sp(sp), format_sp(restored)))
            elif surface != tree.tokens or flatten_sp(restored) != tree.tokens:
                failures.append((label, " ".join(tree.tokens), " ".join(str(t) for t in surface)))
        return checked, failures

    def _roundtrip_trees(self, text: str):
        failures = []
        checked = 0
        for number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            checked += 1
            label = f"line {number}"
            try:
                tree = parse_ternary(line)
                stripped = strip_eob(tree)
                if stripped is None:
                    failures.append((label, line, "empty tree"))
                    continue
                again = pad_eob(canonicalize(decanonicalize(stripped)))
            except TreeReplyError as e:
                failures.append((label, line, f"error: {e}"))
                continue
            if not trees_equal(again, tree):
                failures.append((label, line, format_ternary(again, EOB)))
        return checked, failures

    def cmd_enumerate(self, n_max: int) -> int:
        """Print |S^n|, |O^n|, |L^n| and check the counting inequalities"""
        if n_max > MAX_ENUMERATION_SIZE:
            log.error("Enumeration is capped at n = %d, got %d", MAX_ENUMERATION_SIZE, n_max)
            return EXIT_USAGE
        if n_max < 1:
            log.error("n_max must be at least 1, got %d", n_max)
            return EXIT_USAGE
        print(f"{'n':>3} {'sp':>10} {'ordered':>10} {'lcrs':>10}")
        ok = True
        for n, sp, ordered, lcrs in theorem_rows(n_max):
            print(f"{n:>3} {sp:>10} {ordered:>10} {lcrs:>10}")
            if ordered != lcrs or distinct_lcrs_images(n) != ordered:
                log.error("n = %d: ordered and LCRS counts disagree", n)
                ok = False
            if n >= 2 and not sp > ordered:
                log.error("n = %d: SP count does not exceed the ordered count", n)
                ok = False
        return EXIT_OK if ok else EXIT_CHECK_FAILED

    def cmd_stats(self, in_path: Optional[str] = None, random_count: Optional[int] = None,
                  min_length: int = 10, max_length: int = 60, seed: int = 1234,
                  out_path: Optional[str] = None) -> int:
        """Per-length mean word depth next to the chain baseline, as CSV"""
        if random_count is not None:
            if not 1 <= min_length <= max_length:
                raise ConfigError(f"bad length range {min_length}..{max_length}")
            rng = np.random.default_rng(seed)
            trees = [
                pad_eob(canonicalize(dep_to_sp(random_dependency_tree(int(rng.integers(min_length, max_length + 1)), rng))))
                for _ in range(random_count)
            ]
        elif in_path is not None:
            trees = self.files.read_trees(in_path)
        else:
            raise ConfigError("stats needs a tree file or --random COUNT")
        if not trees:
            raise CorpusError("no trees to measure")

        lines = ["length,mean_depth,chain_baseline,count"]
        for row in depth_stats(trees).values():
            lines.append(f"{row.length},{row.mean_depth:.6f},{row.chain_baseline:.6f},{row.tree_count}")
        csv_text = "\n".join(lines) + "\n"
        if out_path:
            self.files.write_file(out_path, csv_text)
            print(f"Wrote {len(lines) - 1} rows to {out_path}")
        else:
            print(csv_text, end="")
        return EXIT_OK

    # Model pipeline

    def _read_pairs(self, pairs_path: str, conllu_path: str, what: str):
        rejections: List[Rejection] = []
        with open(pairs_path, "r", encoding="utf-8") as pairs_file, \
                open(conllu_path, "r", encoding="utf-8") as conllu_file:
            pairs = load_pairs(pairs_file, conllu_file, rejections)
        print(f"{what}: {len(pairs)} pairs, {len(rejections)} rejected")
        self._print_rejections(rejections)
        return pairs

    def load_settings(self, config_path: Optional[str], overrides: Optional[Dict[str, Any]] = None) -> TrainConfig:
        settings = SettingsManager(config_path)
        settings.load_config()
        if overrides:
            settings.update({key: value for key, value in overrides.items() if value is not None})
        return TrainConfig.from_settings(settings)

    def cmd_train(self, config_path: Optional[str], overrides: Optional[Dict[str, Any]] = None) -> int:
        """Train from a config file; writes model.ckpt and history.csv to output_dir"""
        config = self.load_settings(config_path, overrides)
        if not config.pairs_path or not config.conllu_path:
            raise ConfigError("pairs_path and conllu_path are required for training")

        pairs = self._read_pairs(config.pairs_path, config.conllu_path, "Training")
        vocabulary = build_vocabulary(pairs, config.vocab_size)
        builder = InstanceBuilder(vocabulary, config.max_post_length)
        instances = builder.build(pairs)
        self._print_rejections(builder.rejections)
        if not instances:
            raise CorpusError("no usable training pairs")
        print(f"Vocabulary: {len(vocabulary)} tokens, coverage {vocabulary.coverage(pairs):.1%}")

        if config.validation_pairs_path and config.validation_conllu_path:
            held_out = self._read_pairs(config.validation_pairs_path, config.validation_conllu_path, "Validation")
            validation = InstanceBuilder(vocabulary, config.max_post_length).build(held_out)
            if not validation:
                raise CorpusError("no usable validation pairs")
        else:
            log.info("No validation set configured; validating on the training set")
            validation = instances

        files = FileManager(config.output_dir)
        files.write_instances(files.path("instances.txt"), instances)
        checkpoint_path = files.path("model.ckpt")
        if files.file_exists(checkpoint_path):
            log.warning("Overwriting the checkpoint in %s", config.output_dir)
        result = train(instances, validation, config, len(vocabulary),
                       on_best=lambda model: save_checkpoint(checkpoint_path, model, vocabulary))
        save_checkpoint(checkpoint_path, result.model, vocabulary)
        files.write_history(files.path("history.csv"), result.history)

        print(f"Stopped after {len(result.history)} epochs ({result.stop_reason})")
        if result.history:
            print(f"  Best validation perplexity: {result.best_perplexity:.4f}")
        print(f"  Checkpoint: {checkpoint_path}")
        print(f"  History: {files.path('history.csv')}")
        return EXIT_CHECK_FAILED if result.stop_reason == NAN_ABORT else EXIT_OK

    def cmd_evaluate(self, checkpoint_path: str, instances_path: str) -> int:
        """Perplexity of a checkpoint on an instance file, such as the one train writes"""
        model, _ = load_checkpoint(checkpoint_path)
        instances = self.files.read_instances(instances_path)
        if not instances:
            raise CorpusError(f"no instances in {instances_path}")
        vocab_size = model.dims.vocab_size
        for number, instance in enumerate(instances, start=1):
            tokens = instance.post + flatten_ternary(instance.response_tree, model.eob_id)
            if any(not 0 <= token < vocab_size for token in tokens):
                raise CorpusError(f"instance {number} uses a token outside the checkpoint vocabulary")
        print(f"Instances: {len(instances)}")
        print(f"Perplexity: {perplexity(instances, model):.4f}")
        return EXIT_OK

    def cmd_generate(self, checkpoint_path: str, post: str, global_beam: int = 6, local_beam: int = 6,
                     node_cap: int = 64, length_normalize: bool = False) -> int:
        """Print ranked responses to `post`"""
        if global_beam < 1 or local_beam < 1 or node_cap < 1:
            raise ConfigError("beam sizes and the node cap must be at least 1")
        tokens = post.split()
        if not tokens:
            raise ConfigError("empty post")
        model, vocabulary = load_checkpoint(checkpoint_path)
        responses = generate_response(tokens, model, vocabulary, global_beam, local_beam, node_cap, length_normalize)
        if not responses:
            print("No response found")
            return EXIT_CHECK_FAILED
        for rank, (sentence, score) in enumerate(responses, start=1):
            print(f"{rank}\t{score:.4f}\t{sentence}")
        return EXIT_OK

    def cmd_chat_demo(self, checkpoint_path: str, global_beam: int = 6, local_beam: int = 6, node_cap: int = 64,
                      stream_in: Optional[TextIO] = None, stream_out: Optional[TextIO] = None) -> int:
        from ui.chat_demo import ChatDemo

        model, vocabulary = load_checkpoint(checkpoint_path)
        ChatDemo(model, vocabulary, global_beam, local_beam, node_cap).run(stream_in, stream_out)
        return EXIT_OK

    def cmd_toy_corpus(self, out_dir: str, size: int = 50, seed: int = 1234) -> int:
        """Write pairs.tsv, responses.conllu and a ready-to-train config.json"""
        pairs = generate_toy_corpus(size, seed)
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "pairs.tsv"), "w", encoding="utf-8") as f:
            write_pairs_tsv(pairs, f)
        with open(os.path.join(out_dir, "responses.conllu"), "w", encoding="utf-8") as f:
            write_conllu(pairs, f)

        settings = SettingsManager(os.path.join(out_dir, "config.json"))
        settings.update({
            "pairs_path": "pairs.tsv",
            "conllu_path": "responses.conllu",
            "output_dir": "run",
            "vocab_size": 100,
            "max_post_length": 10,
            "batch_size": 1,
            "max_epochs": 200,
            "patience": 200,
            "seed": seed,
        })
        settings.save_config()
        print(f"Wrote {len(pairs)} pairs to {out_dir}")
        return EXIT_OK
