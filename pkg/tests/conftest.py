import itertools
import os

import numpy as np
import pytest

from core.model import ModelDims, TreeDecoderModel
from core.sampling import random_sp_tree
from core.trainer import init_parameters
from core.trees import EOB, TernaryNode, canonicalize, pad_eob
from corpus.instances import TrainingInstance
from corpus.vocabulary import EOB_ID

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture
def fixture_path():
    def path(name: str) -> str:
        return os.path.join(FIXTURES, name)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def _make_model(vocab_size=8, dim=4, arity=3, seed=0, scale=0.5) -> TreeDecoderModel:
    return init_parameters(ModelDims(vocab_size, dim, dim, arity), seed, scale)


@pytest.fixture
def make_model():
    """Random model with parameters uniform in [-scale, scale]"""
    return _make_model


def _relabel(node: TernaryNode, rng, vocab_size: int) -> TernaryNode:
    token = EOB_ID if node.token == EOB else int(rng.integers(1, vocab_size))
    return TernaryNode(token, node.tag, [_relabel(slot, rng, vocab_size) if slot is not None else None
                                         for slot in node.slots])


def _random_instance(rng, vocab_size: int, words: int, post_length: int = 3) -> TrainingInstance:
    tree = pad_eob(canonicalize(random_sp_tree(words, rng)))
    post = [int(t) for t in rng.integers(1, vocab_size, size=post_length)]
    return TrainingInstance(post, _relabel(tree, rng, vocab_size))


@pytest.fixture
def random_instance():
    """Padded ternary instance over indices 1..vocab_size-1, EOB at 0"""
    return _random_instance


def leaf(arity: int = 3) -> TernaryNode:
    return TernaryNode(EOB_ID, None, [None] * arity)


def word(token: int, children=None, arity: int = 3) -> TernaryNode:
    if children is None:
        children = [leaf(arity) for _ in range(arity)]
    return TernaryNode(token, None, list(children))


def _capped_trees(vocab_size: int, max_depth: int, arity: int = 3, depth: int = 1):
    """Every padded tree whose words sit at depth <= max_depth"""
    trees = [leaf(arity)]
    for token in range(1, vocab_size):
        if depth == max_depth:
            trees.append(word(token, arity=arity))
        else:
            below = _capped_trees(vocab_size, max_depth, arity, depth + 1)
            for combo in itertools.product(below, repeat=arity):
                trees.append(word(token, combo, arity))
    return trees


@pytest.fixture
def capped_trees():
    return _capped_trees
