"""
Generalized beam search for TreeReply

The working set holds partial trees. Each round every open leaf of every
partial tree is expanded into its L best child groups (found by a chain
beam search over the K child distributions), one leaf per successor. The
pool is pruned to the G best by accumulated log-probability, and trees
whose leaves are all EOB move to the result list. With K = 1 this is
ordinary sequence beam search.

Ties keep generation order: every sort is stable and candidates are
produced in beam rank order, then frontier order, then child rank order.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Set, Tuple

import numpy as np

from core.errors import SearchError
from core.model import (
    TreeDecoderModel,
    child_log_probs,
    child_states,
    encode,
    partial_log_likelihood,
    root_log_probs,
)
from core.trees import TernaryNode, flatten_ternary, structure_key

log = logging.getLogger(__name__)

SCORE_TOLERANCE = 1e-9


@dataclass
class FrontierLeaf:
    """An open word leaf: where it sits and the hidden state it received"""

    path: Tuple[int, ...]
    hidden: np.ndarray
    depth: int


@dataclass
class ChildGroup:
    tokens: Tuple[int, ...]
    score: float
    states: Tuple[np.ndarray, ...]


@dataclass
class BeamState:
    tree: TernaryNode
    score: float
    frontier: List[FrontierLeaf] = field(default_factory=list)
    node_count: int = 1

    def is_complete(self) -> bool:
        return not self.frontier


@dataclass
class Hypothesis:
    tree: TernaryNode
    score: float


@dataclass
class SearchResult:
    hypotheses: List[Hypothesis]
    truncated: bool = False


def _top_indices(log_probs: np.ndarray, count: int) -> np.ndarray:
    return np.argsort(-log_probs, kind="stable")[:count]


def local_child_search(leaf_token: int, hidden: np.ndarray, latent: np.ndarray, model: TreeDecoderModel,
                       local_beam: int, force_eob: bool = False) -> List[ChildGroup]:
    """Up to `local_beam` child groups of an open leaf, best first

    Chain beam search over c_1..c_K. With `force_eob` the only group is the
    all-EOB one, scored under the model.
    """
    if local_beam < 1:
        raise ValueError(f"local beam must be at least 1, got {local_beam}")
    states = child_states(leaf_token, hidden, latent, model)
    beams: List[Tuple[Tuple[int, ...], float]] = [((), 0.0)]
    for k in range(1, model.dims.arity + 1):
        candidates: List[Tuple[Tuple[int, ...], float]] = []
        for tokens, score in beams:
            log_probs = child_log_probs(k, latent, leaf_token, states[k - 1], list(tokens), model)
            if force_eob:
                choices = [model.eob_id]
            else:
                choices = [int(token) for token in _top_indices(log_probs, local_beam)]
            for token in choices:
                candidates.append((tokens + (token,), score + float(log_probs[token])))
        candidates.sort(key=lambda item: -item[1])
        beams = candidates[:local_beam]
    return [ChildGroup(tokens, score, states) for tokens, score in beams]


def _replace_at(root: TernaryNode, path: Sequence[int], node: TernaryNode) -> TernaryNode:
    """Copy of `root` with the node at `path` replaced; untouched subtrees are shared"""
    if not path:
        return node
    top = TernaryNode(root.token, root.tag, list(root.slots))
    current = top
    for step in path[:-1]:
        below = current.slots[step]
        copy = TernaryNode(below.token, below.tag, list(below.slots))
        current.slots[step] = copy
        current = copy
    current.slots[path[-1]] = node
    return top


def _expand(state: BeamState, leaf_index: int, group: ChildGroup, model: TreeDecoderModel) -> BeamState:
    leaf = state.frontier[leaf_index]
    arity = model.dims.arity
    children = [TernaryNode(token, None, [None] * arity) for token in group.tokens]
    old = state.tree
    for step in leaf.path:
        old = old.slots[step]
    tree = _replace_at(state.tree, leaf.path, TernaryNode(old.token, None, children))

    opened = [
        FrontierLeaf(leaf.path + (k,), group.states[k], leaf.depth + 1)
        for k, token in enumerate(group.tokens)
        if token != model.eob_id
    ]
    frontier = state.frontier[:leaf_index] + opened + state.frontier[leaf_index + 1:]
    return BeamState(tree, state.score + group.score, frontier, state.node_count + arity)


def expand_beam(beam: List[BeamState], latent: np.ndarray, model: TreeDecoderModel, local_beam: int,
                node_cap: int = 64, max_depth: Optional[int] = None) -> Tuple[List[BeamState], bool]:
    """One search round: up to `local_beam` successors per open leaf of every state

    Each successor expands exactly one leaf. Successors above `node_cap`
    nodes are dropped and the returned flag says whether any were.
    """
    successors: List[BeamState] = []
    truncated = False
    for state in beam:
        for leaf_index, leaf in enumerate(state.frontier):
            node = state.tree
            for step in leaf.path:
                node = node.slots[step]
            force = max_depth is not None and leaf.depth >= max_depth
            for group in local_child_search(node.token, leaf.hidden, latent, model, local_beam, force):
                successor = _expand(state, leaf_index, group, model)
                if successor.node_count > node_cap:
                    truncated = True
                    continue
                successors.append(successor)
    return successors, truncated


def _rank_key(state: BeamState, length_normalize: bool) -> float:
    if length_normalize:
        return -state.score / state.node_count
    return -state.score


class _Harvester:
    """Collects completed trees once each"""

    def __init__(self):
        self.results: List[BeamState] = []
        self._seen: Set[tuple] = set()

    def take(self, beam: List[BeamState]) -> List[BeamState]:
        remaining = []
        for state in beam:
            if not state.is_complete():
                remaining.append(state)
                continue
            key = structure_key(state.tree)
            if key not in self._seen:
                self._seen.add(key)
                self.results.append(state)
        return remaining


def _dedupe(states: List[BeamState]) -> List[BeamState]:
    seen: Set[tuple] = set()
    unique = []
    for state in states:
        key = structure_key(state.tree)
        if key not in seen:
            seen.add(key)
            unique.append(state)
    return unique


def _check_scores(beam: List[BeamState], latent: np.ndarray, model: TreeDecoderModel):
    for state in beam:
        expected = partial_log_likelihood(latent, state.tree, model)
        if abs(expected - state.score) > SCORE_TOLERANCE * max(1.0, abs(expected)):
            raise SearchError(f"stored score {state.score!r} but the tree scores {expected!r}")


def generalized_beam_search(latent: np.ndarray, model: TreeDecoderModel, global_beam: int, local_beam: int,
                            node_cap: int = 64, max_depth: Optional[int] = None,
                            length_normalize: bool = False, check_scores: bool = False) -> SearchResult:
    """Up to `global_beam` completed trees, best first

    `node_cap` bounds the generated nodes (EOB included) of any partial tree;
    successors above it are dropped and the result is flagged truncated.
    Leaves at word depth `max_depth` (root = 1) only receive the all-EOB group.
    """
    if global_beam < 1:
        raise ValueError(f"global beam must be at least 1, got {global_beam}")
    if local_beam < 1:
        raise ValueError(f"local beam must be at least 1, got {local_beam}")
    arity = model.dims.arity
    zero = np.zeros(model.dims.hidden_dim)

    log_probs = root_log_probs(latent, model)
    beam: List[BeamState] = []
    for token in _top_indices(log_probs, global_beam):
        token = int(token)
        frontier = [] if token == model.eob_id else [FrontierLeaf((), zero, 1)]
        beam.append(BeamState(TernaryNode(token, None, [None] * arity), float(log_probs[token]), frontier))
    if check_scores:
        _check_scores(beam, latent, model)

    harvester = _Harvester()
    beam = harvester.take(beam)
    truncated = False
    rounds = 0
    while len(harvester.results) < global_beam and beam:
        rounds += 1
        successors, hit_cap = expand_beam(beam, latent, model, local_beam, node_cap, max_depth)
        truncated = truncated or hit_cap
        successors.sort(key=lambda s: _rank_key(s, length_normalize))
        beam = _dedupe(successors)[:global_beam]
        if check_scores:
            _check_scores(beam, latent, model)
        beam = harvester.take(beam)
        log.debug("Round %d: %d open, %d complete", rounds, len(beam), len(harvester.results))

    if truncated:
        log.warning("Search hit the node cap (%d); %d complete trees", node_cap, len(harvester.results))
    ranked = sorted(harvester.results, key=lambda s: _rank_key(s, length_normalize))[:global_beam]
    return SearchResult([Hypothesis(state.tree, state.score) for state in ranked], truncated)


def generate_response(post_tokens: Sequence[str], model: TreeDecoderModel, vocabulary, global_beam: int = 6,
                      local_beam: int = 6, node_cap: int = 64, length_normalize: bool = False) -> List[Tuple[str, float]]:
    """Ranked (sentence, score) pairs; distinct trees with equal text are all kept"""
    post = vocabulary.encode(post_tokens)
    latent = encode(post, model)
    result = generalized_beam_search(latent, model, global_beam, local_beam, node_cap,
                                     length_normalize=length_normalize)
    if not result.hypotheses:
        log.warning("No complete response within the node cap of %d", node_cap)
    return [
        (" ".join(vocabulary.decode(flatten_ternary(hypothesis.tree, model.eob_id))), hypothesis.score)
        for hypothesis in result.hypotheses
    ]
