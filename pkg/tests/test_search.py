import itertools

import numpy as np
import pytest

from core.errors import SearchError
from core.model import (
    child_log_probs,
    child_states,
    encode,
    partial_log_likelihood,
    root_log_probs,
    tree_log_likelihood,
)
from core.search import (
    BeamState,
    FrontierLeaf,
    _check_scores,
    expand_beam,
    generalized_beam_search,
    generate_response,
    local_child_search,
)
from core.trees import TernaryNode, count_nodes, is_padded, structure_key
from corpus.instances import TrainingInstance
from corpus.vocabulary import UNK, Vocabulary


def _chain(tree):
    tokens = []
    node = tree
    while node is not None:
        tokens.append(node.token)
        node = node.slots[0]
    return tuple(tokens)


def _sequence_beam_search(latent, model, global_beam, local_beam, node_cap):
    """Plain left-to-right beam search, the single-slot special case"""
    eob = model.eob_id
    log_probs = root_log_probs(latent, model)
    order = np.argsort(-log_probs, kind="stable")[:global_beam]
    beam = [((int(t),), float(log_probs[t]), np.zeros(model.dims.hidden_dim)) for t in order]
    finished = [item for item in beam if item[0][-1] == eob]
    beam = [item for item in beam if item[0][-1] != eob]
    while len(finished) < global_beam and beam:
        candidates = []
        for tokens, score, hidden in beam:
            (h_1,) = child_states(tokens[-1], hidden, latent, model)
            step = child_log_probs(1, latent, tokens[-1], h_1, [], model)
            for t in np.argsort(-step, kind="stable")[:local_beam]:
                if len(tokens) + 1 <= node_cap:
                    candidates.append((tokens + (int(t),), score + float(step[t]), h_1))
        candidates.sort(key=lambda item: -item[1])
        beam = candidates[:global_beam]
        finished += [item for item in beam if item[0][-1] == eob]
        beam = [item for item in beam if item[0][-1] != eob]
    finished.sort(key=lambda item: -item[1])
    return [(tokens, score) for tokens, score, _ in finished[:global_beam]]


def _favour_eob(model, bias=2.0):
    for k in range(1, model.dims.arity + 1):
        model.params[f"head{k}.c"][model.eob_id] += bias


class TestLocalChildSearch:
    def test_width_one_is_greedy(self, make_model):
        model = make_model(seed=1)
        latent = encode([2, 3], model)
        hidden = np.zeros(4)
        states = child_states(5, hidden, latent, model)
        greedy = []
        for k in (1, 2, 3):
            greedy.append(int(np.argmax(child_log_probs(k, latent, 5, states[k - 1], greedy, model))))
        (group,) = local_child_search(5, hidden, latent, model, 1)
        assert list(group.tokens) == greedy

    def test_full_width_enumerates_every_group(self, make_model):
        model = make_model(vocab_size=3, seed=2)
        latent = encode([1, 2], model)
        hidden = np.full(4, 0.2)
        states = child_states(1, hidden, latent, model)
        brute = {}
        for combo in itertools.product(range(3), repeat=3):
            brute[combo] = sum(
                child_log_probs(k, latent, 1, states[k - 1], list(combo[:k - 1]), model)[combo[k - 1]]
                for k in (1, 2, 3)
            )
        groups = local_child_search(1, hidden, latent, model, 27)
        assert len(groups) == 27
        assert {g.tokens for g in groups} == set(brute)
        for group in groups:
            assert group.score == pytest.approx(brute[group.tokens], abs=1e-12)
        scores = [g.score for g in groups]
        assert scores == sorted(scores, reverse=True)

    def test_forced_eob_group(self, make_model):
        model = make_model()
        (group,) = local_child_search(3, np.zeros(4), encode([1], model), model, 5, force_eob=True)
        assert group.tokens == (0, 0, 0)
        assert group.score < 0


class TestBeamSearch:
    def test_single_slot_matches_sequence_beam_search(self, make_model):
        for seed in range(20):
            model = make_model(vocab_size=6, arity=1, seed=seed, scale=1.0)
            latent = encode([1, 2, 3], model)
            result = generalized_beam_search(latent, model, 3, 3, node_cap=30)
            expected = _sequence_beam_search(latent, model, 3, 3, 30)
            assert [_chain(h.tree) for h in result.hypotheses] == [tokens for tokens, _ in expected]
            for hypothesis, (_, score) in zip(result.hypotheses, expected):
                assert hypothesis.score == pytest.approx(score, abs=1e-9)

    def test_exhaustive_search_finds_the_best_capped_tree(self, make_model, capped_trees):
        trees = capped_trees(4, 2)
        for seed in range(20):
            model = make_model(vocab_size=4, dim=3, seed=100 + seed, scale=1.0)
            post = [1, 3]
            latent = encode(post, model)
            result = generalized_beam_search(latent, model, 512, 64, node_cap=64, max_depth=2)
            assert len(result.hypotheses) == len(trees)
            scored = [(tree_log_likelihood(TrainingInstance(post, tree), model), tree) for tree in trees]
            best_score, best_tree = max(scored, key=lambda item: item[0])
            assert structure_key(result.hypotheses[0].tree) == structure_key(best_tree)
            assert result.hypotheses[0].score == pytest.approx(best_score, abs=1e-9)

    def test_round_expands_one_open_leaf_per_successor(self, make_model):
        model = make_model(seed=3)
        latent = encode([1, 2], model)
        root_states = child_states(5, np.zeros(4), latent, model)
        tree = TernaryNode(5, None, [TernaryNode(2, None), TernaryNode(0, None), TernaryNode(3, None)])
        frontier = [FrontierLeaf((0,), root_states[0], 2), FrontierLeaf((2,), root_states[2], 2)]
        state = BeamState(tree, float(partial_log_likelihood(latent, tree, model)), frontier, node_count=4)

        successors, truncated = expand_beam([state], latent, model, local_beam=3)
        assert not truncated
        assert len(successors) == 6
        for index, successor in enumerate(successors):
            expanded, waiting = (0, 2) if index < 3 else (2, 0)
            assert not successor.tree.slots[expanded].is_leaf()
            assert successor.tree.slots[waiting].is_leaf()
            assert successor.node_count == count_nodes(successor.tree) == 7
            assert (waiting,) in [leaf.path for leaf in successor.frontier]
            assert all(leaf.path == (waiting,) or leaf.path[0] == expanded for leaf in successor.frontier)

        for offset, slot in ((0, 0), (3, 2)):
            groups = local_child_search(tree.slots[slot].token, root_states[slot], latent, model, 3)
            assert [tuple(child.token for child in s.tree.slots[slot].slots)
                    for s in successors[offset:offset + 3]] == [g.tokens for g in groups]
        _check_scores(successors, latent, model)
        assert tree.slots[0].is_leaf() and tree.slots[2].is_leaf()

    def test_scores_are_tree_likelihoods(self, make_model):
        model = make_model(seed=7)
        _favour_eob(model)
        post = [2, 4, 6]
        result = generalized_beam_search(encode(post, model), model, 4, 3, check_scores=True)
        assert result.hypotheses
        scores = [h.score for h in result.hypotheses]
        assert scores == sorted(scores, reverse=True)
        for hypothesis in result.hypotheses:
            assert is_padded(hypothesis.tree, 0)
            likelihood = tree_log_likelihood(TrainingInstance(post, hypothesis.tree), model)
            assert hypothesis.score == pytest.approx(likelihood, abs=1e-9)

    def test_results_are_distinct(self, make_model):
        model = make_model(seed=8)
        result = generalized_beam_search(encode([1], model), model, 6, 6)
        keys = [structure_key(h.tree) for h in result.hypotheses]
        assert len(keys) == len(set(keys))

    def test_smallest_beams(self, make_model):
        model = make_model(seed=9)
        result = generalized_beam_search(encode([3], model), model, 1, 1)
        assert len(result.hypotheses) <= 1

    def test_eob_root_is_complete(self, make_model):
        model = make_model()
        model.params["root.c"][0] = 50.0
        result = generalized_beam_search(encode([2], model), model, 1, 2)
        assert result.hypotheses[0].tree.token == 0
        assert count_nodes(result.hypotheses[0].tree) == 1

    def test_node_cap_truncates(self, make_model):
        model = make_model()
        model.params["root.c"][0] = -50.0
        result = generalized_beam_search(encode([2], model), model, 1, 1, node_cap=1)
        assert result.hypotheses == []
        assert result.truncated

    def test_length_normalized_ranking(self, make_model):
        model = make_model(seed=12)
        result = generalized_beam_search(encode([5, 1], model), model, 5, 3, length_normalize=True)
        keys = [h.score / count_nodes(h.tree) for h in result.hypotheses]
        assert keys == sorted(keys, reverse=True)

    @pytest.mark.parametrize("global_beam, local_beam", [(0, 1), (1, 0)])
    def test_beams_must_be_positive(self, make_model, global_beam, local_beam):
        model = make_model()
        with pytest.raises(ValueError):
            generalized_beam_search(encode([1], model), model, global_beam, local_beam)


class TestScoreCheck:
    def test_tampered_score_is_caught(self, make_model):
        model = make_model()
        latent = encode([1, 2], model)
        state = BeamState(TernaryNode(3, None, [None] * 3), 0.0, [FrontierLeaf((), np.zeros(4), 1)])
        with pytest.raises(SearchError):
            _check_scores([state], latent, model)

    def test_true_score_passes(self, make_model):
        model = make_model()
        latent = encode([1, 2], model)
        score = float(root_log_probs(latent, model)[3])
        _check_scores([BeamState(TernaryNode(3, None, [None] * 3), score)], latent, model)


class TestGenerateResponse:
    def test_sentences_come_back_ranked(self, make_model):
        model = make_model(seed=13)
        _favour_eob(model)
        vocabulary = Vocabulary(["<eob>", UNK] + [f"w{i}" for i in range(6)])
        responses = generate_response(["w1", "w2", "unseen"], model, vocabulary, 3, 3)
        assert 1 <= len(responses) <= 3
        scores = [score for _, score in responses]
        assert scores == sorted(scores, reverse=True)
        for sentence, _ in responses:
            assert all(token in vocabulary for token in sentence.split())

    def test_empty_response_for_eob_root(self, make_model):
        model = make_model()
        model.params["root.c"][0] = 50.0
        vocabulary = Vocabulary(["<eob>", UNK] + [f"w{i}" for i in range(6)])
        assert generate_response(["w0"], model, vocabulary, 1, 1)[0][0] == ""
