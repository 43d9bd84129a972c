import math

import numpy as np
import pytest

from core.errors import ModelError, TreeInvariantError
from core.model import (
    ModelDims,
    TreeDecoderModel,
    child_distribution,
    child_states,
    encode,
    gradients,
    nll_and_gradients,
    parameter_shapes,
    partial_log_likelihood,
    root_distribution,
    tree_log_likelihood,
)
from core.trees import EOB, DependencyTree, TernaryNode, canonicalize, dep_to_sp, map_ternary, pad_eob
from corpus.instances import TrainingInstance

EOB_ID = 0


def eob_leaf(arity=3):
    return TernaryNode(EOB_ID, None, [None] * arity)


def word(token, children=None, arity=3):
    return TernaryNode(token, None, children if children is not None else [eob_leaf(arity) for _ in range(arity)])


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _log_softmax(v):
    return v - np.log(np.sum(np.exp(v)))


def _reference_gru(p, prefix, u, h):
    z = _sigmoid(p[prefix + ".Wz"] @ u + p[prefix + ".Uz"] @ h + p[prefix + ".bz"])
    r = _sigmoid(p[prefix + ".Wr"] @ u + p[prefix + ".Ur"] @ h + p[prefix + ".br"])
    n = np.tanh(p[prefix + ".Wn"] @ u + p[prefix + ".Un"] @ (r * h) + p[prefix + ".bn"])
    return (1 - z) * h + z * n


def _reference_head(p, prefix, u):
    return _log_softmax(p[prefix + ".O"] @ np.tanh(p[prefix + ".A"] @ u + p[prefix + ".b"]) + p[prefix + ".c"])


def _reference_depth_one(model, post, root_token, children):
    """Forward pass written out for a root whose three children are leaves"""
    p = model.params
    H, E = model.dims.hidden_dim, model.dims.embed_dim
    x = np.zeros(H)
    for token in post:
        x = _reference_gru(p, "enc", p["enc.embed"][token], x)
    total = _reference_head(p, "root", x)[root_token]
    u = np.concatenate([p["dec.embed"][root_token], x])
    for k in range(3):
        h_k = _reference_gru(p, f"cell{k + 1}", u, np.zeros(H))
        siblings = np.zeros(2 * E)
        for i, token in enumerate(children[:k]):
            siblings[i * E:(i + 1) * E] = p["dec.embed"][token]
        head_input = np.concatenate([x, p["dec.embed"][root_token], h_k, siblings])
        total += _reference_head(p, f"head{k + 1}", head_input)[children[k]]
    return total


class TestEncoder:
    def test_deterministic_and_finite(self, make_model):
        model = make_model()
        first = encode([2, 3, 4], model)
        np.testing.assert_array_equal(first, encode([2, 3, 4], model))
        assert np.all(np.isfinite(first))

    def test_zero_parameters_give_zero_latent(self):
        model = TreeDecoderModel(ModelDims(4, 2, 2))
        np.testing.assert_array_equal(encode([1, 2, 3], model), np.zeros(2))

    def test_two_steps_by_hand(self):
        model = TreeDecoderModel(ModelDims(4, 2, 2))
        model.params["enc.bn"][:] = [1.0, -1.0]
        model.params["enc.bz"][:] = [0.0, math.log(3.0)]
        t = math.tanh(1.0)
        # z = (0.5, 0.75); n = (t, -t) at both steps
        np.testing.assert_allclose(encode([2, 3], model), [0.75 * t, -0.9375 * t], rtol=1e-12)

    def test_out_of_range_token(self, make_model):
        with pytest.raises(ModelError):
            encode([8], make_model())

    def test_empty_post(self, make_model):
        with pytest.raises(ModelError):
            encode([], make_model())


class TestDistributions:
    def test_root_distribution_sums_to_one(self, make_model, rng):
        model = make_model()
        for _ in range(10):
            probs = root_distribution(rng.normal(size=4), model)
            assert np.all(probs >= 0)
            assert probs.sum() == pytest.approx(1.0, abs=1e-6)

    def test_zero_root_head_is_uniform(self):
        model = TreeDecoderModel(ModelDims(5, 3, 3))
        np.testing.assert_allclose(root_distribution(np.ones(3), model), np.full(5, 0.2))

    def test_raising_a_logit_raises_its_probability(self, make_model):
        model = make_model()
        latent = encode([2, 3], model)
        before = root_distribution(latent, model)[4]
        model.params["root.c"][4] += 0.5
        assert root_distribution(latent, model)[4] > before

    def test_child_distribution_sums_to_one(self, make_model, rng):
        model = make_model()
        latent = encode([1, 2], model)
        states = child_states(3, np.zeros(4), latent, model)
        for k, previous in ((1, []), (2, [5]), (3, [5, 0])):
            probs = child_distribution(k, latent, 3, states[k - 1], previous, model)
            assert np.all(probs >= 0)
            assert probs.sum() == pytest.approx(1.0, abs=1e-6)

    def test_zero_child_head_is_uniform(self):
        model = TreeDecoderModel(ModelDims(4, 2, 2))
        probs = child_distribution(2, np.ones(2), 1, np.ones(2), [3], model)
        np.testing.assert_allclose(probs, np.full(4, 0.25))

    def test_earlier_sibling_changes_the_next_distribution(self, make_model):
        model = make_model()
        latent = encode([1, 2], model)
        h_2 = child_states(3, np.zeros(4), latent, model)[1]
        first = child_distribution(2, latent, 3, h_2, [2], model)
        second = child_distribution(2, latent, 3, h_2, [5], model)
        assert not np.allclose(first, second)

    def test_position_outside_arity(self, make_model):
        model = make_model()
        with pytest.raises(ModelError):
            child_distribution(4, np.zeros(4), 1, np.zeros(4), [1, 2, 3], model)
        with pytest.raises(ModelError):
            child_distribution(0, np.zeros(4), 1, np.zeros(4), [], model)

    def test_sibling_count_must_match_position(self, make_model):
        with pytest.raises(ModelError):
            child_distribution(2, np.zeros(4), 1, np.zeros(4), [], make_model())


class TestChildStates:
    def test_copied_cells_agree(self, make_model):
        model = make_model()
        for name in [n for n in model.params if n.startswith("cell1.")]:
            model.params[name.replace("cell1.", "cell2.")][...] = model.params[name]
        latent = encode([2], model)
        h_1, h_2, h_3 = child_states(4, np.zeros(4), latent, model)
        np.testing.assert_array_equal(h_1, h_2)
        assert not np.allclose(h_1, h_3)

    def test_distinct_cells_differ(self, make_model):
        model = make_model(seed=3)
        h_1, h_2, _ = child_states(2, np.full(4, 0.1), encode([5], model), model)
        assert not np.allclose(h_1, h_2)

    def test_dimension_mismatch(self, make_model):
        with pytest.raises(ModelError):
            child_states(2, np.zeros(3), np.zeros(4), make_model())


class TestLikelihood:
    def test_single_word_under_zero_parameters(self):
        v = 6
        model = TreeDecoderModel(ModelDims(v, 3, 3))
        instance = TrainingInstance([2, 3], word(4))
        assert tree_log_likelihood(instance, model) == pytest.approx(4 * math.log(1.0 / v))

    def test_matches_hand_computed_forward_pass(self, make_model):
        model = make_model(vocab_size=4, dim=2, seed=5)
        instance = TrainingInstance([1, 3, 2], word(2))
        expected = _reference_depth_one(model, [1, 3, 2], 2, [0, 0, 0])
        assert tree_log_likelihood(instance, model) == pytest.approx(expected, rel=1e-12)

    def test_log_likelihood_is_non_positive(self, make_model, random_instance, rng):
        model = make_model()
        for _ in range(10):
            assert tree_log_likelihood(random_instance(rng, 8, int(rng.integers(1, 6))), model) <= 0

    def test_unpadded_tree_is_refused(self, make_model):
        instance = TrainingInstance([1], TernaryNode(2, None, [None, None, None]))
        with pytest.raises(TreeInvariantError):
            tree_log_likelihood(instance, make_model())

    def test_empty_response_is_the_root_eob(self, make_model):
        model = make_model()
        latent = encode([2], model)
        instance = TrainingInstance([2], eob_leaf())
        assert tree_log_likelihood(instance, model) == pytest.approx(math.log(root_distribution(latent, model)[0]))

    def test_partial_likelihood_ignores_open_leaves(self, make_model):
        model = make_model()
        latent = encode([2, 4], model)
        open_tree = word(3, [TernaryNode(5, None, [None] * 3), eob_leaf(), eob_leaf()])
        closed_tree = word(3, [word(5), eob_leaf(), eob_leaf()])
        shallow = partial_log_likelihood(latent, open_tree, model)
        full = partial_log_likelihood(latent, closed_tree, model)
        assert full < shallow < 0

    def test_mass_over_capped_trees_is_at_most_one(self, make_model, capped_trees):
        model = make_model(vocab_size=4, dim=3, seed=9)
        trees = capped_trees(4, 2)
        assert len(trees) == 193
        total = sum(math.exp(tree_log_likelihood(TrainingInstance([1, 2], tree), model)) for tree in trees)
        assert 0 < total <= 1 + 1e-6

    def test_mass_is_one_when_deep_trees_are_negligible(self, make_model, capped_trees):
        model = make_model(vocab_size=4, dim=3, seed=10)
        for k in (1, 2, 3):
            model.params[f"head{k}.c"][EOB_ID] = 60.0
        total = sum(math.exp(tree_log_likelihood(TrainingInstance([3], tree), model))
                    for tree in capped_trees(4, 2))
        assert total == pytest.approx(1.0, abs=1e-6)


def _numeric_gradient(model, instance, name, step=1e-4):
    values = model.params[name]
    numeric = np.zeros_like(values)
    for index in np.ndindex(values.shape):
        saved = values[index]
        values[index] = saved + step
        plus = -tree_log_likelihood(instance, model)
        values[index] = saved - step
        minus = -tree_log_likelihood(instance, model)
        values[index] = saved
        numeric[index] = (plus - minus) / (2 * step)
    return numeric


def _relative_error(analytic, numeric):
    scale = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if scale == 0:
        return 0.0
    return np.linalg.norm(analytic - numeric) / scale


class TestGradients:
    def test_matches_finite_differences(self, make_model, random_instance, rng):
        model = make_model(vocab_size=8, dim=4, seed=17, scale=0.5)
        for _ in range(5):
            instance = random_instance(rng, 8, int(rng.integers(1, 4)))
            nll, grads = nll_and_gradients(instance, model)
            assert nll == pytest.approx(-tree_log_likelihood(instance, model), rel=1e-12)
            for name, _ in parameter_shapes(model.dims):
                numeric = _numeric_gradient(model, instance, name)
                assert _relative_error(grads[name], numeric) <= 1e-4, name

    def test_single_slot_model(self, make_model):
        model = make_model(vocab_size=5, dim=3, arity=1, seed=2)
        tree = word(2, [word(3, [eob_leaf(1)], arity=1)], arity=1)
        instance = TrainingInstance([1, 4], tree)
        grads = gradients(instance, model)
        for name in ("cell1.Un", "head1.A", "dec.embed", "enc.Wz"):
            assert _relative_error(grads[name], _numeric_gradient(model, instance, name)) <= 1e-4, name

    def test_stationary_point_with_one_token(self):
        model = TreeDecoderModel(ModelDims(1, 2, 2), {
            name: np.full(shape, 0.3) for name, shape in parameter_shapes(ModelDims(1, 2, 2))
        })
        nll, grads = nll_and_gradients(TrainingInstance([0], eob_leaf()), model)
        assert nll == pytest.approx(0.0)
        for grad in grads.values():
            np.testing.assert_array_equal(grad, 0.0)

    def test_recurrent_weights_unused_below_the_root(self, make_model):
        # every child group hangs off the root, whose incoming state is zero
        model = make_model()
        grads = gradients(TrainingInstance([2], word(3)), model)
        for k in (1, 2, 3):
            for gate in ("z", "r", "n"):
                np.testing.assert_array_equal(grads[f"cell{k}.U{gate}"], 0.0)
            assert np.any(grads[f"cell{k}.Wn"] != 0)

    def test_recurrent_weights_used_in_deeper_trees(self, make_model):
        model = make_model()
        grads = gradients(TrainingInstance([2], word(3, [eob_leaf(), word(4), eob_leaf()])), model)
        assert np.any(grads["cell2.Uz"] != 0)

    def test_parameters_are_not_modified(self, make_model, random_instance, rng):
        model = make_model()
        before = {name: value.copy() for name, value in model.params.items()}
        gradients(random_instance(rng, 8, 3), model)
        for name, value in model.params.items():
            np.testing.assert_array_equal(value, before[name])

    def test_long_sibling_chain(self, make_model):
        model = make_model(vocab_size=5, dim=3, seed=4)
        sentence = DependencyTree([f"w{i}" for i in range(1201)], [-1] + [0] * 1200)
        tree = map_ternary(
            pad_eob(canonicalize(dep_to_sp(sentence))),
            lambda node, slots: TernaryNode(EOB_ID if node.token == EOB else 1 + int(node.token[1:]) % 4,
                                            node.tag, slots),
        )
        instance = TrainingInstance([1, 2], tree)
        nll, grads = nll_and_gradients(instance, model)
        assert nll == pytest.approx(-tree_log_likelihood(instance, model), rel=1e-9)
        assert all(np.all(np.isfinite(grad)) for grad in grads.values())
        assert np.any(grads["cell2.Uz"] != 0)
