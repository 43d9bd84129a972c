"""
Tree-structured decoder model for TreeReply

    encoder      GRU over the post, the last hidden state is the latent x
    root head    p(t_r | x) = softmax(g_r(x))
    child cells  h_k = f_k(t, h, x), one GRU cell per child slot k = 1..K
    child heads  p(c_k | x, t, A(t), c_<k) = softmax(g_k(x, t, h_k, c~_{k-1}))

c~_{k-1} concatenates the decoder embeddings of the earlier siblings and is
zero-padded to (K-1) * embed_dim. The hidden state handed to child c_k is
the h_k of its parent; the root receives the zero vector. Heads are one
tanh layer followed by the output projection. Every parameter is float64
and gradients are derived by hand (forward returns a cache, backward
consumes it).
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import ModelError, TreeInvariantError
from core.trees import TernaryNode, is_padded

log = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]
GATES = ("z", "r", "n")


@dataclass(frozen=True)
class ModelDims:
    vocab_size: int
    embed_dim: int = 32
    hidden_dim: int = 64
    arity: int = 3
    eob_id: int = 0

    @property
    def cell_input_dim(self) -> int:
        return self.embed_dim + self.hidden_dim

    @property
    def head_input_dim(self) -> int:
        # x, parent embedding, h_k, then (K-1) sibling embeddings
        return 2 * self.hidden_dim + self.arity * self.embed_dim

    def validate(self):
        for name in ("vocab_size", "embed_dim", "hidden_dim", "arity"):
            if getattr(self, name) < 1:
                raise ModelError(f"{name} must be at least 1, got {getattr(self, name)}")
        if not 0 <= self.eob_id < self.vocab_size:
            raise ModelError(f"eob_id {self.eob_id} outside the vocabulary")


def _gru_shapes(prefix: str, input_dim: int, hidden_dim: int) -> List[Tuple[str, Tuple[int, ...]]]:
    shapes = [(f"{prefix}.W{gate}", (hidden_dim, input_dim)) for gate in GATES]
    shapes += [(f"{prefix}.U{gate}", (hidden_dim, hidden_dim)) for gate in GATES]
    shapes += [(f"{prefix}.b{gate}", (hidden_dim,)) for gate in GATES]
    return shapes


def _head_shapes(prefix: str, input_dim: int, hidden_dim: int, vocab_size: int) -> List[Tuple[str, Tuple[int, ...]]]:
    return [
        (f"{prefix}.A", (hidden_dim, input_dim)),
        (f"{prefix}.b", (hidden_dim,)),
        (f"{prefix}.O", (vocab_size, hidden_dim)),
        (f"{prefix}.c", (vocab_size,)),
    ]


def parameter_shapes(dims: ModelDims) -> List[Tuple[str, Tuple[int, ...]]]:
    """Every parameter block, in the fixed order used by checkpoints"""
    V, E, H, K = dims.vocab_size, dims.embed_dim, dims.hidden_dim, dims.arity
    shapes = [("enc.embed", (V, E))]
    shapes += _gru_shapes("enc", E, H)
    shapes.append(("dec.embed", (V, E)))
    for k in range(1, K + 1):
        shapes += _gru_shapes(f"cell{k}", dims.cell_input_dim, H)
    shapes += _head_shapes("root", H, H, V)
    for k in range(1, K + 1):
        shapes += _head_shapes(f"head{k}", dims.head_input_dim, H, V)
    return shapes


def sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    return shifted - np.log(np.sum(np.exp(shifted)))


class GRUCell:
    """Gated recurrent update: h' = (1 - z) * h + z * tanh(W u + U (r * h) + b)"""

    def __init__(self, params: Params, prefix: str):
        self.params = params
        self.prefix = prefix

    def _p(self, name: str) -> np.ndarray:
        return self.params[f"{self.prefix}.{name}"]

    def forward(self, u: np.ndarray, h: np.ndarray) -> Tuple[np.ndarray, tuple]:
        z = sigmoid(self._p("Wz") @ u + self._p("Uz") @ h + self._p("bz"))
        r = sigmoid(self._p("Wr") @ u + self._p("Ur") @ h + self._p("br"))
        rh = r * h
        n = np.tanh(self._p("Wn") @ u + self._p("Un") @ rh + self._p("bn"))
        h_new = (1.0 - z) * h + z * n
        return h_new, (u, h, z, r, rh, n)

    def backward(self, dh_new: np.ndarray, cache: tuple, grads: Params) -> Tuple[np.ndarray, np.ndarray]:
        """Accumulate parameter gradients; return (d input, d previous hidden)"""
        u, h, z, r, rh, n = cache
        p = self.prefix

        dz = dh_new * (n - h)
        dn = dh_new * z
        dh = dh_new * (1.0 - z)

        dn_pre = dn * (1.0 - n * n)
        grads[f"{p}.Wn"] += np.outer(dn_pre, u)
        grads[f"{p}.Un"] += np.outer(dn_pre, rh)
        grads[f"{p}.bn"] += dn_pre
        du = self._p("Wn").T @ dn_pre
        drh = self._p("Un").T @ dn_pre
        dr = drh * h
        dh += drh * r

        dz_pre = dz * z * (1.0 - z)
        grads[f"{p}.Wz"] += np.outer(dz_pre, u)
        grads[f"{p}.Uz"] += np.outer(dz_pre, h)
        grads[f"{p}.bz"] += dz_pre
        du += self._p("Wz").T @ dz_pre
        dh += self._p("Uz").T @ dz_pre

        dr_pre = dr * r * (1.0 - r)
        grads[f"{p}.Wr"] += np.outer(dr_pre, u)
        grads[f"{p}.Ur"] += np.outer(dr_pre, h)
        grads[f"{p}.br"] += dr_pre
        du += self._p("Wr").T @ dr_pre
        dh += self._p("Ur").T @ dr_pre
        return du, dh


class SoftmaxHead:
    """log softmax(O tanh(A u + b) + c)"""

    def __init__(self, params: Params, prefix: str):
        self.params = params
        self.prefix = prefix

    def _p(self, name: str) -> np.ndarray:
        return self.params[f"{self.prefix}.{name}"]

    def forward(self, u: np.ndarray) -> Tuple[np.ndarray, tuple]:
        a = np.tanh(self._p("A") @ u + self._p("b"))
        logits = self._p("O") @ a + self._p("c")
        return log_softmax(logits), (u, a)

    def backward(self, dlogits: np.ndarray, cache: tuple, grads: Params) -> np.ndarray:
        u, a = cache
        p = self.prefix
        grads[f"{p}.O"] += np.outer(dlogits, a)
        grads[f"{p}.c"] += dlogits
        da_pre = (self._p("O").T @ dlogits) * (1.0 - a * a)
        grads[f"{p}.A"] += np.outer(da_pre, u)
        grads[f"{p}.b"] += da_pre
        return self._p("A").T @ da_pre


class TreeDecoderModel:
    """Parameter blocks plus the cells and heads that read them"""

    def __init__(self, dims: ModelDims, params: Optional[Params] = None):
        dims.validate()
        self.dims = dims
        shapes = parameter_shapes(dims)
        if params is None:
            params = {name: np.zeros(shape) for name, shape in shapes}
        else:
            missing = [name for name, _ in shapes if name not in params]
            if missing:
                raise ModelError(f"missing parameter blocks: {', '.join(missing)}")
            extra = set(params) - {name for name, _ in shapes}
            if extra:
                raise ModelError(f"unknown parameter blocks: {', '.join(sorted(extra))}")
            for name, shape in shapes:
                if params[name].shape != shape:
                    raise ModelError(f"{name}: expected shape {shape}, got {params[name].shape}")
            params = {name: np.asarray(params[name], dtype=np.float64) for name, _ in shapes}
        self.params: Params = params

        self.encoder = GRUCell(self.params, "enc")
        self.cells = [GRUCell(self.params, f"cell{k}") for k in range(1, dims.arity + 1)]
        self.root_head = SoftmaxHead(self.params, "root")
        self.heads = [SoftmaxHead(self.params, f"head{k}") for k in range(1, dims.arity + 1)]

    @property
    def eob_id(self) -> int:
        return self.dims.eob_id

    def copy(self) -> "TreeDecoderModel":
        return TreeDecoderModel(self.dims, {name: value.copy() for name, value in self.params.items()})

    def zero_gradients(self) -> Params:
        return {name: np.zeros_like(value) for name, value in self.params.items()}

    def parameter_count(self) -> int:
        return sum(value.size for value in self.params.values())

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(value)) for value in self.params.values())

    def check_token(self, token: int):
        if not 0 <= token < self.dims.vocab_size:
            raise ModelError(f"token index {token} outside 0..{self.dims.vocab_size - 1}")

    def check_vector(self, vector: np.ndarray, what: str):
        if np.shape(vector) != (self.dims.hidden_dim,):
            raise ModelError(f"{what} has shape {np.shape(vector)}, expected ({self.dims.hidden_dim},)")


# Encoder

def _encode_forward(post: Sequence[int], model: TreeDecoderModel) -> Tuple[np.ndarray, list]:
    if len(post) == 0:
        raise ModelError("cannot encode an empty post")
    embed = model.params["enc.embed"]
    h = np.zeros(model.dims.hidden_dim)
    caches = []
    for token in post:
        model.check_token(token)
        h, cache = model.encoder.forward(embed[token], h)
        caches.append((token, cache))
    return h, caches


def _encode_backward(dlatent: np.ndarray, caches: list, model: TreeDecoderModel, grads: Params):
    dh = dlatent
    for token, cache in reversed(caches):
        du, dh = model.encoder.backward(dh, cache, grads)
        grads["enc.embed"][token] += du


def encode(post: Sequence[int], model: TreeDecoderModel) -> np.ndarray:
    latent, _ = _encode_forward(post, model)
    return latent


# Distributions

def root_log_probs(latent: np.ndarray, model: TreeDecoderModel) -> np.ndarray:
    model.check_vector(latent, "latent")
    log_probs, _ = model.root_head.forward(latent)
    return log_probs


def root_distribution(latent: np.ndarray, model: TreeDecoderModel) -> np.ndarray:
    return np.exp(root_log_probs(latent, model))


def child_states(parent_token: int, parent_hidden: np.ndarray, latent: np.ndarray,
                 model: TreeDecoderModel) -> Tuple[np.ndarray, ...]:
    """(h_1, ..., h_K) for the children of `parent_token`"""
    model.check_token(parent_token)
    model.check_vector(parent_hidden, "parent hidden state")
    model.check_vector(latent, "latent")
    u = np.concatenate([model.params["dec.embed"][parent_token], latent])
    return tuple(cell.forward(u, parent_hidden)[0] for cell in model.cells)


def _head_input(model: TreeDecoderModel, latent: np.ndarray, parent_embedding: np.ndarray,
                h_k: np.ndarray, previous: Sequence[int]) -> np.ndarray:
    E = model.dims.embed_dim
    siblings = np.zeros((model.dims.arity - 1) * E)
    embed = model.params["dec.embed"]
    for i, token in enumerate(previous):
        siblings[i * E:(i + 1) * E] = embed[token]
    return np.concatenate([latent, parent_embedding, h_k, siblings])


def child_log_probs(k: int, latent: np.ndarray, parent_token: int, h_k: np.ndarray,
                    previous_children: Sequence[int], model: TreeDecoderModel) -> np.ndarray:
    if not 1 <= k <= model.dims.arity:
        raise ModelError(f"child position {k} outside 1..{model.dims.arity}")
    if len(previous_children) != k - 1:
        raise ModelError(f"child {k} needs {k - 1} earlier siblings, got {len(previous_children)}")
    model.check_token(parent_token)
    model.check_vector(h_k, f"h_{k}")
    model.check_vector(latent, "latent")
    for token in previous_children:
        model.check_token(token)
    u = _head_input(model, latent, model.params["dec.embed"][parent_token], h_k, previous_children)
    log_probs, _ = model.heads[k - 1].forward(u)
    return log_probs


def child_distribution(k: int, latent: np.ndarray, parent_token: int, h_k: np.ndarray,
                       previous_children: Sequence[int], model: TreeDecoderModel) -> np.ndarray:
    return np.exp(child_log_probs(k, latent, parent_token, h_k, previous_children, model))


# Likelihood

def _subtree_log_prob(top: TernaryNode, h: np.ndarray, latent: np.ndarray, model: TreeDecoderModel) -> float:
    """Log-probability of every child group below `top`; open leaves add nothing"""
    total = 0.0
    stack: List[Tuple[TernaryNode, np.ndarray]] = [(top, h)]
    while stack:
        node, hidden = stack.pop()
        if node.token == model.eob_id or node.is_leaf():
            continue
        if node.arity != model.dims.arity:
            raise ModelError(f"node arity {node.arity} does not match model arity {model.dims.arity}")
        states = child_states(node.token, hidden, latent, model)
        previous: List[int] = []
        for k, child in enumerate(node.slots, start=1):
            if child is None:
                raise TreeInvariantError(f"node {node.token} has a partially filled child group")
            total += child_log_probs(k, latent, node.token, states[k - 1], previous, model)[child.token]
            stack.append((child, states[k - 1]))
            previous.append(child.token)
    return total


def partial_log_likelihood(latent: np.ndarray, tree: TernaryNode, model: TreeDecoderModel) -> float:
    """log p of the generated part of a tree; open leaves are not scored"""
    total = root_log_probs(latent, model)[tree.token]
    return total + _subtree_log_prob(tree, np.zeros(model.dims.hidden_dim), latent, model)


def _require_padded(tree: TernaryNode, model: TreeDecoderModel):
    if not is_padded(tree, model.eob_id):
        raise TreeInvariantError("likelihood needs an EOB-padded full tree")


def tree_log_likelihood(instance, model: TreeDecoderModel) -> float:
    """log p(T | x) for an instance with `.post` and a padded `.response_tree`"""
    _require_padded(instance.response_tree, model)
    latent = encode(instance.post, model)
    return partial_log_likelihood(latent, instance.response_tree, model)


# Gradients

@dataclass
class _NodeFrame:
    """Forward values of one word node, kept until its backward step"""

    node: TernaryNode
    cell_caches: list
    dstates: List[np.ndarray]
    dembedding: np.ndarray
    parent: Optional["_NodeFrame"] = None
    parent_slot: int = 0


class _TreeBackprop:
    """Forward and backward over one response tree

    The forward sweep visits word nodes in pre-order and already runs the
    head backward steps, which need nothing from deeper nodes. The cell
    backward steps then run in reverse pre-order, so every child hands its
    d h_in to the parent before the parent's cells are reached.
    """

    def __init__(self, model: TreeDecoderModel, latent: np.ndarray):
        self.model = model
        self.latent = latent
        self.grads = model.zero_gradients()
        self.dlatent = np.zeros_like(latent)

    def root(self, root: TernaryNode) -> float:
        model = self.model
        log_probs, cache = model.root_head.forward(self.latent)
        nll = -log_probs[root.token]
        dlogits = np.exp(log_probs)
        dlogits[root.token] -= 1.0
        self.dlatent += model.root_head.backward(dlogits, cache, self.grads)
        if root.token != model.eob_id:
            nll += self.subtree(root, np.zeros(model.dims.hidden_dim))
        return nll

    def subtree(self, top: TernaryNode, h_top: np.ndarray) -> float:
        """NLL of the groups below `top`, accumulating every gradient"""
        nll = 0.0
        frames: List[_NodeFrame] = []
        pending: List[Tuple[TernaryNode, np.ndarray, Optional[_NodeFrame], int]] = [(top, h_top, None, 0)]
        while pending:
            node, h_in, parent, slot = pending.pop()
            frame, children, node_nll = self._forward(node, h_in)
            frame.parent, frame.parent_slot = parent, slot
            frames.append(frame)
            nll += node_nll
            for k in reversed(range(len(children))):
                child, h_k = children[k]
                if child.token != self.model.eob_id:
                    pending.append((child, h_k, frame, k))

        for frame in reversed(frames):
            dh_in = self._backward(frame)
            if frame.parent is not None:
                frame.parent.dstates[frame.parent_slot] += dh_in
        return nll

    def _forward(self, node: TernaryNode, h_in: np.ndarray):
        model = self.model
        H, E = model.dims.hidden_dim, model.dims.embed_dim
        embed = model.params["dec.embed"]
        grads = self.grads

        embedding = embed[node.token]
        u_cell = np.concatenate([embedding, self.latent])
        states, cell_caches = [], []
        for cell in model.cells:
            h_k, cache = cell.forward(u_cell, h_in)
            states.append(h_k)
            cell_caches.append(cache)

        nll = 0.0
        tokens = [child.token for child in node.slots]
        frame = _NodeFrame(node, cell_caches, [np.zeros(H) for _ in node.slots], np.zeros(E))
        for k, child in enumerate(node.slots):
            u = _head_input(model, self.latent, embedding, states[k], tokens[:k])
            log_probs, cache = model.heads[k].forward(u)
            nll -= log_probs[child.token]
            dlogits = np.exp(log_probs)
            dlogits[child.token] -= 1.0
            du = model.heads[k].backward(dlogits, cache, grads)

            self.dlatent += du[:H]
            frame.dembedding += du[H:H + E]
            frame.dstates[k] += du[H + E:2 * H + E]
            siblings = du[2 * H + E:]
            for i in range(k):
                grads["dec.embed"][tokens[i]] += siblings[i * E:(i + 1) * E]
        return frame, list(zip(node.slots, states)), nll

    def _backward(self, frame: _NodeFrame) -> np.ndarray:
        """Cell backward steps of one node; returns d h_in"""
        model = self.model
        E = model.dims.embed_dim
        dh_in = np.zeros(model.dims.hidden_dim)
        for cell, cache, dstate in zip(model.cells, frame.cell_caches, frame.dstates):
            du_cell, dh = cell.backward(dstate, cache, self.grads)
            frame.dembedding += du_cell[:E]
            self.dlatent += du_cell[E:]
            dh_in += dh
        self.grads["dec.embed"][frame.node.token] += frame.dembedding
        return dh_in


def nll_and_gradients(instance, model: TreeDecoderModel) -> Tuple[float, Params]:
    """Negative log-likelihood of one instance and its gradient for every block"""
    tree = instance.response_tree
    _require_padded(tree, model)
    if tree.token != model.eob_id and tree.arity != model.dims.arity:
        raise ModelError(f"tree arity {tree.arity} does not match model arity {model.dims.arity}")
    latent, encoder_caches = _encode_forward(instance.post, model)
    backprop = _TreeBackprop(model, latent)
    nll = backprop.root(tree)
    _encode_backward(backprop.dlatent, encoder_caches, model, backprop.grads)
    return float(nll), backprop.grads


def gradients(instance, model: TreeDecoderModel) -> Params:
    return nll_and_gradients(instance, model)[1]
