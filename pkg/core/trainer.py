"""
Training loop for TreeReply

Mini-batch minimisation of the tree NLL with ADADELTA (or plain SGD),
validation perplexity after every epoch, early stopping on consecutive
increases, and the best-perplexity model kept and returned.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from core.errors import ConfigError
from core.model import ModelDims, Params, TreeDecoderModel, nll_and_gradients, parameter_shapes, tree_log_likelihood
from core.trees import count_nodes

log = logging.getLogger(__name__)

MAX_EPOCHS = "max_epochs"
EARLY_STOP = "early_stop"
NAN_ABORT = "nan_abort"


def init_parameters(dims: ModelDims, seed: int, scale: float = 0.01) -> TreeDecoderModel:
    """Every parameter drawn uniformly from [-scale, scale]"""
    rng = np.random.default_rng(seed)
    params = {name: rng.uniform(-scale, scale, size=shape) for name, shape in parameter_shapes(dims)}
    return TreeDecoderModel(dims, params)


class SGD:
    def __init__(self, learning_rate: float = 0.1):
        self.learning_rate = learning_rate

    def step(self, params: Params, grads: Params):
        for name, grad in grads.items():
            params[name] -= self.learning_rate * grad


class Adadelta:
    """ADADELTA with running averages of squared gradients and squared updates"""

    def __init__(self, rho: float = 0.95, epsilon: float = 1e-6, learning_rate: float = 1.0):
        self.rho = rho
        self.epsilon = epsilon
        self.learning_rate = learning_rate
        self.grad_variance: Dict[str, np.ndarray] = {}
        self.delta_variance: Dict[str, np.ndarray] = {}

    def step(self, params: Params, grads: Params):
        rho, eps = self.rho, self.epsilon
        for name, grad in grads.items():
            if name not in self.grad_variance:
                self.grad_variance[name] = np.zeros_like(grad)
                self.delta_variance[name] = np.zeros_like(grad)
            eg2 = self.grad_variance[name]
            ed2 = self.delta_variance[name]
            eg2 *= rho
            eg2 += (1.0 - rho) * grad * grad
            delta = np.sqrt(ed2 + eps) / np.sqrt(eg2 + eps) * grad
            ed2 *= rho
            ed2 += (1.0 - rho) * delta * delta
            params[name] -= self.learning_rate * delta


def make_optimizer(config):
    if config.optimizer == "adadelta":
        return Adadelta(config.adadelta_rho, config.adadelta_epsilon, config.learning_rate)
    if config.optimizer == "sgd":
        return SGD(config.learning_rate)
    raise ConfigError(f"unknown optimizer {config.optimizer!r}")


def perplexity(instances: Sequence, model: TreeDecoderModel) -> float:
    """exp(total NLL / predicted nodes); the root and every child slot count, EOB included"""
    if not instances:
        raise ValueError("perplexity of an empty set")
    total_nll = 0.0
    total_nodes = 0
    for instance in instances:
        total_nll -= tree_log_likelihood(instance, model)
        total_nodes += count_nodes(instance.response_tree)
    return math.exp(total_nll / total_nodes)


@dataclass
class EpochRecord:
    epoch: int
    train_nll: float
    validation_perplexity: float


@dataclass
class TrainResult:
    model: TreeDecoderModel
    history: List[EpochRecord] = field(default_factory=list)
    stop_reason: str = MAX_EPOCHS

    @property
    def best_perplexity(self) -> float:
        return min((record.validation_perplexity for record in self.history), default=math.inf)


def make_batches(instances: Sequence, batch_size: int) -> List[List[int]]:
    """Instance indices grouped by response word count, `batch_size` at a time"""
    order = sorted(range(len(instances)), key=lambda i: (instances[i].word_count(), i))
    return [order[start:start + batch_size] for start in range(0, len(order), batch_size)]


class Trainer:
    """Runs the epochs; `on_best` is called with each new best model"""

    def __init__(self, config, vocab_size: int, on_best: Optional[Callable[[TreeDecoderModel], None]] = None):
        if config.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if config.patience < 1:
            raise ConfigError("patience must be at least 1")
        self.config = config
        self.dims = ModelDims(vocab_size, config.embed_dim, config.hidden_dim, config.arity)
        self.on_best = on_best

    def _batch_gradients(self, batch: List[int], instances: Sequence, model: TreeDecoderModel, pool):
        items = [instances[i] for i in batch]
        if pool is not None:
            results = list(pool.map(lambda instance: nll_and_gradients(instance, model), items))
        else:
            results = [nll_and_gradients(instance, model) for instance in items]
        total_nll = 0.0
        summed = model.zero_gradients()
        # summed in instance index order whatever the scheduling
        for nll, grads in results:
            total_nll += nll
            for name, grad in grads.items():
                summed[name] += grad
        for grad in summed.values():
            grad /= len(items)
        return total_nll, summed

    def train(self, instances: Sequence, validation: Sequence) -> TrainResult:
        if not instances:
            raise ValueError("no training instances")
        if not validation:
            raise ValueError("no validation instances")
        config = self.config
        rng = np.random.default_rng(config.seed)
        model = init_parameters(self.dims, config.seed, config.init_scale)
        optimizer = make_optimizer(config)
        batches = make_batches(instances, config.batch_size)
        log.info("Training on %d instances in %d batches, %d parameters",
                 len(instances), len(batches), model.parameter_count())

        result = TrainResult(model.copy())
        best = math.inf
        previous = math.inf
        increases = 0
        pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
        try:
            for epoch in range(1, config.max_epochs + 1):
                epoch_nll = 0.0
                for batch_index in rng.permutation(len(batches)):
                    batch_nll, grads = self._batch_gradients(batches[batch_index], instances, model, pool)
                    if not math.isfinite(batch_nll) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                        log.error("Non-finite loss in epoch %d; keeping the best model so far", epoch)
                        result.stop_reason = NAN_ABORT
                        return result
                    epoch_nll += batch_nll
                    optimizer.step(model.params, grads)

                validation_perplexity = perplexity(validation, model)
                record = EpochRecord(epoch, epoch_nll / len(instances), validation_perplexity)
                result.history.append(record)
                log.info("Epoch %d: train NLL %.4f, validation perplexity %.4f",
                         epoch, record.train_nll, validation_perplexity)

                if validation_perplexity < best:
                    best = validation_perplexity
                    result.model = model.copy()
                    if self.on_best is not None:
                        self.on_best(result.model)

                increases = increases + 1 if validation_perplexity > previous else 0
                previous = validation_perplexity
                if increases >= config.patience:
                    log.info("Validation perplexity rose %d epochs in a row; stopping", increases)
                    result.stop_reason = EARLY_STOP
                    return result
        finally:
            if pool is not None:
                pool.shutdown()
        return result


def train(instances: Sequence, validation: Sequence, config, vocab_size: int,
          on_best: Optional[Callable[[TreeDecoderModel], None]] = None) -> TrainResult:
    return Trainer(config, vocab_size, on_best).train(instances, validation)
