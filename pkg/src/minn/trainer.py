"""Training loop: initialisation, SGD with momentum, and per-task objectives.

Every trajectory draws its random numbers from its own generator seeded with
``(seed, step, sample_index)``, and all reductions run in sample order, so a
run is reproducible regardless of how the batch is split across threads
(``MINN_THREADS``).
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from minn import grad, network
from minn.gaussian import gates_in_layer, layer_parity
from minn.network import CircuitConfig, NetworkParams, linear_head, sigmoid_head
from minn.tasks.functions import FUNCTIONS
from minn.tasks.mnist import cross_entropy
from minn.tasks.sk import SKInstance, sample_spins, sk_energy

log = logging.getLogger(__name__)

BiasPolicy = Literal["zero", "uniform"]


@dataclass
class TrainConfig:
    circuit: CircuitConfig
    step_size: float = 0.005
    momentum: float = 0.5
    grad_samples: int = 100
    infer_samples: int = 100
    steps: int = 500
    epochs: int = 1
    batch_size: int = 70
    activation_width: float = 1.0
    in_bias: BiasPolicy = "uniform"
    out_bias: float = 5.0
    clip_norm: float | None = 100.0

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step size must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        for name in ("grad_samples", "infer_samples", "batch_size", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.in_bias not in ("zero", "uniform"):
            raise ValueError(f"unknown input-bias policy {self.in_bias!r}")

    @property
    def seed(self) -> int:
        return self.circuit.seed


@dataclass
class StepRecord:
    step: int
    mean_cost: float
    best_cost: float
    running_best: float
    grad_norm: float
    wall_time: float


@dataclass
class TrainingHistory:
    records: list[StepRecord] = field(default_factory=list)
    best_aux: object = None

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    CSV_COLUMNS = ("step", "mean_cost", "best_cost", "running_best", "grad_norm")

    def to_csv(self) -> str:
        lines = [",".join(self.CSV_COLUMNS)]
        for r in self.records:
            lines.append(",".join([str(r.step)] + [repr(float(getattr(r, c))) for c in self.CSV_COLUMNS[1:]]))
        return "\n".join(lines) + "\n"


def init_params(config: TrainConfig, out_dim: int, rng: np.random.Generator) -> NetworkParams:
    """Kaiming-normal weights; hidden biases zero except ``b^0`` per ``config.in_bias``."""
    circuit, activation_width, out_bias = config.circuit, config.activation_width, config.out_bias
    n = circuit.n_qubits
    std = math.sqrt(2.0 / n)
    weights, biases = [], []
    for l in range(circuit.n_layers):
        rows = 6 * gates_in_layer(n, layer_parity(l + 1))
        weights.append(rng.normal(0.0, std, (rows, n)))
        if l == 0 and config.in_bias == "uniform":
            biases.append(rng.uniform(-activation_width, activation_width, rows))
        else:
            biases.append(np.zeros(rows))
    return NetworkParams(
        weights=weights,
        biases=biases,
        out_weight=rng.normal(0.0, std, (out_dim, n)),
        out_bias=np.full(out_dim, float(out_bias)),
        activation_width=activation_width,
    )


def sgd_momentum_step(params: NetworkParams, gradient, velocity, lr: float, momentum: float):
    """Heavy ball: ``v <- momentum * v + g``; ``params <- params - lr * v``."""
    gradient = np.asarray(gradient, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    if gradient.shape != (params.n_params,) or velocity.shape != gradient.shape:
        raise ValueError("gradient and velocity must match the parameter vector")
    velocity = momentum * velocity + gradient
    return params.from_vector(params.to_vector() - lr * velocity), velocity


def _head_block(dz: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Flatten per-sample head gradients from ``d/dlogits`` into (W^L, b^L) order."""
    dw = np.einsum("so,sj->soj", dz, mu).reshape(dz.shape[0], -1)
    return np.concatenate([dw, dz], axis=1)


@dataclass
class Evaluation:
    costs: np.ndarray
    head_pathwise: np.ndarray
    head_score: np.ndarray
    aux: np.ndarray | None = None


class FunctionObjective:
    """Minimise a test function of the linear head output."""

    head = "linear"
    n_task_uniforms = 0
    n_examples = None

    def __init__(self, name: str, dim: int, n_qubits: int):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}; choose from {sorted(FUNCTIONS)}")
        self.name, self.dim, self.n_qubits = name, dim, n_qubits
        self.fn, self.fn_grad = FUNCTIONS[name]
        self.out_dim = dim

    def sample_inputs(self, u, batch=None):
        return np.ones((u.shape[0], self.n_qubits)), None

    def evaluate(self, params, mu, u, labels=None) -> Evaluation:
        x_out = linear_head(params.out_weight, params.out_bias, mu)
        pathwise = _head_block(self.fn_grad(x_out), mu)
        return Evaluation(self.fn(x_out), pathwise, np.zeros_like(pathwise), x_out)


class SKObjective:
    """Sample spins from the sigmoid head and score their SK energy."""

    head = "sigmoid"
    n_examples = None

    def __init__(self, instance: SKInstance, n_qubits: int):
        self.instance, self.n_qubits = instance, n_qubits
        self.out_dim = instance.n_spins
        self.n_task_uniforms = instance.n_spins

    def sample_inputs(self, u, batch=None):
        return np.ones((u.shape[0], self.n_qubits)), None

    def evaluate(self, params, mu, u, labels=None) -> Evaluation:
        q = sigmoid_head(params.out_weight, params.out_bias, mu)
        spins = sample_spins(q, u)
        # d log q(spins) / d logits
        dz = (spins > 0) - q
        score = _head_block(dz, mu)
        return Evaluation(sk_energy(self.instance, spins), np.zeros_like(score), score, spins)


class MNISTObjective:
    """Cross-entropy of the sigmoid head on encoded images drawn from the current batch."""

    head = "sigmoid"
    n_task_uniforms = 1
    out_dim = 10

    def __init__(self, inputs: np.ndarray, labels: np.ndarray):
        self.inputs = np.asarray(inputs, dtype=float)
        self.labels = np.asarray(labels, dtype=int)
        self.n_examples = len(self.labels)

    def sample_inputs(self, u, batch):
        pick = np.minimum((u[:, 0] * len(batch)).astype(int), len(batch) - 1)
        idx = np.asarray(batch)[pick]
        return self.inputs[idx], self.labels[idx]

    def evaluate(self, params, mu, u, labels=None) -> Evaluation:
        q = sigmoid_head(params.out_weight, params.out_bias, mu)
        y = np.eye(10)[labels]
        pathwise = _head_block(q - y, mu)
        return Evaluation(cross_entropy(q, labels), pathwise, np.zeros_like(pathwise))


def trajectory_rngs(seed: int, step: int, count: int, start: int = 0) -> list[np.random.Generator]:
    return [np.random.default_rng([seed, step, i]) for i in range(start, start + count)]


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MINN_THREADS", "1")))
    except ValueError:
        return 1


def sample_chunk(params, objective, config: TrainConfig, step, start, count, batch=None):
    """Trajectories ``start .. start+count`` of ``step``: ``(costs, scores, pathwise, aux)`` per sample."""
    circ = config.circuit
    rngs = trajectory_rngs(config.seed, step, count, start)
    u_circ = np.stack([network.trajectory_uniforms(r, circ.n_layers, circ.n_qubits) for r in rngs])
    u_task = np.stack([r.random(objective.n_task_uniforms) for r in rngs])
    inputs, labels = objective.sample_inputs(u_task, batch)
    tape = network.sample_trajectories(params, inputs, circ, u_circ)
    scores = grad.score(params, tape)
    ev = objective.evaluate(params, tape.final_record, u_task, labels)
    head = params.head_slice()
    scores[:, head] = ev.head_score
    pathwise = np.zeros_like(scores)
    pathwise[:, head] = ev.head_pathwise
    return ev.costs, scores, pathwise, ev.aux


def estimate_gradient(params, objective, config: TrainConfig, step: int, batch=None):
    """Sample ``grad_samples`` trajectories and return ``(gradient, costs, aux)``."""
    total = config.grad_samples
    threads = min(_threads(), total)
    bounds = np.linspace(0, total, threads + 1).astype(int)
    jobs = [(int(a), int(b - a)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if len(jobs) == 1:
        parts = [sample_chunk(params, objective, config, step, *jobs[0], batch)]
    else:
        with ThreadPoolExecutor(len(jobs)) as pool:
            parts = list(pool.map(lambda j: sample_chunk(params, objective, config, step, *j, batch), jobs))
    costs = np.concatenate([p[0] for p in parts])
    scores = np.concatenate([p[1] for p in parts])
    pathwise = np.concatenate([p[2] for p in parts])
    aux = None if parts[0][3] is None else np.concatenate([p[3] for p in parts])
    baseline = grad.optimal_baseline(costs, scores)
    g = grad.reinforce_gradient(costs, scores, pathwise, baseline)
    return g, costs, aux


def train_step(params, velocity, objective, config: TrainConfig, step: int, batch=None):
    """One SGD step. Returns ``(params, velocity, costs, grad_norm, aux)``."""
    g, costs, aux = estimate_gradient(params, objective, config, step, batch)
    norm = float(np.linalg.norm(g))
    if not np.isfinite(norm):
        raise FloatingPointError(
            f"non-finite gradient at step {step}: cost range [{costs.min()}, {costs.max()}]"
        )
    if config.clip_norm is not None and norm > config.clip_norm:
        g = g * (config.clip_norm / norm)
    params, velocity = sgd_momentum_step(params, g, velocity, config.step_size, config.momentum)
    return params, velocity, costs, norm, aux


def schedule(objective, config: TrainConfig):
    """Yield ``(step, batch)``: fixed steps for optimisation, epochs of batches for datasets."""
    if objective.n_examples is None:
        for step in range(config.steps):
            yield step, None
        return
    n = objective.n_examples
    step = 0
    for epoch in range(config.epochs):
        perm = np.random.default_rng([config.seed, epoch, 0xE90C]).permutation(n)
        for start in range(0, n, config.batch_size):
            yield step, perm[start : start + config.batch_size]
            step += 1


def steps_per_epoch(objective, config: TrainConfig) -> int:
    if objective.n_examples is None:
        return config.steps
    return math.ceil(objective.n_examples / config.batch_size)


def train(config: TrainConfig, objective, params: NetworkParams | None = None, progress=None):
    """Run the full schedule and return ``(params, history)``."""
    if params is None:
        params = init_params(config, objective.out_dim, np.random.default_rng([config.seed, 0x1417]))
    velocity = np.zeros(params.n_params)
    history = TrainingHistory()
    running = math.inf
    t0 = time.perf_counter()
    for step, batch in schedule(objective, config):
        params, velocity, costs, norm, aux = train_step(params, velocity, objective, config, step, batch)
        k = int(np.argmin(costs))
        if costs[k] < running:
            running = float(costs[k])
            if aux is not None:
                history.best_aux = np.array(aux[k])
        rec = StepRecord(
            step=step,
            mean_cost=float(costs.mean()),
            best_cost=float(costs[k]),
            running_best=running,
            grad_norm=norm,
            wall_time=time.perf_counter() - t0,
        )
        history.records.append(rec)
        if progress is not None:
            progress(rec)
        log.debug("step %d mean %.5g best %.5g |g| %.3g", step, rec.mean_cost, rec.best_cost, norm)
    return params, history
