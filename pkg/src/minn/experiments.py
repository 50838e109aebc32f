"""Task drivers shared by the command line and the acceptance tests.

Each ``run_*`` function trains from a :class:`TrainConfig` and returns an
:class:`ExperimentResult` holding the final parameters, the step history and a
JSON-ready metrics dict.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from minn import trainer
from minn.network import NetworkParams, infer
from minn.tasks.functions import FUNCTIONS
from minn.tasks.mnist import MnistData, encode_image, load_mnist
from minn.tasks.sk import SKInstance, sk_ground_state
from minn.trainer import TrainConfig, TrainingHistory

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass
class ExperimentResult:
    params: NetworkParams
    history: TrainingHistory
    metrics: dict


def _infer_rng(config: TrainConfig, i: int) -> np.random.Generator:
    return np.random.default_rng([config.seed, 0x1F3E, i])


def run_optimize(config: TrainConfig, function: str, dim: int) -> ExperimentResult:
    objective = trainer.FunctionObjective(function, dim, config.circuit.n_qubits)
    params, history = trainer.train(config, objective)
    fn = FUNCTIONS[function][0]
    metrics = {"function": function, "dim": dim, "steps": len(history)}
    if len(history):
        x_mean, _ = infer(params, np.ones(config.circuit.n_qubits), config.circuit, config.infer_samples, _infer_rng(config, 0))
        metrics.update(
            final_best_cost=history.records[-1].best_cost,
            final_mean_cost=history.records[-1].mean_cost,
            initial_running_best=history.records[0].running_best,
            final_running_best=history.records[-1].running_best,
            inferred_output=x_mean.tolist(),
            inferred_cost=float(fn(x_mean)),
        )
        if history.best_aux is not None:
            metrics["best_output"] = history.best_aux.tolist()
    return ExperimentResult(params, history, metrics)


def sk_instance(spins: int, instance_seed: int = 0, couplings=None) -> SKInstance:
    if couplings is not None:
        inst = SKInstance.load(couplings)
        if inst.n_spins != spins:
            raise ValueError(f"{couplings} holds {inst.n_spins} spins but {spins} were requested")
        return inst
    return SKInstance.random(spins, np.random.default_rng([instance_seed, 0x5C]))


def run_sk(config: TrainConfig, instance: SKInstance) -> ExperimentResult:
    objective = trainer.SKObjective(instance, config.circuit.n_qubits)
    params, history = trainer.train(config, objective)
    e0, ground = sk_ground_state(instance)
    metrics = {"spins": instance.n_spins, "ground_energy": e0, "ground_state": ground.tolist(), "steps": len(history)}
    if len(history):
        best = history.records[-1].running_best
        metrics.update(
            best_energy=best,
            gap=best - e0,
            relative_gap=(best - e0) / abs(e0) if e0 else 0.0,
            best_spins=None if history.best_aux is None else history.best_aux.tolist(),
            final_mean_energy=history.records[-1].mean_cost,
        )
    return ExperimentResult(params, history, metrics)


def load_mnist_dir(data_dir, train_size: int, test_size: int):
    """Load the IDX files from ``data_dir`` and take the first ``train_size`` / ``test_size`` images.

    When only the training pair is present, the test images are taken from the
    end of the training file instead.
    """
    data_dir = Path(data_dir)

    def find(name):
        for cand in (data_dir / name, data_dir / (name + ".gz")):
            if cand.exists():
                return cand
        return None

    tr_img, tr_lab = (find(n) for n in MNIST_FILES["train"])
    if tr_img is None or tr_lab is None:
        raise FileNotFoundError(f"{data_dir}: training IDX files not found")
    train = load_mnist(tr_img, tr_lab)
    te_img, te_lab = (find(n) for n in MNIST_FILES["test"])
    if te_img is not None and te_lab is not None:
        test = load_mnist(te_img, te_lab)
    else:
        if train_size + test_size > len(train):
            raise ValueError(f"need {train_size + test_size} images, {data_dir} has {len(train)}")
        test = train.subset(slice(len(train) - test_size, None))
    if train_size > len(train) or test_size > len(test):
        raise ValueError(f"requested {train_size}/{test_size} images, have {len(train)}/{len(test)}")
    return train.subset(slice(0, train_size)), test.subset(slice(0, test_size))


def evaluate_classifier(params, data: MnistData, config: TrainConfig) -> float:
    x = encode_image(data.images, config.circuit.n_qubits)
    hits = 0
    for i in range(len(data)):
        _, label = infer(params, x[i], config.circuit, config.infer_samples, _infer_rng(config, i), head="sigmoid")
        hits += int(label == data.labels[i])
    return hits / len(data)


def epoch_means(history: TrainingHistory, steps_per_epoch: int) -> list[float]:
    costs = history.column("mean_cost")
    return [float(costs[i : i + steps_per_epoch].mean()) for i in range(0, len(costs), steps_per_epoch)]


def run_mnist(config: TrainConfig, train: MnistData, test: MnistData) -> ExperimentResult:
    objective = trainer.MNISTObjective(encode_image(train.images, config.circuit.n_qubits), train.labels)
    params, history = trainer.train(config, objective)
    per_epoch = epoch_means(history, trainer.steps_per_epoch(objective, config))
    metrics = {
        "train_size": len(train),
        "test_size": len(test),
        "measurement_prob": config.circuit.measurement_prob,
        "epoch_cross_entropy": per_epoch,
        "initial_cross_entropy": history.records[0].mean_cost if len(history) else None,
        "test_accuracy": evaluate_classifier(params, test, config),
    }
    return ExperimentResult(params, history, metrics)


def sweep_mnist(config: TrainConfig, train: MnistData, test: MnistData, probs) -> list[tuple[float, ExperimentResult]]:
    out = []
    for p in probs:
        cfg = replace(config, circuit=replace(config.circuit, measurement_prob=float(p)))
        out.append((float(p), run_mnist(cfg, train, test)))
    return out
