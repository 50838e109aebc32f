"""Experiment configuration: INI files with [circuit], [train] and [task] sections.

Values resolve in increasing precedence: per-task defaults, the config file,
then ``section.key=value`` overrides from the command line. Grammar and the
default table are in docs/config.md.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from minn.network import CircuitConfig
from minn.trainer import TrainConfig

TASKS = ("optimize", "sk", "mnist")


def _optional_float(text: str):
    return None if text.strip().lower() in ("none", "off", "") else float(text)


def _float_list(text: str):
    return [float(v) for v in text.replace(",", " ").split()]


SCHEMA = {
    "circuit": {
        "n_qubits": int,
        "n_layers": int,
        "measurement_prob": float,
        "site_policy": str,
    },
    "train": {
        "step_size": float,
        "momentum": float,
        "grad_samples": int,
        "infer_samples": int,
        "steps": int,
        "epochs": int,
        "batch_size": int,
        "activation_width": float,
        "in_bias": str,
        "out_bias": float,
        "clip_norm": _optional_float,
    },
    "task": {
        "function": str,
        "dim": int,
        "spins": int,
        "couplings": str,
        "instance_seed": int,
        "data_dir": str,
        "train_size": int,
        "test_size": int,
        "sweep_p": _float_list,
    },
}

_COMMON_CIRCUIT = {"n_qubits": "16", "site_policy": "reset", "measurement_prob": "0.5"}

DEFAULTS = {
    "optimize": {
        "circuit": dict(_COMMON_CIRCUIT, n_layers="2"),
        "train": {
            "step_size": "0.005",
            "momentum": "0.5",
            "grad_samples": "100",
            "infer_samples": "100",
            "steps": "500",
            "activation_width": "1.0",
            "in_bias": "uniform",
            "out_bias": "5.0",
        },
        "task": {"function": "levy", "dim": "2"},
    },
    "sk": {
        "circuit": dict(_COMMON_CIRCUIT, n_layers="4"),
        "train": {
            "step_size": "0.01",
            "momentum": "0.95",
            "grad_samples": "100",
            "infer_samples": "100",
            "steps": "1000",
            "activation_width": "1.0",
            "in_bias": "uniform",
            "out_bias": "0.0",
        },
        "task": {"spins": "12", "instance_seed": "0"},
    },
    "mnist": {
        "circuit": dict(_COMMON_CIRCUIT, n_layers="2"),
        "train": {
            "step_size": "0.03",
            "momentum": "0.9",
            "grad_samples": "200",
            "infer_samples": "200",
            "epochs": "10",
            "batch_size": "20",
            "activation_width": "3.0",
            "in_bias": "zero",
            "out_bias": "0.0",
        },
        "task": {"train_size": "1000", "test_size": "500"},
    },
}

# 10-D Ackley defaults to a larger step and heavier momentum
ACKLEY_10D = {"step_size": "0.01", "momentum": "0.9"}


class ConfigError(ValueError):
    pass


def read_config(path) -> dict[str, dict[str, str]]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path)
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from None
    raw = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key {section}.{key}")
            raw.setdefault(section, {})[key] = value
    return raw


def parse_override(text: str) -> tuple[str, str, str]:
    key, sep, value = text.partition("=")
    section, dot, name = key.strip().partition(".")
    if not sep or not dot:
        raise ConfigError(f"override {text!r} must look like section.key=value")
    if section not in SCHEMA or name not in SCHEMA[section]:
        raise ConfigError(f"unknown setting {section}.{name}")
    return section, name, value.strip()


def resolve(task: str, file_values=None, overrides=()) -> dict[str, dict]:
    """Merge defaults, file values and overrides, then convert to typed values."""
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}")
    merged = {s: dict(v) for s, v in DEFAULTS[task].items()}
    layers = [file_values or {}, {}]
    for text in overrides:
        section, name, value = parse_override(text)
        layers[1].setdefault(section, {})[name] = value
    for layer in layers:
        for section, values in layer.items():
            merged.setdefault(section, {}).update(values)
    if task == "optimize":
        explicit = {k for layer in layers for k in layer.get("train", {})}
        if merged["task"].get("function") == "ackley" and merged["task"].get("dim") == "10":
            for k, v in ACKLEY_10D.items():
                if k not in explicit:
                    merged["train"][k] = v
    typed = {}
    for section, values in merged.items():
        typed[section] = {}
        for key, text in values.items():
            try:
                typed[section][key] = SCHEMA[section][key](text)
            except ValueError:
                raise ConfigError(f"bad value for {section}.{key}: {text!r}") from None
    return typed


def build_train_config(typed: dict[str, dict], seed: int) -> TrainConfig:
    try:
        circuit = CircuitConfig(seed=seed, **typed["circuit"])
        return TrainConfig(circuit=circuit, **typed["train"])
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
