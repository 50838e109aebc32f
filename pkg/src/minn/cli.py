"""Command-line experiment runner.

    minn optimize --function levy --dim 10 --seed 7
    minn sk --spins 12 --out runs/sk
    minn mnist --data-dir data/mnist --sweep-p 0.3,0.5,1.0
    minn verify

Each training run writes ``history.csv``, ``result.json`` and ``params.ckpt``
to the output directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import subprocess
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from minn import checkpoint, experiments, verify
from minn.config import ConfigError, build_train_config, read_config, resolve

log = logging.getLogger("minn")


@dataclass
class ExperimentSpec:
    subcommand: str
    config: Path | None = None
    seed: int = 0
    out: Path | None = None
    overrides: list[str] = field(default_factory=list)
    quick: bool = False


def _probabilities(text: str) -> str:
    try:
        probs = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated probabilities, got {text!r}") from None
    if not probs or any(not 0 <= p <= 1 for p in probs):
        raise argparse.ArgumentTypeError("probabilities must lie in [0, 1]")
    return " ".join(repr(p) for p in probs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minn", description="Measurement-induced matchgate network experiments.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file with [circuit], [train], [task] sections")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, help="output directory (default runs/<subcommand>-seed<seed>)")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config value"
    )
    common.add_argument("-v", "--verbose", action="store_true")

    opt = sub.add_parser("optimize", parents=[common], help="minimise a Levy or Ackley function")
    opt.add_argument("--function", choices=["levy", "ackley"])
    opt.add_argument("--dim", type=int)

    sk = sub.add_parser("sk", parents=[common], help="search for an SK spin-glass ground state")
    sk.add_argument("--spins", type=int)
    sk.add_argument("--couplings", type=Path, help="coupling file; random instance if omitted")

    mn = sub.add_parser("mnist", parents=[common], help="train the MNIST classifier")
    mn.add_argument("--data-dir", type=Path)
    mn.add_argument("--sweep-p", type=_probabilities, help="comma-separated measurement probabilities")

    ver = sub.add_parser("verify", help="oracle-equivalence and gradient self-checks")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--quick", action="store_true", help="fewer instances")
    return parser


def parse_cli(argv=None) -> tuple[ExperimentSpec, argparse.Namespace]:
    parser = build_parser()
    args = parser.parse_args(argv)
    spec = ExperimentSpec(subcommand=args.subcommand, seed=args.seed, quick=getattr(args, "quick", False))
    if args.subcommand == "verify":
        return spec, args
    if args.config is not None and not args.config.is_file():
        parser.error(f"config file not found: {args.config}")
    spec.config = args.config
    spec.out = args.out or Path("runs") / f"{args.subcommand}-seed{args.seed}"
    flags = {
        "optimize": [("function", "function"), ("dim", "dim")],
        "sk": [("spins", "spins"), ("couplings", "couplings")],
        "mnist": [("data_dir", "data_dir"), ("sweep_p", "sweep_p")],
    }[args.subcommand]
    spec.overrides = list(args.overrides)
    for attr, key in flags:
        value = getattr(args, attr)
        if value is not None:
            spec.overrides.append(f"task.{key}={value}")
    if args.subcommand == "mnist":
        if args.data_dir is None and not any(o.startswith("task.data_dir=") for o in spec.overrides):
            if args.config is None or "data_dir" not in read_config(args.config).get("task", {}):
                parser.error("mnist needs --data-dir (or task.data_dir in the config)")
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG)
    return spec, args


def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=10,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"


def _write_run(out: Path, result: experiments.ExperimentResult, echo: dict, seed: int):
    out.mkdir(parents=True, exist_ok=True)
    (out / "history.csv").write_text(result.history.to_csv(), encoding="ascii", newline="\n")
    checkpoint.save(out / "params.ckpt", result.params)
    payload = {"status": "complete", "seed": seed, "git": git_describe(), "metrics": result.metrics, "config": echo}
    (out / "result.json").write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n")


def _fail(out: Path | None, seed: int, err: Exception) -> int:
    log.error("%s: %s", type(err).__name__, err)
    print(f"error: {err}", file=sys.stderr)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        payload = {"status": "failed", "seed": seed, "git": git_describe(), "error": f"{type(err).__name__}: {err}"}
        (out / "result.json").write_text(json.dumps(payload, indent=2) + "\n")
    return 1


def run_experiment(spec: ExperimentSpec) -> int:
    if spec.subcommand == "verify":
        results = verify.run_all(spec.seed, quick=spec.quick)
        for r in results:
            print(r.line())
        return 0 if all(r.passed for r in results) else 1

    try:
        file_values = read_config(spec.config) if spec.config else None
        typed = resolve(spec.subcommand, file_values, spec.overrides)
        config = build_train_config(typed, spec.seed)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    task = typed["task"]
    echo = {"subcommand": spec.subcommand, **typed}
    echo["circuit"] = asdict(config.circuit)

    try:
        if spec.subcommand == "optimize":
            result = experiments.run_optimize(config, task["function"], task["dim"])
        elif spec.subcommand == "sk":
            instance = experiments.sk_instance(task["spins"], task.get("instance_seed", 0), task.get("couplings"))
            result = experiments.run_sk(config, instance)
        else:
            train, test = experiments.load_mnist_dir(task["data_dir"], task["train_size"], task["test_size"])
            probs = task.get("sweep_p")
            if probs:
                return _run_sweep(spec, config, train, test, probs, echo)
            result = experiments.run_mnist(config, train, test)
        _write_run(spec.out, result, echo, spec.seed)
    except (ValueError, OSError, FloatingPointError) as e:
        return _fail(spec.out, spec.seed, e)
    print(json.dumps(result.metrics, indent=2))
    return 0


def _run_sweep(spec, config, train, test, probs, echo) -> int:
    rows = ["measurement_prob,test_accuracy,initial_cross_entropy,final_epoch_cross_entropy"]
    for p, result in experiments.sweep_mnist(config, train, test, probs):
        run_echo = dict(echo, circuit=dict(echo["circuit"], measurement_prob=p))
        _write_run(spec.out / f"p{p:g}", result, run_echo, spec.seed)
        m = result.metrics
        rows.append(f"{p!r},{m['test_accuracy']!r},{m['initial_cross_entropy']!r},{m['epoch_cross_entropy'][-1]!r}")
        print(rows[-1])
    (spec.out / "sweep.csv").write_text("\n".join(rows) + "\n", encoding="ascii")
    return 0


def main(argv=None) -> int:
    spec, _ = parse_cli(argv)
    return run_experiment(spec)


if __name__ == "__main__":
    sys.exit(main())
