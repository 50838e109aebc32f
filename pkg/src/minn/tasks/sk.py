"""Sherrington-Kirkpatrick spin glass: instances, energies, exhaustive ground states.

Coupling files are plain text: the first line holds ``N``, then one
``i j J_ij`` line per pair with ``0 <= i < j < N``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_EXHAUSTIVE_SPINS = 24


@dataclass
class SKInstance:
    couplings: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.couplings, dtype=float)
        if j.ndim != 2 or j.shape[0] != j.shape[1]:
            raise ValueError("couplings must be a square matrix")
        if not np.allclose(j, j.T) or np.any(np.diag(j) != 0):
            raise ValueError("couplings must be symmetric with zero diagonal")
        self.couplings = j

    @property
    def n_spins(self) -> int:
        return self.couplings.shape[0]

    @classmethod
    def random(cls, n_spins: int, rng: np.random.Generator) -> "SKInstance":
        """Gaussian couplings with variance ``1/N``."""
        upper = np.triu(rng.normal(0.0, 1.0 / np.sqrt(n_spins), (n_spins, n_spins)), k=1)
        return cls(upper + upper.T)

    def save(self, path):
        n = self.n_spins
        lines = [str(n)]
        for i in range(n):
            for k in range(i + 1, n):
                lines.append(f"{i} {k} {float(self.couplings[i, k])!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "SKInstance":
        rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
        if not rows or len(rows[0]) != 1:
            raise ValueError(f"{path}: first line must hold the spin count")
        n = int(rows[0][0])
        j = np.zeros((n, n))
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'i j J_ij'")
            i, k, v = int(row[0]), int(row[1]), float(row[2])
            if not 0 <= i < k < n:
                raise ValueError(f"{path}:{lineno}: need 0 <= i < j < {n}")
            j[i, k] = j[k, i] = v
        return cls(j)


def sk_energy(instance: SKInstance, spins) -> np.ndarray:
    """``H = -sum_{i>j} J_ij s_i s_j`` for spins (or a batch of them) in {-1, +1}."""
    s = np.asarray(spins, dtype=float)
    if s.shape[-1] != instance.n_spins:
        raise ValueError(f"expected {instance.n_spins} spins, got {s.shape[-1]}")
    if not np.all(np.abs(s) == 1):
        raise ValueError("spins must be +1 or -1")
    return -0.5 * np.einsum("...i,ij,...j->...", s, instance.couplings, s)


def sk_ground_state(instance: SKInstance, chunk: int = 1 << 16):
    """Exact ground state by enumeration, with spin 0 pinned to +1 (global flip symmetry)."""
    n = instance.n_spins
    if n > MAX_EXHAUSTIVE_SPINS:
        raise ValueError(f"exhaustive search limited to {MAX_EXHAUSTIVE_SPINS} spins")
    if n == 1:
        return 0.0, np.ones(1)
    total = 1 << (n - 1)
    shifts = np.arange(n - 1)
    best_e, best_idx = np.inf, 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        bits = (idx[:, None] >> shifts) & 1
        spins = np.concatenate([np.ones((idx.size, 1)), 1.0 - 2.0 * bits], axis=1)
        e = sk_energy(instance, spins)
        k = int(np.argmin(e))
        if e[k] < best_e:
            best_e, best_idx = float(e[k]), int(idx[k])
    bits = (best_idx >> shifts) & 1
    return best_e, np.concatenate([[1.0], 1.0 - 2.0 * bits])


@dataclass
class CostSample:
    record: np.ndarray
    cost: float
    spins: np.ndarray
    log_likelihood: float


def sample_spins(prob_up, uniforms) -> np.ndarray:
    """Product-Bernoulli spins: +1 where ``uniforms < prob_up``."""
    return np.where(np.asarray(uniforms) < np.asarray(prob_up), 1.0, -1.0)


def spin_log_likelihood(prob_up, spins) -> np.ndarray:
    q = np.clip(np.asarray(prob_up, dtype=float), 1e-300, 1.0)
    q_down = np.clip(1.0 - np.asarray(prob_up, dtype=float), 1e-300, 1.0)
    return np.where(np.asarray(spins) > 0, np.log(q), np.log(q_down)).sum(axis=-1)


def sk_cost_from_record(instance: SKInstance, prob_up, rng: np.random.Generator, record=None) -> CostSample:
    """Sample a spin configuration from the head probabilities and score its energy."""
    prob_up = np.asarray(prob_up, dtype=float)
    if prob_up.shape != (instance.n_spins,):
        raise ValueError(f"head must output {instance.n_spins} probabilities")
    spins = sample_spins(prob_up, rng.random(instance.n_spins))
    return CostSample(
        record=record,
        cost=float(sk_energy(instance, spins)),
        spins=spins,
        log_likelihood=float(spin_log_likelihood(prob_up, spins)),
    )
