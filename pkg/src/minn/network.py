"""Adaptive monitored brick-wall network.

Layer ``l = 1..L`` applies a brick-wall matchgate layer whose ``6 * n_gates``
angles are ``theta = pi/2 * (1 - htanh((W @ mu_prev + b) / a))`` and then
measures each site with probability ``p``. ``mu_prev`` is the previous
layer's outcome vector (0 for unmeasured sites); for the first layer it is the
input bitstring, which also prepares the initial basis state.

Trajectories are simulated in batches: every array on a
:class:`TrajectoryTape` carries a leading trajectory axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import expit

from minn import gaussian
from minn.gaussian import EPS_PROB, ImpossibleOutcomeError, LayerRotation, MeasurementEvent

SitePolicy = Literal["fixed", "reset"]


@dataclass
class NetworkParams:
    """Hidden affine maps ``(W^l, b^l)`` for l = 0..L-1 plus the output head."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    out_weight: np.ndarray
    out_bias: np.ndarray
    activation_width: float

    def __post_init__(self):
        if not self.activation_width > 0:
            raise ValueError("activation width must be positive")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per hidden weight matrix and at least one layer")
        n = self.n_qubits
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            g = gaussian.gates_in_layer(n, gaussian.layer_parity(l + 1))
            if w.shape != (6 * g, n) or b.shape != (6 * g,):
                raise ValueError(
                    f"layer {l} expects W of shape {(6 * g, n)} and b of shape {(6 * g,)}, "
                    f"got {w.shape} and {b.shape}"
                )
        if self.out_weight.ndim != 2 or self.out_weight.shape[1] != n:
            raise ValueError(f"output weight must have shape (out_dim, {n})")
        if self.out_bias.shape != (self.out_weight.shape[0],):
            raise ValueError("output bias does not match output weight")

    @property
    def n_qubits(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def out_dim(self) -> int:
        return self.out_weight.shape[0]

    def arrays(self) -> list[np.ndarray]:
        """All trainable arrays in canonical (flattening) order."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out + [self.out_weight, self.out_bias]

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def head_slice(self) -> slice:
        """Flat-vector slice covering ``out_weight`` and ``out_bias``."""
        n_head = self.out_weight.size + self.out_bias.size
        return slice(self.n_params - n_head, self.n_params)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def from_vector(self, vec: np.ndarray) -> "NetworkParams":
        """New parameters with this layout filled from a flat vector."""
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_params,):
            raise ValueError(f"expected vector of length {self.n_params}, got {vec.shape}")
        arrays, pos = [], 0
        for a in self.arrays():
            arrays.append(vec[pos : pos + a.size].reshape(a.shape).copy())
            pos += a.size
        hidden = arrays[:-2]
        return NetworkParams(
            weights=hidden[0::2],
            biases=hidden[1::2],
            out_weight=arrays[-2],
            out_bias=arrays[-1],
            activation_width=self.activation_width,
        )


@dataclass
class CircuitConfig:
    n_qubits: int
    n_layers: int
    measurement_prob: float
    site_policy: SitePolicy = "reset"
    seed: int = 0

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ValueError("need at least two qubits")
        if self.n_layers < 1:
            raise ValueError("need at least one layer")
        if not 0.0 <= self.measurement_prob <= 1.0:
            raise ValueError("measurement probability must lie in [0, 1]")
        if self.site_policy not in ("fixed", "reset"):
            raise ValueError(f"unknown site policy {self.site_policy!r}")

    def fixed_sites(self) -> np.ndarray:
        """The ``(L, N)`` site mask shared by all trajectories under the fixed policy."""
        rng = np.random.default_rng([self.seed, 0x5173])
        return rng.random((self.n_layers, self.n_qubits)) < self.measurement_prob


def activation(x, width: float) -> np.ndarray:
    """Hard tanh of width ``width``: ``x/width`` clipped to [-1, 1]."""
    if not width > 0:
        raise ValueError("activation width must be positive")
    return np.clip(np.asarray(x, dtype=float) / width, -1.0, 1.0)


def activation_slope(x, width: float) -> np.ndarray:
    """Derivative of :func:`activation`; the linear branch includes ``|x| = width``."""
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) <= width, 1.0 / width, 0.0)


def angles_from_record(w: np.ndarray, b: np.ndarray, mu_prev, width: float) -> np.ndarray:
    """Gate angles in [0, pi] for the next layer, flat with shape ``(..., 6 * n_gates)``."""
    mu_prev = np.asarray(mu_prev, dtype=float)
    if mu_prev.shape[-1] != w.shape[1] or b.shape != (w.shape[0],):
        raise ValueError(
            f"record of length {mu_prev.shape[-1]} incompatible with W {w.shape} and b {b.shape}"
        )
    return 0.5 * np.pi * (1.0 - activation(mu_prev @ w.T + b, width))


def select_sites(config: CircuitConfig, layer: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask of the sites measured in ``layer`` (each with probability p)."""
    if not 1 <= layer <= config.n_layers:
        raise ValueError(f"layer {layer} outside 1..{config.n_layers}")
    return rng.random(config.n_qubits) < config.measurement_prob


def trajectory_uniforms(rng: np.random.Generator, n_layers: int, n_qubits: int) -> np.ndarray:
    """Random numbers consumed by one trajectory: ``[0]`` site selection, ``[1]`` outcomes."""
    return rng.random((2, n_layers, n_qubits))


@dataclass
class LayerTape:
    parity: gaussian.Parity
    mu_prev: np.ndarray  # (S, N)
    pre_activation: np.ndarray  # (S, 6G)
    angles: np.ndarray  # (S, G, 6)
    rotation: LayerRotation
    gamma_post_unitary: np.ndarray  # (S, 2N, 2N)
    outcomes: np.ndarray  # (S, N), 0 where unmeasured
    probabilities: np.ndarray  # (S, N), 1 where unmeasured
    pre_measurement: np.ndarray | None = None  # (S, N, 2N, 2N)


@dataclass
class TrajectoryTape:
    """Forward record of a batch of trajectories, enough to replay or backpropagate."""

    inputs: np.ndarray
    layers: list[LayerTape]
    final_gamma: np.ndarray
    log_prob: np.ndarray = field(init=False)

    def __post_init__(self):
        logp = np.zeros(self.inputs.shape[0])
        for lt in self.layers:
            logp = logp + np.log(lt.probabilities).sum(axis=-1)
        self.log_prob = logp

    @property
    def n_trajectories(self) -> int:
        return self.inputs.shape[0]

    @property
    def record(self) -> np.ndarray:
        """Outcomes with shape ``(S, L, N)``, zero where a site was not measured."""
        return np.stack([lt.outcomes for lt in self.layers], axis=1)

    @property
    def final_record(self) -> np.ndarray:
        return self.layers[-1].outcomes

    def events(self, k: int = 0) -> list[MeasurementEvent]:
        """Ordered measurement events of trajectory ``k``."""
        out = []
        for l, lt in enumerate(self.layers, start=1):
            for j in np.flatnonzero(lt.outcomes[k]):
                out.append(
                    MeasurementEvent(
                        layer=l,
                        site=int(j),
                        outcome=int(lt.outcomes[k, j]),
                        probability=float(lt.probabilities[k, j]),
                    )
                )
        return out


def simulate(
    params: NetworkParams,
    inputs,
    sites=None,
    outcome_uniforms=None,
    record=None,
    keep_snapshots: bool = True,
) -> TrajectoryTape:
    """Run a batch of trajectories.

    Either ``record`` (``(S, L, N)`` forced outcomes, 0 = unmeasured) is
    replayed, or outcomes are sampled from ``outcome_uniforms`` (``(S, L, N)``)
    on the sites selected by the boolean mask ``sites`` (broadcastable to
    ``(S, L, N)``). A forced outcome with probability below ``EPS_PROB``
    raises :class:`ImpossibleOutcomeError`.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    n, n_layers = params.n_qubits, params.n_layers
    if x.shape[-1] != n:
        raise ValueError(f"input length {x.shape[-1]} does not match {n} qubits")
    s_count = x.shape[0]
    if record is not None:
        record = np.broadcast_to(np.asarray(record, dtype=float), (s_count, n_layers, n))
        if not np.all(np.isin(record, (-1.0, 0.0, 1.0))):
            raise ValueError("record entries must be -1, 0 or +1")
    else:
        if sites is None or outcome_uniforms is None:
            raise ValueError("sampling needs both a site mask and outcome uniforms")
        sites = np.broadcast_to(np.asarray(sites, dtype=bool), (s_count, n_layers, n))
        outcome_uniforms = np.broadcast_to(outcome_uniforms, (s_count, n_layers, n))

    gamma = gaussian.basis_covariance(x)
    mu_prev = x
    width = params.activation_width
    layers = []
    for l in range(n_layers):
        parity = gaussian.layer_parity(l + 1)
        w, b = params.weights[l], params.biases[l]
        z = mu_prev @ w.T + b
        theta = 0.5 * np.pi * (1.0 - activation(z, width))
        angles = theta.reshape(s_count, -1, 6)
        rot = gaussian.assemble_layer(angles, parity, n)
        gamma = gaussian.apply_layer(gamma, rot)
        post_unitary = gamma
        outcomes = np.zeros((s_count, n))
        probs = np.ones((s_count, n))
        snaps = np.empty((s_count, n) + gamma.shape[-2:]) if keep_snapshots else None
        for j in range(n):
            if snaps is not None:
                snaps[:, j] = gamma
            pp = gaussian.prob_plus(gamma, j)
            if record is not None:
                mu = record[:, l, j]
                p = np.where(mu > 0, pp, 1.0 - pp)
                if np.any((mu != 0) & (p < EPS_PROB)):
                    raise ImpossibleOutcomeError(
                        f"forced outcome at layer {l + 1}, site {j} has zero probability"
                    )
            else:
                mu = np.where(outcome_uniforms[:, l, j] < pp, 1.0, -1.0)
                mu = np.where(sites[:, l, j], mu, 0.0)
                p = np.where(mu > 0, pp, 1.0 - pp)
            if np.any(mu != 0):
                gamma = gaussian.apply_measurement(gamma, j, mu)
            outcomes[:, j] = mu
            probs[:, j] = np.where(mu != 0, p, 1.0)
        layers.append(
            LayerTape(
                parity=parity,
                mu_prev=mu_prev,
                pre_activation=z,
                angles=angles,
                rotation=rot,
                gamma_post_unitary=post_unitary,
                outcomes=outcomes,
                probabilities=probs,
                pre_measurement=snaps,
            )
        )
        mu_prev = outcomes
    return TrajectoryTape(inputs=x, layers=layers, final_gamma=gamma)


def sample_trajectories(
    params: NetworkParams,
    inputs,
    config: CircuitConfig,
    uniforms: np.ndarray,
    keep_snapshots: bool = True,
) -> TrajectoryTape:
    """Sample one trajectory per row of ``inputs`` using ``uniforms`` of shape ``(S, 2, L, N)``."""
    uniforms = np.asarray(uniforms)
    if config.site_policy == "fixed":
        sites = config.fixed_sites()
    else:
        sites = uniforms[:, 0] < config.measurement_prob
    return simulate(params, inputs, sites=sites, outcome_uniforms=uniforms[:, 1], keep_snapshots=keep_snapshots)


def forward_trajectory(
    params: NetworkParams, x, config: CircuitConfig, rng: np.random.Generator
) -> TrajectoryTape:
    """Sample a single trajectory for input bitstring ``x`` (entries +-1)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (config.n_qubits,):
        raise ValueError(f"input must have length {config.n_qubits}")
    u = trajectory_uniforms(rng, config.n_layers, config.n_qubits)[None]
    return sample_trajectories(params, x[None], config, u)


def replay(params: NetworkParams, inputs, record, keep_snapshots: bool = True) -> TrajectoryTape:
    """Re-run trajectories under a forced measurement record."""
    return simulate(params, inputs, record=record, keep_snapshots=keep_snapshots)


def linear_head(w: np.ndarray, b: np.ndarray, mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if mu.shape[-1] != w.shape[1] or b.shape != (w.shape[0],):
        raise ValueError("output head dimensions do not match record")
    return mu @ w.T + b


def sigmoid_head(w: np.ndarray, b: np.ndarray, mu) -> np.ndarray:
    return expit(linear_head(w, b, mu))


def infer(
    params: NetworkParams,
    x,
    config: CircuitConfig,
    n_shots: int,
    rng: np.random.Generator,
    head: Literal["linear", "sigmoid"] = "linear",
):
    """Average head output over ``n_shots`` trajectories.

    Returns ``(mean_output, label)`` where ``label`` is the argmax of the mean
    (lowest index on ties) for the sigmoid head and ``None`` for the linear one.
    """
    if n_shots < 1:
        raise ValueError("need at least one inference shot")
    x = np.asarray(x, dtype=float)
    u = rng.random((n_shots, 2, config.n_layers, config.n_qubits))
    tape = sample_trajectories(params, np.broadcast_to(x, (n_shots, x.size)), config, u, keep_snapshots=False)
    fn = sigmoid_head if head == "sigmoid" else linear_head
    out = fn(params.out_weight, params.out_bias, tape.final_record).mean(axis=0)
    label = int(np.argmax(out)) if head == "sigmoid" else None
    return out, label
