"""Score functions and REINFORCE gradients.

Adjoint convention: for a scalar ``f`` of an antisymmetric covariance matrix,
the adjoint ``G`` is the antisymmetric matrix with
``df = 1/2 * sum(G * dgamma)`` for every antisymmetric perturbation. With
this convention the adjoint of ``log p`` for a single measurement is the
sparse matrix ``A`` with ``A[2j+1, 2j] = mu / (2p) = -A[2j, 2j+1]``.

The backward pass walks a :class:`~minn.network.TrajectoryTape` in reverse:
through each measurement (using the stored pre-measurement covariance), then
through the unitary layer, emitting ``d log p / d theta`` for the layer's
gate angles on the way.
"""

from __future__ import annotations

import numpy as np

from minn.gaussian import GENERATOR_BASIS, LayerRotation, MeasurementEvent
from minn.linalg import expm_frechet
from minn.network import NetworkParams, TrajectoryTape, activation_slope


def log_prob(tape: TrajectoryTape) -> np.ndarray:
    """Log-probability of each trajectory on the tape."""
    return tape.log_prob


def measurement_adjoint(n_qubits: int, site: int, outcome, probability) -> np.ndarray:
    """Adjoint of ``log p`` for one measurement w.r.t. the pre-measurement covariance."""
    outcome = np.asarray(outcome, dtype=float)
    probability = np.asarray(probability, dtype=float)
    s = np.where(outcome != 0, outcome / (2.0 * probability), 0.0)
    out = np.zeros(s.shape + (2 * n_qubits, 2 * n_qubits))
    out[..., 2 * site + 1, 2 * site] = s
    out[..., 2 * site, 2 * site + 1] = -s
    return out


def seed_adjoint(event: MeasurementEvent | None, n_qubits: int) -> np.ndarray:
    """Adjoint just before the last measurement of a trajectory (zero if there is none)."""
    if event is None:
        return np.zeros((2 * n_qubits, 2 * n_qubits))
    return measurement_adjoint(n_qubits, event.site, event.outcome, event.probability)


def backprop_measurement(adjoint: np.ndarray, gamma: np.ndarray, site: int, outcome) -> np.ndarray:
    """Pull an adjoint back through the measurement of ``site``.

    ``gamma`` is the pre-measurement covariance and ``adjoint`` is taken with
    respect to the post-measurement one. Entries with ``outcome == 0`` pass the
    adjoint through unchanged.
    """
    a, b = 2 * site, 2 * site + 1
    mu = np.asarray(outcome, dtype=float)
    measured = mu != 0
    p = 0.5 * (1.0 - mu * gamma[..., a, b])
    s = np.where(measured, mu / (2.0 * np.where(measured, p, 1.0)), 0.0)

    # post-measurement rows/columns of the measured pair are constants
    g = adjoint.copy()
    m = measured[..., None]
    for k in (a, b):
        g[..., k, :] = np.where(m, 0.0, g[..., k, :])
        g[..., :, k] = np.where(m, 0.0, g[..., :, k])

    u_a = np.einsum("...ij,...j->...i", g, gamma[..., :, a])
    u_b = np.einsum("...ij,...j->...i", g, gamma[..., :, b])
    y = np.einsum("...i,...i->...", gamma[..., b, :], u_a)

    t = np.zeros_like(g)
    t[..., :, a] = s[..., None] * u_b
    t[..., :, b] = -s[..., None] * u_a
    out = g + t - np.swapaxes(t, -1, -2)
    coeff = s * (1.0 - s * y)
    out[..., b, a] += coeff
    out[..., a, b] -= coeff
    return np.where(measured[..., None, None], out, adjoint)


def backprop_unitary(adjoint: np.ndarray, rotation: LayerRotation) -> np.ndarray:
    """``R^T G R``: adjoint before the layer from the adjoint after it."""
    r = rotation.matrix()
    return np.swapaxes(r, -1, -2) @ adjoint @ r


def frechet_rotation_derivative(h: np.ndarray, dh: np.ndarray) -> np.ndarray:
    """Directional derivative of ``exp(4h)`` along ``dh``."""
    return expm_frechet(4.0 * np.asarray(h), 4.0 * np.asarray(dh))[1]


def _commutator_blocks(adjoint, gamma, rotation):
    k = gamma @ adjoint - adjoint @ gamma
    return np.stack([k[..., sl, sl] for sl in rotation.block_slices()], axis=-3)


def angle_gradient(adjoint, gamma, rotation: LayerRotation, method: str = "adjoint") -> np.ndarray:
    """``d log p / d theta`` for every angle of a layer, shape ``(..., n_gates, 6)``.

    ``adjoint`` and ``gamma`` refer to the covariance right after the unitary.
    The gradient of one angle is ``1/2 <dR R^T, [gamma, G]>`` restricted to its
    gate block. ``method="direct"`` forms the six Frechet derivatives ``dR``
    per gate; ``"adjoint"`` uses ``<L(X, E), M> = <E, L(X^T, M)>`` to get all
    six from a single Frechet derivative.
    """
    if rotation.generators is None:
        raise ValueError("layer rotation must carry its generators")
    if rotation.n_gates == 0:
        return np.zeros(np.shape(gamma)[:-2] + (0, 6))
    kb = _commutator_blocks(adjoint, gamma, rotation)
    h, r = rotation.generators, rotation.blocks
    if method == "direct":
        dr = frechet_rotation_derivative(h[..., None, :, :], GENERATOR_BASIS)
        d = dr @ np.swapaxes(r, -1, -2)[..., None, :, :]
        return 0.5 * np.einsum("...kij,...ij->...k", d, kb)
    if method == "adjoint":
        lam = expm_frechet(-4.0 * h, kb @ r)[1]
        return 2.0 * np.einsum("kij,...ij->...k", GENERATOR_BASIS, lam)
    raise ValueError(f"unknown method {method!r}")


def score(params: NetworkParams, tape: TrajectoryTape) -> np.ndarray:
    """Per-trajectory ``d log p / d params`` as flat vectors, shape ``(S, n_params)``.

    Head columns are zero: the quantum trajectory does not depend on the head.
    """
    if any(lt.pre_measurement is None for lt in tape.layers):
        raise ValueError("tape was recorded without pre-measurement snapshots")
    n = params.n_qubits
    s_count = tape.n_trajectories
    adj = np.zeros((s_count, 2 * n, 2 * n))
    per_layer = [None] * params.n_layers
    width = params.activation_width
    for l in reversed(range(params.n_layers)):
        lt = tape.layers[l]
        for j in reversed(range(n)):
            adj = backprop_measurement(adj, lt.pre_measurement[:, j], j, lt.outcomes[:, j])
        dtheta = angle_gradient(adj, lt.gamma_post_unitary, lt.rotation).reshape(s_count, -1)
        dz = dtheta * (-0.5 * np.pi) * activation_slope(lt.pre_activation, width)
        dw = np.einsum("si,sj->sij", dz, lt.mu_prev)
        per_layer[l] = (dw.reshape(s_count, -1), dz)
        if l > 0:
            adj = backprop_unitary(adj, lt.rotation)
    parts = [p for pair in per_layer for p in pair]
    parts.append(np.zeros((s_count, params.out_weight.size + params.out_bias.size)))
    return np.concatenate(parts, axis=1)


def optimal_baseline(costs, scores) -> np.ndarray:
    """Per-parameter ``E[C S^2] / E[S^2]``; zero where the score vanishes identically."""
    costs = np.asarray(costs, dtype=float)
    scores = np.asarray(scores, dtype=float)
    sq = scores**2
    den = sq.mean(axis=0)
    num = (costs[:, None] * sq).mean(axis=0)
    return np.divide(num, den, out=np.zeros_like(den), where=den > 0)


def per_sample_gradients(costs, scores, pathwise, baseline) -> np.ndarray:
    """Single-sample estimates ``dC/dparams + S (C - B)``."""
    costs = np.asarray(costs, dtype=float)
    baseline = np.broadcast_to(np.asarray(baseline, dtype=float), np.shape(scores)[1:])
    return np.asarray(pathwise) + np.asarray(scores) * (costs[:, None] - baseline)


def reinforce_gradient(costs, scores, pathwise, baseline=0.0) -> np.ndarray:
    """Batch mean of :func:`per_sample_gradients`."""
    return per_sample_gradients(costs, scores, pathwise, baseline).mean(axis=0)
