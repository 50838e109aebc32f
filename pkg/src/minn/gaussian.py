"""Covariance-matrix simulation of matchgate brick-wall circuits.

A pure fermionic Gaussian state on N qubits is described by its 2N x 2N real
antisymmetric covariance matrix ``gamma[a, b] = i <c_a c_b>`` (a != b), with
Majorana operators ``c_{2j} = Z..Z X_j`` and ``c_{2j+1} = Z..Z Y_j`` in the
0-based indexing used throughout the code (``c_{2j-1}``, ``c_{2j}`` in the
usual 1-based notation). Qubit ``j`` therefore owns modes ``2j`` and ``2j+1``.

Nearest-neighbour matchgates act as ``gamma -> R gamma R^T`` with
``R = exp(4h)`` and a projective ``Z_j`` measurement with outcome ``mu``
applies a rank-two update. All functions accept stacks with leading batch
dimensions; an outcome of ``0`` means "not measured" and leaves the state
untouched, which lets a batch of trajectories with different measurement sites
share one code path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from minn.linalg import expm

EPS_PROB = 1e-12

Parity = Literal["odd", "even"]


class ImpossibleOutcomeError(ValueError):
    """A forced measurement outcome has (numerically) zero probability."""


@dataclass(frozen=True)
class GateAngles:
    """The six rotation angles of one matchgate, in radians."""

    xx: float = 0.0
    xy: float = 0.0
    yx: float = 0.0
    yy: float = 0.0
    zi: float = 0.0
    iz: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError(f"non-finite gate angle in {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.xx, self.xy, self.yx, self.yy, self.zi, self.iz], dtype=float)

    @classmethod
    def from_array(cls, values) -> "GateAngles":
        return cls(*(float(v) for v in np.asarray(values, dtype=float).reshape(6)))


@dataclass(frozen=True)
class MeasurementEvent:
    layer: int
    site: int
    outcome: int
    probability: float


@dataclass
class LayerRotation:
    """Block-diagonal SO(2N) rotation of one brick-wall layer.

    ``blocks`` has shape ``(..., n_gates, 4, 4)``. Odd layers put gate ``k`` on
    qubits ``(2k, 2k+1)``; even layers are shifted by one qubit, leaving the
    outermost Majorana pair(s) untouched. ``generators`` optionally keeps the
    antisymmetric ``h`` matrices the blocks were exponentiated from.
    """

    parity: Parity
    blocks: np.ndarray
    n_qubits: int
    generators: np.ndarray | None = None

    @property
    def n_gates(self) -> int:
        return self.blocks.shape[-3]

    @property
    def mode_offset(self) -> int:
        return 0 if self.parity == "odd" else 2

    def block_slices(self):
        off = self.mode_offset
        return [slice(off + 4 * k, off + 4 * k + 4) for k in range(self.n_gates)]

    def matrix(self) -> np.ndarray:
        """Dense ``(..., 2N, 2N)`` rotation."""
        dim = 2 * self.n_qubits
        batch = self.blocks.shape[:-3]
        r = np.zeros(batch + (dim, dim))
        r[..., np.arange(dim), np.arange(dim)] = 1.0
        for k, sl in enumerate(self.block_slices()):
            r[..., sl, sl] = self.blocks[..., k, :, :]
        return r


def layer_parity(layer: int) -> Parity:
    """Parity of 1-based layer index ``layer``."""
    return "odd" if layer % 2 == 1 else "even"


def gates_in_layer(n_qubits: int, parity: Parity) -> int:
    if parity == "odd":
        return n_qubits // 2
    if parity == "even":
        return (n_qubits - 1) // 2
    raise ValueError(f"unknown parity {parity!r}")


def initial_covariance(n_qubits: int) -> np.ndarray:
    """Covariance matrix of ``|0...0>``: a direct sum of ``[[0, -1], [1, 0]]``."""
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    return basis_covariance(np.ones(n_qubits))


def basis_covariance(spins) -> np.ndarray:
    """Covariance matrix of a computational basis state.

    ``spins`` holds Z eigenvalues (+1 for ``|0>``, -1 for ``|1>``) with shape
    ``(..., N)``; the result has shape ``(..., 2N, 2N)``.
    """
    spins = np.asarray(spins, dtype=float)
    if spins.shape[-1] < 1:
        raise ValueError("need at least one qubit")
    if not np.all(np.abs(spins) == 1):
        raise ValueError("basis state spins must be +1 or -1")
    n = spins.shape[-1]
    gamma = np.zeros(spins.shape[:-1] + (2 * n, 2 * n))
    idx = np.arange(n)
    gamma[..., 2 * idx, 2 * idx + 1] = -spins
    gamma[..., 2 * idx + 1, 2 * idx] = spins
    return gamma


# d h / d theta for each of the six angles (xx, xy, yx, yy, zi, iz).
GENERATOR_BASIS = np.zeros((6, 4, 4))
for _k, (_i, _j, _sign) in enumerate(
    [(1, 2, -1), (1, 3, -1), (0, 2, +1), (0, 3, +1), (0, 1, -1), (2, 3, -1)]
):
    GENERATOR_BASIS[_k, _i, _j] = _sign / 4.0
    GENERATOR_BASIS[_k, _j, _i] = -_sign / 4.0


def build_generator(angles) -> np.ndarray:
    """Antisymmetric 4x4 Majorana coefficient matrix ``h`` of a matchgate.

    ``angles`` is a :class:`GateAngles` or an array whose last axis holds
    ``(xx, xy, yx, yy, zi, iz)``.
    """
    if isinstance(angles, GateAngles):
        angles = angles.as_array()
    angles = np.asarray(angles, dtype=float)
    if angles.shape[-1] != 6:
        raise ValueError(f"expected 6 angles per gate, got shape {angles.shape}")
    if not np.all(np.isfinite(angles)):
        raise ValueError("non-finite gate angle")
    return np.einsum("...k,kij->...ij", angles, GENERATOR_BASIS)


def gate_rotation(h: np.ndarray) -> np.ndarray:
    """SO(4) block ``exp(4h)`` for a (stack of) antisymmetric ``h``."""
    h = np.asarray(h, dtype=float)
    if h.shape[-2:] != (4, 4):
        raise ValueError(f"expected (..., 4, 4) generator, got {h.shape}")
    if not np.allclose(h, -np.swapaxes(h, -1, -2), atol=1e-12):
        raise ValueError("generator must be antisymmetric")
    return expm(4.0 * h)


def assemble_layer(angles, parity: Parity, n_qubits: int) -> LayerRotation:
    """Build the layer rotation from per-gate angles.

    ``angles`` is a list of :class:`GateAngles` or an array of shape
    ``(..., n_gates, 6)``.
    """
    if isinstance(angles, Sequence) and angles and isinstance(angles[0], GateAngles):
        angles = np.stack([a.as_array() for a in angles])
    angles = np.asarray(angles, dtype=float)
    if angles.ndim == 1 and angles.size == 0:
        angles = angles.reshape(0, 6)
    expected = gates_in_layer(n_qubits, parity)
    if angles.shape[-2] != expected:
        raise ValueError(
            f"{parity} layer on {n_qubits} qubits needs {expected} gates, got {angles.shape[-2]}"
        )
    h = build_generator(angles)
    return LayerRotation(parity=parity, blocks=expm(4.0 * h), n_qubits=n_qubits, generators=h)


def apply_layer(gamma: np.ndarray, layer: LayerRotation) -> np.ndarray:
    """``R gamma R^T``."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape[-1] != 2 * layer.n_qubits:
        raise ValueError(
            f"covariance of size {gamma.shape[-1]} does not match {layer.n_qubits}-qubit layer"
        )
    r = layer.matrix()
    return r @ gamma @ np.swapaxes(r, -1, -2)


def _check_site(gamma: np.ndarray, site: int):
    n = gamma.shape[-1] // 2
    if not 0 <= site < n:
        raise ValueError(f"site {site} out of range for {n} qubits")


def prob_plus(gamma: np.ndarray, site: int) -> np.ndarray:
    """Born probability of outcome +1 on ``site``, with near-0/1 values snapped."""
    p = 0.5 * (1.0 - gamma[..., 2 * site, 2 * site + 1])
    p = np.clip(p, 0.0, 1.0)
    p = np.where(p < EPS_PROB, 0.0, p)
    return np.where(p > 1.0 - EPS_PROB, 1.0, p)


def measurement_probability(gamma: np.ndarray, site: int, outcome) -> np.ndarray:
    """``p = (1 - mu * gamma[2j, 2j+1]) / 2``, clamped to [0, 1]."""
    gamma = np.asarray(gamma, dtype=float)
    _check_site(gamma, site)
    pp = prob_plus(gamma, site)
    outcome = np.asarray(outcome)
    return np.where(outcome > 0, pp, 1.0 - pp)


def apply_measurement(gamma: np.ndarray, site: int, outcome) -> np.ndarray:
    """Project ``site`` onto the ``Z = outcome`` eigenspace and renormalise.

    ``outcome`` may be an array broadcasting against the batch dimensions of
    ``gamma``; zero entries mean the site is not measured in that trajectory.
    """
    gamma = np.asarray(gamma, dtype=float)
    _check_site(gamma, site)
    mu = np.asarray(outcome, dtype=float)
    a, b = 2 * site, 2 * site + 1
    measured = mu != 0
    p = 0.5 * (1.0 - mu * gamma[..., a, b])
    if np.any(measured & (p < EPS_PROB)):
        raise ImpossibleOutcomeError(f"outcome on site {site} has probability below {EPS_PROB}")
    s = np.where(measured, mu / (2.0 * np.where(measured, p, 1.0)), 0.0)[..., None, None]
    col_a = gamma[..., :, a]
    col_b = gamma[..., :, b]
    # gamma A gamma with A = s (e_b e_a^T - e_a e_b^T); rows of gamma are minus its columns
    rank2 = np.einsum("...i,...j->...ij", col_a, col_b) - np.einsum("...i,...j->...ij", col_b, col_a)
    out = gamma + s * rank2
    # the measured pair decouples: its rows/columns vanish apart from <Z_j> = mu
    m = measured[..., None]
    for k in (a, b):
        out[..., k, :] = np.where(m, 0.0, out[..., k, :])
        out[..., :, k] = np.where(m, 0.0, out[..., :, k])
    out[..., a, b] = np.where(measured, -mu, out[..., a, b])
    out[..., b, a] = np.where(measured, mu, out[..., b, a])
    out = 0.5 * (out - np.swapaxes(out, -1, -2))
    return np.where(measured[..., None, None], out, gamma)


def sample_site_measurement(gamma: np.ndarray, site: int, rng: np.random.Generator, layer: int = 0):
    """Draw a Born-rule outcome for one site of a single state."""
    gamma = np.asarray(gamma, dtype=float)
    _check_site(gamma, site)
    pp = float(prob_plus(gamma, site))
    mu = 1 if rng.random() < pp else -1
    prob = pp if mu == 1 else 1.0 - pp
    event = MeasurementEvent(layer=layer, site=site, outcome=mu, probability=prob)
    return event, apply_measurement(gamma, site, mu)


def covariance_defects(gamma: np.ndarray) -> dict[str, float]:
    """Worst-case antisymmetry, purity and entry-bound violations."""
    gamma = np.asarray(gamma, dtype=float)
    dim = gamma.shape[-1]
    gt = np.swapaxes(gamma, -1, -2)
    return {
        "antisymmetry": float(np.abs(gamma + gt).max()),
        "purity": float(np.abs(gt @ gamma - np.eye(dim)).max()),
        "bound": float(max(np.abs(gamma).max() - 1.0, 0.0)),
    }
