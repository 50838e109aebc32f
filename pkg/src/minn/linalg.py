"""Batched matrix exponential and its Frechet derivative for small blocks.

Only 4x4 gate generators (and the 8x8 block-triangular embedding used for
directional derivatives) ever get exponentiated, so everything here works on
stacks of small matrices with shape ``(..., n, n)``.
"""

from __future__ import annotations

import numpy as np

# Pade [13/13] coefficients and threshold (Higham 2005).
_PADE13 = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)
_THETA13 = 5.371920351148152


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of a stack of square matrices.

    Scaling and squaring with a degree-13 Pade approximant. Each member gets
    its own scaling exponent, so a result never depends on what else is in
    the stack (batch splits stay bit-reproducible).
    """
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected (..., n, n) array, got shape {a.shape}")
    if a.size == 0:
        return np.zeros_like(a)
    n = a.shape[-1]
    norm = np.abs(a).sum(axis=-2).max(axis=-1)
    with np.errstate(divide="ignore"):
        s = np.maximum(np.ceil(np.log2(norm / _THETA13)), 0).astype(int)
    a = a / (2.0**s)[..., None, None]

    b = _PADE13
    eye = np.broadcast_to(np.eye(n), a.shape)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (
        a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
        + b[7] * a6
        + b[5] * a4
        + b[3] * a2
        + b[1] * eye
    )
    v = (
        a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
        + b[6] * a6
        + b[4] * a4
        + b[2] * a2
        + b[0] * eye
    )
    r = np.linalg.solve(v - u, v + u)
    for k in range(int(s.max(initial=0))):
        r = np.where((s > k)[..., None, None], r @ r, r)
    return r


def expm_frechet(a: np.ndarray, e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(exp(a), L(a, e))`` where ``L`` is the Frechet derivative.

    Uses the identity ``exp([[a, e], [0, a]]) = [[exp(a), L(a, e)], [0, exp(a)]]``.
    ``a`` and ``e`` broadcast against each other.
    """
    a, e = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(e, dtype=float))
    n = a.shape[-1]
    big = np.zeros(a.shape[:-2] + (2 * n, 2 * n))
    big[..., :n, :n] = a
    big[..., n:, n:] = a
    big[..., :n, n:] = e
    out = expm(big)
    return out[..., :n, :n], out[..., :n, n:]
