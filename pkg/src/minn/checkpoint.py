"""Binary parameter checkpoints.

Layout (all integers unsigned 32-bit little-endian, floats float64 little-endian):

    magic      8 bytes  b"MINNCKPT"
    version    u32      currently 1
    n_qubits   u32
    n_layers   u32
    out_dim    u32
    width      f64      activation width a
    rows[l]    u32 x n_layers, rows of W^l (6 x gates in layer l)
    payload    f64 x n_params, arrays in the order W^0, b^0, ..., W^L, b^L, row-major
    crc32      u32      zlib.crc32 of the payload bytes

See docs/checkpoint.md for a worked example.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from minn.network import NetworkParams

MAGIC = b"MINNCKPT"
VERSION = 1
_HEAD = struct.Struct("<8sIIIId")


class CheckpointError(ValueError):
    pass


def dumps(params: NetworkParams) -> bytes:
    rows = [w.shape[0] for w in params.weights]
    head = _HEAD.pack(MAGIC, VERSION, params.n_qubits, params.n_layers, params.out_dim, params.activation_width)
    payload = params.to_vector().astype("<f8").tobytes()
    return head + struct.pack(f"<{len(rows)}I", *rows) + payload + struct.pack("<I", zlib.crc32(payload))


def loads(raw: bytes) -> NetworkParams:
    if len(raw) < _HEAD.size:
        raise CheckpointError(f"truncated header: {len(raw)} bytes")
    magic, version, n, n_layers, out_dim, width = _HEAD.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    off = _HEAD.size
    if len(raw) < off + 4 * n_layers:
        raise CheckpointError("truncated layer table")
    rows = struct.unpack_from(f"<{n_layers}I", raw, off)
    off += 4 * n_layers
    n_params = sum(r * (n + 1) for r in rows) + out_dim * (n + 1)
    end = off + 8 * n_params
    if len(raw) != end + 4:
        raise CheckpointError(f"expected {end + 4} bytes, got {len(raw)}")
    payload = raw[off:end]
    (crc,) = struct.unpack_from("<I", raw, end)
    if crc != zlib.crc32(payload):
        raise CheckpointError("payload checksum mismatch")
    vec = np.frombuffer(payload, dtype="<f8").astype(float)
    template = NetworkParams(
        weights=[np.zeros((r, n)) for r in rows],
        biases=[np.zeros(r) for r in rows],
        out_weight=np.zeros((out_dim, n)),
        out_bias=np.zeros(out_dim),
        activation_width=width,
    )
    return template.from_vector(vec)


def save(path, params: NetworkParams):
    Path(path).write_bytes(dumps(params))


def load(path) -> NetworkParams:
    return loads(Path(path).read_bytes())
