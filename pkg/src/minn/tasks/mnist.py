"""MNIST in IDX format, image-to-bitstring encoding, and the classification loss."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
SUPPORTED_QUBITS = (16, 36, 64)
PROB_CLAMP = 1e-12


class IDXFormatError(ValueError):
    pass


def _read_bytes(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_idx(path, expected_magic: int) -> np.ndarray:
    """Parse an IDX file of unsigned bytes into an array shaped by its header."""
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise IDXFormatError(f"{path}: truncated header at offset {len(raw)}")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != expected_magic:
        raise IDXFormatError(f"{path}: magic {magic} at offset 0, expected {expected_magic}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IDXFormatError(f"{path}: truncated header at offset {len(raw)}")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) < header + size:
        raise IDXFormatError(
            f"{path}: truncated payload at offset {len(raw)}, header promises {header + size} bytes"
        )
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def write_idx(path, data: np.ndarray, magic: int):
    data = np.ascontiguousarray(data, dtype=np.uint8)
    if (magic & 0xFF) != data.ndim:
        raise ValueError(f"magic {magic} implies {magic & 0xFF} dimensions, data has {data.ndim}")
    header = struct.pack(">I", magic) + struct.pack(f">{data.ndim}I", *data.shape)
    payload = header + data.tobytes()
    if str(path).endswith(".gz"):
        payload = gzip.compress(payload, mtime=0)
    Path(path).write_bytes(payload)


@dataclass(frozen=True)
class LabeledImage:
    pixels: np.ndarray
    label: int


@dataclass
class MnistData:
    images: np.ndarray  # (n, 28, 28) uint8
    labels: np.ndarray  # (n,) int

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i) -> LabeledImage:
        return LabeledImage(self.images[i], int(self.labels[i]))

    def subset(self, idx) -> "MnistData":
        return MnistData(self.images[idx], self.labels[idx])


def load_mnist(images_path, labels_path) -> MnistData:
    images = read_idx(images_path, IMAGE_MAGIC)
    labels = read_idx(labels_path, LABEL_MAGIC)
    if images.ndim != 3:
        raise IDXFormatError(f"{images_path}: expected a 3-d image array")
    if images.shape[0] != labels.shape[0]:
        raise IDXFormatError(
            f"{images.shape[0]} images in {images_path} but {labels.shape[0]} labels in {labels_path}"
        )
    if labels.size and labels.max() > 9:
        raise IDXFormatError(f"{labels_path}: label {labels.max()} out of range")
    return MnistData(images, labels.astype(int))


def _pool_matrix(size: int, out: int) -> np.ndarray:
    """Area-weighted averaging from ``size`` pixels to ``out`` equal bins."""
    edges = np.linspace(0.0, size, out + 1)
    lo, hi = np.arange(size), np.arange(size) + 1.0
    overlap = np.clip(np.minimum(hi[None, :], edges[1:, None]) - np.maximum(lo[None, :], edges[:-1, None]), 0, None)
    return overlap / overlap.sum(axis=1, keepdims=True)


def pool_image(image, side: int) -> np.ndarray:
    image = np.asarray(image, dtype=float)
    if image.ndim < 2 or image.shape[-1] != image.shape[-2]:
        raise ValueError("expected square image(s)")
    p = _pool_matrix(image.shape[-1], side)
    return p @ image @ p.T


def encode_image(image, n_qubits: int) -> np.ndarray:
    """Pool to ``sqrt(N) x sqrt(N)``, threshold at the mean, and map bits to Z eigenvalues.

    A pooled pixel strictly above the global mean is bit 1 (-> -1); ties and
    darker pixels are bit 0 (-> +1). Output is row-major with length N.
    Accepts a batch of images with shape ``(..., side, side)``.
    """
    if n_qubits not in SUPPORTED_QUBITS:
        raise ValueError(f"n_qubits must be one of {SUPPORTED_QUBITS}")
    side = int(round(np.sqrt(n_qubits)))
    pooled = pool_image(image, side)
    flat = pooled.reshape(pooled.shape[:-2] + (n_qubits,))
    thresh = flat.mean(axis=-1, keepdims=True)
    # relative slack so exact ties survive roundoff in the pooling
    above = flat - thresh > 1e-9 * np.maximum(np.abs(thresh), 1.0)
    return np.where(above, -1.0, 1.0)


def cross_entropy(probs, label) -> np.ndarray:
    """Summed one-vs-all binary cross-entropy of per-class sigmoid outputs."""
    q = np.clip(np.asarray(probs, dtype=float), PROB_CLAMP, 1.0 - PROB_CLAMP)
    n_classes = q.shape[-1]
    label = np.asarray(label)
    if np.any((label < 0) | (label >= n_classes)):
        raise ValueError("label out of range")
    y = np.eye(n_classes)[label]
    return -(y * np.log(q) + (1.0 - y) * np.log1p(-q)).sum(axis=-1)
