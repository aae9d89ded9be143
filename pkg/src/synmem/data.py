"""Dataset ingestion: IDX image/label files and synthetic Gaussian blobs."""

from __future__ import annotations

import gzip
import struct

import numpy as np

from .quantnet import Dataset
from .seeding import derive_seed

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """Malformed IDX file; the message names the file and byte offset."""


def _open_maybe_gzip(path):
    f = open(path, "rb")
    magic = f.read(2)
    f.seek(0)
    if magic == b"\x1f\x8b":
        return gzip.GzipFile(fileobj=f)
    return f


def _read_be32(f, path, offset: int) -> tuple[int, int]:
    data = f.read(4)
    if len(data) != 4:
        raise IdxFormatError(f"{path}: truncated at offset {offset}, expected 4 bytes")
    return struct.unpack(">I", data)[0], offset + 4


def _read_exact(f, count: int, path, offset: int) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise IdxFormatError(
            f"{path}: truncated at offset {offset + len(data)}, "
            f"expected {count} payload bytes"
        )
    return data


def load_idx_images(path) -> np.ndarray:
    """(n, rows*cols) float64 pixels in [0, 1] (raw bytes / 255)."""
    with _open_maybe_gzip(path) as f:
        offset = 0
        magic, offset = _read_be32(f, path, offset)
        if magic != IDX_IMAGE_MAGIC:
            raise IdxFormatError(
                f"{path}: bad image magic 0x{magic:08x} at offset 0, "
                f"expected 0x{IDX_IMAGE_MAGIC:08x}"
            )
        count, offset = _read_be32(f, path, offset)
        rows, offset = _read_be32(f, path, offset)
        cols, offset = _read_be32(f, path, offset)
        raw = _read_exact(f, count * rows * cols, path, offset)
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)
    return pixels.astype(np.float64) / 255.0


def load_idx_labels(path) -> np.ndarray:
    with _open_maybe_gzip(path) as f:
        offset = 0
        magic, offset = _read_be32(f, path, offset)
        if magic != IDX_LABEL_MAGIC:
            raise IdxFormatError(
                f"{path}: bad label magic 0x{magic:08x} at offset 0, "
                f"expected 0x{IDX_LABEL_MAGIC:08x}"
            )
        count, offset = _read_be32(f, path, offset)
        raw = _read_exact(f, count, path, offset)
    return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)


def load_idx(images_path, labels_path, split: str = "test", limit: int | None = None) -> Dataset:
    """Parse an IDX image/label pair (optionally gzip-compressed)."""
    inputs = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if len(inputs) != len(labels):
        raise IdxFormatError(
            f"count mismatch: {len(inputs)} images in {images_path} vs "
            f"{len(labels)} labels in {labels_path}"
        )
    if limit is not None:
        inputs, labels = inputs[:limit], labels[:limit]
    return Dataset(inputs=inputs, labels=labels, split=split)


def gen_synthetic(
    classes: int = 10,
    dim: int = 64,
    n: int = 2000,
    seed: int = 0,
    split: str = "train",
    sigma: float = 0.06,
) -> Dataset:
    """Gaussian class blobs in [0, 1]^dim with well-separated means.

    Class means are drawn uniformly in [0.3, 0.7] per coordinate; at dim >= 32
    the pairwise mean distances dwarf the within-class spread, so a small
    feedforward net separates the classes essentially perfectly. Labels are
    balanced (n need not divide evenly; remainders go to the low classes).

    The means depend only on (seed, classes, dim), so train and test splits
    drawn with the same seed sample the same class distributions.
    """
    if classes < 2:
        raise ValueError(f"need at least 2 classes, got {classes}")
    if n < 1:
        raise ValueError(f"need at least 1 sample, got {n}")
    if dim < 1:
        raise ValueError(f"need at least 1 input dimension, got {dim}")
    mean_rng = np.random.default_rng(derive_seed(seed, "blob-means"))
    means = mean_rng.uniform(0.3, 0.7, size=(classes, dim))
    rng = np.random.default_rng(derive_seed(seed, "blob-noise", split))
    labels = rng.permutation(np.arange(n) % classes).astype(np.int64)
    inputs = means[labels] + rng.normal(0.0, sigma, size=(n, dim))
    np.clip(inputs, 0.0, 1.0, out=inputs)
    return Dataset(inputs=inputs, labels=labels, split=split)
