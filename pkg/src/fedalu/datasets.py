"""MNIST IDX loading, synthetic Gaussian blobs, and Dirichlet client partitions."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IDXFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``(n, d)`` with integer labels; row index is the global sample id."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise ValueError(
                f"features {self.features.shape} and labels {self.labels.shape} do not line up"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.features[i], int(self.labels[i]))

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, ids) -> "Dataset":
        ids = np.asarray(ids, dtype=np.int64)
        return Dataset(self.features[ids], self.labels[ids], self.num_classes)


def _read_bytes(path) -> bytes:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"IDX file not found: {path}")
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        return f.read()


def _parse_header(data: bytes, magic: int, n_dims: int, path) -> tuple[int, ...]:
    size = 4 * (1 + n_dims)
    if len(data) < size:
        raise IDXFormatError(f"{path}: truncated header ({len(data)} bytes)")
    found, *dims = struct.unpack(f">{1 + n_dims}I", data[:size])
    if found != magic:
        raise IDXFormatError(f"{path}: bad magic number 0x{found:08x}, expected 0x{magic:08x}")
    return tuple(dims)


def read_idx_images(path) -> np.ndarray:
    """Raw ``(count, rows, cols)`` uint8 array from an IDX3 file (optionally gzipped)."""
    data = _read_bytes(path)
    count, rows, cols = _parse_header(data, IMAGES_MAGIC, 3, path)
    body = data[16:]
    expected = count * rows * cols
    if len(body) < expected:
        raise IDXFormatError(f"{path}: truncated image data, expected {expected} bytes, got {len(body)}")
    return np.frombuffer(body, dtype=np.uint8, count=expected).reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    data = _read_bytes(path)
    (count,) = _parse_header(data, LABELS_MAGIC, 1, path)
    body = data[8:]
    if len(body) < count:
        raise IDXFormatError(f"{path}: truncated label data, expected {count} bytes, got {len(body)}")
    return np.frombuffer(body, dtype=np.uint8, count=count)


def load_mnist_idx(images_path, labels_path, num_classes: int = 10) -> Dataset:
    """Load an MNIST images/labels pair with pixels scaled to [0, 1].

    File order is preserved, so row i is global sample id i.
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise IDXFormatError(
            f"image/label count mismatch: {len(images)} images in {images_path}, "
            f"{len(labels)} labels in {labels_path}"
        )
    features = images.reshape(len(images), -1).astype(np.float64) / 255.0
    return Dataset(features, labels.astype(np.int64), num_classes)


def make_synthetic(num_classes: int, dim: int, per_class: int, spread: float, seed: int) -> Dataset:
    """Isotropic Gaussian blobs around standard-normal class centers."""
    if min(num_classes, dim, per_class) < 1:
        raise ValueError("num_classes, dim and per_class must all be >= 1")
    if not spread > 0:
        raise ValueError(f"spread must be positive, got {spread}")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((num_classes, dim))
    labels = np.repeat(np.arange(num_classes), per_class)
    features = centers[labels] + spread * rng.standard_normal((len(labels), dim))
    return Dataset(features, labels, num_classes)


def synthetic_centers(num_classes: int, dim: int, seed: int) -> np.ndarray:
    """The class centers :func:`make_synthetic` uses for the same seed."""
    return np.random.default_rng(seed).standard_normal((num_classes, dim))


@dataclass(frozen=True)
class ClientPartition:
    client_id: int
    train_ids: np.ndarray
    test_ids: np.ndarray
    train: Dataset
    test: Dataset

    @property
    def train_labels(self) -> np.ndarray:
        return self.train.labels


def _dirichlet_split(labels, num_clients, alpha, rng) -> list[list[int]]:
    shards: list[list[int]] = [[] for _ in range(num_clients)]
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        props = rng.dirichlet(np.full(num_clients, alpha))
        cuts = (np.cumsum(props)[:-1] * len(idx)).astype(np.int64)
        for k, part in enumerate(np.split(idx, cuts)):
            shards[k].extend(part.tolist())
    return shards


def _rebalance(shards: list[list[int]], min_size: int) -> None:
    # move samples from the largest shard until every shard reaches min_size
    for k in range(len(shards)):
        while len(shards[k]) < min_size:
            donor = max(range(len(shards)), key=lambda j: (len(shards[j]), -j))
            shards[k].append(shards[donor].pop())


def _stratified_split(ids: np.ndarray, labels: np.ndarray, test_fraction: float, rng):
    train, test = [], []
    for c in np.unique(labels):
        cls = ids[labels == c]
        cls = cls[rng.permutation(len(cls))]
        n_test = int(np.floor(len(cls) * test_fraction + 0.5))
        test.extend(cls[:n_test].tolist())
        train.extend(cls[n_test:].tolist())
    if not test:
        test.append(train.pop())
    if not train:
        train.append(test.pop())
    return np.sort(np.array(train, dtype=np.int64)), np.sort(np.array(test, dtype=np.int64))


def partition_dirichlet(
    data: Dataset,
    num_clients: int,
    alpha: float,
    test_fraction: float,
    seed: int,
    max_retries: int = 100,
) -> list[ClientPartition]:
    """Split ``data`` across clients with per-class Dirichlet(alpha) proportions.

    Each client's share is further split into train/test, stratified by the
    client's own labels. Every client ends up with at least one train and
    one test sample: the Dirichlet draw is repeated up to ``max_retries``
    times, then samples are moved from the largest client.
    """
    if num_clients < 2:
        raise ValueError(f"need at least 2 clients, got {num_clients}")
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    min_size = 2
    if len(data) < min_size * num_clients:
        raise ValueError(f"{len(data)} samples cannot be spread over {num_clients} clients")
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        shards = _dirichlet_split(data.labels, num_clients, alpha, rng)
        if min(len(s) for s in shards) >= min_size:
            break
    else:
        _rebalance(shards, min_size)

    parts = []
    for k, shard in enumerate(shards):
        ids = np.sort(np.array(shard, dtype=np.int64))
        train_ids, test_ids = _stratified_split(ids, data.labels[ids], test_fraction, rng)
        parts.append(ClientPartition(k, train_ids, test_ids, data.subset(train_ids), data.subset(test_ids)))
    return parts
