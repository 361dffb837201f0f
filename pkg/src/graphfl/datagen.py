"""Labeled pools and label-skewed per-device partitions.

Each device sees only ``L`` of the ``n_c`` classes.  ``cluster_aligned``
gives devices in the same room overlapping label windows; ``random`` draws
every device's label set independently.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "LabeledPool",
    "PartitionSpec",
    "DeviceData",
    "DataError",
    "synth_gaussian_pool",
    "load_mnist_idx",
    "label_sets",
    "partition",
]

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class DataError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LabeledPool:
    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.inputs.shape[0] != self.labels.shape[0]:
            raise DataError(
                f"inputs {self.inputs.shape} and labels {self.labels.shape} disagree"
            )
        if not np.all(np.isfinite(self.inputs)):
            raise DataError("pool features must be finite")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DataError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, idx) -> "LabeledPool":
        idx = np.asarray(idx, dtype=int)
        return LabeledPool(self.inputs[idx], self.labels[idx], self.num_classes)


@dataclass(frozen=True)
class PartitionSpec:
    labels_per_device: int = 2
    train_per_device: int = 450
    local_test_per_device: int = 100
    global_test_size: int = 100
    setup: str = "random"

    def __post_init__(self):
        if self.setup not in ("cluster_aligned", "random"):
            raise DataError(f"setup must be 'cluster_aligned' or 'random', got {self.setup!r}")
        counts = (self.labels_per_device, self.train_per_device,
                  self.local_test_per_device, self.global_test_size)
        if min(counts) < 1:
            raise DataError(f"partition counts must be positive, got {counts}")


@dataclass(frozen=True, eq=False)
class DeviceData:
    train: LabeledPool
    local_test: LabeledPool
    allowed_labels: tuple[int, ...]
    train_index: np.ndarray   # rows of the source pool
    test_index: np.ndarray


def synth_gaussian_pool(
    rng: np.random.Generator,
    num_classes: int = 10,
    dim: int = 32,
    per_class: int = 2000,
    separation: float = 3.0,
) -> LabeledPool:
    """Class ``c`` ~ N(separation * u_c, I) with ``u_c`` a random unit direction."""
    if separation < 0:
        raise DataError(f"separation must be >= 0, got {separation}")
    dirs = rng.standard_normal((num_classes, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    means = separation * dirs
    labels = np.repeat(np.arange(num_classes), per_class)
    inputs = means[labels] + rng.standard_normal((labels.size, dim))
    return LabeledPool(inputs, labels, num_classes)


def _read_idx(path, magic: int, ndim: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise DataError(f"{path}: truncated header")
    got = struct.unpack(">I", raw[:4])[0]
    if got != magic:
        raise DataError(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    expected = int(np.prod(dims))
    if len(raw) - header != expected:
        raise DataError(f"{path}: {len(raw) - header} payload bytes, expected {expected}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def load_mnist_idx(images_path, labels_path) -> LabeledPool:
    """Big-endian IDX image/label pair -> pool with pixels in [0, 1]."""
    images = _read_idx(images_path, IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise DataError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    x = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return LabeledPool(x, labels.astype(int), 10)


def label_sets(spec: PartitionSpec, clusters, num_classes: int, rng: np.random.Generator):
    """Allowed label tuple for every device.

    ``cluster_aligned``: cluster ``j`` of ``N`` uses the window of ``L``
    consecutive labels (mod ``n_c``) starting at ``j * n_c // N``; alternate
    devices in the cluster shift it by one, so cluster-mates share at least
    ``L - 1`` labels and the windows spread over every class.
    """
    L = spec.labels_per_device
    if L > num_classes:
        raise DataError(f"labels_per_device {L} exceeds {num_classes} classes")
    clusters = np.asarray(clusters, dtype=int)
    out = []
    if spec.setup == "random":
        # redraw until every class is held by someone, when that is possible
        must_cover = clusters.size * L >= num_classes
        for _ in range(10_000):
            out = [tuple(sorted(int(c) for c in rng.choice(num_classes, L, replace=False)))
                   for _ in clusters]
            if not must_cover or len(set().union(*out)) == num_classes:
                return out
        raise DataError("could not draw label sets covering every class")
    if L == num_classes:
        return [tuple(range(num_classes))] * clusters.size
    num_clusters = int(clusters.max()) + 1
    seen: dict[int, int] = {}
    for c in clusters:
        rank = seen.get(int(c), 0)
        seen[int(c)] = rank + 1
        start = int(c) * num_classes // num_clusters + rank % 2
        out.append(tuple(sorted((start + i) % num_classes for i in range(L))))
    return out


def _split_counts(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (i < extra) for i in range(parts)]


def partition(pool: LabeledPool, spec: PartitionSpec, clusters, rng: np.random.Generator):
    """Split ``pool`` into per-device train/local-test sets and a shared global test.

    Samples are handed out without replacement per class; once a class runs
    dry, draws fall back to samples already given to other devices, never to
    ones this device already holds.

    ``clusters`` is a Graph or the cluster index of every device.
    Returns ``(devices, global_test)``.
    """
    if hasattr(clusters, "clusters"):
        clusters = clusters.clusters
    n_c = pool.num_classes
    by_class = [np.flatnonzero(pool.labels == c) for c in range(n_c)]
    for c, idx in enumerate(by_class):
        if idx.size == 0:
            raise DataError(f"class {c} has no samples")

    # global test: all classes, balanced, held out from every device
    global_idx = []
    for c, count in enumerate(_split_counts(spec.global_test_size, n_c)):
        if count > by_class[c].size:
            raise DataError(f"class {c}: {by_class[c].size} samples, global test needs {count}")
        pick = rng.choice(by_class[c], size=count, replace=False)
        global_idx.extend(pick.tolist())
    held = set(global_idx)
    remaining = [rng.permutation([i for i in idx if i not in held]) for idx in by_class]
    cursor = [0] * n_c

    sets = label_sets(spec, clusters, n_c, rng)
    devices = []
    for labels in sets:
        train_counts = _split_counts(spec.train_per_device, len(labels))
        test_counts = _split_counts(spec.local_test_per_device, len(labels))
        train_idx, test_idx = [], []
        for c, n_tr, n_te in zip(labels, train_counts, test_counts):
            avail = remaining[c]
            need = n_tr + n_te
            if need > avail.size:
                raise DataError(
                    f"class {c}: {avail.size} samples available, one device needs {need}"
                )
            fresh = avail[cursor[c]:cursor[c] + need]
            cursor[c] += fresh.size
            if fresh.size < need:
                pool_rest = np.setdiff1d(avail, fresh)
                fresh = np.concatenate(
                    [fresh, rng.choice(pool_rest, size=need - fresh.size, replace=False)]
                )
            train_idx.extend(fresh[:n_tr].tolist())
            test_idx.extend(fresh[n_tr:].tolist())
        train_idx = np.array(train_idx, dtype=int)
        test_idx = np.array(test_idx, dtype=int)
        devices.append(DeviceData(
            train=pool.subset(train_idx),
            local_test=pool.subset(test_idx),
            allowed_labels=labels,
            train_index=train_idx,
            test_index=test_idx,
        ))
    return devices, pool.subset(np.array(global_idx, dtype=int))
