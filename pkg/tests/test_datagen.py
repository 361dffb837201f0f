import struct

import numpy as np
import pytest

from graphfl.datagen import (
    DataError,
    LabeledPool,
    PartitionSpec,
    label_sets,
    load_mnist_idx,
    partition,
    synth_gaussian_pool,
)
from graphfl.learner import ModelConfig, client_update, init_weights, predict

CLUSTERS = np.repeat([0, 1, 2, 3], 5)


def pool(seed=0, per_class=600, **kw):
    return synth_gaussian_pool(np.random.default_rng(seed), per_class=per_class, **kw)


def test_pool_shape_and_determinism():
    a, b = pool(3), pool(3)
    assert a.inputs.shape == (6000, 32)
    assert np.array_equal(a.inputs, b.inputs) and np.array_equal(a.labels, b.labels)
    assert np.bincount(a.labels).tolist() == [600] * 10


def _train_acc(p, test, dim, epochs=5):
    cfg = ModelConfig((dim, p.num_classes))
    rng = np.random.default_rng(0)
    w = init_weights(cfg, rng)
    w = client_update(cfg, w, p.inputs, p.labels, epochs, 1.0, 32, 0.05, rng)
    return np.mean(predict(cfg, w, test.inputs) == test.labels)


def test_separated_pool_is_linearly_learnable():
    p = synth_gaussian_pool(np.random.default_rng(1), 10, 16, 300, separation=10.0)
    assert _train_acc(p, p, 16) > 0.95


def test_zero_separation_is_chance():
    rng = np.random.default_rng(2)
    train = synth_gaussian_pool(rng, 10, 16, 300, separation=0.0)
    test = synth_gaussian_pool(rng, 10, 16, 300, separation=0.0)
    assert abs(_train_acc(train, test, 16) - 0.1) <= 0.1


def test_partition_two_labels_450():
    devices, gtest = partition(pool(), PartitionSpec(), CLUSTERS, np.random.default_rng(0))
    assert len(devices) == 20
    for d in devices:
        assert len(set(d.train.labels.tolist())) == 2
        assert len(d.train) == 450 and len(d.local_test) == 100
        assert set(d.train.labels.tolist()) <= set(d.allowed_labels)
        assert set(d.local_test.labels.tolist()) == set(d.allowed_labels)
    assert len(gtest) == 100 and set(gtest.labels.tolist()) == set(range(10))


def test_partition_iid_case():
    devices, _ = partition(pool(), PartitionSpec(labels_per_device=10, setup="cluster_aligned"),
                           CLUSTERS, np.random.default_rng(0))
    assert all(d.allowed_labels == tuple(range(10)) for d in devices)


def test_cluster_aligned_overlap():
    clusters = np.repeat([0, 1, 2], 4)
    sets = label_sets(PartitionSpec(labels_per_device=4, setup="cluster_aligned"), clusters, 10,
                      np.random.default_rng(0))
    for c in range(3):
        members = [set(s) for s, k in zip(sets, clusters) if k == c]
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                assert len(members[i] & members[j]) >= 3
    assert all(len(s) == 4 for s in sets)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("setup", ["random", "cluster_aligned"])
def test_partition_conservation_and_support(seed, setup):
    p = pool(seed, per_class=3000)
    devices, _ = partition(p, PartitionSpec(setup=setup), CLUSTERS, np.random.default_rng(seed))
    train = np.concatenate([d.train_index for d in devices])
    assert len(set(train.tolist())) == train.size
    for d in devices:
        assert not set(d.test_index.tolist()) & set(d.train_index.tolist())
    assert set().union(*[set(d.allowed_labels) for d in devices]) == set(range(10))


def test_partition_insufficient_samples_names_class():
    tiny = LabeledPool(np.zeros((20, 2)), np.repeat(np.arange(10), 2), 10)
    with pytest.raises(DataError, match="class"):
        partition(tiny, PartitionSpec(), CLUSTERS, np.random.default_rng(0))


def test_partition_spec_validation():
    with pytest.raises(DataError):
        PartitionSpec(setup="nope")
    with pytest.raises(DataError):
        PartitionSpec(train_per_device=0)


def _write_idx(path, magic, dims, payload: bytes):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">I", magic))
        fh.write(struct.pack(f">{len(dims)}I", *dims))
        fh.write(payload)


def test_mnist_reader_scales_pixels(tmp_path):
    img = np.arange(2 * 28 * 28, dtype=np.uint32).reshape(2, 28, 28) % 256
    _write_idx(tmp_path / "x", 0x803, (2, 28, 28), img.astype(np.uint8).tobytes())
    _write_idx(tmp_path / "y", 0x801, (2,), bytes([3, 7]))
    p = load_mnist_idx(tmp_path / "x", tmp_path / "y")
    assert p.inputs.shape == (2, 784)
    assert p.inputs.max() == 1.0 and p.inputs.min() == 0.0
    assert p.labels.tolist() == [3, 7]


@pytest.mark.parametrize("count", [60000, 10000])
def test_mnist_reader_official_sizes(tmp_path, count):
    _write_idx(tmp_path / "x", 0x803, (count, 28, 28), bytes(count * 784))
    _write_idx(tmp_path / "y", 0x801, (count,), bytes(count))
    p = load_mnist_idx(tmp_path / "x", tmp_path / "y")
    assert p.inputs.shape == (count, 784)


def test_mnist_reader_errors(tmp_path):
    _write_idx(tmp_path / "x", 0x803, (2, 28, 28), bytes(2 * 784))
    _write_idx(tmp_path / "y", 0x801, (2,), bytes(2))
    _write_idx(tmp_path / "y3", 0x801, (3,), bytes(3))
    _write_idx(tmp_path / "bad", 0x999, (2,), bytes(2))
    _write_idx(tmp_path / "short", 0x803, (2, 28, 28), bytes(784))
    with pytest.raises(DataError, match="magic"):
        load_mnist_idx(tmp_path / "x", tmp_path / "bad")
    with pytest.raises(DataError):
        load_mnist_idx(tmp_path / "short", tmp_path / "y")
    with pytest.raises(DataError):
        load_mnist_idx(tmp_path / "x", tmp_path / "y3")
