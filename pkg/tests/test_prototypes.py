import itertools
import logging

import numpy as np
import pytest

from lgcsed.prototypes import (
    FeatureBuffer,
    PrototypeError,
    PrototypePool,
    collect,
    kmeans,
)


def exhaustive_wcss(points, k):
    """Global K-means optimum by enumerating all assignments."""
    n = points.shape[0]
    best = np.inf
    for assign in itertools.product(range(k), repeat=n):
        assign = np.asarray(assign)
        cost = 0.0
        for j in range(k):
            members = points[assign == j]
            if members.shape[0]:
                cost += float(np.sum((members - members.mean(axis=0)) ** 2))
        best = min(best, cost)
    return best


# -- kmeans ----------------------------------------------------------------

def test_kmeans_single_cluster_is_mean():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(7, 3))
    centers, labels, wcss = kmeans(pts, 1, rng)
    assert np.allclose(centers[0], pts.mean(axis=0))
    assert np.all(labels == 0)
    assert np.isclose(wcss, float(np.sum((pts - pts.mean(axis=0)) ** 2)))


def test_kmeans_k_distinct_points_zero_cost():
    rng = np.random.default_rng(1)
    pts = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]])
    _, _, wcss = kmeans(pts, 3, rng)
    assert wcss < 1e-12


def test_kmeans_matches_exhaustive_on_small_instances():
    rng = np.random.default_rng(2)
    for n, k in [(5, 2), (6, 2), (6, 3), (8, 3)]:
        pts = rng.normal(size=(n, 2))
        _, _, wcss = kmeans(pts, k, rng, n_init=20)
        assert wcss <= exhaustive_wcss(pts, k) + 1e-9


def test_kmeans_requires_enough_points():
    rng = np.random.default_rng(3)
    with pytest.raises(ValueError):
        kmeans(np.zeros((2, 2)), 3, rng)


def test_kmeans_deterministic_given_rng_state():
    pts = np.random.default_rng(4).normal(size=(10, 2))
    a = kmeans(pts, 2, np.random.default_rng(5))
    b = kmeans(pts, 2, np.random.default_rng(5))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


# -- buffers -----------------------------------------------------------------

def test_buffer_capacity_bound_and_counts():
    rng = np.random.default_rng(6)
    buf = FeatureBuffer(2, capacity=8)
    for i in range(50):
        buf.add(0, np.array([float(i)]), rng)
    buf.add(1, np.array([1.0]), rng)
    assert buf.counts() == [8, 1]
    assert int(buf.seen[0]) == 50
    assert buf.as_matrix(0).shape == (8, 1)


def test_reservoir_keeps_uniform_ish_sample():
    # every element should have some chance of surviving; check the
    # retained set is not simply the first `capacity` additions
    rng = np.random.default_rng(7)
    buf = FeatureBuffer(1, capacity=16)
    for i in range(400):
        buf.add(0, np.array([float(i)]), rng)
    kept = sorted(float(v[0]) for v in buf.rows[0])
    assert kept != list(range(16))
    assert max(kept) >= 100.0


def test_collect_matches_threshold_loop():
    rng = np.random.default_rng(8)
    p = rng.uniform(size=(20, 3))
    v = rng.normal(size=(20, 4))
    buf = FeatureBuffer(3)
    collect(p, v, 0.7, buf, rng)
    for i in range(3):
        expected = v[p[:, i] > 0.7]
        got = buf.as_matrix(i)
        if expected.size == 0:
            assert got.size == 0
        else:
            assert np.array_equal(got, expected)


# -- pool ----------------------------------------------------------------------

def full_buffer(rng, n_classes=3, rows=30, dim=4):
    buf = FeatureBuffer(n_classes)
    for i in range(n_classes):
        for _ in range(rows):
            buf.add(i, rng.normal(size=dim) + 3.0 * i, rng)
    return buf


def test_init_offline_unit_norm_prototypes():
    rng = np.random.default_rng(9)
    pool = PrototypePool(3, clusters_per_class=3)
    pool.init_offline(full_buffer(rng), rng)
    assert pool.prototypes.shape == (3, 3, 4)
    assert np.allclose(np.linalg.norm(pool.prototypes, axis=-1), 1.0, atol=1e-9)


def test_init_offline_fallbacks_warn(caplog):
    rng = np.random.default_rng(10)
    buf = FeatureBuffer(2)
    buf.add(0, np.array([1.0, 0.0]), rng)  # class 0: one row < C, class 1: empty
    pool = PrototypePool(2, clusters_per_class=3)
    with caplog.at_level(logging.WARNING):
        pool.init_offline(buf, rng, projection_dim=2)
    assert "jitter" in caplog.text and "random prototypes" in caplog.text
    assert np.allclose(np.linalg.norm(pool.prototypes, axis=-1), 1.0, atol=1e-9)


def test_init_offline_needs_dimension_hint():
    rng = np.random.default_rng(11)
    pool = PrototypePool(1)
    with pytest.raises(PrototypeError):
        pool.init_offline(FeatureBuffer(1), rng)


def test_similarity_and_assignment_match_double_loop():
    rng = np.random.default_rng(12)
    pool = PrototypePool(3, clusters_per_class=3)
    pool.init_offline(full_buffer(rng), rng)
    v = rng.normal(size=4)
    v /= np.linalg.norm(v)
    sims = pool.similarity(v)
    for i in range(3):
        ref = max(float(v @ pool.prototypes[i, j]) for j in range(3))
        assert np.isclose(sims[i], ref)

    rows = rng.normal(size=(12, 4))
    cents = pool.assign_and_centroid(rows, 1)
    unit = rows / np.linalg.norm(rows, axis=1, keepdims=True)
    expected = {}
    for k in range(12):
        j = int(np.argmax([unit[k] @ pool.prototypes[1, jj] for jj in range(3)]))
        expected.setdefault(j, []).append(rows[k])
    assert set(cents) == set(expected)
    for j, members in expected.items():
        assert np.allclose(cents[j], np.mean(members, axis=0))


def test_update_online_momentum_mix_and_norm():
    rng = np.random.default_rng(13)
    pool = PrototypePool(1, clusters_per_class=2, momentum=0.9)
    pool.prototypes = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    pool.initialized = True
    pool.update_online(0, {0: np.array([0.0, 1.0])})
    mixed = 0.9 * np.array([1.0, 0.0]) + 0.1 * np.array([0.0, 1.0])
    assert np.allclose(pool.prototypes[0, 0], mixed / np.linalg.norm(mixed))
    # prototype 1 received no centroid and must be untouched
    assert np.array_equal(pool.prototypes[0, 1], [0.0, 1.0])


def test_uninitialized_pool_refuses_queries():
    pool = PrototypePool(2)
    with pytest.raises(PrototypeError):
        pool.similarity(np.array([1.0, 0.0]))
    with pytest.raises(PrototypeError):
        pool.update_online(0, {})


def test_state_dict_roundtrip():
    rng = np.random.default_rng(14)
    pool = PrototypePool(3, clusters_per_class=2, momentum=0.95)
    pool.init_offline(full_buffer(rng), rng)
    clone = PrototypePool.from_state_dict(pool.state_dict())
    assert clone.initialized
    assert clone.momentum == 0.95
    assert np.array_equal(clone.prototypes, pool.prototypes)


def test_export_rows_format(tmp_path):
    rng = np.random.default_rng(15)
    pool = PrototypePool(2, clusters_per_class=2)
    pool.init_offline(full_buffer(rng, n_classes=2), rng)
    path = tmp_path / "protos.txt"
    pool.export_rows(path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 4
    first = lines[0].split()
    assert first[0] == "0" and first[1] == "0" and len(first) == 2 + 4
    reread = np.array([float(x) for x in first[2:]])
    assert np.allclose(reread, pool.prototypes[0, 0])
