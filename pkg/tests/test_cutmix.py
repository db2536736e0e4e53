import numpy as np
import pytest

from lgcsed.cutmix import (
    CutMixError,
    TimeMask,
    cutmix_pred,
    cutmix_spec,
    pool_mask,
    sample_mask,
    shuffle_pairing,
)


def majority_pool_oracle(m, n_out):
    """Reference pooling: output frame is 1 iff >= 50% of its raw frames are 1."""
    factor = len(m) // n_out
    out = []
    for t in range(n_out):
        ones = sum(m[t * factor:(t + 1) * factor])
        out.append(1 if ones * 2 >= factor else 0)
    return np.array(out, dtype=np.int8)


def make_mask(m, n_out):
    m = np.asarray(m, dtype=np.int8)
    return TimeMask(m=m, m_pooled=pool_mask(m, n_out))


def test_pool_examples():
    assert np.array_equal(pool_mask(np.array([1, 1, 1, 1, 0, 0, 0, 0]), 2), [1, 0])
    # 50% tie resolves to 1
    assert np.array_equal(pool_mask(np.array([1, 1, 0, 0, 0, 0, 0, 0]), 2), [1, 0])
    assert np.array_equal(pool_mask(np.ones(8, dtype=np.int8), 2), [1, 1])


def test_pool_matches_oracle_exhaustively_up_to_64():
    # every single-run mask, all T <= 64 with T' = T/4
    for t in range(4, 65, 4):
        n_out = t // 4
        for run in range(1, t + 1):
            for start in range(t - run + 1):
                m = np.zeros(t, dtype=np.int8)
                m[start:start + run] = 1
                assert np.array_equal(pool_mask(m, n_out),
                                      majority_pool_oracle(m, n_out))


def test_pool_requires_divisibility():
    with pytest.raises(CutMixError):
        pool_mask(np.zeros(10, dtype=np.int8), 4)


def test_sample_mask_is_single_run_in_bounds():
    rng = np.random.default_rng(0)
    for _ in range(200):
        mask = sample_mask(64, 16, rng)
        run = int(mask.m.sum())
        assert 16 <= run <= 48  # [0.25, 0.75] * T
        diff = np.diff(np.concatenate([[0], mask.m, [0]]))
        assert np.sum(diff == 1) == 1  # exactly one run
        assert np.array_equal(mask.m_pooled, majority_pool_oracle(mask.m, 16))


def test_cutmix_spec_identity_and_swap():
    rng = np.random.default_rng(1)
    xi, xs = rng.normal(size=(8, 3)), rng.normal(size=(8, 3))
    full = make_mask(np.ones(8), 2)
    assert np.array_equal(cutmix_spec(xi, xs, full), xi)
    empty = make_mask(np.zeros(8), 2)
    assert np.array_equal(cutmix_spec(xi, xs, empty), xs)
    some = make_mask([0, 1, 1, 0, 0, 0, 0, 0], 2)
    assert np.array_equal(cutmix_spec(xi, xi, some), xi)


def test_cutmix_spec_matches_elementwise_reference():
    rng = np.random.default_rng(2)
    xi, xs = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
    m = np.array([1, 0, 1, 1], dtype=np.int8)
    mask = make_mask(m, 2)
    ref = np.empty_like(xi)
    for t in range(4):
        for f in range(2):
            ref[t, f] = m[t] * xi[t, f] + (1 - m[t]) * xs[t, f]
    assert np.array_equal(cutmix_spec(xi, xs, mask), ref)


def test_complementarity_identity():
    rng = np.random.default_rng(3)
    xi, xs = rng.normal(size=(16, 5)), rng.normal(size=(16, 5))
    for _ in range(20):
        mask = sample_mask(16, 4, rng)
        total = cutmix_spec(xi, xs, mask) + cutmix_spec(xs, xi, mask)
        assert np.array_equal(total, xi + xs)


def test_cutmix_pred_swap_and_idempotence():
    rng = np.random.default_rng(4)
    pi, ps = rng.uniform(size=(4, 3)), rng.uniform(size=(4, 3))
    empty = make_mask(np.zeros(16), 4)
    assert np.array_equal(cutmix_pred(pi, ps, empty), ps)
    full = make_mask(np.ones(16), 4)
    assert np.array_equal(cutmix_pred(pi, pi, full), pi)


def test_cutmix_pred_rows_come_whole_from_a_source():
    rng = np.random.default_rng(5)
    for _ in range(50):
        pi, ps = rng.uniform(size=(8, 3)), rng.uniform(size=(8, 3))
        mask = sample_mask(32, 8, rng)
        mixed = cutmix_pred(pi, ps, mask)
        for t in range(8):
            assert (np.array_equal(mixed[t], pi[t])
                    or np.array_equal(mixed[t], ps[t]))


def test_shape_mismatch_errors():
    mask = make_mask(np.ones(8), 2)
    with pytest.raises(CutMixError):
        cutmix_spec(np.zeros((8, 2)), np.zeros((8, 3)), mask)
    with pytest.raises(CutMixError):
        cutmix_spec(np.zeros((4, 2)), np.zeros((4, 2)), mask)
    with pytest.raises(CutMixError):
        cutmix_pred(np.zeros((3, 2)), np.zeros((3, 2)), mask)


def test_shuffle_pairing_is_permutation():
    rng = np.random.default_rng(6)
    sigma = shuffle_pairing(10, rng)
    assert sorted(sigma.tolist()) == list(range(10))
