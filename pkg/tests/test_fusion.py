import numpy as np
import pytest

import oracles
from ctxrerank.fusion import FusionParams, build_X, fuse


def test_build_X_minimal():
    f_u, s1 = np.array([1.0, 2.0]), np.array([[3.0, 4.0, 5.0]])
    X = build_X(f_u, np.zeros((0, 3)), s1).data
    np.testing.assert_array_equal(X, [[1, 2, 3, 4, 5]])


def test_build_X_zero_user():
    X = build_X(np.zeros(2), np.ones((2, 3)), np.ones((1, 3))).data
    assert np.all(X[:, :2] == 0)


def test_build_X_row_order():
    b = np.array([[10.0], [20.0]])
    s = np.array([[30.0], [40.0]])
    X = build_X(np.array([7.0]), b, s).data
    np.testing.assert_array_equal(X, [[7, 10], [7, 20], [7, 30], [7, 40]])


def test_build_X_rejects_mismatch():
    with pytest.raises(ValueError):
        build_X(np.ones(2), np.ones((1, 3)), np.ones((1, 4)))
    with pytest.raises(ValueError):
        build_X(np.ones(2), np.ones((1, 3)), np.ones((1, 3)), user_dim=3)
    with pytest.raises(ValueError):
        build_X(np.ones(2), np.ones((1, 3)), np.zeros((0, 3)))


def params(in_dim=4, h=3, d=2, seed=0):
    return FusionParams.init(in_dim, h, d, np.random.default_rng(seed))


def test_zero_weights_give_bias_and_cls():
    p = params()
    p.W1.data[:] = 0
    p.W2.data[:] = 0
    p.b2.data[:] = [0.5, -0.5]
    out = fuse(np.random.default_rng(1).normal(size=(5, 4)), p, n=2)
    assert np.all(out.Z_B.data == [0.5, -0.5])
    np.testing.assert_array_equal(out.Z_S.data[:-1], np.tile([0.5, -0.5], (3, 1)))
    np.testing.assert_array_equal(out.Z_S.data[-1], p.cls.data)


def test_empty_history_split():
    out = fuse(np.ones((3, 4)), params(), n=0)
    assert out.Z_B.shape == (0, 2) and out.Z_S.shape == (4, 2)


def test_fuse_matches_row_oracle():
    p = params(seed=3)
    p.b1.data[:] = np.random.default_rng(4).normal(size=3)
    X = np.random.default_rng(5).normal(size=(3, 4))
    out = fuse(X, p, n=1)
    ref = oracles.fusion_rows(X, p.W1.data, p.b1.data, p.W2.data, p.b2.data)
    np.testing.assert_allclose(out.Z_B.data, ref[:1], atol=1e-14)
    np.testing.assert_allclose(out.Z_S.data[:-1], ref[1:], atol=1e-14)


def test_row_permutation_equivariance():
    p = params(seed=6)
    X = np.random.default_rng(7).normal(size=(6, 4))
    perm = np.random.default_rng(8).permutation(6)
    a = fuse(X, p, n=0).Z_S.data[:-1]
    b = fuse(X[perm], p, n=0).Z_S.data[:-1]
    np.testing.assert_allclose(b, a[perm], atol=1e-14)


def test_cls_row_shared_across_sessions():
    p = params(seed=9)
    X = np.random.default_rng(10).normal(size=(2, 5, 4))
    Z_S = fuse(X, p, n=2).Z_S.data
    np.testing.assert_array_equal(Z_S[0, -1], Z_S[1, -1])


def test_fuse_rejects_bad_shapes():
    with pytest.raises(ValueError):
        fuse(np.ones((3, 5)), params(), n=0)
    with pytest.raises(ValueError):
        fuse(np.ones((3, 4)), params(), n=3)


def test_hidden_dropout_only_in_training():
    p = params(seed=11)
    X = np.random.default_rng(12).normal(size=(50, 4))
    ref = fuse(X, p, n=0).Z_S.data
    same = fuse(X, p, n=0, dropout_rate=0.5, rng=np.random.default_rng(0)).Z_S.data
    drop = fuse(X, p, n=0, dropout_rate=0.5, rng=np.random.default_rng(0), training=True).Z_S.data
    np.testing.assert_array_equal(ref, same)
    assert not np.allclose(ref[:-1], drop[:-1])
    np.testing.assert_array_equal(ref[-1], drop[-1])
