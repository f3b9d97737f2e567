import math

import numpy as np
import pytest

from ctxrerank.objectives import (HeadParams, item_click_probs, list_click_prob, list_label,
                                  multitask_loss)
from ctxrerank.tensor import Tensor, parameter


def head(d_h=3, seed=0):
    return HeadParams.init(d_h, np.random.default_rng(seed))


def H(m=4, d_h=3, seed=1):
    return np.random.default_rng(seed).normal(size=(m + 1, d_h))


def test_zero_head_gives_half():
    h = head()
    for t in h.named().values():
        t.data[:] = 0.0
    np.testing.assert_array_equal(item_click_probs(H(), h).data, 0.5)
    assert list_click_prob(H(), h).data == 0.5


def test_saturation():
    h = head()
    h.item_w.data[:] = 0.0
    h.aux_w.data[:] = 0.0
    h.item_b.data[:] = 50.0
    h.aux_b.data[:] = 50.0
    assert np.all(item_click_probs(H(), h).data >= 1 - 1e-20)
    assert list_click_prob(H(), h).data >= 1 - 1e-20


def test_closed_form_ln3():
    h = head(d_h=2)
    h.item_w.data[:] = [np.log(3.0), 0.0]
    h.aux_w.data[:] = [0.0, np.log(3.0)]
    rows = np.array([[1.0, 0.0], [1.0, 7.0], [0.0, 1.0]])
    np.testing.assert_allclose(item_click_probs(rows, h).data, [0.75, 0.75], atol=1e-15)
    np.testing.assert_allclose(list_click_prob(rows, h).data, 0.75, atol=1e-15)


def test_heads_read_the_right_rows():
    h = head()
    rows = H()
    base_items, base_list = item_click_probs(rows, h).data, list_click_prob(rows, h).data
    changed = rows.copy()
    changed[-1] += 10.0
    np.testing.assert_array_equal(item_click_probs(changed, h).data, base_items)
    assert list_click_prob(changed, h).data != base_list
    assert item_click_probs(rows, h).shape == (4,)


def test_loss_two_ln2():
    L = multitask_loss([0.5], [1], 0.5, 1, alpha=1.0)
    assert abs(float(L.data) - 2 * math.log(2)) < 1e-12


def test_perfect_predictions_near_zero():
    y = np.array([1, 0, 0, 1])
    L = multitask_loss(y.astype(float), y, 1.0, 1, alpha=1.0)
    assert 0 <= float(L.data) < 1e-9


def test_alpha_zero_equals_item_loss_exactly():
    rng = np.random.default_rng(2)
    y_hat, y = rng.uniform(0.01, 0.99, size=(3, 5)), rng.integers(0, 2, size=(3, 5))
    aux = rng.uniform(0.01, 0.99, size=3)
    L, L_m, _ = multitask_loss(y_hat, y, aux, alpha=0.0, return_parts=True)
    assert L is L_m
    assert float(L.data) == float(multitask_loss(y_hat, y, aux, alpha=1.0, return_parts=True)[1].data)


def test_alpha_default_is_one():
    import inspect
    assert inspect.signature(multitask_loss).parameters["alpha"].default == 1.0


def test_dL_dalpha_is_aux_loss():
    rng = np.random.default_rng(3)
    y_hat, y = rng.uniform(0.05, 0.95, size=(2, 4)), np.array([[1, 0, 0, 0], [0, 0, 0, 0]])
    aux = rng.uniform(0.05, 0.95, size=2)
    _, _, L_aux = multitask_loss(y_hat, y, aux, return_parts=True)
    eps = 1e-6
    up = float(multitask_loss(y_hat, y, aux, alpha=1.0 + eps).data)
    down = float(multitask_loss(y_hat, y, aux, alpha=1.0 - eps).data)
    assert abs((up - down) / (2 * eps) - float(L_aux.data)) < 1e-7


def test_reduction_sum_items_mean_sessions():
    y_hat = np.array([[0.2, 0.7], [0.9, 0.4]])
    y = np.array([[0, 1], [1, 1]])
    aux = np.array([0.6, 0.3])
    per_item = -(y * np.log(y_hat) + (1 - y) * np.log(1 - y_hat))
    per_list = -np.log(aux)
    expected = (per_item.sum(axis=1) + 0.5 * per_list).mean()
    assert abs(float(multitask_loss(y_hat, y, aux, alpha=0.5).data) - expected) < 1e-13


def test_mask_excludes_padding():
    y_hat = np.array([[0.2, 0.7, 0.123]])
    y = np.array([[0, 1, 0]])
    a = multitask_loss(y_hat, y, [0.6], mask=[[1, 1, 0]])
    b = multitask_loss(y_hat[:, :2], y[:, :2], [0.6])
    assert float(a.data) == pytest.approx(float(b.data), abs=1e-15)


def test_all_negative_small_predictions_vanish():
    for eps in (1e-2, 1e-4, 1e-8):
        _, L_m, _ = multitask_loss(np.full(5, eps), np.zeros(5), 0.5, return_parts=True)
        assert float(L_m.data) < 6 * eps


def test_loss_nonnegative_random():
    rng = np.random.default_rng(4)
    for _ in range(50):
        y = rng.integers(0, 2, size=6)
        assert float(multitask_loss(rng.uniform(size=6), y, rng.uniform(), alpha=rng.uniform(0, 3)).data) >= 0


@pytest.mark.parametrize("kw", [dict(y=[2]), dict(y_aux=0), dict(alpha=-1.0), dict(y_aux=0.5)])
def test_loss_rejects_bad_inputs(kw):
    args = dict(y_hat=[0.5], y=[1], y_hat_aux=0.5, y_aux=1, alpha=1.0)
    args.update(kw)
    with pytest.raises(ValueError):
        multitask_loss(**args)


def test_list_label():
    np.testing.assert_array_equal(list_label([[0, 0, 1], [0, 0, 0]]), [1.0, 0.0])
    np.testing.assert_array_equal(list_label([[0, 0, 1]], mask=[[1, 1, 0]]), [0.0])


def test_loss_gradients_flow_to_heads():
    h = head()
    rows = parameter(H())
    L = multitask_loss(item_click_probs(rows, h), [1, 0, 0, 1], list_click_prob(rows, h))
    L.backward()
    assert np.any(h.item_w.grad != 0) and np.any(h.aux_w.grad != 0)
    assert np.any(rows.grad[-1] != 0) and np.any(rows.grad[0] != 0)
