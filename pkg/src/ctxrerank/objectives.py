"""Click-probability heads and the item-level + list-level training loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (Tensor, as_tensor, binary_cross_entropy, matmul, mul, parameter,
                     reshape, sigmoid, sum_)

PROB_EPS = 1e-12


@dataclass
class HeadParams:
    item_w: Tensor  # d_h
    item_b: Tensor  # scalar, stored as shape (1,)
    aux_w: Tensor
    aux_b: Tensor

    @classmethod
    def init(cls, d_h, rng):
        s = 1.0 / np.sqrt(d_h)
        return cls(parameter(rng.uniform(-s, s, size=d_h)), parameter(np.zeros(1)),
                   parameter(rng.uniform(-s, s, size=d_h)), parameter(np.zeros(1)))

    def named(self):
        return {"item_w": self.item_w, "item_b": self.item_b,
                "aux_w": self.aux_w, "aux_b": self.aux_b}


def _affine(rows, w, b):
    rows = as_tensor(rows)
    if rows.shape[-1] != w.shape[0]:
        raise ValueError(f"head expects width {w.shape[0]}, got {rows.shape[-1]}")
    out = matmul(rows, reshape(w, (w.shape[0], 1)))
    return reshape(out, out.shape[:-1]) + b


def item_click_probs(H_S, head: HeadParams) -> Tensor:
    """Sigmoid click probability for every candidate row; the CLS row is dropped."""
    H_S = as_tensor(H_S)
    if H_S.shape[-2] < 2:
        raise ValueError("H_S must hold at least one candidate row and the CLS row")
    return sigmoid(_affine(H_S[..., :-1, :], head.item_w, head.item_b))


def list_click_prob(H_S, head: HeadParams) -> Tensor:
    """Probability that the list receives any click, read off the CLS row."""
    H_S = as_tensor(H_S)
    return sigmoid(_affine(H_S[..., -1:, :], head.aux_w, head.aux_b))[..., 0]


def list_label(y, mask=None):
    y = np.asarray(y)
    if mask is not None:
        y = np.where(mask, y, 0)
    return (y.sum(axis=-1) > 0).astype(np.float64)


def _check_binary(y, what):
    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError(f"{what} must be 0 or 1")
    return y


def multitask_loss(y_hat, y, y_hat_aux, y_aux=None, alpha=1.0, mask=None,
                   return_parts=False):
    """Item BCE summed over each list plus ``alpha`` times the list-level BCE.

    Inputs may carry a leading session axis: ``y_hat`` and ``y`` are (..., m),
    ``y_hat_aux`` and ``y_aux`` are (...,). Per-session losses are averaged.
    ``mask`` (..., m) excludes padded candidates. ``y_aux`` defaults to
    "any positive in the list" and is rejected if it disagrees with ``y``.
    With ``return_parts`` the result is ``(L, L_m, L_aux)``.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    y_hat, y_hat_aux = as_tensor(y_hat), as_tensor(y_hat_aux)
    y = _check_binary(y, "item labels")
    if y.shape != y_hat.shape:
        raise ValueError(f"labels {y.shape} and predictions {y_hat.shape} differ in shape")
    weight = np.ones_like(y) if mask is None else np.asarray(mask, dtype=np.float64)
    expected_aux = list_label(y, None if mask is None else weight > 0)
    if y_aux is None:
        y_aux = expected_aux
    else:
        y_aux = _check_binary(y_aux, "list label")
        if not np.array_equal(np.broadcast_to(y_aux, expected_aux.shape), expected_aux):
            raise ValueError("list label must be 1 exactly when the list has a positive item")
    y_aux = np.broadcast_to(y_aux, y_hat_aux.shape)

    per_item = mul(binary_cross_entropy(y_hat, y, PROB_EPS), weight)
    L_m = sum_(per_item, axis=-1)
    L_aux = binary_cross_entropy(y_hat_aux, y_aux, PROB_EPS)
    sessions = max(int(np.prod(L_m.shape)), 1)
    L_m = mul(sum_(L_m), 1.0 / sessions)
    L_aux = mul(sum_(L_aux), 1.0 / sessions)
    L = L_m + mul(L_aux, alpha) if alpha else L_m
    return (L, L_m, L_aux) if return_parts else L
