"""Per-item fusion of user and item features through a shared two-layer MLP.

The history list and the candidate list go through the same MLP. A learnable
CLS vector is then appended after the last candidate; it does not pass through
the MLP.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (Tensor, as_tensor, broadcast_to, concat, dropout, linear,
                     parameter, reshape)


@dataclass
class FusionParams:
    W1: Tensor  # h x (d_u + d_i)
    b1: Tensor
    W2: Tensor  # d x h
    b2: Tensor
    cls: Tensor  # d

    @classmethod
    def init(cls, in_dim, hidden, out_dim, rng):
        return cls(
            W1=parameter(_glorot(rng, hidden, in_dim)),
            b1=parameter(np.zeros(hidden)),
            W2=parameter(_glorot(rng, out_dim, hidden)),
            b2=parameter(np.zeros(out_dim)),
            cls=parameter(rng.normal(0.0, 0.1, size=out_dim)),
        )

    def named(self):
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2, "cls": self.cls}


@dataclass
class FusedLists:
    Z_B: Tensor  # (..., n, d)
    Z_S: Tensor  # (..., m + 1, d), CLS last


def _glorot(rng, fan_out, fan_in):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def build_X(f_u, history, candidates, user_dim=None, item_dim=None) -> Tensor:
    """Stack ``f_u || f_i`` for every history item, then every candidate.

    ``f_u`` has shape (..., d_u); ``history`` (..., n, d_i); ``candidates``
    (..., m, d_i). The result has shape (..., n + m, d_u + d_i).
    """
    f_u, history, candidates = as_tensor(f_u), as_tensor(history), as_tensor(candidates)
    if candidates.shape[-2] < 1:
        raise ValueError("the candidate list must hold at least one item")
    d_i = candidates.shape[-1]
    if history.shape[-1] != d_i and history.shape[-2] > 0:
        raise ValueError(f"history vectors have length {history.shape[-1]}, candidates {d_i}")
    if item_dim is not None and d_i != item_dim:
        raise ValueError(f"item vectors have length {d_i}, schema says {item_dim}")
    if user_dim is not None and f_u.shape[-1] != user_dim:
        raise ValueError(f"user vector has length {f_u.shape[-1]}, schema says {user_dim}")
    if history.shape[-2] == 0:
        items = candidates
    else:
        items = concat([history, candidates], axis=-2)
    rows = items.shape[-2]
    lead = f_u.shape[:-1]
    users = broadcast_to(reshape(f_u, lead + (1, f_u.shape[-1])), lead + (rows, f_u.shape[-1]))
    return concat([users, items], axis=-1)


def fuse(X, params: FusionParams, n, dropout_rate=0.0, rng=None, training=False) -> FusedLists:
    """Run the fusion MLP on every row of ``X`` and split it into the two lists.

    The first ``n`` rows become the history representation; the remaining rows
    become the candidate representation, with the CLS vector appended.
    """
    X = as_tensor(X)
    if X.shape[-1] != params.W1.shape[1]:
        raise ValueError(f"X has width {X.shape[-1]}, W1 expects {params.W1.shape[1]}")
    if not 0 <= n < X.shape[-2]:
        raise ValueError(f"cannot split {X.shape[-2]} rows into {n} history rows plus candidates")
    hidden = linear(X, params.W1, params.b1, activation="relu")
    hidden = dropout(hidden, dropout_rate, rng, training)
    Z = linear(hidden, params.W2, params.b2)
    Z_B = Z[..., :n, :]
    lead = Z.shape[:-2]
    d = Z.shape[-1]
    cls_row = broadcast_to(reshape(params.cls, (1,) * len(lead) + (1, d)), lead + (1, d))
    Z_S = concat([Z[..., n:, :], cls_row], axis=-2)
    return FusedLists(Z_B, Z_S)
