"""Pointwise initial ranker: an MLP over ``f_u || f_i`` scoring each candidate alone."""

from __future__ import annotations

import numpy as np

from .embedding import EMBED_INIT_SCALE, FeatureSchema, embed_record, init_tables
from .fusion import build_X
from .model import Batch, collate
from .objectives import PROB_EPS
from .tensor import (Tensor, binary_cross_entropy, dropout, linear, mul, parameter,
                     reshape, sigmoid, sum_)


class PointwiseRanker:
    def __init__(self, schema: FeatureSchema, hidden=32, rng=None, init_scale=EMBED_INIT_SCALE,
                 init_dist="normal"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.schema = schema
        self.dims = dict(hidden=hidden)
        self.user_tables = init_tables(schema.user_fields, rng, init_scale, init_dist)
        self.item_tables = init_tables(schema.item_fields, rng, init_scale, init_dist)
        in_dim = schema.user_dim + schema.item_dim
        limit = np.sqrt(6.0 / (in_dim + hidden))
        self.W1 = parameter(rng.uniform(-limit, limit, size=(hidden, in_dim)))
        self.b1 = parameter(np.zeros(hidden))
        self.w_out = parameter(rng.uniform(-1, 1, size=(1, hidden)) / np.sqrt(hidden))
        self.b_out = parameter(np.zeros(1))

    def named_parameters(self) -> dict[str, Tensor]:
        out = {f"user_emb.{k}": t for k, t in self.user_tables.items()}
        out.update({f"item_emb.{k}": t for k, t in self.item_tables.items()})
        out.update({"W1": self.W1, "b1": self.b1, "w_out": self.w_out, "b_out": self.b_out})
        return out

    def logits(self, batch: Batch, training=False, rng=None, dropout_rate=0.0):
        f_u = embed_record(self.schema.user_fields, self.user_tables, batch.user)
        f_i = embed_record(self.schema.item_fields, self.item_tables, batch.candidates)
        X = build_X(f_u, f_i[..., :0, :], f_i)
        hidden = dropout(linear(X, self.W1, self.b1, activation="relu"), dropout_rate, rng, training)
        out = linear(hidden, self.w_out, self.b_out)
        return reshape(out, out.shape[:-1])

    def loss(self, batch: Batch, alpha=0.0, training=False, rng=None, dropout_rate=0.0):
        probs = sigmoid(self.logits(batch, training, rng, dropout_rate))
        per_item = mul(binary_cross_entropy(probs, batch.labels, PROB_EPS), batch.candidate_mask)
        return mul(sum_(per_item), 1.0 / len(batch))

    def score(self, batch: Batch) -> np.ndarray:
        return self.logits(batch).data

    def __call__(self, record) -> np.ndarray:
        """Scores for one session's candidates, in their stored order."""
        return self.score(collate([record], 0))[0, :record.m]
