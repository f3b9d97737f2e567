"""The contextual re-ranker and the padded session batches it consumes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import BlockStack, encode
from .embedding import EMBED_INIT_SCALE, FeatureSchema, embed_record, init_tables
from .fusion import FusionParams, build_X, fuse
from .objectives import (HeadParams, item_click_probs, list_click_prob, list_label,
                         multitask_loss)
from .tensor import Tensor, add, concat, parameter


@dataclass
class Batch:
    """Index arrays for B sessions.

    History is left-padded and candidates right-padded with index 0; the
    masks flag real positions.
    """

    user: np.ndarray            # (B, F_u)
    history: np.ndarray         # (B, n, F_i)
    history_mask: np.ndarray    # (B, n)
    candidates: np.ndarray      # (B, m, F_i)
    candidate_mask: np.ndarray  # (B, m)
    labels: np.ndarray          # (B, m)

    def __len__(self):
        return len(self.user)

    def take(self, idx):
        return Batch(self.user[idx], self.history[idx], self.history_mask[idx],
                     self.candidates[idx], self.candidate_mask[idx], self.labels[idx])

    def list_mask(self):
        """Key mask over the candidate rows plus the CLS row."""
        ones = np.ones((len(self), 1), dtype=bool)
        return np.concatenate([self.candidate_mask, ones], axis=1)


def collate(records, history_length, num_user_fields=None, num_item_fields=None) -> Batch:
    """Pack records into padded arrays, keeping the last ``history_length`` history items."""
    records = list(records)
    if not records:
        raise ValueError("cannot collate an empty list of sessions")
    fu = num_user_fields or len(records[0].user_fields)
    fi = num_item_fields or len(records[0].candidates[0])
    B = len(records)
    m = max(r.m for r in records)
    n = history_length
    user = np.zeros((B, fu), dtype=np.int64)
    hist = np.zeros((B, n, fi), dtype=np.int64)
    hmask = np.zeros((B, n), dtype=bool)
    cand = np.zeros((B, m, fi), dtype=np.int64)
    cmask = np.zeros((B, m), dtype=bool)
    labels = np.zeros((B, m))
    for b, r in enumerate(records):
        user[b] = r.user_fields
        h = r.history[-n:] if n else ()
        if h:
            hist[b, n - len(h):] = h
            hmask[b, n - len(h):] = True
        cand[b, :r.m] = r.candidates
        cmask[b, :r.m] = True
        labels[b, :r.m] = r.labels
    return Batch(user, hist, hmask, cand, cmask, labels)


class ContextualReranker:
    """Feature fusion, history self-attention, merged cross-attention and two heads."""

    def __init__(self, schema: FeatureSchema, hidden=32, d=32, d_h=32, num_blocks=1, heads=1,
                 rng=None, position_embeddings=False, max_candidates=None, n_max=16,
                 init_scale=EMBED_INIT_SCALE, init_dist="normal"):
        rng = rng if rng is not None else np.random.default_rng(0)
        if position_embeddings and not max_candidates:
            raise ValueError("position embeddings need max_candidates")
        self.schema = schema
        self.dims = dict(hidden=hidden, d=d, d_h=d_h, num_blocks=num_blocks, heads=heads,
                         position_embeddings=bool(position_embeddings),
                         max_candidates=int(max_candidates or 0), n_max=int(n_max))
        self.user_tables = init_tables(schema.user_fields, rng, init_scale, init_dist)
        self.item_tables = init_tables(schema.item_fields, rng, init_scale, init_dist)
        self.fusion = FusionParams.init(schema.user_dim + schema.item_dim, hidden, d, rng)
        self.stack = BlockStack.init(d, d_h, rng, num_blocks, heads)
        self.head = HeadParams.init(d_h, rng)
        self.positions = (parameter(rng.normal(0.0, 0.01, size=(max_candidates, d)))
                          if position_embeddings else None)

    @property
    def n_max(self):
        return self.dims["n_max"]

    def named_parameters(self) -> dict[str, Tensor]:
        out = {}
        for name, t in self.user_tables.items():
            out[f"user_emb.{name}"] = t
        for name, t in self.item_tables.items():
            out[f"item_emb.{name}"] = t
        for name, t in self.fusion.named().items():
            out[f"fusion.{name}"] = t
        for i, block in enumerate(self.stack.blocks):
            for name, t in block.named().items():
                out[f"block{i}.{name}"] = t
        for name, t in self.head.named().items():
            out[f"head.{name}"] = t
        if self.positions is not None:
            out["positions"] = self.positions
        return out

    def encode_batch(self, batch: Batch, training=False, rng=None, dropout_rate=0.0):
        """Return ``H_S`` of shape (B, m+1, d_h)."""
        f_u = embed_record(self.schema.user_fields, self.user_tables, batch.user)
        f_hist = embed_record(self.schema.item_fields, self.item_tables, batch.history)
        f_cand = embed_record(self.schema.item_fields, self.item_tables, batch.candidates)
        X = build_X(f_u, f_hist, f_cand, self.schema.user_dim, self.schema.item_dim)
        n = batch.history.shape[1]
        lists = fuse(X, self.fusion, n, dropout_rate, rng, training)
        Z_S = lists.Z_S
        if self.positions is not None:
            m = batch.candidates.shape[1]
            d = self.dims["d"]
            pos = concat([self.positions[:m], Tensor(np.zeros((1, d)))], axis=0)
            Z_S = add(Z_S, pos)
        _, H_S = encode(lists.Z_B, Z_S, self.stack, dropout_rate, rng, training,
                        batch.history_mask, batch.list_mask())
        return H_S

    def forward(self, batch: Batch, training=False, rng=None, dropout_rate=0.0):
        """Item click probabilities (B, m) and list click probability (B,)."""
        H_S = self.encode_batch(batch, training, rng, dropout_rate)
        return item_click_probs(H_S, self.head), list_click_prob(H_S, self.head)

    def loss(self, batch: Batch, alpha=1.0, training=False, rng=None, dropout_rate=0.0,
             return_parts=False):
        y_hat, y_aux_hat = self.forward(batch, training, rng, dropout_rate)
        return multitask_loss(y_hat, batch.labels, y_aux_hat,
                              list_label(batch.labels, batch.candidate_mask), alpha,
                              mask=batch.candidate_mask, return_parts=return_parts)

    def score(self, batch: Batch) -> np.ndarray:
        y_hat, _ = self.forward(batch)
        return y_hat.data
