"""History self-attention and merged cross-attention over the candidate list.

Shapes use one item per row: ``Z_B`` is (..., n, d), ``Z_S`` is (..., m+1, d)
with the CLS row last, and outputs have width ``d_h``. Projection matrices
keep the ``d_h x d`` orientation and are applied as ``x @ W.T``.

There is no positional encoding, residual path or layer normalisation, so
both layers are equivariant under permutations of their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import (Tensor, as_tensor, concat, dropout, linear, matmul, moveaxis,
                     mul, parameter, reshape, softmax, transpose)

_NAMES = ("W_Q", "W_K", "W_V", "W_q", "W_k1", "W_k2", "W_v1", "W_v2")


@dataclass
class AttentionParams:
    W_Q: Tensor   # d_h x d, history self-attention
    W_K: Tensor
    W_V: Tensor
    W_q: Tensor   # d_h x d, queries from the candidate list
    W_k1: Tensor  # d_h x d_h, keys from the history output
    W_k2: Tensor  # d_h x d, keys from the candidate list
    W_v1: Tensor  # d_h x d_h
    W_v2: Tensor  # d_h x d

    @classmethod
    def init(cls, d, d_h, rng):
        def glorot(rows, cols):
            limit = np.sqrt(6.0 / (rows + cols))
            return parameter(rng.uniform(-limit, limit, size=(rows, cols)))
        return cls(W_Q=glorot(d_h, d), W_K=glorot(d_h, d), W_V=glorot(d_h, d),
                   W_q=glorot(d_h, d), W_k1=glorot(d_h, d_h), W_k2=glorot(d_h, d),
                   W_v1=glorot(d_h, d_h), W_v2=glorot(d_h, d))

    @property
    def d_h(self):
        return self.W_Q.shape[0]

    def named(self):
        return {name: getattr(self, name) for name in _NAMES}


@dataclass
class BlockStack:
    blocks: list = field(default_factory=list)
    heads: int = 1

    def __post_init__(self):
        if len(self.blocks) < 1:
            raise ValueError("a block stack needs at least one block")
        for b in self.blocks:
            if b.d_h % self.heads:
                raise ValueError(f"d_h={b.d_h} is not divisible by {self.heads} heads")

    @classmethod
    def init(cls, d, d_h, rng, num_blocks=1, heads=1):
        if num_blocks > 1 and d != d_h:
            raise ValueError(f"stacking {num_blocks} blocks needs d == d_h, got d={d}, d_h={d_h}")
        return cls([AttentionParams.init(d, d_h, rng) for _ in range(num_blocks)], heads)

    @property
    def N(self):
        return len(self.blocks)


def _split_heads(x, heads):
    """(..., L, d_h) -> (..., heads, L, d_h / heads)"""
    *lead, L, dh = x.shape
    x = reshape(x, (*lead, L, heads, dh // heads))
    return moveaxis(x, -2, -3)


def _merge_heads(x):
    """(..., heads, L, k) -> (..., L, heads * k)"""
    x = moveaxis(x, -3, -2)
    *lead, L, H, k = x.shape
    return reshape(x, (*lead, L, H * k))


def _key_mask(mask, lead, length):
    if mask is None:
        return np.ones(lead + (length,), dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != lead + (length,):
        raise ValueError(f"mask shape {mask.shape} does not match {lead + (length,)}")
    return mask


def _check_width(x, w, what):
    if x.shape[-1] != w.shape[1]:
        raise ValueError(f"{what} has width {x.shape[-1]}, projection expects {w.shape[1]}")


def history_self_attention(Z_B, params: AttentionParams, heads=1, mask=None,
                           dropout_rate=0.0, rng=None, training=False, return_weights=False):
    """Scaled dot-product self-attention over the history rows.

    ``mask`` (..., n) flags real history positions; padded positions are
    neither attended to nor given an output (their rows come out zero).
    Returns ``H_B`` of shape (..., n, d_h), plus the attention weights of shape
    (..., heads, n, n) when ``return_weights`` is set.
    """
    Z_B = as_tensor(Z_B)
    _check_width(Z_B, params.W_Q, "Z_B")
    lead, n, d_h = Z_B.shape[:-2], Z_B.shape[-2], params.d_h
    if n == 0:
        H_B = Tensor(np.zeros(lead + (0, d_h)))
        return (H_B, np.zeros(lead + (heads, 0, 0))) if return_weights else H_B
    mask = _key_mask(mask, lead, n)
    Q = _split_heads(linear(Z_B, params.W_Q), heads)
    K = _split_heads(linear(Z_B, params.W_K), heads)
    V = _split_heads(linear(Z_B, params.W_V), heads)
    scale = 1.0 / np.sqrt(d_h // heads)
    logits = mul(matmul(Q, transpose(K)), scale)
    pair_mask = (mask[..., None, :, None] & mask[..., None, None, :])
    weights = softmax(logits, pair_mask)
    H_B = _merge_heads(matmul(dropout(weights, dropout_rate, rng, training), V))
    return (H_B, weights.data) if return_weights else H_B


def merged_cross_attention(Z_S, H_B, params: AttentionParams, heads=1, history_mask=None,
                           list_mask=None, dropout_rate=0.0, rng=None, training=False,
                           return_weights=False):
    """One attention layer whose key pool is the history plus the candidate list.

    Queries come from every row of ``Z_S`` (candidates and CLS). Keys and
    values for the history come from ``H_B`` through ``W_k1``/``W_v1``; those
    for the list come from ``Z_S`` through ``W_k2``/``W_v2``. Both logit blocks
    share one softmax per query. The two blocks are scored and aggregated
    separately rather than materialising concatenated key/value matrices.

    ``history_mask`` (..., n) and ``list_mask`` (..., m+1) flag real rows.
    Returns ``H_S`` of shape (..., m+1, d_h), plus weights of shape
    (..., heads, m+1, n+m+1) when ``return_weights`` is set.
    """
    Z_S, H_B = as_tensor(Z_S), as_tensor(H_B)
    _check_width(Z_S, params.W_q, "Z_S")
    lead, rows, n = Z_S.shape[:-2], Z_S.shape[-2], H_B.shape[-2]
    if rows < 2:
        raise ValueError("Z_S needs at least one candidate row plus the CLS row")
    if H_B.shape[:-2] != lead:
        raise ValueError(f"H_B batch shape {H_B.shape[:-2]} does not match Z_S {lead}")
    list_mask = _key_mask(list_mask, lead, rows)
    scale = 1.0 / np.sqrt(params.d_h // heads)

    q = _split_heads(linear(Z_S, params.W_q), heads)
    k_list = _split_heads(linear(Z_S, params.W_k2), heads)
    v_list = _split_heads(linear(Z_S, params.W_v2), heads)
    list_logits = mul(matmul(q, transpose(k_list)), scale)
    if n == 0:
        weights = softmax(list_logits, list_mask[..., None, None, :])
        out = matmul(dropout(weights, dropout_rate, rng, training), v_list)
        H_S = _merge_heads(out)
        return (H_S, weights.data) if return_weights else H_S

    _check_width(H_B, params.W_k1, "H_B")
    history_mask = _key_mask(history_mask, lead, n)
    k_hist = _split_heads(linear(H_B, params.W_k1), heads)
    v_hist = _split_heads(linear(H_B, params.W_v1), heads)
    hist_logits = mul(matmul(q, transpose(k_hist)), scale)
    logits = concat([hist_logits, list_logits], axis=-1)
    mask = np.concatenate([history_mask, list_mask], axis=-1)[..., None, None, :]
    weights = softmax(logits, mask)
    dropped = dropout(weights, dropout_rate, rng, training)
    out = matmul(dropped[..., :n], v_hist) + matmul(dropped[..., n:], v_list)
    H_S = _merge_heads(out)
    return (H_S, weights.data) if return_weights else H_S


def encode(Z_B, Z_S, stack: BlockStack, dropout_rate=0.0, rng=None, training=False,
           history_mask=None, list_mask=None):
    """Apply the block stack; each block's (H_B, H_S) feeds the next block.

    Returns ``(H_B, H_S)`` from the last block.
    """
    Z_B, Z_S = as_tensor(Z_B), as_tensor(Z_S)
    if stack.N > 1 and any(b.d_h != Z_S.shape[-1] for b in stack.blocks):
        raise ValueError("stacking more than one block requires d == d_h")
    for block in stack.blocks:
        H_B = history_self_attention(Z_B, block, stack.heads, history_mask,
                                     dropout_rate, rng, training)
        H_S = merged_cross_attention(Z_S, H_B, block, stack.heads, history_mask, list_mask,
                                     dropout_rate, rng, training)
        Z_B, Z_S = H_B, H_S
    return Z_B, Z_S
