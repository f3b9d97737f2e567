"""Independent reference implementations used as test oracles.

These use plain numpy loops in the column-per-item orientation of the
usual ``W x`` notation and share no code with the library.
"""

import math

import numpy as np


def softmax_vec(v):
    v = np.asarray(v, dtype=float)
    e = np.array([math.exp(x - max(v)) for x in v])
    return e / e.sum()


def attend_cols(Q, K, V, width):
    """Q: d x a, K: d x b, V: d x b (one column per item); returns a x d and weights."""
    out = np.zeros((Q.shape[1], V.shape[0]))
    weights = np.zeros((Q.shape[1], K.shape[1]))
    for i in range(Q.shape[1]):
        logits = [sum(Q[r, i] * K[r, j] for r in range(Q.shape[0])) / math.sqrt(width)
                  for j in range(K.shape[1])]
        w = softmax_vec(logits)
        weights[i] = w
        for j in range(K.shape[1]):
            out[i] += w[j] * V[:, j]
    return out, weights


def _heads(Q, K, V, heads):
    d_h = Q.shape[0]
    k = d_h // heads
    outs, ws = [], []
    for h in range(heads):
        sl = slice(h * k, (h + 1) * k)
        o, w = attend_cols(Q[sl], K[sl], V[sl], k)
        outs.append(o)
        ws.append(w)
    return np.concatenate(outs, axis=1), np.stack(ws)


def self_attention_cols(Z_B, W_Q, W_K, W_V, heads=1):
    """History self-attention with Z_B given row-per-item; computed on Z_B^T."""
    Z = np.asarray(Z_B).T
    return _heads(W_Q @ Z, W_K @ Z, W_V @ Z, heads)


def merged_attention_concat(Z_S, H_B, W_q, W_k1, W_k2, W_v1, W_v2, heads=1):
    """Merged cross-attention with the concatenated key/value matrices built explicitly."""
    Zs = np.asarray(Z_S).T
    Hb = np.asarray(H_B).T
    if Hb.shape[1]:
        K = np.concatenate([W_k1 @ Hb, W_k2 @ Zs], axis=1)
        V = np.concatenate([W_v1 @ Hb, W_v2 @ Zs], axis=1)
    else:
        K, V = W_k2 @ Zs, W_v2 @ Zs
    return _heads(W_q @ Zs, K, V, heads)


def fusion_rows(X, W1, b1, W2, b2):
    """Two-layer ReLU MLP applied row by row."""
    out = []
    for x in np.asarray(X):
        h = np.maximum(W1 @ x + b1, 0.0)
        out.append(W2 @ h + b2)
    return np.array(out)


def brute_auc(scores, labels):
    """All-pairs AUC, ties counted as one half; None when a class is missing."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    if not pos or not neg:
        return None
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def brute_gauc(lists, k):
    """Top-k truncation (stable by position), per-list AUC weighted by truncated length."""
    num = den = 0.0
    for scores, labels in lists:
        idx = sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:k]
        a = brute_auc([scores[i] for i in idx], [labels[i] for i in idx])
        if a is None:
            continue
        num += a * len(idx)
        den += len(idx)
    return num / den if den else None


def brute_ndcg(scores, labels, k):
    idx = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    dcg = sum(labels[i] / math.log2(r + 2) for r, i in enumerate(idx[:k]))
    ideal = sorted(labels, reverse=True)
    idcg = sum(g / math.log2(r + 2) for r, g in enumerate(ideal[:k]))
    return dcg / idcg if idcg else None
