"""
Gradients and merged attention
==============================

A tour of the numeric core: build a small graph, check its gradients
against central differences, then confirm that the merged cross-attention
layer is the same computation as attending over explicitly concatenated
keys and values.
"""

import numpy as np

from ctxrerank import tensor as T
from ctxrerank.attention import AttentionParams, merged_cross_attention

rng = np.random.default_rng(0)

# A two-layer MLP on three items, one item per row.
x = T.Tensor(rng.normal(size=(3, 4)))
W1 = T.parameter(rng.normal(size=(5, 4)))
W2 = T.parameter(rng.normal(size=(1, 5)))


def loss():
    h = T.linear(x, W1, activation="relu")
    return T.sum_(T.sigmoid(T.linear(h, W2)))


report = T.grad_check(loss, {"W1": W1, "W2": W2})
print("MLP grad check:", report)

# Merged cross-attention: history and list logits share one softmax.
d, d_h, n, m = 3, 4, 2, 3
p = AttentionParams.init(d, d_h, rng)
Z_S = rng.normal(size=(m + 1, d))   # m candidates + CLS
H_B = rng.normal(size=(n, d_h))
merged, weights = merged_cross_attention(Z_S, H_B, p, return_weights=True)

# The same thing with the key/value pool built by hand.
Wd = {k: v.data for k, v in p.named().items()}
K = np.vstack([H_B @ Wd["W_k1"].T, Z_S @ Wd["W_k2"].T])
V = np.vstack([H_B @ Wd["W_v1"].T, Z_S @ Wd["W_v2"].T])
logits = (Z_S @ Wd["W_q"].T) @ K.T / np.sqrt(d_h)
A = np.exp(logits - logits.max(axis=1, keepdims=True))
A /= A.sum(axis=1, keepdims=True)
print("max |merged - explicit| =", np.abs(merged.data - A @ V).max())
print("attention rows sum to", weights.sum(axis=-1).ravel())
