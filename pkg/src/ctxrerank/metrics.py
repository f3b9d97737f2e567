"""Per-list ranking metrics (AUC, nDCG@K) and the grouped gAUC@K.

Scores are ranked in descending order; ties keep the original list order.
Metrics that are undefined for a list (no positive, or no negative for AUC)
come back as ``None`` and are skipped by the aggregators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np
from scipy.stats import rankdata

GAUC_DEFINITION = "per-list AUC over the top-K by score, weighted by truncated list length"


class RankedList(NamedTuple):
    scores: np.ndarray
    labels: np.ndarray


def ranked_list(scores, labels) -> RankedList:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError(f"scores {scores.shape} and labels {labels.shape} must be equal-length vectors")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    return RankedList(scores, labels.astype(np.int64))


def rank_order(scores):
    """Indices sorting ``scores`` descending, ties broken by position."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def auc(scores, labels):
    """Probability that a random positive outscores a random negative (ties count half)."""
    lst = ranked_list(scores, labels)
    pos = int(lst.labels.sum())
    neg = len(lst.labels) - pos
    if pos == 0 or neg == 0:
        return None
    ranks = rankdata(lst.scores)  # midranks for ties
    u = ranks[lst.labels == 1].sum() - pos * (pos + 1) / 2.0
    return float(u / (pos * neg))


def ndcg_at_k(scores, labels, k):
    """Binary-gain nDCG over the top ``k`` positions of the score ordering."""
    if k < 1:
        raise ValueError("k must be at least 1")
    lst = ranked_list(scores, labels)
    if lst.labels.sum() == 0:
        return None
    cut = min(k, len(lst.labels))
    discount = 1.0 / np.log2(np.arange(2, cut + 2))
    gains = lst.labels[rank_order(lst.scores)][:cut]
    ideal = np.sort(lst.labels)[::-1][:cut]
    return float((gains * discount).sum() / (ideal * discount).sum())


def truncate(scores, labels, k):
    """Keep the ``k`` highest-scoring items, in rank order."""
    order = rank_order(scores)[:k]
    return np.asarray(scores, dtype=np.float64)[order], np.asarray(labels)[order]


def group_auc_terms(lists: Iterable, k):
    """Yield ``(auc, weight)`` for each list after top-``k`` truncation; auc may be None."""
    if k < 1:
        raise ValueError("k must be at least 1")
    for scores, labels in lists:
        s, y = truncate(scores, labels, k)
        yield auc(s, y), len(y)


def gauc_at_k(lists: Iterable, k, return_skipped=False):
    """Length-weighted mean of per-list AUC over top-``k`` truncated lists.

    Lists whose truncation holds only one class are skipped. Returns ``None``
    when every list is skipped.
    """
    num = den = 0.0
    skipped = 0
    for a, w in group_auc_terms(lists, k):
        if a is None:
            skipped += 1
            continue
        num += a * w
        den += w
    value = num / den if den else None
    return (value, skipped) if return_skipped else value


def mean_ndcg_at_k(lists: Iterable, k, return_skipped=False):
    vals, skipped = [], 0
    for scores, labels in lists:
        v = ndcg_at_k(scores, labels, k)
        if v is None:
            skipped += 1
        else:
            vals.append(v)
    value = float(np.mean(vals)) if vals else None
    return (value, skipped) if return_skipped else value


def ranking_metrics(lists, ks):
    """gAUC@K and nDCG@K for every K, plus the number of lists each skipped."""
    lists = list(lists)
    values, skipped = {}, {}
    for k in ks:
        values[f"gAUC@{k}"], skipped[f"gAUC@{k}"] = gauc_at_k(lists, k, return_skipped=True)
        values[f"nDCG@{k}"], skipped[f"nDCG@{k}"] = mean_ndcg_at_k(lists, k, return_skipped=True)
    return values, skipped


@dataclass
class MetricReport:
    """Metric values per model variant, with skip counts and free-form metadata.

    ``rows`` maps a variant name to ``{metric: value}``.
    """

    rows: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def add(self, variant, values, skipped=None):
        self.rows.setdefault(variant, {}).update(values)
        if skipped:
            self.skipped.setdefault(variant, {}).update(skipped)

    def __getitem__(self, variant):
        return self.rows[variant]

    def to_text(self):
        """Flat ``key = value`` lines, one per metric; sorted metadata first."""
        lines = [f"meta.{k} = {v}" for k, v in sorted(self.meta.items())]
        for variant, values in self.rows.items():
            for name, v in values.items():
                lines.append(f"{variant}.{name} = {_fmt(v)}")
        for variant, counts in self.skipped.items():
            for name, c in counts.items():
                lines.append(f"skipped.{variant}.{name} = {c}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        report = cls()
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition(" = ")
            if key.startswith("meta."):
                report.meta[key[5:]] = value
            elif key.startswith("skipped."):
                variant, name = key[8:].split(".", 1)
                report.skipped.setdefault(variant, {})[name] = int(value)
            else:
                variant, name = key.split(".", 1)
                report.rows.setdefault(variant, {})[name] = None if value == "nan" else float(value)
        return report

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    def format_table(self, precision=4):
        columns = []
        for values in self.rows.values():
            columns.extend(c for c in values if c not in columns)
        header = ["variant"] + columns
        body = [[variant] + ["-" if values.get(c) is None else _fmt(values[c], precision)
                             for c in columns]
                for variant, values in self.rows.items()]
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        lines = ["  ".join(cell.ljust(w) if i == 0 else cell.rjust(w)
                           for i, (cell, w) in enumerate(zip(row, widths)))
                 for row in [header] + body]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)


def _fmt(v, precision=None):
    if v is None:
        return "nan"
    if isinstance(v, (int, np.integer)):
        return str(v)
    return repr(float(v)) if precision is None else f"{v:.{precision}f}"
