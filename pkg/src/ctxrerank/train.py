"""Adam, early stopping, the training loop and evaluation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .embedding import FeatureSchema
from .datasim import initial_rank
from .metrics import GAUC_DEFINITION, MetricReport, gauc_at_k, ranking_metrics
from .model import Batch, ContextualReranker, collate
from .ranker import PointwiseRanker

LR_GRID = (1e-3, 1e-4, 5e-5, 1e-5)
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
EVAL_BATCH = 512


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    dropout_rate: float = 0.1
    patience: int = 2
    alpha: float = 1.0
    embed_dim: int = 8
    embed_init: str = "normal"
    embed_init_scale: float = 1.0
    hidden: int = 32
    d: int = 32
    d_h: int = 32
    num_blocks: int = 1
    heads: int = 1
    n_max: int = 16
    max_epochs: int = 20
    seed: int = 0
    ks: tuple[int, ...] = (5, 10)
    position_embeddings: bool = False
    ranker_hidden: int = 32

    def validate(self):
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("learning_rate, batch_size and max_epochs must be positive")
        if not self.ks or min(self.ks) < 1:
            raise ValueError("ks must list at least one K >= 1")
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")
        if self.num_blocks > 1 and self.d != self.d_h:
            raise ValueError("num_blocks > 1 requires d == d_h")
        if self.d_h % self.heads:
            raise ValueError(f"d_h={self.d_h} is not divisible by heads={self.heads}")
        return self

    @property
    def stop_k(self):
        return max(self.ks)


def paper_scale_config(**overrides) -> TrainConfig:
    """Settings reported for the large-scale experiments (embedding width is not reported)."""
    base = TrainConfig(learning_rate=LR_GRID[0], batch_size=200, dropout_rate=0.1, patience=2,
                       alpha=1.0, hidden=500, d=500, d_h=500, num_blocks=1, heads=1,
                       n_max=128, ks=(20, 30))
    return dataclasses.replace(base, **overrides)


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state: AdamState, lr, betas=ADAM_BETAS, eps=ADAM_EPS):
    """One bias-corrected Adam update, in place on ``params`` (name -> Tensor).

    Missing or ``None`` gradients count as zero.
    """
    b1, b2 = betas
    state.step += 1
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.data.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, parameter {p.data.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


class EarlyStopping:
    """Tracks a higher-is-better metric; stops after ``patience`` epochs without improvement."""

    def __init__(self, patience=2):
        self.patience = patience
        self.best = None
        self.best_epoch = None
        self.counter = 0
        self.epochs = 0

    def update(self, value):
        """Record one evaluation; returns True if it is a new best."""
        self.epochs += 1
        if self.best is None or value > self.best:
            self.best, self.best_epoch, self.counter = value, self.epochs, 0
            return True
        self.counter += 1
        return False

    @property
    def should_stop(self):
        return self.counter >= self.patience


class TrainingError(RuntimeError):
    pass


@dataclass
class FitResult:
    model: object
    log: list
    best_metric: float
    best_epoch: int

    def log_text(self):
        return "\n".join(self.log) + "\n"


def _snapshot(params):
    return {k: p.data.copy() for k, p in params.items()}


def _restore(params, snap):
    for k, p in params.items():
        p.data[...] = snap[k]


def fit(model, train_batch: Batch, validate, config: TrainConfig, alpha=None, seed_offset=0):
    """Mini-batch Adam with early stopping on ``validate(model)`` (higher is better).

    The returned model holds the parameters of the best validation epoch.
    """
    alpha = config.alpha if alpha is None else alpha
    params = model.named_parameters()
    state = AdamState()
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(7, seed_offset)))
    stopper = EarlyStopping(config.patience)
    best = _snapshot(params)
    log = []
    n = len(train_batch)
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        total, batches = 0.0, 0
        for b, start in enumerate(range(0, n, config.batch_size)):
            batch = train_batch.take(perm[start:start + config.batch_size])
            for p in params.values():
                p.zero_grad()
            loss = model.loss(batch, alpha=alpha, training=True, rng=rng,
                              dropout_rate=config.dropout_rate)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            loss.backward()
            adam_step(params, {k: p.grad for k, p in params.items()}, state,
                      config.learning_rate)
            total += value
            batches += 1
        metric = validate(model)
        if stopper.update(metric):
            best = _snapshot(params)
        log.append(f"epoch={epoch} train_loss={total / max(batches, 1):.12f} "
                   f"val_metric={metric:.12f} best_epoch={stopper.best_epoch}")
        if stopper.should_stop:
            break
    _restore(params, best)
    return FitResult(model, log, stopper.best, stopper.best_epoch)


# ---------------------------------------------------------------------------
# scoring and evaluation

def batched_scores(model, batch: Batch, size=EVAL_BATCH):
    parts = [model.score(batch.take(slice(i, i + size))) for i in range(0, len(batch), size)]
    return np.concatenate(parts, axis=0)


def score_lists(scores, batch: Batch):
    """Per-session ``(scores, labels)`` pairs with padding dropped."""
    out = []
    for s, y, mask in zip(scores, batch.labels, batch.candidate_mask):
        out.append((s[mask], y[mask].astype(np.int64)))
    return out


def val_gauc(batch: Batch, k):
    def validate(model):
        value = gauc_at_k(score_lists(batched_scores(model, batch), batch), k)
        return float("-inf") if value is None else value
    return validate


def build_reranker(schema: FeatureSchema, config: TrainConfig, max_candidates=None):
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(5,)))
    return ContextualReranker(schema.with_embed_dim(config.embed_dim), config.hidden, config.d,
                              config.d_h, config.num_blocks, config.heads, rng,
                              config.position_embeddings, max_candidates, config.n_max,
                              config.embed_init_scale, config.embed_init)


def build_ranker(schema: FeatureSchema, config: TrainConfig):
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(6,)))
    return PointwiseRanker(schema.with_embed_dim(config.embed_dim), config.ranker_hidden, rng,
                           config.embed_init_scale, config.embed_init)


def train_ranker(config: TrainConfig, schema, train_records, val_records) -> FitResult:
    """Fit the pointwise initial ranker on per-item clicks."""
    config.validate()
    model = build_ranker(schema, config)
    train_batch = collate(train_records, 0)
    val_batch = collate(val_records, 0)
    return fit(model, train_batch, val_gauc(val_batch, config.stop_k), config, alpha=0.0,
               seed_offset=1)


def train(config: TrainConfig, schema, train_records, val_records) -> FitResult:
    """Fit the re-ranker. Records should already be in initial-ranker order."""
    config.validate()
    train_batch = collate(train_records, config.n_max)
    val_batch = collate(val_records, config.n_max)
    max_m = max(train_batch.candidates.shape[1], val_batch.candidates.shape[1])
    model = build_reranker(schema, config, max_m if config.position_embeddings else None)
    return fit(model, train_batch, val_gauc(val_batch, config.stop_k), config)


def rerank_records(ranker, records):
    return [initial_rank(ranker, r) for r in records]


def ranker_scores(ranker, records):
    """The ranker's scores for each session in stored order."""
    batch = collate(records, 0)
    return score_lists(batched_scores(ranker, batch), batch)


def mean_loss(model, batch: Batch, alpha, size=EVAL_BATCH):
    """Session-weighted mean of the loss and its two parts, dropout off."""
    totals = np.zeros(3)
    for i in range(0, len(batch), size):
        part = batch.take(slice(i, i + size))
        L, L_m, L_aux = model.loss(part, alpha=alpha, return_parts=True)
        totals += len(part) * np.array([float(L.data), float(L_m.data), float(L_aux.data)])
    return totals / len(batch)


def evaluate(model, records, ks, ranker=None, n_max=None, alpha=1.0, label="reranked"):
    """Metric report for ``model`` on ``records``.

    With a ``ranker``, sessions are first put in its order and an ``initial``
    row reports the ranker's own scores; otherwise records are taken as given.
    """
    records = list(records)
    report = MetricReport(meta={"gauc_definition": GAUC_DEFINITION,
                                "sessions": str(len(records))})
    if ranker is not None:
        records = rerank_records(ranker, records)
        values, skipped = ranking_metrics(ranker_scores(ranker, records), ks)
        report.add("initial", values, skipped)
    n = n_max if n_max is not None else getattr(model, "n_max", 0)
    batch = collate(records, n)
    values, skipped = ranking_metrics(score_lists(batched_scores(model, batch), batch), ks)
    if isinstance(model, ContextualReranker):
        L, L_m, L_aux = mean_loss(model, batch, alpha)
        values.update({"loss": L, "loss_item": L_m, "loss_list": L_aux})
    report.add(label, values, skipped)
    return report
