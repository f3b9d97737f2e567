import dataclasses

import numpy as np
import pytest

from ctxrerank.metrics import ranking_metrics
from ctxrerank.tensor import parameter
from ctxrerank.train import (LR_GRID, AdamState, EarlyStopping, TrainConfig, TrainingError,
                             adam_step, evaluate, fit, paper_scale_config, ranker_scores,
                             rerank_records, train, train_ranker)


def test_adam_zero_gradient_keeps_params():
    p = {"w": parameter([1.0, -2.0])}
    adam_step(p, {"w": np.zeros(2)}, AdamState(), 1e-3)
    np.testing.assert_array_equal(p["w"].data, [1.0, -2.0])


@pytest.mark.parametrize("g", [1e-4, 0.3, -7.0])
def test_adam_first_step_is_lr(g):
    p = {"w": parameter([0.5])}
    adam_step(p, {"w": np.array([g])}, AdamState(), 1e-3)
    # bias correction makes the first step lr * g / (|g| + eps)
    expected = 0.5 - 1e-3 * g / (abs(g) + 1e-8)
    assert abs(p["w"].data[0] - expected) < 1e-15
    assert abs(abs(p["w"].data[0] - 0.5) - 1e-3) < 1e-6


def test_adam_against_reference_loop():
    rng = np.random.default_rng(0)
    grads = rng.normal(size=(5, 3))
    p = {"w": parameter(np.zeros(3))}
    state = AdamState()
    m = v = np.zeros(3)
    w = np.zeros(3)
    for t, g in enumerate(grads, start=1):
        adam_step(p, {"w": g}, state, 0.01)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        w = w - 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    np.testing.assert_allclose(p["w"].data, w, atol=1e-15)


def test_adam_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        adam_step({"w": parameter([1.0])}, {"w": np.zeros(2)}, AdamState(), 1e-3)


def test_early_stopping_frozen_metric():
    for patience in (1, 2, 4):
        s = EarlyStopping(patience)
        evals = 0
        while not s.should_stop:
            s.update(0.7)
            evals += 1
        assert evals == patience + 1 and s.best_epoch == 1


def test_early_stopping_tracks_best():
    s = EarlyStopping(2)
    for v in (0.5, 0.6, 0.55, 0.61, 0.6, 0.6):
        s.update(v)
    assert s.best == 0.61 and s.best_epoch == 4 and s.should_stop


class Toy:
    """One parameter; validation metric is a scripted sequence."""

    def __init__(self):
        self.w = parameter([0.0])

    def named_parameters(self):
        return {"w": self.w}

    def loss(self, batch, alpha, training, rng, dropout_rate):
        from ctxrerank.tensor import mul, sum_
        return sum_(mul(self.w, 1.0))


class Rows:
    def __init__(self, n):
        self.n = n

    def __len__(self):
        return self.n

    def take(self, idx):
        return self


def scripted(values):
    it = iter(values)
    return lambda model: next(it)


def test_fit_runs_to_max_epochs_when_improving():
    cfg = TrainConfig(max_epochs=5, batch_size=2)
    res = fit(Toy(), Rows(4), scripted([0.1, 0.2, 0.3, 0.4, 0.5]), cfg)
    assert len(res.log) == 5 and res.best_epoch == 5


def test_fit_frozen_metric_stops_after_patience_plus_one():
    cfg = TrainConfig(max_epochs=20, patience=2)
    res = fit(Toy(), Rows(4), scripted([0.3] * 20), cfg)
    assert len(res.log) == 3 and res.best_epoch == 1


def test_fit_restores_best_epoch():
    cfg = TrainConfig(max_epochs=6, patience=2, batch_size=4, learning_rate=0.1)
    snapshots = []

    def validate(model):
        snapshots.append(model.w.data[0])
        return [0.1, 0.9, 0.2, 0.3][len(snapshots) - 1]
    res = fit(Toy(), Rows(4), validate, cfg)
    assert res.best_epoch == 2
    assert res.model.w.data[0] == snapshots[1]


def test_fit_aborts_on_non_finite_loss():
    class Bad(Toy):
        def loss(self, *a, **k):
            from ctxrerank.tensor import log, sum_
            return sum_(log(self.w * 0.0 - 1.0))
    with np.errstate(invalid="ignore"), pytest.raises(TrainingError, match="batch 0"):
        fit(Bad(), Rows(4), scripted([0.1]), TrainConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(patience=0).validate()
    with pytest.raises(ValueError):
        TrainConfig(d_h=6, heads=4).validate()
    with pytest.raises(ValueError):
        TrainConfig(num_blocks=2, d=8, d_h=4).validate()
    assert TrainConfig().learning_rate in LR_GRID
    assert TrainConfig(ks=(20, 30)).stop_k == 30


def test_paper_scale_presets():
    c = paper_scale_config()
    assert (c.hidden, c.d, c.d_h, c.n_max, c.dropout_rate, c.patience) == (500, 500, 500, 128, 0.1, 2)
    assert c.ks == (20, 30) and c.num_blocks == 1 and c.alpha == 1.0
    assert paper_scale_config(heads=2).heads == 2


def test_training_is_deterministic(tiny_data, tiny_config):
    schema, data = tiny_data
    ranker = train_ranker(tiny_config, schema, data["train"], data["val"]).model
    tr, va = rerank_records(ranker, data["train"]), rerank_records(ranker, data["val"])
    a = train(tiny_config, schema, tr, va)
    b = train(tiny_config, schema, tr, va)
    assert a.log_text() == b.log_text()
    c = train(dataclasses.replace(tiny_config, seed=1), schema, tr, va)
    assert c.log_text() != a.log_text()


def test_evaluate_initial_row_is_ranker_self_consistent(tiny_data, tiny_config):
    schema, data = tiny_data
    ranker = train_ranker(tiny_config, schema, data["train"], data["val"]).model
    model = train(tiny_config, schema, rerank_records(ranker, data["train"]),
                  rerank_records(ranker, data["val"])).model
    rep = evaluate(model, data["test"], (3, 5), ranker=ranker)
    own, _ = ranking_metrics(ranker_scores(ranker, rerank_records(ranker, data["test"])), (3, 5))
    assert all(rep["initial"][k] == v for k, v in own.items())
    assert {"loss", "loss_item", "loss_list"} <= set(rep["reranked"])
    # K at or beyond the list length gives the untruncated value
    big = evaluate(model, data["test"], (5, 50), ranker=ranker)
    assert big["reranked"]["gAUC@5"] == big["reranked"]["gAUC@50"]
    assert big["reranked"]["nDCG@5"] == big["reranked"]["nDCG@50"]
    for v in rep["reranked"].values():
        assert v >= 0


def test_random_scores_null(tiny_data):
    _, data = tiny_data
    from ctxrerank.metrics import gauc_at_k
    vals = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        vals.append(gauc_at_k([(rng.normal(size=r.m), r.labels) for r in data["test"]], 5))
    assert abs(np.mean(vals) - 0.5) < 3 * np.std(vals) / np.sqrt(len(vals)) + 0.01
