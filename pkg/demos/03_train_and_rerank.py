"""
Train a ranker, then re-rank its lists
======================================

The full pipeline on a reduced planted dataset: fit the pointwise initial
ranker, put every session in its order, fit the contextual re-ranker on
those lists, compare the two on held-out sessions, and check that a saved
checkpoint evaluates identically. Takes about a minute on one core.
"""

import os
import tempfile

from ctxrerank.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from ctxrerank.datasim import SynthConfig, feature_schema, simulate
from ctxrerank.train import TrainConfig, evaluate, rerank_records, train, train_ranker

synth = SynthConfig(num_users=800)
schema = feature_schema(synth)
data = {k: [r for r, _ in v] for k, v in simulate(synth).items()}

config = TrainConfig(max_epochs=10)
ranker = train_ranker(config, schema, data["train"], data["val"])
print(f"ranker: best val gAUC@{config.stop_k} {ranker.best_metric:.4f} (epoch {ranker.best_epoch})")

fit = train(config, schema, rerank_records(ranker.model, data["train"]),
            rerank_records(ranker.model, data["val"]))
print("\n".join(fit.log))

report = evaluate(fit.model, data["test"], config.ks, ranker=ranker.model)
print(report.format_table())

path = os.path.join(tempfile.mkdtemp(), "reranker.ckpt")
save_checkpoint(path, Checkpoint(fit.model.schema, config, fit.model, ranker.model,
                                 fit.best_metric, fit.best_epoch))
again = load_checkpoint(path)
same = evaluate(again.reranker, data["test"], config.ks, ranker=again.ranker)
print("checkpoint evaluates identically:", same.to_text() == report.to_text())
