"""Train model variants side by side and tabulate their test metrics.

Variants:

* ``pointwise`` - the initial ranker's own order
* ``full`` - the re-ranker with the configured settings
* ``no-aux`` - the re-ranker trained with ``alpha = 0``
* ``no-history`` - the re-ranker fed an empty history
* ``hist=L`` - the re-ranker fed only the last ``L`` history items

Every variant of one seed shares the same data, ranker and seed.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from .metrics import GAUC_DEFINITION, MetricReport, ranking_metrics
from .train import (TrainConfig, evaluate, ranker_scores, rerank_records, train,
                    train_ranker)

log = logging.getLogger(__name__)

DEFAULT_VARIANTS = ("pointwise", "full", "no-aux", "no-history")
DEFAULT_LENGTHS = (2, 4, 8, 16)


def variant_config(config: TrainConfig, variant: str) -> TrainConfig:
    if variant == "full":
        return config
    if variant == "no-aux":
        return dataclasses.replace(config, alpha=0.0)
    if variant == "no-history":
        return dataclasses.replace(config, n_max=0)
    if variant.startswith("hist="):
        return dataclasses.replace(config, n_max=int(variant[5:]))
    raise ValueError(f"unknown variant {variant!r}")


@dataclass
class AblationResult:
    """Per-seed metrics ``{variant: [metrics per seed]}`` and the summary report."""

    per_seed: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)

    def values(self, variant, metric):
        return np.array([m[metric] for m in self.per_seed[variant]], dtype=np.float64)

    def report(self, ks=None):
        rep = MetricReport(meta={"seeds": ",".join(str(s) for s in self.seeds),
                                 "gauc_definition": GAUC_DEFINITION})
        for variant, runs in self.per_seed.items():
            row = {}
            for metric in runs[0]:
                vals = np.array([r[metric] for r in runs], dtype=np.float64)
                row[metric] = float(vals.mean())
                if len(vals) > 1:
                    row[f"{metric}_std"] = float(vals.std(ddof=1))
            rep.add(variant, row)
        return rep


def run_variants(config: TrainConfig, schema, splits, variants=DEFAULT_VARIANTS,
                 lengths=(), ranker=None):
    """Train and evaluate every variant once; returns ``{variant: metrics}``.

    ``splits`` maps ``train``/``val``/``test`` to raw session lists. A trained
    ``ranker`` may be passed in; otherwise one is fit with ``config.seed``.
    """
    if ranker is None:
        ranker = train_ranker(config, schema, splits["train"], splits["val"]).model
    ranked = {k: rerank_records(ranker, v) for k, v in splits.items()}
    out = {}
    wanted = list(variants) + [f"hist={L}" for L in lengths]
    trained = {}
    for variant in wanted:
        if variant == "pointwise":
            values, _ = ranking_metrics(ranker_scores(ranker, ranked["test"]), config.ks)
            out[variant] = values
            continue
        cfg = variant_config(config, variant)
        key = (cfg.alpha, cfg.n_max)
        if key not in trained:
            log.info("seed %d: training %s", config.seed, variant)
            fit = train(cfg, schema, ranked["train"], ranked["val"])
            trained[key] = evaluate(fit.model, ranked["test"], cfg.ks, n_max=cfg.n_max,
                                    alpha=cfg.alpha)["reranked"]
        out[variant] = dict(trained[key])
    return out


def ablate(config: TrainConfig, schema, splits, seeds=5, variants=DEFAULT_VARIANTS,
           lengths=DEFAULT_LENGTHS) -> AblationResult:
    """Run :func:`run_variants` for several training seeds on fixed data.

    ``seeds`` is a count (seeds ``config.seed .. config.seed + seeds - 1``) or
    an explicit list. History lengths above ``config.n_max`` are dropped.
    """
    seed_list = list(range(config.seed, config.seed + seeds)) if isinstance(seeds, int) else list(seeds)
    lengths = [L for L in lengths if L <= config.n_max]
    result = AblationResult(seeds=seed_list)
    for s in seed_list:
        per = run_variants(dataclasses.replace(config, seed=s), schema, splits, variants, lengths)
        for variant, values in per.items():
            result.per_seed.setdefault(variant, []).append(values)
    return result
