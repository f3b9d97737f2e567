"""Per-seed training runs shared by the acceptance checks.

Each seed draws its own planted dataset and trains, on that data and with
that seed: the pointwise ranker, the full re-ranker, the ``alpha = 0``
re-ranker and the history-length sweep. A second, context-free dataset
(both planted effects off) gets its own ranker and full re-ranker.
"""

import dataclasses
import json
import sys
import time

from ctxrerank.ablation import run_variants
from ctxrerank.datasim import SynthConfig, feature_schema, simulate
from ctxrerank.train import TrainConfig

SEEDS = (0, 1, 2, 3, 4)
LENGTHS = (2, 4, 8, 16)


def splits_for(config):
    return {k: [r for r, _ in v] for k, v in simulate(config).items()}


def run_seed(seed, train_config=None, synth=None):
    train_config = dataclasses.replace(train_config or TrainConfig(), seed=seed)
    synth = dataclasses.replace(synth or SynthConfig(), seed=seed)
    schema = feature_schema(synth)
    t0 = time.time()
    planted = run_variants(train_config, schema, splits_for(synth),
                           variants=("pointwise", "full", "no-aux"), lengths=LENGTHS)
    null_synth = dataclasses.replace(synth, theta_hist=0.0, theta_div=0.0)
    null = run_variants(train_config, schema, splits_for(null_synth),
                        variants=("pointwise", "full"))
    return {"seed": seed, "planted": planted, "null": null, "seconds": time.time() - t0}


if __name__ == "__main__":
    out = sys.argv[1]
    seeds = [int(s) for s in sys.argv[2:]] or SEEDS
    results = []
    for s in seeds:
        results.append(run_seed(s))
        with open(out, "w") as fh:
            json.dump(results, fh, indent=1)
        print(f"seed {s} done in {results[-1]['seconds']:.0f}s", flush=True)
