"""Command-line entry point: data generation, training, evaluation, ablation."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from .ablation import DEFAULT_LENGTHS, ablate
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, apply_overrides, format_config, read_config
from .datasim import (SPLITS, SessionFormatError, SynthConfig, generate, load_split,
                      read_schema)
from .train import (TrainConfig, TrainingError, evaluate, paper_scale_config, rerank_records,
                    train, train_ranker)

log = logging.getLogger("ctxrerank")


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _train_config(args) -> TrainConfig:
    base = paper_scale_config() if getattr(args, "paper_scale", False) else TrainConfig()
    if getattr(args, "config", None):
        base = read_config(args.config, TrainConfig, base)
    overrides = {
        "learning_rate": getattr(args, "lr", None),
        "batch_size": getattr(args, "batch_size", None),
        "dropout_rate": getattr(args, "dropout", None),
        "patience": getattr(args, "patience", None),
        "alpha": getattr(args, "alpha", None),
        "n_max": getattr(args, "n_max", None),
        "max_epochs": getattr(args, "max_epochs", None),
        "heads": getattr(args, "heads", None),
        "num_blocks": getattr(args, "blocks", None),
        "seed": getattr(args, "seed", None),
        "ks": _ints(args.k) if getattr(args, "k", None) else None,
    }
    return apply_overrides(base, overrides).validate()


def _load_data(data_dir, splits=SPLITS):
    schema = read_schema(os.path.join(data_dir, f"{splits[0]}.tsv"))
    if schema is None:
        raise ValueError(f"{data_dir}: {splits[0]}.tsv is empty")
    return schema, {s: load_split(data_dir, s) for s in splits}


def _same_fields(a, b):
    key = lambda s: [(f.name, f.cardinality) for f in s.user_fields + s.item_fields]
    return key(a) == key(b)


def cmd_gen_data(args):
    config = read_config(args.config, SynthConfig) if args.config else SynthConfig()
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    paths = generate(config, args.out)
    for split, path in paths.items():
        print(f"{split}: {path}")


def cmd_train_ranker(args):
    config = _train_config(args)
    schema, data = _load_data(args.data, ("train", "val"))
    fit = train_ranker(config, schema, data["train"], data["val"])
    save_checkpoint(args.out, Checkpoint(fit.model.schema, config, ranker=fit.model,
                                         best_metric=fit.best_metric, epoch=fit.best_epoch))
    _write_log(args.out, fit)
    print(f"ranker: best val gAUC@{config.stop_k} = {fit.best_metric:.6f} at epoch {fit.best_epoch}")


def cmd_train(args):
    config = _train_config(args)
    schema, data = _load_data(args.data, ("train", "val"))
    ranker = load_checkpoint(args.ranker).ranker
    if ranker is None:
        raise ValueError(f"{args.ranker} holds no pointwise ranker")
    if not _same_fields(ranker.schema, schema):
        raise ValueError("ranker checkpoint schema does not match the data")
    train_set = rerank_records(ranker, data["train"])
    val_set = rerank_records(ranker, data["val"])
    fit = train(config, schema, train_set, val_set)
    save_checkpoint(args.out, Checkpoint(fit.model.schema, config, reranker=fit.model,
                                         ranker=ranker, best_metric=fit.best_metric,
                                         epoch=fit.best_epoch))
    _write_log(args.out, fit)
    print(f"re-ranker: best val gAUC@{config.stop_k} = {fit.best_metric:.6f} at epoch {fit.best_epoch}")


def _write_log(ckpt_path, fit):
    with open(ckpt_path + ".log", "w", encoding="utf-8") as fh:
        fh.write(fit.log_text())


def cmd_eval(args):
    ckpt = load_checkpoint(args.ckpt)
    if ckpt.reranker is None:
        raise ValueError(f"{args.ckpt} holds no re-ranker")
    schema, data = _load_data(args.data, (args.split,))
    if not _same_fields(ckpt.schema, schema):
        raise ValueError("checkpoint schema does not match the data")
    ks = _ints(args.k)
    report = evaluate(ckpt.reranker, data[args.split], ks, ranker=ckpt.ranker,
                      alpha=ckpt.config.get("alpha", 1.0))
    print(report.format_table())
    if args.out:
        report.save(args.out)


def cmd_ablate(args):
    config = _train_config(args)
    schema, data = _load_data(args.data)
    result = ablate(config, schema, data, seeds=args.seeds, lengths=_ints(args.lengths))
    report = result.report()
    print(report.format_table())
    report.save(args.out)


def build_parser():
    p = argparse.ArgumentParser(prog="ctxrerank", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic click-log dataset")
    g.add_argument("--config", help="synthetic data config (key = value lines)")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_gen_data)

    def training_flags(sp):
        sp.add_argument("--config", help="training config (key = value lines)")
        sp.add_argument("--paper-scale", action="store_true",
                        help="start from the large-scale settings instead of desk-scale defaults")
        sp.add_argument("--lr", type=float)
        sp.add_argument("--batch-size", type=int)
        sp.add_argument("--dropout", type=float)
        sp.add_argument("--patience", type=int)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--n-max", type=int)
        sp.add_argument("--max-epochs", type=int)
        sp.add_argument("--heads", type=int)
        sp.add_argument("--blocks", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--k", help="comma-separated cutoffs, e.g. 5,10")

    r = sub.add_parser("train-ranker", help="fit the pointwise initial ranker")
    r.add_argument("--data", required=True)
    r.add_argument("--out", required=True)
    training_flags(r)
    r.set_defaults(func=cmd_train_ranker)

    t = sub.add_parser("train", help="fit the re-ranker on initial-ranker ordered lists")
    t.add_argument("--data", required=True)
    t.add_argument("--ranker", required=True)
    t.add_argument("--out", required=True)
    training_flags(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="report gAUC@K / nDCG@K on a split")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--k", default="20,30")
    e.add_argument("--split", default="test", choices=SPLITS)
    e.add_argument("--out", help="also write the report as key = value lines")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ablate", help="compare variants over several seeds")
    a.add_argument("--data", required=True)
    a.add_argument("--seeds", type=int, default=5)
    a.add_argument("--out", required=True)
    a.add_argument("--lengths", default=",".join(str(L) for L in DEFAULT_LENGTHS))
    training_flags(a)
    a.set_defaults(func=cmd_ablate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        args.func(args)
    except (ValueError, OSError, KeyError, TrainingError, ConfigError, CheckpointError,
            SessionFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
