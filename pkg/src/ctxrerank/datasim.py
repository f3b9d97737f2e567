"""Synthetic click logs with planted history and in-list effects.

Each item gets a category and a latent quality. A user's sessions are
simulated in order; the clicked items of earlier sessions form the history
of later ones. The click logit of candidate ``j`` in a displayed list is::

    base_logit + quality[j]
      + theta_hist * [category[j] == modal category of the recent history]
      - theta_div  * (# earlier candidates in the list with category[j])

Every user draws from its own random stream derived from ``(seed, user_id)``,
so output depends only on the configuration.

Session files are UTF-8 text, one session per line after a mandatory header::

    #sessions<TAB>version=1<TAB>user=<name>:<card>,...<TAB>item=<name>:<card>,...
    user_id<TAB>u1,u2<TAB>h1a,h1b;h2a,h2b<TAB>c1a,c1b:1;c2a,c2b:0

Field values are category indices (0 is padding/OOV). History is oldest first.
"""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterator, Sequence

import numpy as np

from .config import format_config, read_config
from .embedding import FeatureSchema, Field

FORMAT_VERSION = 1
SPLITS = ("train", "val", "test")
USER_FIELDS = (("age_bucket", 6), ("region", 10))


@dataclass
class SynthConfig:
    num_users: int = 2000
    num_items: int = 500
    num_categories: int = 8
    m: int = 10
    n_max: int = 16
    sessions_per_user: int = 10
    warmup_sessions: int = 6
    modal_window: int = 16
    theta_hist: float = 2.0
    theta_div: float = 1.0
    base_logit: float = -2.0
    seed: int = 0
    train_frac: float = 0.8
    val_frac: float = 0.1
    test_frac: float = 0.1

    def validate(self):
        for name in ("num_users", "num_items", "num_categories", "m", "n_max",
                     "sessions_per_user", "modal_window"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.warmup_sessions < 0:
            raise ValueError("warmup_sessions must be nonnegative")
        if self.m > self.num_items:
            raise ValueError(f"cannot show m={self.m} distinct items out of {self.num_items}")
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if min(fracs) < 0 or abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be nonnegative and sum to 1, got {fracs}")
        sizes = split_sizes(self.num_users, fracs)
        if any(f > 0 and s == 0 for f, s in zip(fracs, sizes)):
            raise ValueError(f"{self.num_users} users cannot fill splits {fracs}")
        return self

    def to_text(self):
        return format_config(self)


def split_sizes(num_users, fracs):
    n_train = int(round(fracs[0] * num_users))
    n_val = int(round(fracs[1] * num_users))
    n_val = min(n_val, num_users - n_train)
    return n_train, n_val, num_users - n_train - n_val


@dataclass(frozen=True)
class SessionRecord:
    user_id: int
    user_fields: tuple
    history: tuple      # tuple of item-field tuples, oldest first
    candidates: tuple   # tuple of item-field tuples, display order
    labels: tuple

    def __post_init__(self):
        if len(self.candidates) < 1:
            raise ValueError("a session needs at least one candidate")
        if len(self.labels) != len(self.candidates):
            raise ValueError("labels and candidates differ in length")
        if any(y not in (0, 1) for y in self.labels):
            raise ValueError("labels must be 0 or 1")

    @property
    def m(self):
        return len(self.candidates)

    @property
    def n(self):
        return len(self.history)

    def item_ids(self):
        return np.array([c[0] for c in self.candidates], dtype=np.int64)


@dataclass
class Catalog:
    category: np.ndarray  # 0-based category per item
    quality: np.ndarray


def feature_schema(config: SynthConfig, embed_dim=8) -> FeatureSchema:
    return FeatureSchema(
        tuple(Field(name, card, embed_dim) for name, card in USER_FIELDS),
        (Field("item_id", config.num_items, embed_dim),
         Field("category", config.num_categories, embed_dim)),
    )


def _stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def make_catalog(config: SynthConfig) -> Catalog:
    rng = _stream(config.seed, 0)
    category = rng.permutation(np.arange(config.num_items) % config.num_categories)
    quality = rng.normal(0.0, 1.0, size=config.num_items)
    return Catalog(category, quality)


def modal_category(history_categories: Sequence[int], window: int):
    """Most frequent category among the last ``window`` entries; ties go to the most recent.

    Returns ``None`` for an empty history.
    """
    recent = list(history_categories)[-window:] if window > 0 else []
    if not recent:
        return None
    counts = Counter(recent)
    top = max(counts.values())
    for c in reversed(recent):
        if counts[c] == top:
            return c


def planted_logits(config: SynthConfig, catalog: Catalog, history_items, displayed_items):
    """Click logits of the displayed items given the clicked history (item ids, 0-based)."""
    modal = modal_category(catalog.category[list(history_items)], config.modal_window)
    seen = Counter()
    out = np.empty(len(displayed_items))
    for j, item in enumerate(displayed_items):
        cat = catalog.category[item]
        out[j] = (config.base_logit + catalog.quality[item]
                  + config.theta_hist * (cat == modal)
                  - config.theta_div * seen[cat])
        seen[cat] += 1
    return out


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x)))


def _item_fields(catalog, item):
    return (int(item) + 1, int(catalog.category[item]) + 1)


def simulate_user(config: SynthConfig, catalog: Catalog, user_id: int):
    """Simulate one user; returns ``[(SessionRecord, click_probs), ...]`` after warm-up."""
    rng = _stream(config.seed, 1, user_id)
    user_fields = tuple(int(rng.integers(1, card + 1)) for _, card in USER_FIELDS)
    clicked: list[int] = []
    out = []
    for s in range(config.warmup_sessions + config.sessions_per_user):
        shown = rng.choice(config.num_items, size=config.m, replace=False)
        probs = _sigmoid(planted_logits(config, catalog, clicked, shown))
        labels = rng.random(config.m) < probs
        if s >= config.warmup_sessions:
            history = clicked[-config.n_max:] if config.n_max else []
            record = SessionRecord(
                user_id, user_fields,
                tuple(_item_fields(catalog, i) for i in history),
                tuple(_item_fields(catalog, i) for i in shown),
                tuple(int(y) for y in labels))
            out.append((record, probs))
        clicked.extend(int(i) for i in shown[labels])
    return out


def simulate(config: SynthConfig):
    """All splits as ``{split: [(SessionRecord, click_probs), ...]}``."""
    config.validate()
    catalog = make_catalog(config)
    order = _stream(config.seed, 2).permutation(config.num_users)
    n_train, n_val, _ = split_sizes(config.num_users,
                                    (config.train_frac, config.val_frac, config.test_frac))
    groups = {"train": order[:n_train], "val": order[n_train:n_train + n_val],
              "test": order[n_train + n_val:]}
    return {split: [item for uid in sorted(users.tolist())
                    for item in simulate_user(config, catalog, uid)]
            for split, users in groups.items()}


def generate(config: SynthConfig, out_dir, embed_dim=8):
    """Write ``train.tsv``, ``val.tsv``, ``test.tsv`` and ``synth.cfg`` under ``out_dir``."""
    data = simulate(config)
    schema = feature_schema(config, embed_dim)
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for split in SPLITS:
        paths[split] = os.path.join(out_dir, f"{split}.tsv")
        write_sessions(paths[split], schema, [r for r, _ in data[split]])
    with open(os.path.join(out_dir, "synth.cfg"), "w", encoding="utf-8") as fh:
        fh.write(config.to_text())
    return paths


# ---------------------------------------------------------------------------
# session files

class SessionFormatError(ValueError):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _fields_text(fs):
    return ",".join(f"{f.name}:{f.cardinality}" for f in fs)


def format_header(schema: FeatureSchema):
    return (f"#sessions\tversion={FORMAT_VERSION}\tuser={_fields_text(schema.user_fields)}"
            f"\titem={_fields_text(schema.item_fields)}")


def _csv(values):
    return ",".join(str(v) for v in values)


def format_record(r: SessionRecord):
    history = ";".join(_csv(h) for h in r.history)
    cands = ";".join(f"{_csv(c)}:{y}" for c, y in zip(r.candidates, r.labels))
    return f"{r.user_id}\t{_csv(r.user_fields)}\t{history}\t{cands}"


def write_sessions(path, schema: FeatureSchema, records):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_header(schema) + "\n")
        for r in records:
            fh.write(format_record(r) + "\n")


def _parse_fields(spec, embed_dim):
    out = []
    for part in spec.split(","):
        name, _, card = part.partition(":")
        out.append(Field(name, int(card), embed_dim))
    return tuple(out)


def parse_header(line, embed_dim=8) -> FeatureSchema:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 4 or parts[0] != "#sessions":
        raise SessionFormatError(1, "missing '#sessions' header")
    keyed = dict(p.split("=", 1) for p in parts[1:])
    if keyed.get("version") != str(FORMAT_VERSION):
        raise SessionFormatError(1, f"unsupported format version {keyed.get('version')!r}")
    try:
        return FeatureSchema(_parse_fields(keyed["user"], embed_dim),
                             _parse_fields(keyed["item"], embed_dim))
    except (KeyError, ValueError) as exc:
        raise SessionFormatError(1, f"bad header: {exc}") from None


def read_schema(path, embed_dim=8):
    """The schema in a session file's header, or ``None`` for an empty file."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    return parse_header(first, embed_dim) if first else None


def _ints(text, expected, cards):
    vals = tuple(int(v) for v in text.split(","))
    if len(vals) != expected:
        raise ValueError(f"expected {expected} field values, got {len(vals)}")
    for v, card in zip(vals, cards):
        if not 0 <= v <= card:
            raise ValueError(f"index {v} outside [0, {card}]")
    return vals


def parse_record(line, schema: FeatureSchema) -> SessionRecord:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 4:
        raise ValueError(f"expected 4 tab-separated columns, got {len(parts)}")
    ucards = [f.cardinality for f in schema.user_fields]
    icards = [f.cardinality for f in schema.item_fields]
    user_fields = _ints(parts[1], len(ucards), ucards)
    history = tuple(_ints(g, len(icards), icards) for g in parts[2].split(";")) if parts[2] else ()
    cands, labels = [], []
    for group in parts[3].split(";"):
        values, sep, label = group.rpartition(":")
        if not sep or label not in ("0", "1"):
            raise ValueError(f"candidate {group!r} lacks a 0/1 label")
        cands.append(_ints(values, len(icards), icards))
        labels.append(int(label))
    return SessionRecord(int(parts[0]), user_fields, history, tuple(cands), tuple(labels))


def load_sessions(path, embed_dim=8) -> Iterator[SessionRecord]:
    """Stream the records of a session file, validating them against its header."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            return
        schema = parse_header(first, embed_dim)
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                yield parse_record(line, schema)
            except ValueError as exc:
                raise SessionFormatError(line_no, str(exc)) from None


def load_split(data_dir, split):
    return list(load_sessions(os.path.join(data_dir, f"{split}.tsv")))


def read_synth_config(path) -> SynthConfig:
    return read_config(path, SynthConfig)


# ---------------------------------------------------------------------------
# initial ranking and planted-model oracles

def initial_rank(scorer: Callable[[SessionRecord], np.ndarray], record: SessionRecord) -> SessionRecord:
    """Reorder candidates by descending ``scorer(record)``, ties by ascending item id."""
    scores = np.asarray(scorer(record), dtype=np.float64)
    if scores.shape != (record.m,):
        raise ValueError(f"scorer returned shape {scores.shape} for {record.m} candidates")
    order = np.lexsort((record.item_ids(), -scores))
    return SessionRecord(record.user_id, record.user_fields, record.history,
                         tuple(record.candidates[i] for i in order),
                         tuple(record.labels[i] for i in order))


def expected_ndcg(probs, order, k):
    """Exact E[nDCG@k | at least one click] for independent Bernoulli clicks.

    ``probs`` are per-candidate click probabilities and ``order`` the display
    order (indices into ``probs``). Enumerates all 2^m label vectors.
    """
    probs = np.asarray(probs, dtype=np.float64)
    m = len(probs)
    labels = np.array(list(product((0, 1), repeat=m)), dtype=np.float64)[1:]
    weight = np.prod(np.where(labels == 1, probs, 1.0 - probs), axis=1)
    cut = min(k, m)
    disc = 1.0 / np.log2(np.arange(2, cut + 2))
    dcg = labels[:, np.asarray(order)][:, :cut] @ disc
    clicks = np.minimum(labels.sum(axis=1).astype(int), cut)
    ideal = np.cumsum(disc)[clicks - 1]
    return float((weight * dcg / ideal).sum() / weight.sum())
