"""Multi-field categorical embeddings for users and items."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .tensor import Tensor, as_tensor, concat, parameter, take_rows

PADDING = 0
DEFAULT_EMBED_DIM = 8
# Small (~0.01) tables leave attention logits near zero and training stalls.
EMBED_INIT_SCALE = 1.0


@dataclass(frozen=True)
class Field:
    name: str
    cardinality: int
    embed_dim: int = DEFAULT_EMBED_DIM


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered user and item fields.

    Category indices run from 1 to ``cardinality``; index 0 is reserved for
    padding and out-of-vocabulary values.
    """

    user_fields: tuple[Field, ...]
    item_fields: tuple[Field, ...]

    def __post_init__(self):
        object.__setattr__(self, "user_fields", tuple(self.user_fields))
        object.__setattr__(self, "item_fields", tuple(self.item_fields))
        names = [f.name for f in self.user_fields + self.item_fields]
        if len(set(names)) != len(names):
            raise ValueError(f"field names must be unique, got {names}")
        for f in self.user_fields + self.item_fields:
            if f.cardinality < 1 or f.embed_dim < 1:
                raise ValueError(f"field {f.name!r} needs cardinality and embed_dim >= 1")

    @property
    def user_dim(self):
        return sum(f.embed_dim for f in self.user_fields)

    @property
    def item_dim(self):
        return sum(f.embed_dim for f in self.item_fields)

    def with_embed_dim(self, dim):
        return FeatureSchema(
            tuple(Field(f.name, f.cardinality, dim) for f in self.user_fields),
            tuple(Field(f.name, f.cardinality, dim) for f in self.item_fields),
        )

    def to_dict(self):
        return {
            "user_fields": [[f.name, f.cardinality, f.embed_dim] for f in self.user_fields],
            "item_fields": [[f.name, f.cardinality, f.embed_dim] for f in self.item_fields],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(Field(*f) for f in d["user_fields"]),
                   tuple(Field(*f) for f in d["item_fields"]))


def init_tables(fields: Sequence[Field], rng, scale=EMBED_INIT_SCALE, dist="normal"):
    """One (cardinality+1) x embed_dim table per field with row 0 zeroed.

    ``dist="normal"`` draws N(0, scale^2); ``"uniform"`` draws from [-scale, scale].
    """
    tables = {}
    for f in fields:
        shape = (f.cardinality + 1, f.embed_dim)
        if dist == "normal":
            w = rng.normal(0.0, scale, size=shape)
        elif dist == "uniform":
            w = rng.uniform(-scale, scale, size=shape)
        else:
            raise ValueError(f"unknown init distribution {dist!r}")
        w[PADDING] = 0.0
        tables[f.name] = parameter(w)
    return tables


def check_indices(fields: Sequence[Field], values):
    if isinstance(values, Mapping):
        missing = [f.name for f in fields if f.name not in values]
        if missing:
            raise ValueError(f"missing field values: {missing}")
        values = np.stack([np.asarray(values[f.name]) for f in fields], axis=-1)
    values = np.asarray(values, dtype=np.int64)
    if values.shape[-1:] != (len(fields),):
        raise ValueError(f"expected {len(fields)} field values per record, got shape {values.shape}")
    for j, f in enumerate(fields):
        col = values[..., j]
        if col.size and (col.min() < 0 or col.max() > f.cardinality):
            raise ValueError(f"index out of range for field {f.name!r} (cardinality {f.cardinality})")
    return values


def embed_record(fields: Sequence[Field], tables: Mapping[str, Tensor], values) -> Tensor:
    """Concatenate the embedding rows selected by ``values`` in field order.

    ``values`` has one index per field in its last axis; any leading axes
    (batch, list position) are carried through.
    """
    values = check_indices(fields, values)
    parts = [take_rows(as_tensor(tables[f.name]), values[..., j]) for j, f in enumerate(fields)]
    return concat(parts, axis=-1) if len(parts) > 1 else parts[0]
