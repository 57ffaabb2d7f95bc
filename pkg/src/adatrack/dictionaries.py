"""Attribute dictionaries and adaptive layer selection.

Each supported CNN backbone has two score tables (precision and success):
11 challenge-attribute rows by N layer-configuration columns. Given a binary
attribute vector for a video, the selector averages the two tables' rows
picked by the vector and returns the configuration with the highest score.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

# Canonical challenge attributes, fixed row order of every dictionary table.
ATTRIBUTES = ("SV", "DEF", "OPR", "IPR", "FM", "MB", "LR", "OV", "BC", "OCC", "IV")
NUM_ATTRIBUTES = len(ATTRIBUTES)

METRICS = ("precision", "success")

# Backbone catalog: per test output, (channel depth, native (H, W) for a
# 224x224 input).
MODEL_CATALOG = {
    "vggm": {
        "D1": (96, (109, 109)),
        "D2": (256, (26, 26)),
        "D3": (512, (13, 13)),
    },
    "vgg16": {
        "D1": (64, (224, 224)),
        "D2": (128, (112, 112)),
        "D3": (256, (56, 56)),
        "D4": (512, (28, 28)),
        "D5": (512, (14, 14)),
    },
    "googlenet": {
        "D1": (64, (112, 112)),
        "D2": (192, (56, 56)),
        "D3": (256, (28, 28)),
        "D4": (528, (14, 14)),
        "D5": (832, (7, 7)),
    },
    "resnet50": {
        "D1": (64, (112, 112)),
        "D2": (256, (56, 56)),
        "D3": (512, (28, 28)),
        "D4": (1024, (14, 14)),
        "D5": (2048, (7, 7)),
    },
}

MODELS = tuple(MODEL_CATALOG)

MODEL_DISPLAY = {
    "vggm": "VGG-M",
    "vgg16": "VGG-16",
    "googlenet": "GoogLeNet",
    "resnet50": "ResNet-50",
}


class DictionaryError(Exception):
    """Invalid dictionary data or query."""


class DictionaryLoadError(DictionaryError):
    """A dictionary data file is missing or malformed."""


class UnknownModelError(DictionaryError):
    """Model id not present in the catalog."""


def _check_model(model: str) -> str:
    if model not in MODEL_CATALOG:
        raise UnknownModelError(
            f"unknown model {model!r}; expected one of {', '.join(MODELS)}"
        )
    return model


@dataclass(frozen=True)
class AttributeVector:
    """Binary flags over the 11 canonical challenge attributes."""

    flags: tuple

    def __post_init__(self):
        if len(self.flags) != NUM_ATTRIBUTES:
            raise ValueError(f"attribute vector needs {NUM_ATTRIBUTES} flags")
        if any(f not in (0, 1) for f in self.flags):
            raise ValueError("attribute flags must be 0 or 1")

    @classmethod
    def from_names(cls, names) -> "AttributeVector":
        """Build from attribute tags, e.g. ['OCC', 'SV'] or 'OCC,SV'."""
        if isinstance(names, str):
            names = [n.strip() for n in names.split(",") if n.strip()]
        unknown = [n for n in names if n not in ATTRIBUTES]
        if unknown:
            raise ValueError(f"unknown attribute tags {unknown}; valid: {ATTRIBUTES}")
        chosen = set(names)
        return cls(tuple(int(a in chosen) for a in ATTRIBUTES))

    @classmethod
    def zeros(cls) -> "AttributeVector":
        return cls((0,) * NUM_ATTRIBUTES)

    @classmethod
    def ones(cls) -> "AttributeVector":
        return cls((1,) * NUM_ATTRIBUTES)

    @property
    def names(self) -> tuple:
        return tuple(a for a, f in zip(ATTRIBUTES, self.flags) if f)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.flags, dtype=float)


@dataclass(frozen=True)
class LayerConfig:
    """An ordered subset of a backbone's test outputs D1..D5."""

    model: str
    layers: tuple

    def __post_init__(self):
        _check_model(self.model)
        catalog = MODEL_CATALOG[self.model]
        if not self.layers:
            raise ValueError("layer configuration must not be empty")
        for layer in self.layers:
            if layer not in catalog:
                raise ValueError(f"layer {layer!r} not in {self.model} catalog")
        indices = [int(layer[1]) for layer in self.layers]
        if indices != sorted(set(indices)):
            raise ValueError(f"layers must be strictly increasing: {self.layers}")

    @classmethod
    def from_label(cls, model: str, label: str) -> "LayerConfig":
        """Parse a table column label such as 'D1, D3'."""
        return cls(model, tuple(part.strip() for part in label.split(",")))

    @property
    def label(self) -> str:
        return ", ".join(self.layers)

    @property
    def depths(self) -> tuple:
        return tuple(MODEL_CATALOG[self.model][layer][0] for layer in self.layers)

    @property
    def resolutions(self) -> tuple:
        return tuple(MODEL_CATALOG[self.model][layer][1] for layer in self.layers)

    @property
    def channel_count(self) -> int:
        return channel_count(self)


def channel_count(config: LayerConfig) -> int:
    """Total feature channels of a configuration: sum of catalog depths."""
    catalog = MODEL_CATALOG[_check_model(config.model)]
    for layer in config.layers:
        if layer not in catalog:
            raise DictionaryError(f"layer {layer!r} not in {config.model} catalog")
    return sum(catalog[layer][0] for layer in config.layers)


@dataclass(frozen=True)
class DictionaryTable:
    """One model's score matrix for one metric: 11 rows x N configs."""

    model: str
    metric: str
    config_labels: tuple
    matrix: np.ndarray  # shape (11, N), values in [0, 1]

    def validate(self) -> "DictionaryTable":
        _check_model(self.model)
        if self.metric not in METRICS:
            raise DictionaryLoadError(f"{self.model}: bad metric {self.metric!r}")
        rows, cols = self.matrix.shape
        if rows != NUM_ATTRIBUTES:
            raise DictionaryLoadError(
                f"{self.model}/{self.metric}: {rows} rows, expected {NUM_ATTRIBUTES}"
            )
        if cols != len(self.config_labels):
            raise DictionaryLoadError(
                f"{self.model}/{self.metric}: {cols} columns for "
                f"{len(self.config_labels)} labels"
            )
        bad = np.argwhere((self.matrix < 0.0) | (self.matrix > 1.0))
        if bad.size:
            r, c = bad[0]
            raise DictionaryLoadError(
                f"{self.model}/{self.metric}: value {self.matrix[r, c]} outside "
                f"[0, 1] at row {ATTRIBUTES[r]}, column {self.config_labels[c]!r}"
            )
        for label in self.config_labels:
            LayerConfig.from_label(self.model, label)
        return self

    def value(self, attribute: str, config_label: str) -> float:
        return float(
            self.matrix[ATTRIBUTES.index(attribute), self.config_labels.index(config_label)]
        )


class DictionaryCatalog:
    """Immutable collection of all loaded tables, keyed by (model, metric)."""

    def __init__(self, tables):
        self._tables = dict(tables)
        for model in MODELS:
            pair = [self._tables.get((model, m)) for m in METRICS]
            if any(t is None for t in pair):
                raise DictionaryLoadError(f"missing table(s) for model {model!r}")
            if pair[0].config_labels != pair[1].config_labels:
                raise DictionaryLoadError(
                    f"{model}: precision/success tables disagree on config order"
                )

    def table(self, model: str, metric: str) -> DictionaryTable:
        _check_model(model)
        return self._tables[(model, metric)]

    def config_labels(self, model: str) -> tuple:
        return self.table(model, "success").config_labels

    def configs(self, model: str) -> tuple:
        return tuple(
            LayerConfig.from_label(model, label) for label in self.config_labels(model)
        )

    def items(self):
        return self._tables.items()


def _default_data_path() -> Path:
    return Path(str(resources.files("adatrack").joinpath("data")))


def _load_table(path: Path, model: str, metric: str) -> DictionaryTable:
    if not path.is_file():
        raise DictionaryLoadError(f"dictionary file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) != 1 + NUM_ATTRIBUTES:
        raise DictionaryLoadError(
            f"{path.name}: {len(rows)} lines, expected {1 + NUM_ATTRIBUTES}"
        )
    labels = tuple(rows[0])
    matrix = np.empty((NUM_ATTRIBUTES, len(labels)))
    for r, row in enumerate(rows[1:]):
        if len(row) != len(labels):
            raise DictionaryLoadError(
                f"{path.name}: row {ATTRIBUTES[r]} has {len(row)} cells, "
                f"expected {len(labels)}"
            )
        for c, cell in enumerate(row):
            try:
                matrix[r, c] = float(cell)
            except ValueError:
                raise DictionaryLoadError(
                    f"{path.name}: non-numeric cell {cell!r} at row {ATTRIBUTES[r]},"
                    f" column {labels[c]!r}"
                ) from None
    return DictionaryTable(model, metric, labels, matrix).validate()


def load_dictionaries(data_path=None) -> DictionaryCatalog:
    """Load all 8 tables (4 models x 2 metrics) from CSV data files.

    Each file holds one header line of quoted config labels followed by the
    11 attribute rows in canonical order.
    """
    base = Path(data_path) if data_path is not None else _default_data_path()
    tables = {}
    for model in MODELS:
        for metric in METRICS:
            path = base / f"{model}_{metric}.csv"
            tables[(model, metric)] = _load_table(path, model, metric)
    return DictionaryCatalog(tables)


def _effective_vector(z: AttributeVector) -> np.ndarray:
    # An all-zero vector carries no preference; fall back to the uniform
    # average over all attributes, identical to the all-one vector.
    arr = z.as_array()
    if not arr.any():
        arr = np.ones(NUM_ATTRIBUTES)
    return arr


def score_configs(model: str, z: AttributeVector, catalog: DictionaryCatalog) -> np.ndarray:
    """Score every configuration of a model for an attribute vector.

    score_j = 0.5 * ((z . P1)_j + (z . P2)_j) with P1 the precision table
    and P2 the success table.
    """
    _check_model(model)
    zv = _effective_vector(z)
    p1 = catalog.table(model, "precision").matrix
    p2 = catalog.table(model, "success").matrix
    return 0.5 * (zv @ p1 + zv @ p2)


def select_config(model: str, z: AttributeVector, catalog: DictionaryCatalog) -> LayerConfig:
    """Return the best-scoring configuration for an attribute vector.

    Ties break deterministically: fewer total channels first, then the
    lexicographically smaller layer label list. Exactly tied scores can
    differ by float summation noise (~1e-16 relative), while genuinely
    distinct scores built from 3-decimal cells sit at least ~1e-5 apart
    relative, so candidates within 1e-9 relative of the maximum count as
    tied. The relative form keeps the choice invariant under any common
    positive rescaling of both tables.
    """
    scores = score_configs(model, z, catalog)
    configs = catalog.configs(model)
    top = scores.max()
    tied = np.flatnonzero(np.isclose(scores, top, rtol=1e-9, atol=0.0))
    best = min(tied, key=lambda j: (channel_count(configs[j]), configs[j].layers))
    return configs[int(best)]
