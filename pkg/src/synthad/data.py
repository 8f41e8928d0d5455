"""CSV ingestion and schema-driven encoding to [0,1]^d.

A Schema is an explicit sidecar (JSON) describing ordered numeric and
categorical columns plus the label column. Numeric values are min-max scaled
and clipped; categoricals become one-hot blocks; the label maps to +1 for the
normal value and -1 otherwise. Labels are consumed only by evaluation and
unsupervised filtering, never by training.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "NumericColumn",
    "CategoricalColumn",
    "LabelColumn",
    "Schema",
    "RawTable",
    "Dataset",
    "SchemaError",
    "load_csv",
    "encode",
    "decode_categoricals",
    "filter_unsupervised_train",
    "split",
]


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class NumericColumn:
    name: str
    min: float
    max: float

    def __post_init__(self):
        if not self.min < self.max:
            raise SchemaError(f"column {self.name}: min must be < max")


@dataclass(frozen=True)
class CategoricalColumn:
    name: str
    categories: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))
        if not self.categories:
            raise SchemaError(f"column {self.name}: categories must be non-empty")
        if len(set(self.categories)) != len(self.categories):
            raise SchemaError(f"column {self.name}: duplicate categories")


@dataclass(frozen=True)
class LabelColumn:
    name: str
    normal_value: str
    anomaly_values: tuple[str, ...] | None = None  # None = any other value


@dataclass(frozen=True)
class Schema:
    columns: tuple
    label: LabelColumn

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name for c in self.columns] + [self.label.name]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names")

    @property
    def encoded_dim(self) -> int:
        return sum(
            len(c.categories) if isinstance(c, CategoricalColumn) else 1
            for c in self.columns
        )

    def feature_names(self) -> list[str]:
        out = []
        for c in self.columns:
            if isinstance(c, CategoricalColumn):
                out.extend(f"{c.name}={cat}" for cat in c.categories)
            else:
                out.append(c.name)
        return out

    def to_json(self, path=None) -> str:
        cols = []
        for c in self.columns:
            if isinstance(c, NumericColumn):
                cols.append({"type": "numeric", "name": c.name, "min": c.min, "max": c.max})
            else:
                cols.append(
                    {"type": "categorical", "name": c.name, "categories": list(c.categories)}
                )
        doc = json.dumps(
            {
                "columns": cols,
                "label": {
                    "name": self.label.name,
                    "normal_value": self.label.normal_value,
                    "anomaly_values": list(self.label.anomaly_values)
                    if self.label.anomaly_values is not None
                    else None,
                },
            },
            indent=2,
        )
        if path is not None:
            Path(path).write_text(doc)
        return doc

    @classmethod
    def from_json(cls, doc_or_path) -> "Schema":
        text = doc_or_path
        try:
            p = Path(str(doc_or_path))
            if p.exists():
                text = p.read_text()
        except OSError:  # JSON text long enough to break Path.exists
            pass
        d = json.loads(text)
        cols = []
        for c in d["columns"]:
            if c["type"] == "numeric":
                cols.append(NumericColumn(c["name"], float(c["min"]), float(c["max"])))
            elif c["type"] == "categorical":
                cols.append(CategoricalColumn(c["name"], tuple(c["categories"])))
            else:
                raise SchemaError(f"unknown column type {c['type']}")
        lab = d["label"]
        anomaly = lab.get("anomaly_values")
        return cls(
            tuple(cols),
            LabelColumn(
                lab["name"], str(lab["normal_value"]),
                tuple(anomaly) if anomaly is not None else None,
            ),
        )


@dataclass
class RawTable:
    """Typed rows keyed by schema column name; labels kept as raw strings."""

    schema: Schema
    rows: list[dict]

    def __len__(self):
        return len(self.rows)


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    schema: Schema | None = None
    provenance: str = ""

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels)
        if len(self.labels) != len(self.features):
            raise ValueError("features/labels length mismatch")
        if self.features.size and (
            self.features.min() < 0.0 or self.features.max() > 1.0
        ):
            raise ValueError("features must lie in [0,1]")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise ValueError("labels must be in {-1, +1}")

    def __len__(self):
        return len(self.features)

    def to_csv(self, path):
        """Audit cache: encoded features then label."""
        names = self.schema.feature_names() if self.schema else [
            f"x{i}" for i in range(self.features.shape[1])
        ]
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names + ["label"])
            for row, lab in zip(self.features, self.labels):
                writer.writerow([repr(v) for v in row] + [int(lab)])


def load_csv(path, schema: Schema, unknown_category: str = "reject") -> RawTable:
    """Read a headered CSV into typed rows; header order may differ from schema.

    unknown_category: 'reject' raises listing offending rows/columns; 'zero'
    keeps the row and encodes the block as all zeros later.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    if unknown_category not in ("reject", "zero"):
        raise ValueError("unknown_category must be 'reject' or 'zero'")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: missing header row")
        have = set(reader.fieldnames)
        needed = [c.name for c in schema.columns] + [schema.label.name]
        missing = [nm for nm in needed if nm not in have]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        rows = []
        errors = []
        for i, rec in enumerate(reader):
            row = {}
            for c in schema.columns:
                raw = rec[c.name]
                if isinstance(c, NumericColumn):
                    try:
                        row[c.name] = float(raw)
                    except ValueError:
                        errors.append(f"row {i}: column {c.name}: unparseable numeric {raw!r}")
                else:
                    if raw not in c.categories:
                        if unknown_category == "reject":
                            errors.append(
                                f"row {i}: column {c.name}: unknown category {raw!r}"
                            )
                        else:
                            row[c.name] = None
                    else:
                        row[c.name] = raw
            row[schema.label.name] = rec[schema.label.name]
            rows.append(row)
        if errors:
            raise SchemaError(f"{path}: " + "; ".join(errors))
    return RawTable(schema=schema, rows=rows)


def encode(table: RawTable, schema: Schema | None = None, provenance: str = "") -> Dataset:
    """Encode typed rows: min-max scale + clip numerics, one-hot categoricals,
    and map labels to +1 (normal) / -1."""
    schema = schema or table.schema
    n = len(table.rows)
    X = np.zeros((n, schema.encoded_dim))
    y = np.empty(n, dtype=int)
    lab = schema.label
    for i, row in enumerate(table.rows):
        j = 0
        for c in schema.columns:
            if isinstance(c, NumericColumn):
                X[i, j] = min(1.0, max(0.0, (row[c.name] - c.min) / (c.max - c.min)))
                j += 1
            else:
                val = row[c.name]
                if val is not None:
                    X[i, j + c.categories.index(val)] = 1.0
                j += len(c.categories)
        raw_label = str(row[lab.name])
        if raw_label == lab.normal_value:
            y[i] = 1
        elif lab.anomaly_values is None or raw_label in lab.anomaly_values:
            y[i] = -1
        else:
            raise SchemaError(f"row {i}: label {raw_label!r} is neither normal nor anomaly")
    return Dataset(X, y, schema=schema, provenance=provenance)


def decode_categoricals(dataset: Dataset) -> list[dict]:
    """Inverse of one-hot encoding for categorical blocks (round-trip check)."""
    if dataset.schema is None:
        raise ValueError("dataset has no schema")
    out = []
    for row in dataset.features:
        rec = {}
        j = 0
        for c in dataset.schema.columns:
            if isinstance(c, CategoricalColumn):
                block = row[j : j + len(c.categories)]
                k = int(np.argmax(block))
                rec[c.name] = c.categories[k] if block[k] == 1.0 else None
                j += len(c.categories)
            else:
                j += 1
        out.append(rec)
    return out


def filter_unsupervised_train(dataset: Dataset) -> Dataset:
    """Keep only normal rows; anomalies never reach training."""
    keep = dataset.labels == 1
    if not np.any(keep):
        raise ValueError("no normal rows to train on")
    return Dataset(
        dataset.features[keep], dataset.labels[keep],
        schema=dataset.schema,
        provenance=f"{dataset.provenance}|normals_only({int(keep.sum())}/{len(keep)})",
    )


def split(
    dataset: Dataset, fractions: tuple[float, float, float], seed
) -> tuple[Dataset, Dataset, Dataset]:
    """Label-stratified disjoint (train, val, test) split, deterministic per seed."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError("fractions must be three positive values")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[], [], []]
    for lab in (1, -1):
        idx = np.flatnonzero(dataset.labels == lab)
        if idx.size == 0:
            continue
        idx = rng.permutation(idx)
        # largest-remainder allocation keeps per-split sizes exact
        exact = np.array(fractions) * idx.size
        counts = np.floor(exact).astype(int)
        rem = idx.size - counts.sum()
        order = np.argsort(-(exact - counts))
        for k in order[:rem]:
            counts[k] += 1
        pos = 0
        for k in range(3):
            buckets[k].extend(idx[pos : pos + counts[k]])
            pos += counts[k]
    if any(len(b) == 0 for b in buckets):
        raise ValueError("a split would be empty; adjust fractions or data size")
    parts = []
    for k, name in enumerate(("train", "val", "test")):
        sel = np.sort(np.asarray(buckets[k]))
        parts.append(
            Dataset(
                dataset.features[sel], dataset.labels[sel],
                schema=dataset.schema,
                provenance=f"{dataset.provenance}|{name}",
            )
        )
    return tuple(parts)
