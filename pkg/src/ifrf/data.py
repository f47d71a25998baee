"""Dataset representation, CSV ingestion, label noise and stratified folds.

Cells are stored in a float matrix. Numeric features hold their value,
categorical features hold the category index, and ``MISSING`` is NaN.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MISSING = math.nan

REAL = "real"
INTEGER = "integer"
CATEGORICAL = "categorical"
KINDS = (REAL, INTEGER, CATEGORICAL)


@dataclass(frozen=True)
class FeatureSchema:
    name: str
    kind: str
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if (self.kind == CATEGORICAL) != bool(self.categories):
            raise ValueError(f"feature {self.name!r}: categories must be given exactly for categorical kind")
        if len(set(self.categories)) != len(self.categories):
            raise ValueError(f"feature {self.name!r}: duplicate categories")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL


@dataclass(frozen=True, eq=False)
class Dataset:
    schema: tuple[FeatureSchema, ...]
    rows: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    label_name: str = "class"

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != len(self.schema):
            raise ValueError(f"rows must be an (n, {len(self.schema)}) matrix, got shape {rows.shape}")
        if np.isinf(rows).any():
            raise ValueError("rows contain infinite values")
        labels = np.array(self.labels, dtype=np.int64)
        if labels.shape != (rows.shape[0],):
            raise ValueError("one label per row required")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
            raise ValueError("label index outside class_names")
        for j, f in enumerate(self.schema):
            if f.is_categorical:
                col = rows[:, j]
                col = col[~np.isnan(col)]
                if col.size and (np.any(col != np.round(col)) or col.min() < 0 or col.max() >= len(f.categories)):
                    raise ValueError(f"feature {f.name!r}: invalid category index")
        rows.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.schema)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, index: Sequence[int] | np.ndarray) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(self.schema, self.rows[index], self.labels[index], self.class_names, self.label_name)

    def with_labels(self, labels: np.ndarray) -> "Dataset":
        return Dataset(self.schema, self.rows, labels, self.class_names, self.label_name)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    k: int
    assignment: np.ndarray = field(repr=False)

    def test_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def splits(self):
        for fold in range(self.k):
            yield self.train_index(fold), self.test_index(fold)


def _is_int_token(tok: str) -> bool:
    try:
        int(tok)
    except ValueError:
        return False
    return True


def _parse_float(tok: str) -> float | None:
    try:
        x = float(tok)
    except ValueError:
        return None
    return x


def _infer_column(name: str, tokens: list[str | None]) -> tuple[FeatureSchema, np.ndarray]:
    present = [t for t in tokens if t is not None]
    numeric = bool(present) and all(_parse_float(t) is not None for t in present)
    if numeric:
        kind = INTEGER if all(_is_int_token(t) for t in present) else REAL
        col = np.empty(len(tokens))
        for i, t in enumerate(tokens):
            x = MISSING if t is None else float(t)
            col[i] = x if math.isfinite(x) else MISSING
        return FeatureSchema(name, kind), col
    categories = list(dict.fromkeys(present))
    if not categories:
        # all-missing column: keep it as a single-category feature so the schema stays valid
        categories = ["?"]
    lookup = {c: i for i, c in enumerate(categories)}
    col = np.array([MISSING if t is None else lookup[t] for t in tokens], dtype=float)
    return FeatureSchema(name, CATEGORICAL, tuple(categories)), col


def load_csv(path: str | Path, label_column: str | int | None = None, missing_token: str = "?") -> Dataset:
    """Read a headered CSV file and infer the feature schema.

    ``label_column`` is a column name or position; the last column when omitted.
    Cells equal to ``missing_token`` or empty become MISSING.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            records = list(csv.reader(fh))
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc}") from exc
    records = [r for r in records if r]
    if not records:
        raise ValueError(f"{path}: missing header")
    header, body = [h.strip() for h in records[0]], records[1:]
    if not body:
        raise ValueError(f"{path}: zero data rows")
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ValueError(f"{path}:{lineno}: ragged row ({len(r)} cells, header has {len(header)})")

    if label_column is None:
        li = len(header) - 1
    elif isinstance(label_column, int):
        li = label_column if label_column >= 0 else len(header) + label_column
        if not 0 <= li < len(header):
            raise ValueError(f"label column {label_column} out of range")
    elif label_column in header:
        li = header.index(label_column)
    elif label_column.lstrip("-").isdigit():
        return load_csv(path, int(label_column), missing_token)
    else:
        raise ValueError(f"label column {label_column!r} not found in header")

    def norm(tok: str) -> str | None:
        tok = tok.strip()
        return None if tok == "" or tok == missing_token else tok

    label_tokens = [norm(r[li]) for r in body]
    if any(t is None for t in label_tokens):
        raise ValueError(f"{path}: missing label value")
    class_names = list(dict.fromkeys(label_tokens))
    lookup = {c: i for i, c in enumerate(class_names)}
    labels = np.array([lookup[t] for t in label_tokens], dtype=np.int64)

    schema, cols = [], []
    for j, name in enumerate(header):
        if j == li:
            continue
        fs, col = _infer_column(name, [norm(r[j]) for r in body])
        schema.append(fs)
        cols.append(col)
    rows = np.column_stack(cols) if cols else np.empty((len(body), 0))
    return Dataset(tuple(schema), rows, labels, tuple(class_names), header[li])


def _format_cell(x: float, f: FeatureSchema, missing_token: str) -> str:
    if math.isnan(x):
        return missing_token
    if f.is_categorical:
        return f.categories[int(x)]
    if f.kind == INTEGER:
        return str(int(x))
    return repr(float(x))


def save_csv(d: Dataset, path: str | Path, missing_token: str = "?") -> None:
    """Write ``d`` with the label as the last column; :func:`load_csv` reads it back exactly."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f.name for f in d.schema] + [d.label_name])
        for row, y in zip(d.rows, d.labels):
            w.writerow([_format_cell(x, f, missing_token) for x, f in zip(row, d.schema)] + [d.class_names[y]])


def inject_label_noise(d: Dataset, fraction: float, seed: int) -> Dataset:
    """Shuffle the labels of ``floor(fraction * n)`` randomly chosen rows.

    The selected rows' labels are permuted among themselves, so the global label
    multiset is preserved and some rows may keep their label by chance.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"noise fraction {fraction!r} outside [0, 1]")
    n = d.n_samples
    m = math.floor(fraction * n)
    if m == 0:
        return d
    rng = np.random.default_rng(seed)
    chosen = rng.choice(n, size=m, replace=False)
    labels = d.labels.copy()
    labels[chosen] = labels[chosen][rng.permutation(m)]
    return d.with_labels(labels)


def stratified_kfold(d: Dataset, k: int, seed: int) -> FoldAssignment:
    """Shuffle each class and deal its rows round-robin across ``k`` folds.

    The dealing offset continues from class to class, so overall fold sizes
    differ by at most one as well as per-class counts.
    """
    return stratified_kfold_labels(d.labels, k, seed)


def stratified_kfold_labels(labels: np.ndarray, k: int, seed: int) -> FoldAssignment:
    labels = np.asarray(labels)
    n = labels.shape[0]
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of rows ({n})")
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=np.int64)
    offset = 0
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(members.size)]
        assignment[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    assignment.setflags(write=False)
    return FoldAssignment(k, assignment)


def read_feature_rows(path: str | Path, schema: Sequence[FeatureSchema], missing_token: str = "?") -> np.ndarray:
    """Read rows for prediction, matching columns to ``schema`` by header name.

    Columns not in the schema (such as a label) are ignored.  Categorical
    tokens outside the known categories, and unparseable numbers, become MISSING.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            records = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc}") from exc
    if not records:
        raise ValueError(f"{path}: missing header")
    header = [h.strip() for h in records[0]]
    missing_cols = [f.name for f in schema if f.name not in header]
    if missing_cols:
        raise ValueError(f"{path}: schema mismatch, missing columns {missing_cols}")
    pos = [header.index(f.name) for f in schema]
    lookups = [{c: i for i, c in enumerate(f.categories)} for f in schema]
    out = np.empty((len(records) - 1, len(schema)))
    for i, r in enumerate(records[1:]):
        if len(r) != len(header):
            raise ValueError(f"{path}:{i + 2}: ragged row")
        for j, (f, p) in enumerate(zip(schema, pos)):
            tok = r[p].strip()
            if tok == "" or tok == missing_token:
                out[i, j] = MISSING
            elif f.is_categorical:
                out[i, j] = lookups[j].get(tok, MISSING)
            else:
                x = _parse_float(tok)
                out[i, j] = x if x is not None and math.isfinite(x) else MISSING
    return out
