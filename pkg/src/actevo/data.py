"""CSV ingestion, label mapping, shuffled splitting and standardization.

The four experiment datasets are user-supplied UCI-style CSV files; this
module bundles their schemas (which column holds the label, how its tokens
map to 0/1, which identifier columns to drop) but no data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np


class DataError(ValueError):
    """Unreadable file, malformed row or unknown label token."""


@dataclass(frozen=True)
class DatasetSchema:
    name: str
    label_column: int | str = -1
    positive_token: str | None = None
    negative_token: str | None = None
    drop_columns: tuple[int | str, ...] = ()
    hidden_layers: int = 1
    expected_features: int | None = None
    expected_instances: int | None = None


# Hidden-layer counts per dataset match the bundled experiment configs.
BUILTIN_SCHEMAS: dict[str, DatasetSchema] = {
    "heart": DatasetSchema(
        name="heart",
        label_column=-1,
        hidden_layers=1,
        expected_features=13,
        expected_instances=303,
    ),
    "pima": DatasetSchema(
        name="pima",
        label_column=-1,
        hidden_layers=3,
        expected_features=8,
        expected_instances=768,
    ),
    "sonar": DatasetSchema(
        name="sonar",
        label_column=-1,
        positive_token="M",
        negative_token="R",
        hidden_layers=3,
        expected_features=60,
        expected_instances=208,
    ),
    "wbcd": DatasetSchema(
        name="wbcd",
        label_column=1,
        positive_token="M",
        negative_token="B",
        drop_columns=(0,),
        hidden_layers=1,
        expected_features=30,
        expected_instances=569,
    ),
}


@dataclass
class Dataset:
    name: str
    features: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class Split:
    X_train: np.ndarray
    y_train: np.ndarray
    X_val: np.ndarray
    y_val: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    seed: int = 0


def _map_label(token: str, schema: DatasetSchema, row: int) -> int:
    token = token.strip()
    if schema.positive_token is not None or schema.negative_token is not None:
        if token == schema.positive_token:
            return 1
        if token == schema.negative_token:
            return 0
        raise DataError(f"row {row}: unknown label token {token!r}")
    try:
        value = float(token)
    except ValueError:
        raise DataError(f"row {row}: unknown label token {token!r}") from None
    # numeric labels: zero stays 0, anything else collapses to 1
    return 0 if value == 0.0 else 1


def _looks_like_data(cells: list[str], label_idx: int, feature_idx: list[int], schema: DatasetSchema) -> bool:
    try:
        _map_label(cells[label_idx], schema, 0)
        for j in feature_idx:
            float(cells[j])
    except (DataError, ValueError):
        return False
    return True


def load_csv(path: str, schema: DatasetSchema) -> Dataset:
    """Load a comma-separated file per the schema.

    A header row is detected automatically (it is required when the schema
    names columns instead of indexing them).  Identifier columns are
    dropped, label tokens are mapped to 0/1 and every other cell must parse
    as a finite number; a bad cell raises DataError naming the 1-based file
    row.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            raw = [(i, row) for i, row in enumerate(csv.reader(fh), start=1) if row and any(c.strip() for c in row)]
    except OSError as err:
        raise DataError(f"cannot read {path}: {err}") from None
    if not raw:
        raise DataError(f"{path} contains no data rows")

    n_columns = len(raw[0][1])
    named = isinstance(schema.label_column, str) or any(
        isinstance(c, str) for c in schema.drop_columns
    )
    header: list[str] | None = None
    if named:
        header = [c.strip() for c in raw[0][1]]

    def resolve(column: int | str) -> int:
        if isinstance(column, str):
            if header is None or column not in header:
                raise DataError(f"column {column!r} not found in header")
            return header.index(column)
        return column % n_columns

    label_idx = resolve(schema.label_column)
    drop_idx = {resolve(c) for c in schema.drop_columns}
    feature_idx = [j for j in range(n_columns) if j != label_idx and j not in drop_idx]
    if not feature_idx:
        raise DataError("schema leaves no feature columns")

    rows = raw
    if named:
        rows = raw[1:]
    elif not _looks_like_data(raw[0][1], label_idx, feature_idx, schema):
        rows = raw[1:]
    if not rows:
        raise DataError(f"{path} contains no data rows")

    features = np.empty((len(rows), len(feature_idx)))
    labels = np.empty(len(rows), dtype=int)
    for out, (lineno, cells) in enumerate(rows):
        if len(cells) != n_columns:
            raise DataError(f"row {lineno}: expected {n_columns} columns, got {len(cells)}")
        labels[out] = _map_label(cells[label_idx], schema, lineno)
        for k, j in enumerate(feature_idx):
            try:
                features[out, k] = float(cells[j])
            except ValueError:
                raise DataError(
                    f"row {lineno}: column {j} value {cells[j]!r} is not numeric"
                ) from None
    if not np.all(np.isfinite(features)):
        bad = int(np.argwhere(~np.isfinite(features))[0][0])
        raise DataError(f"row {rows[bad][0]}: non-finite feature value")
    return Dataset(name=schema.name, features=features, labels=labels)


def shuffle_split(
    dataset: Dataset,
    test_fraction: float = 0.25,
    val_fraction_of_train: float = 0.20,
    seed: int = 0,
) -> Split:
    """Seeded permutation; the last quarter (floored) becomes the test part
    and the last fifth of the remainder becomes validation."""
    n = len(dataset)
    if n < 10:
        raise DataError(f"need at least 10 instances to split, got {n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_test = int(n * test_fraction)
    rest = order[: n - n_test]
    test = order[n - n_test :]
    n_val = int(len(rest) * val_fraction_of_train)
    train = rest[: len(rest) - n_val]
    val = rest[len(rest) - n_val :]
    X, y = dataset.features, dataset.labels
    return Split(
        X_train=X[train].copy(),
        y_train=y[train].copy(),
        X_val=X[val].copy(),
        y_val=y[val].copy(),
        X_test=X[test].copy(),
        y_test=y[test].copy(),
        seed=seed,
    )


def standardize(split: Split) -> Split:
    """Z-score all parts using training-part statistics only.

    Features whose training standard deviation is below 1e-12 are centered
    but not scaled.
    """
    mean = split.X_train.mean(axis=0)
    std = split.X_train.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return replace(
        split,
        X_train=(split.X_train - mean) / std,
        X_val=(split.X_val - mean) / std,
        X_test=(split.X_test - mean) / std,
    )
