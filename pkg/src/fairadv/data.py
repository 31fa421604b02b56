"""Tabular CSV ingestion: schema-driven encoding into normalized feature
matrices with binary labels and binary sensitive groups.

Numeric columns are min-max normalized to [0,1] using training-split
statistics (test rows clipped); categorical columns are one-hot encoded with
levels taken from the whole file so every row's block sums to 1.  Rows with
missing or unparseable cells are dropped and counted.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DegenerateDataError, SchemaError

MISSING_MARKERS = {"", "?"}

_REQUIRED_KEYS = ("target", "target_positive", "sensitive", "sensitive_advantaged")
_LIST_KEYS = ("categorical", "numeric", "drop", "sensitive_keep")
_KNOWN_KEYS = set(_REQUIRED_KEYS) | set(_LIST_KEYS) | {"freeze_categorical"}


@dataclass(frozen=True)
class DatasetSchema:
    """How to interpret one CSV: which column is the target, which is the
    sensitive attribute, and how the remaining columns are encoded."""

    target_column: str
    target_positive: str
    sensitive_column: str
    sensitive_advantaged: str
    categorical_columns: tuple[str, ...]
    numeric_columns: tuple[str, ...]
    drop_columns: tuple[str, ...] = ()
    sensitive_keep: tuple[str, ...] = ()   # empty = keep every row
    freeze_categorical: bool = False       # attack may not perturb one-hot coords

    def __post_init__(self):
        if self.target_column == self.sensitive_column:
            raise SchemaError("target and sensitive columns must be distinct")
        overlap = set(self.categorical_columns) & set(self.numeric_columns)
        if overlap:
            raise SchemaError(f"columns listed as both categorical and numeric: {sorted(overlap)}")


def read_schema(path) -> DatasetSchema:
    """Parse a flat ``key = value`` schema file (lists are comma-separated)."""
    raw: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _KNOWN_KEYS:
                raise SchemaError(f"{path}:{lineno}: unknown key {key!r}")
            raw[key] = value
    missing = [k for k in _REQUIRED_KEYS if k not in raw]
    if missing:
        raise SchemaError(f"{path}: missing required keys {missing}")

    def as_list(key):
        value = raw.get(key, "")
        return tuple(tok.strip() for tok in value.split(",") if tok.strip())

    return DatasetSchema(
        target_column=raw["target"],
        target_positive=raw["target_positive"],
        sensitive_column=raw["sensitive"],
        sensitive_advantaged=raw["sensitive_advantaged"],
        categorical_columns=as_list("categorical"),
        numeric_columns=as_list("numeric"),
        drop_columns=as_list("drop"),
        sensitive_keep=as_list("sensitive_keep"),
        freeze_categorical=raw.get("freeze_categorical", "false").lower() in ("true", "1", "yes"),
    )


def packaged_schema_path(name: str):
    """Path of one of the shipped schema files (adult, compas, german)."""
    res = importlib.resources.files("fairadv") / "schemas" / f"{name}.schema"
    if not res.is_file():
        raise SchemaError(f"no packaged schema named {name!r}")
    return res


@dataclass(frozen=True)
class SplitView:
    """Read-only (features, labels, sensitive) arrays for one split."""

    features: np.ndarray
    labels: np.ndarray
    sensitive: np.ndarray
    column_names: tuple[str, ...]
    frozen_mask: np.ndarray


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray              # (N, d), train rows in [0,1]
    labels: np.ndarray                # (N,) in {0,1}
    sensitive: np.ndarray             # (N,) in {0,1}, 1 = schema's advantaged value
    split: np.ndarray                 # (N,) of "train"/"test"
    column_names: tuple[str, ...]
    frozen_mask: np.ndarray = None    # (d,) bool, True = not perturbable
    norm_stats: tuple = ()            # ((column, lo, hi), ...) for numeric columns
    dropped_rows: int = 0             # missing/unparseable rows
    filtered_rows: int = 0            # rows removed by sensitive_keep
    seed: int = 0
    split_fraction: float = 0.8

    def __post_init__(self):
        n = self.features.shape[0]
        if not (len(self.labels) == len(self.sensitive) == len(self.split) == n):
            raise SchemaError("row count mismatch between features/labels/sensitive/split")
        if self.frozen_mask is None:
            object.__setattr__(self, "frozen_mask",
                               np.zeros(self.features.shape[1], dtype=bool))
        for arr in (self.features, self.labels, self.sensitive, self.frozen_mask):
            arr.flags.writeable = False

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def view(self, split: str) -> SplitView:
        mask = self.split == split
        if not mask.any():
            raise DegenerateDataError(f"split {split!r} is empty")
        return SplitView(self.features[mask], self.labels[mask],
                         self.sensitive[mask], self.column_names, self.frozen_mask)


def _parse_numeric(series: pd.Series):
    values = pd.to_numeric(series, errors="coerce")
    return values.to_numpy(dtype=np.float64), values.isna().to_numpy()


def load_csv(path, schema: DatasetSchema, split_fraction: float = 0.8,
             seed: int = 0) -> LabeledDataset:
    """Ingest one CSV into a LabeledDataset.

    Rows whose sensitive value is excluded by ``schema.sensitive_keep`` are
    filtered; rows with a missing or unparseable cell in any used column are
    dropped (both counts are recorded on the result).  The split is a seeded
    shuffle; normalization statistics come from the training rows only.
    """
    if not (0.0 < split_fraction < 1.0):
        raise SchemaError(f"split_fraction must be in (0,1), got {split_fraction}")
    df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    df.columns = [c.strip() for c in df.columns]
    used = ((schema.target_column, schema.sensitive_column)
            + schema.categorical_columns + schema.numeric_columns)
    for col in used + schema.drop_columns:
        if col not in df.columns:
            raise SchemaError(f"{path}: column {col!r} not in file")
    df = df[list(dict.fromkeys(used))]    # drop unused columns, keep order

    filtered = 0
    if schema.sensitive_keep:
        keep = df[schema.sensitive_column].isin(schema.sensitive_keep)
        filtered = int((~keep).sum())
        df = df[keep]

    bad = np.zeros(len(df), dtype=bool)
    for col in used:
        bad |= df[col].isin(MISSING_MARKERS).to_numpy()
    numeric_raw = {}
    for col in schema.numeric_columns:
        values, unparseable = _parse_numeric(df[col])
        numeric_raw[col] = values
        bad |= unparseable
    dropped = int(bad.sum())
    df = df[~bad]
    numeric_raw = {c: v[~bad] for c, v in numeric_raw.items()}
    n = len(df)
    if n == 0:
        raise DegenerateDataError(f"{path}: no usable rows after cleaning")

    labels = (df[schema.target_column] == schema.target_positive).to_numpy().astype(np.int64)
    sensitive = (df[schema.sensitive_column] == schema.sensitive_advantaged).to_numpy().astype(np.int64)

    blocks, names, frozen = [], [], []
    for col in schema.numeric_columns:
        blocks.append(numeric_raw[col][:, None])
        names.append(col)
        frozen.append(False)
    for col in schema.categorical_columns:
        levels = sorted(df[col].unique())
        onehot = np.zeros((n, len(levels)))
        for j, lvl in enumerate(levels):
            onehot[:, j] = (df[col] == lvl).to_numpy()
        blocks.append(onehot)
        names.extend(f"{col}={lvl}" for lvl in levels)
        frozen.extend([schema.freeze_categorical] * len(levels))
    features = np.hstack(blocks) if blocks else np.zeros((n, 0))

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = int(round(split_fraction * n))
    if n_train == 0 or n_train == n:
        raise DegenerateDataError("split leaves one side empty")
    split = np.full(n, "test", dtype="<U5")
    split[perm[:n_train]] = "train"
    train_mask = split == "train"

    stats = []
    for j, col in enumerate(schema.numeric_columns):
        lo = float(features[train_mask, j].min())
        hi = float(features[train_mask, j].max())
        stats.append((col, lo, hi))
        if hi == lo:
            features[:, j] = 0.0
        else:
            features[:, j] = np.clip((features[:, j] - lo) / (hi - lo), 0.0, 1.0)

    for tag in ("train", "test"):
        mask = split == tag
        if len(np.unique(sensitive[mask])) < 2:
            raise DegenerateDataError(f"one sensitive group is empty in the {tag} split")

    return LabeledDataset(
        features=features, labels=labels, sensitive=sensitive, split=split,
        column_names=tuple(names), frozen_mask=np.array(frozen, dtype=bool),
        norm_stats=tuple(stats), dropped_rows=dropped, filtered_rows=filtered,
        seed=seed, split_fraction=split_fraction,
    )


def group_counts(ds: LabeledDataset, split: str) -> dict[tuple[int, int], int]:
    """Row counts per (label, sensitive) cell within one split."""
    mask = ds.split == split
    if not mask.any():
        raise DegenerateDataError(f"split {split!r} is empty")
    y, a = ds.labels[mask], ds.sensitive[mask]
    return {(j, k): int(((y == j) & (a == k)).sum())
            for j in (0, 1) for k in (0, 1)}


def save_dataset(ds: LabeledDataset, path) -> None:
    """Exact text persistence (17 significant digits) for replay."""
    with open(path, "w") as fh:
        fh.write("dataset v1 %d %d %d %d %d %.17g\n"
                 % (len(ds.labels), ds.n_features, ds.dropped_rows,
                    ds.filtered_rows, ds.seed, ds.split_fraction))
        fh.write("columns\t" + "\t".join(ds.column_names) + "\n")
        fh.write("frozen " + " ".join("1" if b else "0" for b in ds.frozen_mask) + "\n")
        for name, lo, hi in ds.norm_stats:
            fh.write("stat\t%s\t%.17g\t%.17g\n" % (name, lo, hi))
        for i in range(len(ds.labels)):
            fh.write("%s %d %d " % (ds.split[i], ds.labels[i], ds.sensitive[i]))
            fh.write(" ".join("%.17g" % v for v in ds.features[i]) + "\n")


def load_dataset(path) -> LabeledDataset:
    try:
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 8 or header[:2] != ["dataset", "v1"]:
                raise SchemaError(f"{path}: not a dataset v1 file")
            n_rows, n_cols, dropped, filtered, seed = (int(t) for t in header[2:7])
            split_fraction = float(header[7])
            cols_line = fh.readline().rstrip("\n").split("\t")
            if cols_line[0] != "columns" or len(cols_line) != n_cols + 1:
                raise SchemaError(f"{path}: bad columns line")
            column_names = tuple(cols_line[1:])
            frozen_line = fh.readline().split()
            if frozen_line[0] != "frozen" or len(frozen_line) != n_cols + 1:
                raise SchemaError(f"{path}: bad frozen line")
            frozen = np.array([t == "1" for t in frozen_line[1:]])
            stats = []
            pos = fh.tell()
            line = fh.readline()
            while line.startswith("stat\t"):
                _, name, lo, hi = line.rstrip("\n").split("\t")
                stats.append((name, float(lo), float(hi)))
                pos = fh.tell()
                line = fh.readline()
            fh.seek(pos)
            features = np.zeros((n_rows, n_cols))
            labels = np.zeros(n_rows, dtype=np.int64)
            sensitive = np.zeros(n_rows, dtype=np.int64)
            split = np.zeros(n_rows, dtype="<U5")
            for i in range(n_rows):
                toks = fh.readline().split()
                if len(toks) != 3 + n_cols:
                    raise SchemaError(f"{path}: row {i} has {len(toks)} fields, wanted {3 + n_cols}")
                split[i], labels[i], sensitive[i] = toks[0], int(toks[1]), int(toks[2])
                features[i] = [float(t) for t in toks[3:]]
    except (ValueError, IndexError) as exc:
        raise SchemaError(f"{path}: corrupt dataset file: {exc}") from exc
    return LabeledDataset(
        features=features, labels=labels, sensitive=sensitive, split=split,
        column_names=column_names, frozen_mask=frozen, norm_stats=tuple(stats),
        dropped_rows=dropped, filtered_rows=filtered, seed=seed,
        split_fraction=split_fraction,
    )


def write_stats_sidecar(ds: LabeledDataset, path) -> None:
    """Human-readable reproducibility record for one ingestion."""
    with open(path, "w") as fh:
        fh.write(f"rows {len(ds.labels)}\n")
        fh.write(f"features {ds.n_features}\n")
        fh.write(f"dropped_rows {ds.dropped_rows}\n")
        fh.write(f"filtered_rows {ds.filtered_rows}\n")
        fh.write(f"seed {ds.seed}\n")
        fh.write("split_fraction %.17g\n" % ds.split_fraction)
        for name, lo, hi in ds.norm_stats:
            fh.write("minmax\t%s\t%.17g\t%.17g\n" % (name, lo, hi))
