"""Metadata-partitioned labeled datasets.

A :class:`MetadataDataset` holds a feature matrix, integer class labels, a
metadata tag per point (``"A"`` or ``"B"``), stable integer point ids and the
assumed population proportion ``p0 = (p_A, p_B)``.  Datasets are immutable;
every subsetting operation returns a new object sharing no writable state.
"""

import csv
import fnmatch
import os
from dataclasses import dataclass, field

import numpy as np

from ._random import as_generator
from ._validation import check_proportion

A = "A"
B = "B"
CATEGORIES = (A, B)


class DatasetError(ValueError):
    """Raised for malformed input files, schemas or sampling requests."""


def _frozen(arr, dtype):
    arr = np.array(arr, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MetadataDataset:
    """Labeled points split into two metadata categories.

    Parameters
    ----------
    X : array of shape (N, p)
        Feature matrix.  ``p`` may be zero for count-only datasets used with
        the synthetic accuracy oracle.
    y : array of shape (N,)
        Integer class labels.
    category : array of shape (N,)
        ``"A"`` or ``"B"`` per point.
    ids : array of shape (N,), optional
        Stable point identities; defaults to ``0..N-1``.
    p0 : (float, float), optional
        Population proportion pair.  Defaults to the empirical tag proportions.
    feature_names : tuple of str, optional
    """

    X: np.ndarray
    y: np.ndarray
    category: np.ndarray
    ids: np.ndarray = None
    p0: tuple = None
    feature_names: tuple = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 0) if X.size == 0 else X.reshape(-1, 1)
        n = X.shape[0]
        y = np.asarray(self.y).astype(np.int64).ravel()
        cat = np.asarray(self.category).astype(str).ravel()
        if y.shape[0] != n or cat.shape[0] != n:
            raise DatasetError(
                f"length mismatch: X has {n} rows, y {y.shape[0]}, category {cat.shape[0]}"
            )
        bad = ~np.isin(cat, CATEGORIES)
        if bad.any():
            raise DatasetError(f"unknown category tag {cat[bad][0]!r}; expected 'A' or 'B'")
        ids = np.arange(n) if self.ids is None else np.asarray(self.ids, dtype=np.int64).ravel()
        if ids.shape[0] != n:
            raise DatasetError("ids length does not match the number of points")
        if np.unique(ids).size != n:
            raise DatasetError("point ids must be unique")
        names = self.feature_names
        if names is None:
            names = tuple(f"x{j}" for j in range(X.shape[1]))
        names = tuple(str(s) for s in names)
        if len(names) != X.shape[1]:
            raise DatasetError("feature_names length does not match the number of features")
        p0 = self.p0
        if p0 is None:
            pa = float(np.mean(cat == A)) if n else 0.5
            p0 = (pa, 1.0 - pa)
        else:
            pa = check_proportion(p0[0], "p0[0]")
            if len(p0) > 1 and abs(pa + float(p0[1]) - 1.0) > 1e-9:
                raise DatasetError(f"p0 must sum to 1, got {tuple(p0)}")
            p0 = (pa, 1.0 - pa)
        object.__setattr__(self, "X", _frozen(X, float))
        object.__setattr__(self, "y", _frozen(y, np.int64))
        object.__setattr__(self, "category", _frozen(cat, "<U1"))
        object.__setattr__(self, "ids", _frozen(ids, np.int64))
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "feature_names", names)

    @classmethod
    def from_counts(cls, n_a, n_b, p0=None, first_id=0):
        """Featureless dataset with ``n_a`` A-points and ``n_b`` B-points."""
        n = n_a + n_b
        return cls(
            X=np.empty((n, 0)),
            y=np.zeros(n, dtype=np.int64),
            category=np.array([A] * n_a + [B] * n_b, dtype="<U1"),
            ids=np.arange(first_id, first_id + n),
            p0=p0,
        )

    def __len__(self):
        return self.X.shape[0]

    def __repr__(self):
        return (
            f"MetadataDataset(N={self.n}, n_a={self.n_a}, n_b={self.n_b}, "
            f"p={self.n_features}, p0=({self.p0[0]:.4g}, {self.p0[1]:.4g}))"
        )

    @property
    def n(self):
        return len(self)

    @property
    def n_a(self):
        return int(np.count_nonzero(self.category == A))

    @property
    def n_b(self):
        return int(np.count_nonzero(self.category == B))

    @property
    def counts(self):
        return self.n_a, self.n_b

    @property
    def n_features(self):
        return self.X.shape[1]

    def category_index(self, tag):
        if tag not in CATEGORIES:
            raise DatasetError(f"unknown category tag {tag!r}")
        return np.flatnonzero(self.category == tag)

    def take(self, index):
        """Subset by positional index, keeping ``p0`` and feature names."""
        index = np.asarray(index, dtype=np.int64).ravel()
        return MetadataDataset(
            self.X[index], self.y[index], self.category[index], self.ids[index],
            p0=self.p0, feature_names=self.feature_names,
        )

    def select_ids(self, ids):
        ids = np.asarray(ids, dtype=np.int64).ravel()
        pos = {int(i): k for k, i in enumerate(self.ids)}
        try:
            index = [pos[int(i)] for i in ids]
        except KeyError as exc:
            raise DatasetError(f"point id {exc.args[0]} not in dataset") from None
        return self.take(index)

    def drop_ids(self, ids):
        """Everything except the points whose ids appear in ``ids``."""
        keep = ~np.isin(self.ids, np.asarray(ids, dtype=np.int64))
        return self.take(np.flatnonzero(keep))

    def concat(self, other):
        if other.n_features != self.n_features:
            raise DatasetError("cannot concatenate datasets with different feature counts")
        return MetadataDataset(
            np.vstack([self.X, other.X]),
            np.concatenate([self.y, other.y]),
            np.concatenate([self.category, other.category]),
            np.concatenate([self.ids, other.ids]),
            p0=self.p0, feature_names=self.feature_names,
        )

    def with_p0(self, p0):
        pa = check_proportion(p0[0] if np.ndim(p0) else p0, "p0")
        return MetadataDataset(
            self.X, self.y, self.category, self.ids, p0=(pa, 1.0 - pa),
            feature_names=self.feature_names,
        )


def samp(dataset, category, count, rng=None):
    """Uniformly sample ``count`` points of ``category`` without replacement."""
    idx = dataset.category_index(category)
    count = int(count)
    if count < 0:
        raise DatasetError(f"count must be nonnegative, got {count}")
    if count > idx.size:
        raise DatasetError(
            f"requested {count} points from category {category} but only {idx.size} available"
        )
    chosen = as_generator(rng).choice(idx, size=count, replace=False)
    return dataset.take(np.sort(chosen))


def sample_balance(dataset, n_a, n_b, rng=None):
    """Sample ``n_a`` A-points and ``n_b`` B-points (one combined subset)."""
    rng = as_generator(rng)
    return samp(dataset, A, n_a, rng).concat(samp(dataset, B, n_b, rng))


def synthetic_classification(n_per_category, separation=4.0, rng=None, n_features=5,
                             hard_ratio=0.5):
    """Two-class, two-category Gaussian data.

    Within each category the two classes form unit-variance clusters whose
    means sit ``±d/2`` apart along one axis: axis 0 with ``d = separation``
    for category A, axis 1 with ``d = hard_ratio * separation`` for category
    B.  ``hard_ratio < 1`` therefore makes B the harder category.
    """
    if int(n_per_category) < 1:
        raise ValueError("n_per_category must be >= 1")
    if not separation > 0:
        raise ValueError("separation must be > 0")
    if n_features < 2:
        raise ValueError("n_features must be >= 2")
    rng = as_generator(rng)
    n = int(n_per_category)
    blocks, labels, cats = [], [], []
    for tag, axis, d in ((A, 0, separation), (B, 1, hard_ratio * separation)):
        y = np.arange(n) % 2
        X = rng.standard_normal((n, n_features))
        X[:, axis] += np.where(y == 1, d / 2.0, -d / 2.0)
        blocks.append(X)
        labels.append(y)
        cats.extend([tag] * n)
    return MetadataDataset(np.vstack(blocks), np.concatenate(labels), np.array(cats), p0=(0.5, 0.5))


# ---------------------------------------------------------------------------
# CSV ingestion

SPAMBASE_WORDS = (
    "make", "address", "all", "3d", "our", "over", "remove", "internet", "order",
    "mail", "receive", "will", "people", "report", "addresses", "free", "business",
    "email", "you", "credit", "your", "font", "000", "money", "hp", "hpl", "george",
    "650", "lab", "labs", "telnet", "857", "data", "415", "85", "technology", "1999",
    "parts", "pm", "direct", "cs", "meeting", "original", "project", "re", "edu",
    "table", "conference",
)
SPAMBASE_CHARS = (";", "(", "[", "!", "$", "#")
#: Canonical 58-column layout of ``spambase.data`` (the file has no header).
SPAMBASE_COLUMNS = (
    tuple(f"word_freq_{w}" for w in SPAMBASE_WORDS)
    + tuple(f"char_freq_{c}" for c in SPAMBASE_CHARS)
    + ("capital_run_length_average", "capital_run_length_longest", "capital_run_length_total", "spam")
)
CHAR_FREQ_PATTERN = "char_freq_*"


@dataclass(frozen=True)
class CsvSchema:
    """Maps CSV columns to roles.

    ``label_column`` and ``category_column`` accept a column name or a
    0-based index.  ``category_rule`` derives the tag instead: either a glob
    pattern (a point is ``B`` iff any matching column is > 0) or a callable
    taking ``{column: value}`` and returning True for ``B``.  Category
    columns may hold ``A``/``B`` or ``0``/``1`` (1 meaning ``B``).  Columns
    matching any ``drop_columns`` pattern are excluded from the features.
    Without a category column or rule every point is tagged ``A``.
    """

    label_column: object = "label"
    category_column: object = None
    category_rule: object = None
    drop_columns: tuple = ()
    header: bool = True
    column_names: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "drop_columns", tuple(self.drop_columns))
        if self.category_column is not None and self.category_rule is not None:
            raise DatasetError("give either category_column or category_rule, not both")
        if isinstance(self.label_column, str) and any(
            fnmatch.fnmatchcase(self.label_column, pat) for pat in self.drop_columns
        ):
            raise DatasetError(f"label column {self.label_column!r} matches drop_columns")

    @classmethod
    def from_dict(cls, d):
        known = {"label_column", "category_column", "category_rule", "drop_columns",
                 "header", "column_names"}
        unknown = set(d) - known
        if unknown:
            raise DatasetError(f"unknown schema key(s): {', '.join(sorted(unknown))}")
        d = dict(d)
        if d.get("column_names") is not None:
            d["column_names"] = tuple(d["column_names"])
        return cls(**d)

    @classmethod
    def from_toml(cls, path):
        from ._toml import load_toml

        return cls.from_dict(load_toml(path))


SPAMBASE_SCHEMA = CsvSchema(
    label_column="spam",
    category_rule=CHAR_FREQ_PATTERN,
    drop_columns=(CHAR_FREQ_PATTERN,),
    header=False,
    column_names=SPAMBASE_COLUMNS,
)


def _resolve(col, names, what):
    if isinstance(col, (int, np.integer)) and not isinstance(col, bool):
        if not 0 <= col < len(names):
            raise DatasetError(f"{what} index {col} out of range for {len(names)} columns")
        return int(col)
    try:
        return names.index(str(col))
    except ValueError:
        raise DatasetError(f"{what} {col!r} not found in header") from None


def _parse_tag(raw, row, col):
    v = raw.strip()
    if v in ("A", "a", "0"):
        return A
    if v in ("B", "b", "1"):
        return B
    raise DatasetError(f"row {row}, column {col}: invalid category value {raw!r}")


def load_csv(path, schema=None, p0=None):
    """Read a comma-separated file into a :class:`MetadataDataset`.

    Malformed rows are rejected rather than imputed; error messages carry the
    1-based file line and the column name.
    """
    schema = schema or CsvSchema()
    if not os.path.exists(path):
        raise DatasetError(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    first_line = 1
    if schema.header:
        if not rows:
            raise DatasetError(f"{path}: empty file")
        names = [s.strip() for s in rows[0]]
        rows = rows[1:]
        first_line = 2
    elif schema.column_names is not None:
        names = list(schema.column_names)
    else:
        width = len(rows[0]) if rows else 0
        names = [str(j) for j in range(width)]
    if schema.column_names is not None and schema.header:
        names = list(schema.column_names)

    label_j = _resolve(schema.label_column, names, "label column")
    cat_j = None
    rule_cols = []
    rule = schema.category_rule
    if schema.category_column is not None:
        cat_j = _resolve(schema.category_column, names, "category column")
    elif isinstance(rule, str):
        rule_cols = [j for j, s in enumerate(names) if fnmatch.fnmatchcase(s, rule)]
        if not rule_cols:
            raise DatasetError(f"category rule {rule!r} matches no column")
    feat_j = [
        j for j, s in enumerate(names)
        if j not in (label_j, cat_j)
        and not any(fnmatch.fnmatchcase(s, pat) for pat in schema.drop_columns)
    ]

    X = np.empty((len(rows), len(feat_j)))
    y = np.empty(len(rows), dtype=np.int64)
    cats = []
    kept = 0
    for i, row in enumerate(rows):
        line = first_line + i
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(names):
            raise DatasetError(f"row {line}: expected {len(names)} columns, found {len(row)}")
        values = {}
        for j in range(len(names)):
            if j == cat_j:
                continue
            try:
                values[j] = float(row[j])
            except ValueError:
                raise DatasetError(
                    f"row {line}, column {names[j]!r}: non-numeric value {row[j]!r}"
                ) from None
            if not np.isfinite(values[j]):
                raise DatasetError(f"row {line}, column {names[j]!r}: non-finite value")
        label = values[label_j]
        if label != int(label):
            raise DatasetError(f"row {line}, column {names[label_j]!r}: non-integer label")
        if cat_j is not None:
            tag = _parse_tag(row[cat_j], line, names[cat_j])
        elif rule_cols:
            tag = B if any(values[j] > 0 for j in rule_cols) else A
        elif callable(rule):
            tag = B if rule({names[j]: v for j, v in values.items()}) else A
        else:
            tag = A
        X[kept] = [values[j] for j in feat_j]
        y[kept] = int(label)
        cats.append(tag)
        kept += 1
    return MetadataDataset(
        X[:kept], y[:kept], np.array(cats, dtype="<U1"), p0=p0,
        feature_names=tuple(names[j] for j in feat_j),
    )


def save_csv(dataset, path):
    """Write ``dataset`` with a header; reload with ``CsvSchema('label', 'category')``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(dataset.feature_names) + ["label", "category"])
        for x, lab, tag in zip(dataset.X, dataset.y, dataset.category):
            w.writerow([repr(float(v)) for v in x] + [int(lab), tag])


def engineer_spambase_metadata(raw):
    """Tag emails by presence of special characters and drop those columns.

    ``B`` iff any ``char_freq_*`` value is positive, ``A`` otherwise.
    """
    cols = [j for j, s in enumerate(raw.feature_names) if fnmatch.fnmatchcase(s, CHAR_FREQ_PATTERN)]
    if not cols:
        raise DatasetError("no char_freq_* columns found")
    is_b = np.any(raw.X[:, cols] > 0, axis=1)
    keep = [j for j in range(raw.n_features) if j not in cols]
    return MetadataDataset(
        raw.X[:, keep], raw.y, np.where(is_b, B, A), raw.ids,
        feature_names=tuple(raw.feature_names[j] for j in keep),
    )


def load_spambase(path, p0=None):
    """Load the canonical headerless ``spambase.data`` with engineered metadata."""
    return load_csv(path, SPAMBASE_SCHEMA, p0=p0)
