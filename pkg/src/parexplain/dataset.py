"""Typed tabular data: schema, CSV ingestion, and train/test splitting."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

CATEGORICAL = "categorical"
NUMERIC = "numeric"
KINDS = (CATEGORICAL, NUMERIC)

# Plain decimal or scientific notation; no locale separators, no nan/inf.
_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")

Value = Union[str, float, None]
Instance = tuple


class DataError(ValueError):
    """Raised for malformed tables, schema mismatches, and bad cells."""


def parse_number(text: str) -> float | None:
    """Return the finite float encoded by ``text``, or None if it is not a number."""
    text = text.strip()
    if not _NUMBER_RE.match(text):
        return None
    value = float(text)
    if not math.isfinite(value):
        return None
    return value


def format_number(value: float) -> str:
    return format(float(value), ".17g")


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str

    def __post_init__(self) -> None:
        if not self.name:
            raise DataError("feature names must be non-empty")
        if self.kind not in KINDS:
            raise DataError(f"unknown feature kind {self.kind!r} for {self.name!r}")

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC


@dataclass(frozen=True)
class Schema:
    features: tuple[Feature, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise DataError("schema needs at least one feature")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate feature names in {names}")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> Schema:
        return cls(tuple(Feature(name, kind) for name, kind in pairs))

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def categorical(self) -> list[str]:
        return [f.name for f in self.features if not f.is_numeric]

    @property
    def numeric(self) -> list[str]:
        return [f.name for f in self.features if f.is_numeric]

    def index(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise KeyError(name)

    def kind(self, name: str) -> str:
        return self.features[self.index(name)].kind

    def __len__(self) -> int:
        return len(self.features)

    def to_dict(self) -> list[dict]:
        return [{"name": f.name, "kind": f.kind} for f in self.features]

    @classmethod
    def from_dict(cls, data: Sequence[Mapping]) -> Schema:
        return cls.from_pairs((d["name"], d["kind"]) for d in data)

    def coerce(self, values: Sequence[Value] | Mapping[str, Value]) -> Instance:
        """Normalize a mapping or positional sequence into a schema-ordered tuple.

        Missing entries (absent keys, None, empty strings) become None; the
        explanation code treats them as satisfying no predicate.
        """
        if isinstance(values, Mapping):
            raw = [values.get(name) for name in self.names]
        else:
            if len(values) != len(self.features):
                raise DataError(
                    f"instance has {len(values)} values, schema has {len(self.features)}"
                )
            raw = list(values)
        out: list[Value] = []
        for feature, value in zip(self.features, raw):
            if value is None or (isinstance(value, str) and not value.strip()):
                out.append(None)
            elif feature.is_numeric:
                if isinstance(value, str):
                    number = parse_number(value)
                    if number is None:
                        raise DataError(f"{feature.name}: cannot parse {value!r} as a number")
                    out.append(number)
                else:
                    number = float(value)
                    out.append(number if math.isfinite(number) else None)
            else:
                out.append(str(value).strip())
        return tuple(out)


class Dataset:
    """Column-oriented immutable table conforming to a :class:`Schema`.

    Numeric columns are float64 arrays, categorical columns are object arrays
    of stripped string tokens.
    """

    def __init__(self, schema: Schema, columns: Mapping[str, np.ndarray]):
        self.schema = schema
        cols: dict[str, np.ndarray] = {}
        n = None
        for feature in schema.features:
            if feature.name not in columns:
                raise DataError(f"missing column {feature.name!r}")
            col = np.asarray(columns[feature.name])
            if feature.is_numeric:
                col = col.astype(np.float64)
                if not np.all(np.isfinite(col)):
                    raise DataError(f"non-finite value in numeric column {feature.name!r}")
            else:
                col = np.array([str(v) for v in col], dtype=object)
            if n is None:
                n = len(col)
            elif len(col) != n:
                raise DataError("columns have different lengths")
            col.setflags(write=False)
            cols[feature.name] = col
        self._columns = cols
        self._n = n or 0

    @classmethod
    def from_rows(cls, schema: Schema, rows: Iterable[Sequence[Value]]) -> Dataset:
        rows = [schema.coerce(r) for r in rows]
        for i, row in enumerate(rows):
            if any(v is None for v in row):
                col = schema.names[[v is None for v in row].index(True)]
                raise DataError(f"row {i}: missing value in column {col!r}")
        columns = {
            f.name: np.array([r[j] for r in rows], dtype=np.float64 if f.is_numeric else object)
            for j, f in enumerate(schema.features)
        }
        return cls(schema, columns)

    def __len__(self) -> int:
        return self._n

    def column(self, name: str) -> np.ndarray:
        return self._columns[name]

    @property
    def columns(self) -> Mapping[str, np.ndarray]:
        return dict(self._columns)

    def row(self, i: int) -> Instance:
        out = []
        for f in self.schema.features:
            v = self._columns[f.name][i]
            out.append(float(v) if f.is_numeric else v)
        return tuple(out)

    def __iter__(self) -> Iterator[Instance]:
        for i in range(self._n):
            yield self.row(i)

    @property
    def rows(self) -> list[Instance]:
        return list(self)

    def take(self, indices: Sequence[int] | np.ndarray) -> Dataset:
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.schema, {k: v[idx] for k, v in self._columns.items()})

    def numeric_matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = self.schema.numeric if names is None else list(names)
        if not names:
            return np.empty((self._n, 0))
        return np.column_stack([self._columns[n] for n in names])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset) or other.schema != self.schema or len(other) != len(self):
            return False
        return all(np.array_equal(self._columns[n], other._columns[n]) for n in self.schema.names)

    def __repr__(self) -> str:
        return f"Dataset({len(self)} rows, features={self.schema.names})"


def infer_schema(header: Sequence[str], rows: Sequence[Sequence[str]]) -> Schema:
    """Infer feature kinds from raw CSV cells.

    A column is numeric iff every non-empty cell parses as a finite real.
    Columns with no non-empty cells are categorical.
    """
    if not rows:
        raise DataError("empty dataset")
    width = len(header)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"row {i}: expected {width} cells, got {len(row)}")
    pairs = []
    for j, name in enumerate(header):
        cells = [r[j] for r in rows if r[j].strip()]
        numeric = bool(cells) and all(parse_number(c) is not None for c in cells)
        pairs.append((name.strip(), NUMERIC if numeric else CATEGORICAL))
    return Schema.from_pairs(pairs)


def read_table(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: no header row") from None
        rows = [row for row in reader if row]
    return [h.strip() for h in header], rows


def _parse_rows(
    schema: Schema, header: Sequence[str], rows: Sequence[Sequence[str]]
) -> dict[str, np.ndarray]:
    positions = {}
    for f in schema.features:
        if f.name not in header:
            raise DataError(f"column {f.name!r} missing from header {list(header)}")
        positions[f.name] = list(header).index(f.name)
    columns: dict[str, list] = {f.name: [] for f in schema.features}
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {i}: expected {len(header)} cells, got {len(row)}")
        for f in schema.features:
            cell = row[positions[f.name]].strip()
            if not cell:
                raise DataError(f"row {i}, column {f.name!r}: missing value")
            if f.is_numeric:
                value = parse_number(cell)
                if value is None:
                    raise DataError(f"row {i}, column {f.name!r}: cannot parse {cell!r} as a number")
                columns[f.name].append(value)
            else:
                columns[f.name].append(cell)
    return {
        f.name: np.array(columns[f.name], dtype=np.float64 if f.is_numeric else object)
        for f in schema.features
    }


def load_csv(
    path: str | Path,
    schema: Schema | None = None,
    extra_columns: Sequence[str] = (),
) -> Dataset | tuple[Dataset, dict[str, list[str]]]:
    """Read a CSV with a header row into a :class:`Dataset`.

    Args:
        path: CSV file (comma-delimited, quoting allowed).
        schema: Expected schema. Inferred from the cells when omitted; columns
            named in ``extra_columns`` are excluded from inference.
        extra_columns: Columns to return raw alongside the dataset (labels,
            ids). When non-empty the return value is ``(dataset, extras)``.

    Raises:
        DataError: on empty data, ragged rows, missing cells, or cells that do
            not parse under the schema. Messages carry row and column.
    """
    header, rows = read_table(path)
    if not rows:
        raise DataError("empty dataset")
    for name in extra_columns:
        if name not in header:
            raise DataError(f"column {name!r} missing from header {header}")
    if schema is None:
        keep = [j for j, h in enumerate(header) if h not in extra_columns]
        for i, row in enumerate(rows):
            if len(row) != len(header):
                raise DataError(f"row {i}: expected {len(header)} cells, got {len(row)}")
        schema = infer_schema([header[j] for j in keep], [[r[j] for j in keep] for r in rows])
    dataset = Dataset(schema, _parse_rows(schema, header, rows))
    if not extra_columns:
        return dataset
    extras = {name: [r[header.index(name)].strip() for r in rows] for name in extra_columns}
    return dataset, extras


def write_csv(dataset: Dataset, path: str | Path, extra_columns: Mapping[str, Sequence] | None = None) -> None:
    extra_columns = dict(extra_columns or {})
    names = dataset.schema.names
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + list(extra_columns))
        for i, row in enumerate(dataset):
            cells = [
                format_number(v) if f.is_numeric else v
                for f, v in zip(dataset.schema.features, row)
            ]
            cells += [str(col[i]) for col in extra_columns.values()]
            writer.writerow(cells)


def load_schema(path: str | Path) -> Schema:
    """Read a ``name,kind`` sidecar file (a header line is optional)."""
    pairs = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise DataError(f"{path}: schema lines must be 'name,kind', got {row}")
            name, kind = row[0].strip(), row[1].strip().lower()
            if (name, kind) == ("name", "kind"):
                continue
            pairs.append((name, kind))
    return Schema.from_pairs(pairs)


def write_schema(schema: Schema, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "kind"])
        for f in schema.features:
            writer.writerow([f.name, f.kind])


def split(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle split into (train, test).

    ``|train| = round(train_fraction * n)`` with halves rounded up, clamped so
    that neither part is empty.
    """
    train_idx, test_idx = split_indices(len(dataset), train_fraction, seed)
    return dataset.take(train_idx), dataset.take(test_idx)


def split_indices(n: int, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if n < 2:
        raise DataError("need at least 2 rows to split")
    n_train = int(math.floor(train_fraction * n + 0.5))
    n_train = min(max(n_train, 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    return np.sort(order[:n_train]), np.sort(order[n_train:])
