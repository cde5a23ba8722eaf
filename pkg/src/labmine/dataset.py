"""Feature tables, stratified folds, percentage splits and table I/O.

All randomness goes through ``numpy.random.Generator`` seeded explicitly
(PCG64 bit generator), which is platform independent, so every fold plan and
split is reproducible from its seed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import IO, Sequence

import numpy as np

CLASS_COLUMN = "CLASS"
KEY_COLUMN = "P_ID"
CLASS_LABELS = (0, 1)  # 0 = alive, 1 = dead


class SchemaError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Patients x attributes matrix with a binary outcome (1 = dead).

    Arrays are copied and made read-only on construction, so a table can be
    shared freely between concurrent readers.
    """

    attribute_names: tuple[str, ...]
    keys: np.ndarray
    X: np.ndarray
    y: np.ndarray
    mode: str | None = None

    def __post_init__(self):
        names = tuple(str(n) for n in self.attribute_names)
        keys = np.asarray(self.keys, dtype=np.int64).reshape(-1)
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int8).reshape(-1)
        if X.ndim != 2:
            X = X.reshape(len(keys), len(names))
        if len(set(names)) != len(names):
            raise SchemaError("duplicate attribute names")
        if X.shape != (len(keys), len(names)):
            raise SchemaError(f"matrix shape {X.shape} does not match {len(keys)} rows x {len(names)} attributes")
        if len(y) != len(keys):
            raise SchemaError("class column length differs from row count")
        if len(y) and not np.isin(y, CLASS_LABELS).all():
            raise SchemaError("class labels must be 0 or 1")
        object.__setattr__(self, "attribute_names", names)
        object.__setattr__(self, "keys", _frozen(keys))
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def n_rows(self) -> int:
        return len(self.keys)

    @property
    def n_attributes(self) -> int:
        return len(self.attribute_names)

    def __len__(self) -> int:
        return self.n_rows

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureTable):
            return NotImplemented
        return (
            self.attribute_names == other.attribute_names
            and self.mode == other.mode
            and np.array_equal(self.keys, other.keys)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.X, other.X)
        )

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=2)

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.attribute_names.index(name)]

    def take(self, rows: Sequence[int] | np.ndarray) -> "FeatureTable":
        rows = np.asarray(rows, dtype=np.intp)
        return FeatureTable(self.attribute_names, self.keys[rows], self.X[rows], self.y[rows], self.mode)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray = field(repr=False)
    seed: int = 0

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


@dataclass(frozen=True)
class SplitPlan:
    train_fraction: float = 0.66
    repeats: int = 10
    seed: int = 1

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


def round_half_up(x: float | Decimal) -> int:
    return int(Decimal(str(x)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def stratified_folds(table: FeatureTable, k: int, seed: int) -> FoldPlan:
    """Assign rows to ``k`` folds preserving class proportions.

    Rows are shuffled, stably grouped by class, then dealt round-robin; per
    fold each class count is within one of ``n_c / k`` and fold sizes differ by
    at most one.
    """
    n = table.n_rows
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of rows ({n})")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    order = order[np.argsort(table.y[order], kind="stable")]
    assignments = np.empty(n, dtype=np.int64)
    assignments[order] = np.arange(n) % k
    return FoldPlan(k, _frozen(assignments), seed)


def shuffle_split(table: FeatureTable, plan: SplitPlan, repeat_index: int) -> tuple[FeatureTable, FeatureTable]:
    """Randomized train/test partition for one repeat of ``plan``."""
    if not 0 <= repeat_index < plan.repeats:
        raise ValueError(f"repeat_index {repeat_index} outside [0, {plan.repeats})")
    n = table.n_rows
    n_train = round_half_up(Decimal(str(plan.train_fraction)) * n)
    if n_train <= 0 or n_train >= n:
        raise ValueError(f"split of {n} rows at {plan.train_fraction} leaves an empty side")
    rng = np.random.default_rng([plan.seed, repeat_index])
    order = rng.permutation(n)
    return table.take(np.sort(order[:n_train])), table.take(np.sort(order[n_train:]))


def project_columns(table: FeatureTable, keep: Sequence[str]) -> FeatureTable:
    keep = [str(k) for k in keep]
    if not keep:
        raise ValueError("projection must keep at least one attribute")
    index = {name: j for j, name in enumerate(table.attribute_names)}
    unknown = [k for k in keep if k not in index]
    if unknown:
        raise KeyError(f"unknown attributes: {', '.join(unknown[:10])}")
    cols = [index[k] for k in keep]
    return FeatureTable(keep, table.keys, table.X[:, cols], table.y, table.mode)


# ---------------------------------------------------------------------------
# serialization

def _fmt(x: float) -> str:
    return repr(float(x))


def _text(stream):
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8", newline="")


def write_table(table: FeatureTable, stream: IO[str], fmt: str = "csv", comments: Sequence[str] = ()) -> None:
    """Write ``table`` as delimited text (``csv``) or attribute-relation text (``arff``).

    Values are written with ``repr`` so they read back bit-identical.
    """
    if fmt == "csv":
        for c in comments:
            stream.write(f"# {c}\n")
        w = csv.writer(stream, lineterminator="\n")
        w.writerow([KEY_COLUMN, *table.attribute_names, CLASS_COLUMN])
        for key, row, label in zip(table.keys, table.X, table.y):
            w.writerow([int(key), *map(_fmt, row), int(label)])
    elif fmt == "arff":
        for c in comments:
            stream.write(f"% {c}\n")
        stream.write(f"@relation labmine-{table.mode or 'table'}\n\n")
        stream.write(f"@attribute {KEY_COLUMN} numeric\n")
        for name in table.attribute_names:
            stream.write(f"@attribute '{name}' numeric\n")
        stream.write(f"@attribute {CLASS_COLUMN} {{0,1}}\n\n@data\n")
        for key, row, label in zip(table.keys, table.X, table.y):
            stream.write(",".join([str(int(key)), *map(_fmt, row), str(int(label))]) + "\n")
    else:
        raise ValueError(f"unknown table format {fmt!r}")


def _parse_rows(lines, names):
    width = len(names) + 2
    keys, rows, labels = [], [], []
    for lineno, fields in lines:
        if len(fields) != width:
            raise SchemaError(f"line {lineno}: expected {width} fields, found {len(fields)}")
        try:
            keys.append(int(fields[0]))
            rows.append([float(v) for v in fields[1:-1]])
            label = int(fields[-1])
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from None
        if label not in CLASS_LABELS:
            raise SchemaError(f"line {lineno}: class label must be 0 or 1, got {label}")
        labels.append(label)
    X = np.array(rows, dtype=np.float64).reshape(len(keys), len(names))
    return keys, X, labels


def read_table(stream: IO[str], fmt: str = "csv", mode: str | None = None) -> FeatureTable:
    if fmt == "csv":
        stamped: dict[str, str] = {}

        def numbered_rows():
            for lineno, row in enumerate(csv.reader(stream), start=1):
                if row and row[0].startswith("#"):
                    key, sep, value = ",".join(row)[1:].strip().partition("=")
                    if sep:
                        stamped[key.strip()] = value.strip()
                elif row:
                    yield lineno, row

        numbered = numbered_rows()
        first = next(numbered, None)
        if first is None:
            raise SchemaError("line 1: missing header")
        lineno, header = first
        if header[0] != KEY_COLUMN:
            raise SchemaError(f"line {lineno}: first column must be {KEY_COLUMN}")
        if header[-1] != CLASS_COLUMN or len(header) < 2:
            raise SchemaError(f"line {lineno}: missing class column {CLASS_COLUMN}")
        names = header[1:-1]
        keys, X, y = _parse_rows(numbered, names)
        # a "# mode=avg" comment line, as written by the CLI, records the encoding
        return FeatureTable(names, keys, X, y, mode or stamped.get("mode"))
    if fmt == "arff":
        names: list[str] = []
        relation_mode = None
        saw_key = saw_class = False
        data_lines = []
        in_data = False
        for lineno, raw in enumerate(stream, start=1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            if in_data:
                data_lines.append((lineno, line.split(",")))
                continue
            low = line.lower()
            if low.startswith("@relation"):
                rel = line.split(None, 1)[1] if " " in line else ""
                if rel.startswith("labmine-") and rel[8:] in ("avg", "count"):
                    relation_mode = rel[8:]
            elif low.startswith("@attribute"):
                body = line[len("@attribute"):].strip()
                if body.startswith("'"):
                    name, rest = body[1:].split("'", 1)
                else:
                    name, rest = body.split(None, 1)
                if saw_class:
                    raise SchemaError(f"line {lineno}: attribute after class column")
                if name == KEY_COLUMN and not saw_key and not names:
                    saw_key = True
                elif name == CLASS_COLUMN:
                    saw_class = True
                else:
                    names.append(name)
            elif low.startswith("@data"):
                if not saw_key:
                    raise SchemaError(f"line {lineno}: missing key attribute {KEY_COLUMN}")
                if not saw_class:
                    raise SchemaError(f"line {lineno}: missing class column {CLASS_COLUMN}")
                in_data = True
            else:
                raise SchemaError(f"line {lineno}: unexpected header line")
        if not in_data:
            raise SchemaError("missing @data section")
        keys, X, y = _parse_rows(data_lines, names)
        return FeatureTable(names, keys, X, y, mode or relation_mode)
    raise ValueError(f"unknown table format {fmt!r}")


def table_format_for(path: str) -> str:
    return "arff" if str(path).lower().endswith(".arff") else "csv"
