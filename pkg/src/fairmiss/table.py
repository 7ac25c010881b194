"""Mixed-type tabular data with a per-cell missingness mask.

Numeric columns are stored as ``float64`` arrays, categorical columns as
``int64`` codes indexing :attr:`ColumnSpec.levels`. Masked cells hold ``nan``
(numeric) or ``-1`` (categorical) so that nothing downstream can read a value
that is supposed to be missing. Tables are immutable: every operation returns
a new :class:`Table`.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"

PREDICTOR = "predictor"
SENSITIVE = "sensitive"
OUTCOME = "outcome"
ROLES = (PREDICTOR, SENSITIVE, OUTCOME)

DEFAULT_NA_TOKENS = frozenset({"", "?", "NA"})
MISSING_CODE = -1


class TableError(ValueError):
    """Raised for malformed tables, schemas or input files."""


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    role: str = PREDICTOR
    levels: tuple[str, ...] = ()
    ordinal_encoding: Mapping[str, float] | None = None

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise TableError(f"{self.name}: unknown kind {self.kind!r}")
        if self.role not in ROLES:
            raise TableError(f"{self.name}: unknown role {self.role!r}")
        object.__setattr__(self, "levels", tuple(self.levels))
        if self.kind == CATEGORICAL:
            if not self.levels:
                raise TableError(f"{self.name}: categorical column needs levels")
            if len(set(self.levels)) != len(self.levels):
                raise TableError(f"{self.name}: duplicate levels")
        elif self.levels:
            raise TableError(f"{self.name}: numeric column cannot declare levels")
        if self.ordinal_encoding is not None:
            missing = set(self.levels) - set(self.ordinal_encoding)
            if missing:
                raise TableError(f"{self.name}: ordinal_encoding misses {sorted(missing)}")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    def code_of(self, level: str) -> int:
        try:
            return self.levels.index(level)
        except ValueError:
            raise TableError(f"{self.name}: unknown level {level!r}") from None

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind, "role": self.role}
        if self.levels:
            out["levels"] = list(self.levels)
        if self.ordinal_encoding is not None:
            out["ordinal_encoding"] = dict(self.ordinal_encoding)
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> ColumnSpec:
        return cls(
            name=d["name"],
            kind=d["kind"],
            role=d.get("role", PREDICTOR),
            levels=tuple(d.get("levels", ())),
            ordinal_encoding=d.get("ordinal_encoding"),
        )


def validate_schema(schema: Sequence[ColumnSpec]) -> None:
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise TableError("duplicate column names in schema")
    roles = [c.role for c in schema]
    if roles.count(OUTCOME) != 1:
        raise TableError("schema needs exactly one outcome column")
    if SENSITIVE not in roles:
        raise TableError("schema needs at least one sensitive column")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Table:
    schema: tuple[ColumnSpec, ...]
    data: Mapping[str, np.ndarray]
    mask: Mapping[str, np.ndarray] = field(default=None)

    def __post_init__(self):
        schema = tuple(self.schema)
        object.__setattr__(self, "schema", schema)
        names = [c.name for c in schema]
        if len(set(names)) != len(names):
            raise TableError("duplicate column names")
        if set(self.data) != set(names):
            raise TableError("data columns do not match schema")
        mask = self.mask
        if mask is None:
            mask = {}
        data, fmask = {}, {}
        n = None
        for spec in schema:
            col = np.asarray(self.data[spec.name])
            if col.ndim != 1:
                raise TableError(f"{spec.name}: column must be 1-D")
            if n is None:
                n = len(col)
            elif len(col) != n:
                raise TableError(f"{spec.name}: column length {len(col)} != {n}")
            m = mask.get(spec.name)
            m = np.ones(n, dtype=bool) if m is None else np.asarray(m, dtype=bool)
            if m.shape != col.shape:
                raise TableError(f"{spec.name}: mask shape differs from data")
            if spec.is_categorical:
                col = col.astype(np.int64, copy=True)
                col[~m] = MISSING_CODE
                obs = col[m]
                if obs.size and (obs.min() < 0 or obs.max() >= len(spec.levels)):
                    raise TableError(f"{spec.name}: code outside declared levels")
            else:
                col = col.astype(np.float64, copy=True)
                col[~m] = np.nan
            if spec.role in (SENSITIVE, OUTCOME) and not m.all():
                raise TableError(f"{spec.name}: {spec.role} column must be fully observed")
            data[spec.name] = _frozen(col)
            fmask[spec.name] = _frozen(m)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "mask", fmask)
        object.__setattr__(self, "_n", 0 if n is None else n)

    # -- accessors -------------------------------------------------------
    @property
    def n_rows(self) -> int:
        return self._n

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.schema]

    def spec(self, name: str) -> ColumnSpec:
        for c in self.schema:
            if c.name == name:
                return c
        raise TableError(f"unknown column {name!r}")

    def columns_with_role(self, *roles: str) -> list[str]:
        return [c.name for c in self.schema if c.role in roles]

    @property
    def outcome(self) -> str:
        return self.columns_with_role(OUTCOME)[0]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]

    def decoded(self, name: str) -> list:
        """Column values as Python objects (level strings, floats, ``None`` if masked)."""
        spec = self.spec(name)
        col, m = self.data[name], self.mask[name]
        if spec.is_categorical:
            return [spec.levels[v] if ok else None for v, ok in zip(col, m)]
        return [float(v) if ok else None for v, ok in zip(col, m)]

    def mask_matrix(self, names: Iterable[str] | None = None) -> np.ndarray:
        names = self.names if names is None else list(names)
        if not names:
            return np.ones((self.n_rows, 0), dtype=bool)
        return np.column_stack([self.mask[c] for c in names])

    def row_observed(self, names: Iterable[str] | None = None) -> np.ndarray:
        return self.mask_matrix(names).all(axis=1)

    @property
    def is_complete(self) -> bool:
        return bool(all(m.all() for m in self.mask.values()))

    def missing_count(self) -> dict[str, int]:
        return {c: int((~m).sum()) for c, m in self.mask.items()}

    # -- construction ----------------------------------------------------
    def take(self, idx: Sequence[int] | np.ndarray) -> Table:
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_rows):
            raise TableError("row index out of range")
        return Table(
            self.schema,
            {c: v[idx] for c, v in self.data.items()},
            {c: m[idx] for c, m in self.mask.items()},
        )

    def with_columns(
        self,
        data: Mapping[str, np.ndarray],
        mask: Mapping[str, np.ndarray] | None = None,
        specs: Mapping[str, ColumnSpec] | None = None,
    ) -> Table:
        """Replace some columns (values, mask, and optionally their spec)."""
        specs = specs or {}
        mask = mask or {}
        schema = tuple(specs.get(c.name, c) for c in self.schema)
        new_data = dict(self.data)
        new_mask = dict(self.mask)
        for name, values in data.items():
            self.spec(name)
            new_data[name] = values
            new_mask[name] = mask.get(name, np.ones(len(values), dtype=bool))
        for name, m in mask.items():
            if name not in data:
                new_mask[name] = m
        return Table(schema, new_data, new_mask)

    def with_mask(self, mask: Mapping[str, np.ndarray]) -> Table:
        return self.with_columns({}, mask)

    def drop(self, names: Iterable[str]) -> Table:
        names = set(names)
        keep = tuple(c for c in self.schema if c.name not in names)
        return Table(
            keep,
            {c.name: self.data[c.name] for c in keep},
            {c.name: self.mask[c.name] for c in keep},
        )

    def equals(self, other: Table) -> bool:
        if self.schema != other.schema or self.n_rows != other.n_rows:
            return False
        for c in self.names:
            if not np.array_equal(self.mask[c], other.mask[c]):
                return False
            if not np.array_equal(self.data[c], other.data[c], equal_nan=True):
                return False
        return True

    def checksum(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for c in self.names:
            h.update(c.encode())
            h.update(self.data[c].tobytes())
            h.update(self.mask[c].tobytes())
        return h.hexdigest()

    def __repr__(self) -> str:
        miss = sum(self.missing_count().values())
        return f"Table(n_rows={self.n_rows}, columns={len(self.schema)}, missing_cells={miss})"


def from_values(
    schema: Sequence[ColumnSpec],
    values: Mapping[str, Sequence],
    na=None,
) -> Table:
    """Build a table from raw Python values; ``na`` (default ``None``) marks missing."""
    data, mask = {}, {}
    for spec in schema:
        raw = list(values[spec.name])
        m = np.array([not _is_na(v, na) for v in raw], dtype=bool)
        if spec.is_categorical:
            col = np.array(
                [spec.code_of(str(v)) if ok else MISSING_CODE for v, ok in zip(raw, m)],
                dtype=np.int64,
            )
        else:
            col = np.array([float(v) if ok else np.nan for v, ok in zip(raw, m)], dtype=float)
        data[spec.name], mask[spec.name] = col, m
    return Table(tuple(schema), data, mask)


def _is_na(v, na) -> bool:
    if v is None or v is na:
        return True
    return isinstance(v, float) and math.isnan(v)


# -- operations --------------------------------------------------------------


def load_csv(
    path: str | Path,
    schema: Sequence[ColumnSpec],
    na_tokens: Iterable[str] = DEFAULT_NA_TOKENS,
) -> Table:
    """Read a headered, comma-separated UTF-8 file into a :class:`Table`.

    Header order does not matter and unlisted columns are ignored. Cells equal
    to one of ``na_tokens`` (after stripping whitespace) become masked.
    """
    validate_schema(schema)
    na_tokens = frozenset(na_tokens)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TableError(f"{path}: empty file (no header)") from None
        pos = {}
        for spec in schema:
            if spec.name not in header:
                raise TableError(f"{path}: missing column {spec.name!r}")
            pos[spec.name] = header.index(spec.name)
        cells: dict[str, list] = {s.name: [] for s in schema}
        masks: dict[str, list] = {s.name: [] for s in schema}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            for spec in schema:
                raw = row[pos[spec.name]].strip() if pos[spec.name] < len(row) else ""
                if raw in na_tokens:
                    if spec.role != PREDICTOR:
                        raise TableError(
                            f"{path}:{lineno}: missing value in {spec.role} column {spec.name!r}"
                        )
                    cells[spec.name].append(MISSING_CODE if spec.is_categorical else np.nan)
                    masks[spec.name].append(False)
                    continue
                if spec.is_categorical:
                    if raw not in spec.levels:
                        raise TableError(f"{path}:{lineno}: unknown level {raw!r} in {spec.name!r}")
                    cells[spec.name].append(spec.levels.index(raw))
                else:
                    try:
                        cells[spec.name].append(float(raw))
                    except ValueError:
                        raise TableError(
                            f"{path}:{lineno}: cannot parse {raw!r} as number in {spec.name!r}"
                        ) from None
                masks[spec.name].append(True)
    data = {
        s.name: np.array(cells[s.name], dtype=np.int64 if s.is_categorical else np.float64)
        for s in schema
    }
    mask = {s.name: np.array(masks[s.name], dtype=bool) for s in schema}
    return Table(tuple(schema), data, mask)


def write_csv(t: Table, path: str | Path, na_token: str = "?") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(t.names)
        cols = [t.decoded(c) for c in t.names]
        for row in zip(*cols):
            w.writerow([na_token if v is None else (repr(v) if isinstance(v, float) else v) for v in row])


def complete_cases(t: Table) -> Table:
    """Rows with every cell observed, in original order."""
    return t.take(np.flatnonzero(t.row_observed()))


@dataclass(frozen=True)
class SplitIndices:
    train_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "train_idx", _frozen(np.asarray(self.train_idx, dtype=np.int64)))
        object.__setattr__(self, "test_idx", _frozen(np.asarray(self.test_idx, dtype=np.int64)))
        if np.intersect1d(self.train_idx, self.test_idx).size:
            raise TableError("train and test indices overlap")

    @property
    def n(self) -> int:
        return len(self.train_idx) + len(self.test_idx)


def split(t: Table | int, test_fraction: float, rng: np.random.Generator) -> SplitIndices:
    """Uniform random train/test partition with ``ceil(n * test_fraction)`` test rows.

    Both index vectors are returned sorted so row order is preserved within each side.
    """
    n = t if isinstance(t, int) else t.n_rows
    if not 0 < test_fraction < 1:
        raise TableError("test_fraction must lie in (0, 1)")
    if n < 2:
        raise TableError("need at least two rows to split")
    # ceil on a float product can overshoot for exact multiples (1000 * (1/3))
    n_test = min(n - 1, max(1, math.ceil(round(n * test_fraction, 9))))
    perm = rng.permutation(n)
    return SplitIndices(np.sort(perm[n_test:]), np.sort(perm[:n_test]))


def apply_indices(t: Table, idx: SplitIndices) -> tuple[Table, Table]:
    if idx.n and max(idx.train_idx.max(initial=-1), idx.test_idx.max(initial=-1)) >= t.n_rows:
        raise TableError("split index out of range for table")
    return t.take(idx.train_idx), t.take(idx.test_idx)


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    feature_names: tuple[str, ...]
    source: tuple[str, ...]  # originating table column for each feature
    numeric_features: np.ndarray  # bool, True where the feature is a pass-through numeric column


def one_hot_encode(t: Table, drop_roles: Iterable[str] = ()) -> DesignMatrix:
    """Numeric design matrix; a categorical column with L levels gives L-1 indicators.

    The first declared level is the reference. Columns whose role is in
    ``drop_roles`` are skipped.
    """
    drop_roles = set(drop_roles)
    blocks, names, source, is_num = [], [], [], []
    for spec in t.schema:
        if spec.role in drop_roles:
            continue
        if not t.mask[spec.name].all():
            raise TableError(f"cannot encode masked cells in {spec.name!r}")
        col = t.data[spec.name]
        if spec.is_categorical:
            for code, level in enumerate(spec.levels[1:], start=1):
                blocks.append((col == code).astype(np.float64))
                names.append(f"{spec.name}={level}")
                source.append(spec.name)
                is_num.append(False)
        else:
            blocks.append(col.astype(np.float64))
            names.append(spec.name)
            source.append(spec.name)
            is_num.append(True)
    X = np.column_stack(blocks) if blocks else np.empty((t.n_rows, 0))
    return DesignMatrix(X, tuple(names), tuple(source), np.array(is_num, dtype=bool))


def binarize_sensitive(t: Table, rules: Mapping[str, Mapping]) -> Table:
    """Recode sensitive columns to numeric 1 (privileged) / 0 (unprivileged).

    A rule is either ``{"privileged": [levels...], "unprivileged": [levels...]}``
    (``unprivileged`` may be ``"rest"``) for categorical columns, or
    ``{"threshold": x}`` for numeric ones, in which case values strictly above
    ``x`` are privileged. A column that is already 0/1 numeric with an empty
    rule ``{}`` is left alone.
    """
    data, specs = {}, {}
    for name, rule in rules.items():
        spec = t.spec(name)
        col = t.data[name]
        if "threshold" in rule:
            if spec.is_categorical:
                raise TableError(f"{name}: threshold rule needs a numeric column")
            out = (col > float(rule["threshold"])).astype(np.float64)
        elif "privileged" in rule:
            if not spec.is_categorical:
                raise TableError(f"{name}: level rule needs a categorical column")
            priv = set(rule["privileged"])
            unpriv = rule.get("unprivileged", "rest")
            lookup = np.full(len(spec.levels), -1.0)
            for code, level in enumerate(spec.levels):
                if level in priv:
                    lookup[code] = 1.0
                elif unpriv == "rest" or level in unpriv:
                    lookup[code] = 0.0
            out = lookup[col]
            if (out < 0).any():
                bad = sorted({spec.levels[c] for c in col[out < 0]})
                raise TableError(f"{name}: unmapped values {bad}")
        elif not rule:
            if spec.is_categorical or not np.isin(col, (0.0, 1.0)).all():
                raise TableError(f"{name}: identity rule needs a 0/1 numeric column")
            out = col
        else:
            raise TableError(f"{name}: unrecognised rule {dict(rule)!r}")
        data[name] = out
        specs[name] = ColumnSpec(name, NUMERIC, spec.role)
    return t.with_columns(data, {n: t.mask[n] for n in data}, specs)
