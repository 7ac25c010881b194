"""Benchmark dataset schemas, loading, validation and a synthetic generator.

The three benchmark schemas (German credit, Adult income, COMPAS) live as JSON
files in ``fairmiss/schemas``. Data files are user supplied; see
``scripts/prepare_data.py`` for turning the raw public files into the headered
CSVs these schemas describe.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .table import (
    CATEGORICAL,
    DEFAULT_NA_TOKENS,
    NUMERIC,
    OUTCOME,
    PREDICTOR,
    SENSITIVE,
    ColumnSpec,
    Table,
    TableError,
    binarize_sensitive,
    complete_cases,
    load_csv,
    validate_schema,
)

DATASET_IDS = ("german", "adult", "compas", "synthetic")


@dataclass(frozen=True)
class DatasetSchema:
    id: str
    columns: tuple[ColumnSpec, ...]
    sensitive_variants: tuple[str, ...]
    binarization: dict
    positive_outcome: str
    amputed_variables: tuple[str, ...]
    mar_dependency: str
    expected_rows: int | None = None
    expected_complete_rows: int | None = None
    expected_predictors: int | None = None
    default_iterations: int = 20
    na_tokens: frozenset[str] = DEFAULT_NA_TOKENS
    description: str = ""

    def __post_init__(self):
        validate_schema(self.columns)
        by_name = {c.name: c for c in self.columns}
        for v in self.sensitive_variants:
            if by_name.get(v) is None or by_name[v].role != SENSITIVE:
                raise TableError(f"{self.id}: sensitive variant {v!r} is not a sensitive column")
        if len(self.amputed_variables) > 2:
            raise TableError(f"{self.id}: at most two amputed variables")
        for v in self.amputed_variables:
            if v not in by_name or by_name[v].role != PREDICTOR:
                raise TableError(f"{self.id}: amputed variable {v!r} must be a predictor")
        if self.mar_dependency not in self.sensitive_variants:
            raise TableError(f"{self.id}: mar_dependency must be a sensitive variant")
        outcome = by_name[self.outcome]
        if outcome.is_categorical and self.positive_outcome not in outcome.levels:
            raise TableError(f"{self.id}: positive outcome {self.positive_outcome!r} not a level")

    @property
    def outcome(self) -> str:
        return next(c.name for c in self.columns if c.role == OUTCOME)

    @property
    def predictors(self) -> list[str]:
        return [c.name for c in self.columns if c.role != OUTCOME]

    @classmethod
    def from_dict(cls, d: dict) -> DatasetSchema:
        return cls(
            id=d["id"],
            columns=tuple(ColumnSpec.from_dict(c) for c in d["columns"]),
            sensitive_variants=tuple(d["sensitive_variants"]),
            binarization=d.get("binarization", {}),
            positive_outcome=str(d["positive_outcome"]),
            amputed_variables=tuple(d["amputed_variables"]),
            mar_dependency=d["mar_dependency"],
            expected_rows=d.get("expected_rows"),
            expected_complete_rows=d.get("expected_complete_rows"),
            expected_predictors=d.get("expected_predictors"),
            default_iterations=d.get("default_iterations", 20),
            na_tokens=frozenset(d.get("na_tokens", DEFAULT_NA_TOKENS)),
            description=d.get("description", ""),
        )


def load_schema_file(path: str | Path) -> DatasetSchema:
    with open(path, encoding="utf-8") as fh:
        return DatasetSchema.from_dict(json.load(fh))


@lru_cache(maxsize=None)
def schema_for(dataset_id: str) -> DatasetSchema:
    if dataset_id == "synthetic":
        return SYNTHETIC_SCHEMA
    if dataset_id not in DATASET_IDS:
        raise KeyError(f"unknown dataset {dataset_id!r}; expected one of {DATASET_IDS}")
    text = resources.files("fairmiss.schemas").joinpath(f"{dataset_id}.json").read_text("utf-8")
    return DatasetSchema.from_dict(json.loads(text))


def load_dataset(schema: DatasetSchema, path: str | Path) -> Table:
    """Load a raw data file, drop incomplete rows and binarize the sensitive columns."""
    raw = load_csv(path, schema.columns, schema.na_tokens)
    return prepare_table(raw, schema)


def prepare_table(raw: Table, schema: DatasetSchema) -> Table:
    t = complete_cases(raw)
    rules = {k: v for k, v in schema.binarization.items()}
    return binarize_sensitive(t, rules) if rules else t


def outcome_labels(t: Table, schema: DatasetSchema) -> np.ndarray:
    """Binary outcome vector with 1 for the schema's positive outcome."""
    spec = t.spec(schema.outcome)
    col = t[schema.outcome]
    if spec.is_categorical:
        return (col == spec.code_of(schema.positive_outcome)).astype(np.int64)
    return (col == float(schema.positive_outcome)).astype(np.int64)


# -- validation ---------------------------------------------------------------


@dataclass
class ValidationReport:
    n_rows: int
    expected_rows: int | None
    missing_by_column: dict[str, int]
    incomplete_rows: int
    level_violations: list[tuple[int, str, str]] = field(default_factory=list)
    numeric_violations: list[tuple[int, str, str]] = field(default_factory=list)
    missing_columns: list[str] = field(default_factory=list)
    incomplete_protected: dict[str, int] = field(default_factory=dict)

    @property
    def n_violations(self) -> int:
        return (
            len(self.level_violations)
            + len(self.numeric_violations)
            + len(self.missing_columns)
            + sum(self.incomplete_protected.values())
        )

    @property
    def ok(self) -> bool:
        rows_ok = self.expected_rows is None or self.expected_rows == self.n_rows
        return rows_ok and self.n_violations == 0

    def to_dict(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "expected_rows": self.expected_rows,
            "incomplete_rows": self.incomplete_rows,
            "missing_by_column": self.missing_by_column,
            "level_violations": [list(v) for v in self.level_violations],
            "numeric_violations": [list(v) for v in self.numeric_violations],
            "missing_columns": self.missing_columns,
            "incomplete_protected": self.incomplete_protected,
            "ok": self.ok,
        }

    def render(self) -> str:
        lines = [f"rows: {self.n_rows}" + (f" (expected {self.expected_rows})" if self.expected_rows else "")]
        lines.append(f"rows with missing values: {self.incomplete_rows}")
        for col, k in self.missing_by_column.items():
            if k:
                lines.append(f"  {col}: {k} missing")
        for row, col, val in self.level_violations[:20]:
            lines.append(f"  line {row}: unknown level {val!r} in {col}")
        for row, col, val in self.numeric_violations[:20]:
            lines.append(f"  line {row}: unparseable number {val!r} in {col}")
        for col in self.missing_columns:
            lines.append(f"  missing column {col}")
        for col, k in self.incomplete_protected.items():
            if k:
                lines.append(f"  {col}: {k} missing values in a protected column")
        lines.append("OK" if self.ok else "PROBLEMS FOUND")
        return "\n".join(lines)


def validate_dataset(source: Table | str | Path, schema: DatasetSchema) -> ValidationReport:
    """Non-fatal check of a table or raw data file against a schema."""
    if isinstance(source, Table):
        miss = source.missing_count()
        return ValidationReport(
            n_rows=source.n_rows,
            expected_rows=None,
            missing_by_column=miss,
            incomplete_rows=int((~source.row_observed()).sum()),
            incomplete_protected={
                c.name: miss.get(c.name, 0) for c in schema.columns if c.role != PREDICTOR
            },
        )
    return _validate_file(Path(source), schema)


def _validate_file(path: Path, schema: DatasetSchema) -> ValidationReport:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        specs = [c for c in schema.columns if c.name in header]
        missing_cols = [c.name for c in schema.columns if c.name not in header]
        pos = {c.name: header.index(c.name) for c in specs}
        miss = {c.name: 0 for c in schema.columns}
        levels, numerics = [], []
        n = incomplete = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            n += 1
            row_missing = False
            for spec in specs:
                raw = row[pos[spec.name]].strip() if pos[spec.name] < len(row) else ""
                if raw in schema.na_tokens:
                    miss[spec.name] += 1
                    row_missing = True
                elif spec.kind == CATEGORICAL and raw not in spec.levels:
                    levels.append((lineno, spec.name, raw))
                elif spec.kind == NUMERIC:
                    try:
                        float(raw)
                    except ValueError:
                        numerics.append((lineno, spec.name, raw))
            incomplete += row_missing
    return ValidationReport(
        n_rows=n,
        expected_rows=schema.expected_rows,
        missing_by_column=miss,
        incomplete_rows=incomplete,
        level_violations=levels,
        numeric_violations=numerics,
        missing_columns=missing_cols,
        incomplete_protected={c.name: miss[c.name] for c in schema.columns if c.role != PREDICTOR},
    )


# -- synthetic data -----------------------------------------------------------

SYNTHETIC_SCHEMA = DatasetSchema(
    id="synthetic",
    columns=(
        ColumnSpec("s", NUMERIC, SENSITIVE),
        ColumnSpec("x1", NUMERIC),
        ColumnSpec("x2", NUMERIC),
        ColumnSpec("c", CATEGORICAL, levels=("a", "b", "c"), ordinal_encoding={"a": 0, "b": 1, "c": 2}),
        ColumnSpec("y", CATEGORICAL, OUTCOME, levels=("0", "1")),
    ),
    sensitive_variants=("s",),
    binarization={},
    positive_outcome="1",
    amputed_variables=("x1", "c"),
    mar_dependency="s",
)


def synth_classification(
    n: int,
    base_rate_privileged: float,
    base_rate_unprivileged: float,
    group_fraction: float,
    rng: np.random.Generator,
) -> Table:
    """Synthetic binary-outcome table following :data:`SYNTHETIC_SCHEMA`.

    Group sizes and positive counts are allocated exactly: ``round(n * group_fraction)``
    privileged rows and ``round(n_g * rate)`` positives in each group, shuffled.
    Predictors follow a linear link with the label::

        x1 = 1.5 * y + N(0, 1)
        x2 = -1.0 * y + 0.5 * s + N(0, 1)
        c  = "c" if x1 + N(0,1) > 1.5, "b" if > 0.5, else "a"
    """
    for p in (base_rate_privileged, base_rate_unprivileged, group_fraction):
        if not 0.0 <= p <= 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
    if n < 1:
        raise ValueError("n must be positive")
    n_priv = int(round(n * group_fraction))
    s = np.zeros(n)
    y = np.zeros(n, dtype=np.int64)
    order = rng.permutation(n)
    priv_rows, unpriv_rows = order[:n_priv], order[n_priv:]
    s[priv_rows] = 1.0
    for rows, rate in ((priv_rows, base_rate_privileged), (unpriv_rows, base_rate_unprivileged)):
        k = int(round(len(rows) * rate))
        y[rng.permutation(rows)[:k]] = 1
    x1 = 1.5 * y + rng.standard_normal(n)
    x2 = -1.0 * y + 0.5 * s + rng.standard_normal(n)
    latent = x1 + rng.standard_normal(n)
    c = np.where(latent > 1.5, 2, np.where(latent > 0.5, 1, 0))
    return Table(SYNTHETIC_SCHEMA.columns, {"s": s, "x1": x1, "x2": x2, "c": c, "y": y})
