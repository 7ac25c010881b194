"""Append-only store of per-iteration metric records and its CSV form."""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

from ..ampute import MECHANISMS
from ..classify import MODEL_KINDS
from ..fairness import METRICS
from ..impute import HANDLERS

CSV_COLUMNS = ("iteration", "mechanism", "handler", "model", "sensitive", "metric", "value", "defined")
BASELINE_COLUMNS = ("model", "sensitive", "metric", "n", "mean", "sd")


def fmt(value: float) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    return format(float(value), ".12g")


@dataclass(frozen=True)
class FairnessRecord:
    iteration: int
    mechanism: str
    handler: str
    model: str
    sensitive: str
    metric: str
    value: float
    defined: bool = True

    def cell(self) -> tuple[str, str, str]:
        return (self.mechanism, self.handler, self.model)

    def sort_key(self) -> tuple:
        return (
            self.iteration,
            _rank(MECHANISMS, self.mechanism),
            _rank(HANDLERS, self.handler),
            _rank(MODEL_KINDS, self.model),
            self.sensitive,
            _rank(METRICS, self.metric),
        )


def _rank(order: tuple, value: str) -> tuple[int, str]:
    return (order.index(value), "") if value in order else (len(order), value)


@dataclass(frozen=True)
class BaselineRecord:
    model: str
    sensitive: str
    metric: str
    n: int
    mean: float
    sd: float


class ResultsStore:
    def __init__(self, records: Iterable[FairnessRecord] = ()):
        self.records: list[FairnessRecord] = list(records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ResultsStore):
            return NotImplemented
        if len(self) != len(other):
            return False
        for a, b in zip(self.sorted().records, other.sorted().records):
            if a.sort_key() != b.sort_key() or a.defined != b.defined:
                return False
            if a.defined and fmt(a.value) != fmt(b.value):
                return False
        return True

    def extend(self, records: Iterable[FairnessRecord]) -> None:
        self.records.extend(records)

    def sorted(self) -> ResultsStore:
        return ResultsStore(sorted(self.records, key=FairnessRecord.sort_key))

    def values(self, field_name: str) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.records:
            seen.setdefault(getattr(r, field_name), None)
        return list(seen)

    def filter(self, **criteria) -> ResultsStore:
        def keep(r: FairnessRecord) -> bool:
            for k, v in criteria.items():
                if v is None:
                    continue
                allowed = v if isinstance(v, (list, tuple, set, frozenset)) else (v,)
                if getattr(r, k) not in allowed:
                    return False
            return True

        return ResultsStore(r for r in self.records if keep(r))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.sorted():
                w.writerow([
                    r.iteration, r.mechanism, r.handler, r.model, r.sensitive, r.metric,
                    fmt(r.value) if r.defined else "nan", int(r.defined),
                ])

    @classmethod
    def from_csv(cls, path: str | Path) -> ResultsStore:
        out = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
                raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
            for row in reader:
                defined = row["defined"] == "1"
                out.append(FairnessRecord(
                    int(row["iteration"]), row["mechanism"], row["handler"], row["model"],
                    row["sensitive"], row["metric"],
                    float(row["value"]) if defined else math.nan, defined,
                ))
        return cls(out)


def baseline_to_csv(records: Iterable[BaselineRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BASELINE_COLUMNS)
        for r in records:
            w.writerow([r.model, r.sensitive, r.metric, r.n, fmt(r.mean), fmt(r.sd)])


def baseline_from_csv(path: str | Path) -> list[BaselineRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            BaselineRecord(row["model"], row["sensitive"], row["metric"], int(row["n"]),
                           float(row["mean"]), float(row["sd"]))
            for row in csv.DictReader(fh)
        ]
