"""Seeded iteration loop over the mechanism x handler x model grid.

Every random draw in iteration ``i`` comes from a stream derived from the
master seed and a fixed key (iteration, purpose, cell indices). Keys use each
factor level's position in the canonical level order, not in the config, so a
cell's numbers do not change when other cells are added or removed, and
iterations give the same records whether they run sequentially or in
separate worker processes.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import classify
from ..ampute import MECHANISMS, ampute, default_config
from ..classify import MODEL_KINDS, ClassifierError
from ..datasets import load_dataset, schema_for, validate_dataset
from ..fairness import METRICS, all_metrics
from ..impute import HANDLERS, HandlerKind, ImputationError, handle_missing
from ..table import Table, TableError, apply_indices, split
from .config import ExperimentConfig
from .store import BaselineRecord, FairnessRecord, ResultsStore

log = logging.getLogger(__name__)

# stream purposes
_SPLIT, _AMPUTE, _MODEL, _BASELINE = 0, 1, 2, 3


class ExperimentError(RuntimeError):
    pass


def stream(master: int, *key: int) -> np.random.Generator:
    """Independent generator for ``key`` under ``master``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master, spawn_key=key)))


@dataclass
class CellFailure:
    iteration: int
    mechanism: str
    handler: str
    model: str
    reason: str


@dataclass
class IterationResult:
    iteration: int
    records: list[FairnessRecord] = field(default_factory=list)
    failures: list[CellFailure] = field(default_factory=list)


@dataclass
class RunResult:
    store: ResultsStore
    failures: list[CellFailure]
    config: ExperimentConfig


def load_experiment_table(config: ExperimentConfig) -> Table:
    schema = schema_for(config.dataset)
    if config.data_path is None:
        raise ExperimentError(f"config for {config.dataset!r} has no data_path")
    report = validate_dataset(config.data_path, schema)
    if report.n_violations:
        raise ExperimentError(f"{config.data_path} failed validation:\n{report.render()}")
    if report.expected_rows is not None and report.n_rows != report.expected_rows:
        log.warning("%s has %d rows, schema expects %d", config.data_path, report.n_rows, report.expected_rows)
    return load_dataset(schema, config.data_path)


def _positive(config: ExperimentConfig) -> str:
    return schema_for(config.dataset).positive_outcome


def _metric_records(iteration, mech, handler, model, config, y_true, y_pred, test: Table):
    out = []
    for sens in config.sensitive:
        s = np.asarray(test[sens]).astype(np.int64)
        values = all_metrics(y_true, y_pred, s)
        for metric in METRICS:
            v = values[metric]
            out.append(FairnessRecord(iteration, mech, handler, model, sens, metric, v, not math.isnan(v)))
    return out


def _failed_records(iteration, mech, handler, model, config):
    return [
        FairnessRecord(iteration, mech, handler, model, sens, metric, math.nan, False)
        for sens in config.sensitive
        for metric in METRICS
    ]


def run_iteration(config: ExperimentConfig, table: Table, iteration: int) -> IterationResult:
    """All grid cells of one iteration, sharing one train/test split."""
    schema = schema_for(config.dataset)
    positive = _positive(config)
    res = IterationResult(iteration)
    idx = split(table, config.test_fraction, stream(config.seed, iteration, _SPLIT))
    train, test = apply_indices(table, idx)
    test_sum = test.checksum()
    y_test = classify.outcome_vector(test, positive)
    for mech in config.mechanisms:
        m = MECHANISMS.index(mech)
        acfg = default_config(mech, schema.amputed_variables, config.mar_dependency, config.proportion)
        amputed = ampute(train, acfg, stream(config.seed, iteration, _AMPUTE, m)).table
        for handler in config.handlers:
            h = HANDLERS.index(handler)
            try:
                repaired = handle_missing(amputed, HandlerKind(handler, config.knn_k))
            except (ImputationError, TableError) as exc:
                repaired, reason = None, f"{type(exc).__name__}: {exc}"
            for model in config.models:
                k = MODEL_KINDS.index(model)
                if repaired is None:
                    res.failures.append(CellFailure(iteration, mech, handler, model, reason))
                    res.records.extend(_failed_records(iteration, mech, handler, model, config))
                    continue
                rng = stream(config.seed, iteration, _MODEL, m, h, k)
                try:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", UserWarning)
                        fitted = classify.tune_and_fit(
                            model, repaired, config.grid(model), config.folds, rng, positive
                        )
                    y_pred = classify.predict(fitted, test)
                except (ClassifierError, ImputationError, TableError) as exc:
                    res.failures.append(
                        CellFailure(iteration, mech, handler, model, f"{type(exc).__name__}: {exc}")
                    )
                    res.records.extend(_failed_records(iteration, mech, handler, model, config))
                    continue
                res.records.extend(_metric_records(iteration, mech, handler, model, config, y_test, y_pred, test))
    if test.checksum() != test_sum:
        raise ExperimentError(f"iteration {iteration}: the test twin changed during the run")
    return res


def _run_worker(args):
    config, table, iteration = args
    return run_iteration(config, table, iteration)


def _map_iterations(config: ExperimentConfig, table: Table, fn):
    iters = range(config.iterations)
    if config.threads <= 1:
        for i in iters:
            yield fn((config, table, i))
        return
    with ProcessPoolExecutor(max_workers=config.threads) as pool:
        # map preserves submission order, so the merge is by iteration
        yield from pool.map(fn, [(config, table, i) for i in iters])


def run_experiment(config: ExperimentConfig, table: Table | None = None) -> RunResult:
    """Run every iteration of the grid and collect the records.

    A cell that fails (for example listwise deletion leaving a single outcome
    class) is stored as undefined records and logged; the run aborts once any
    cell has failed in more than ``max_failure_fraction`` of the iterations.
    """
    if table is None:
        table = load_experiment_table(config)
    store = ResultsStore()
    failures: list[CellFailure] = []
    lost: Counter = Counter()
    limit = config.max_failure_fraction * config.iterations
    for res in _map_iterations(config, table, _run_worker):
        store.extend(res.records)
        for f in res.failures:
            log.warning("iteration %d, cell %s/%s/%s failed: %s", f.iteration, f.mechanism, f.handler, f.model, f.reason)
            lost[(f.mechanism, f.handler, f.model)] += 1
        failures.extend(res.failures)
        worst = max(lost.values(), default=0)
        if worst > limit:
            cell = max(lost, key=lost.get)
            raise ExperimentError(
                f"cell {'/'.join(cell)} failed in {worst} of {config.iterations} iterations"
            )
        log.info("iteration %d done", res.iteration)
    return RunResult(store.sorted(), failures, config)


# -- baseline -------------------------------------------------------------------


def baseline_iteration(config: ExperimentConfig, table: Table, iteration: int) -> list[FairnessRecord]:
    """Models fitted on the complete training twin; same split as the experiment."""
    positive = _positive(config)
    idx = split(table, config.test_fraction, stream(config.seed, iteration, _SPLIT))
    train, test = apply_indices(table, idx)
    y_test = classify.outcome_vector(test, positive)
    out = []
    for model in config.models:
        rng = stream(config.seed, iteration, _BASELINE, MODEL_KINDS.index(model))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            fitted = classify.tune_and_fit(model, train, config.grid(model), config.folds, rng, positive)
        y_pred = classify.predict(fitted, test)
        out.extend(_metric_records(iteration, "none", "none", model, config, y_test, y_pred, test))
    return out


def _baseline_worker(args):
    config, table, iteration = args
    return baseline_iteration(config, table, iteration)


def run_baseline(config: ExperimentConfig, table: Table | None = None) -> list[BaselineRecord]:
    if table is None:
        table = load_experiment_table(config)
    records: list[FairnessRecord] = []
    for recs in _map_iterations(config, table, _baseline_worker):
        records.extend(recs)
    return summarize_baseline(records, config)


def summarize_baseline(records, config: ExperimentConfig) -> list[BaselineRecord]:
    out = []
    for model in config.models:
        for sens in config.sensitive:
            for metric in METRICS:
                vals = np.array([
                    r.value for r in records
                    if r.model == model and r.sensitive == sens and r.metric == metric and r.defined
                ])
                mean = float(vals.mean()) if vals.size else math.nan
                sd = float(vals.std(ddof=1)) if vals.size > 1 else math.nan
                out.append(BaselineRecord(model, sens, metric, int(vals.size), mean, sd))
    return out
