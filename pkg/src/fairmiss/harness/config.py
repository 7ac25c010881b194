"""Experiment configuration, read from and written to JSON."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..ampute import MECHANISMS
from ..classify import DEFAULT_GRID, MODEL_KINDS
from ..datasets import schema_for
from ..impute import DEFAULT_K, HANDLERS


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    data_path: str | None = None
    sensitive: tuple[str, ...] = ()
    mar_dependency: str | None = None
    iterations: int | None = None
    seed: int = 0
    mechanisms: tuple[str, ...] = MECHANISMS
    handlers: tuple[str, ...] = HANDLERS
    models: tuple[str, ...] = MODEL_KINDS
    proportion: float = 0.5
    test_fraction: float = 1 / 3
    folds: int = 5
    knn_k: int = DEFAULT_K
    grids: dict = field(default_factory=dict)
    output_dir: str = "results"
    baseline: bool = False
    threads: int = 1
    max_failure_fraction: float = 0.2

    def __post_init__(self):
        sens = self.sensitive
        if isinstance(sens, str):
            sens = (sens,)
        schema = schema_for(self.dataset)
        sens = tuple(sens) or schema.sensitive_variants[:1]
        object.__setattr__(self, "sensitive", sens)
        for name in ("mechanisms", "handlers", "models"):
            val = getattr(self, name)
            object.__setattr__(self, name, (val,) if isinstance(val, str) else tuple(val))
        if self.iterations is None:
            object.__setattr__(self, "iterations", schema.default_iterations)
        if self.mar_dependency is None:
            object.__setattr__(self, "mar_dependency", schema.mar_dependency)
        self.validate()

    def validate(self) -> None:
        schema = schema_for(self.dataset)
        for s in self.sensitive:
            if s not in schema.sensitive_variants:
                raise ConfigError(f"{s!r} is not a sensitive variant of {self.dataset}")
        if self.mar_dependency not in schema.sensitive_variants:
            raise ConfigError(f"mar_dependency {self.mar_dependency!r} is not a sensitive variant")
        for name, allowed in (("mechanisms", MECHANISMS), ("handlers", HANDLERS), ("models", MODEL_KINDS)):
            vals = getattr(self, name)
            if not vals:
                raise ConfigError(f"{name} must not be empty")
            bad = [v for v in vals if v not in allowed]
            if bad:
                raise ConfigError(f"unknown {name}: {bad}")
            if len(set(vals)) != len(vals):
                raise ConfigError(f"duplicate {name}")
        if self.iterations < 2:
            raise ConfigError("iterations must be at least 2")
        if not 0 < self.proportion < 1:
            raise ConfigError("proportion must lie in (0, 1)")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")
        if self.knn_k < 1:
            raise ConfigError("knn_k must be at least 1")
        for kind in self.grids:
            if kind not in MODEL_KINDS:
                raise ConfigError(f"grid given for unknown model {kind!r}")

    def grid(self, kind: str) -> list[dict]:
        return list(self.grids.get(kind, DEFAULT_GRID[kind]))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("sensitive", "mechanisms", "handlers", "models"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def with_overrides(self, **kw) -> ExperimentConfig:
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
        fh.write("\n")
