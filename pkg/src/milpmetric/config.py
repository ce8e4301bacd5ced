"""Run configuration: a JSON document whose keys mirror the command-line flags."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .models import FitParams
from .solver import SolverParams

REPORT_VERSION = "1.0"

# run-level keys besides the nested "fit" and "solver" sections
_RUN_KEYS = {
    "command", "data", "train", "test", "metric", "label_column", "format", "seed", "out",
    "report_version", "radius", "max_iters", "train_fraction", "exclude_outliers",
    "synth", "export", "output", "test_rule", "train_size", "test_size",
}
_SYNTH_KEYS = {"kind", "per_class", "noise", "n_classes", "flips", "gap"}
_EXPORT_KEYS = {"what"}


@dataclass
class RunConfig:
    command: str = "fit"
    data: str | None = None
    train: str | None = None
    test: str | None = None
    metric: str | None = None
    label_column: str = "-1"
    format: str = "auto"
    seed: int = 0
    out: str = "out"
    report_version: str = REPORT_VERSION
    radius: float = 0.05
    max_iters: int = 3
    train_fraction: float | None = None
    train_size: int | None = None
    test_size: int | None = None
    exclude_outliers: bool = False
    synth: dict = field(default_factory=dict)
    export: dict = field(default_factory=dict)
    output: str | None = None
    test_rule: str = "chord"
    fit: FitParams = field(default_factory=FitParams)
    solver: SolverParams = field(default_factory=lambda: SolverParams(deterministic=False))

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("fit", "solver")}
        d["fit"] = self.fit.to_dict()
        d["solver"] = self.solver.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - _RUN_KEYS - {"fit", "solver"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = {k: v for k, v in d.items() if k in _RUN_KEYS}
        for key, allowed in (("synth", _SYNTH_KEYS), ("export", _EXPORT_KEYS)):
            bad = set(kw.get(key, {})) - allowed
            if bad:
                raise ValueError(f"unknown {key} keys: {sorted(bad)}")
        cfg = cls(**kw)
        cfg.fit = _strict(FitParams, d.get("fit", {}), "fit")
        cfg.solver = _strict(SolverParams, {"deterministic": False, **d.get("solver", {})},
                             "solver")
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def with_overrides(self, run: dict, fit: dict, solver: dict) -> "RunConfig":
        """Apply flag values (None entries are ignored) on top of this config."""
        cfg = replace(self, **{k: v for k, v in run.items() if v is not None})
        fkw = {k: v for k, v in fit.items() if v is not None}
        skw = {k: v for k, v in solver.items() if v is not None}
        cfg.fit = replace(self.fit, **fkw)
        cfg.solver = replace(self.solver, **skw)
        return cfg


def _strict(cls, d: dict, section: str):
    names = {f.name for f in fields(cls)}
    bad = set(d) - names
    if bad:
        raise ValueError(f"unknown {section} keys: {sorted(bad)}")
    return cls(**d)


def config_echo(cfg: RunConfig) -> dict:
    return json.loads(json.dumps(cfg.to_dict(), sort_keys=True))


__all__ = ["REPORT_VERSION", "RunConfig", "config_echo", "asdict"]
