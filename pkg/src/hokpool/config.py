"""Run configuration: a JSON document validated against ``schemas/run_config.schema.json``."""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources

import jsonschema

from .errors import ConfigError, HokError
from .pooling import HokConfig

DESCRIPTORS = ("hok", "second_order", "average", "hok+second_order")


def load_schema(name: str) -> dict:
    text = resources.files("hokpool").joinpath("schemas").joinpath(name).read_text()
    return json.loads(text)


@dataclass(frozen=True)
class PivotConfig:
    k_f: int = 48
    k_t: int = 5
    sigma_t: float = 0.1
    gmm_max_iters: int = 100


@dataclass(frozen=True)
class SecondOrderConfig:
    sigma: float = 0.1
    epsilon: float = 1e-6


@dataclass(frozen=True)
class ClassifierConfig:
    lam: float = 1e-2
    epochs: int = 300


@dataclass(frozen=True)
class OutputConfig:
    dir: str | None = None


@dataclass(frozen=True)
class RunConfig:
    descriptor: str = "hok"
    hok: HokConfig = field(default_factory=HokConfig)
    pivots: PivotConfig = field(default_factory=PivotConfig)
    second_order: SecondOrderConfig = field(default_factory=SecondOrderConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    folds: int = 3
    seed: int = 0
    threads: int = 1
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        try:
            jsonschema.validate(doc, load_schema("run_config.schema.json"))
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {where}: {exc.message}") from None
        doc = copy.deepcopy(doc)
        try:
            return cls(
                descriptor=doc.get("descriptor", "hok"),
                hok=HokConfig(**doc.get("hok", {})),
                pivots=PivotConfig(**doc.get("pivots", {})),
                second_order=SecondOrderConfig(**doc.get("second_order", {})),
                classifier=ClassifierConfig(**doc.get("classifier", {})),
                folds=doc.get("folds", 3),
                seed=doc.get("seed", 0),
                threads=doc.get("threads", 1),
                output=OutputConfig(**doc.get("output", {})),
            )
        except HokError as exc:
            raise ConfigError(f"config invalid: {exc}") from None

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **kw) -> "RunConfig":
        """Shallow ``replace`` that also accepts ``hok__alpha=...`` style nested keys."""
        nested: dict[str, dict] = {}
        flat = {}
        for key, value in kw.items():
            if "__" in key:
                part, sub = key.split("__", 1)
                nested.setdefault(part, {})[sub] = value
            else:
                flat[key] = value
        try:
            for part, subs in nested.items():
                flat[part] = replace(getattr(self, part), **subs)
            cfg = replace(self, **flat)
        except (HokError, TypeError) as exc:
            raise ConfigError(f"invalid override: {exc}") from None
        # round-trip through the schema so overrides get the same checks as files
        return RunConfig.from_dict(cfg.to_dict())


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return RunConfig.from_dict(doc)
