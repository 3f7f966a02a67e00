"""Experiment configuration and its TOML file format.

A spec file looks like::

    name = "two_point"
    replicates = 1000
    seed = 20140101
    n_list = [100, 200, 300]
    level = 0.95

    [model]
    family = "two_point"
    a1 = 0.4
    a2 = 0.7
    kappa = 0.9          # or give p directly

    [t_max]
    rule = "largest_n"   # per_n | largest_n | fixed
    factor = 500.0

Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from ..env_models import EnvModel, make_model, solve_kappa, temkin_benchmark, two_point_benchmark

DEFAULT_N_LIST = tuple(100 * k for k in range(1, 11))

TOP_KEYS = {"name", "replicates", "seed", "n_list", "level", "theta0", "fresh_walk_per_n", "model", "t_max"}
MODEL_KEYS = {
    "two_point": {"family", "p", "a1", "a2", "kappa", "box"},
    "temkin": {"family", "a", "p", "kappa", "box"},
    "beta": {"family", "alpha", "beta", "box"},
}
TMAX_KEYS = {"rule", "factor", "value"}
TMAX_RULES = {"per_n", "largest_n", "fixed"}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class TMaxRule:
    """How the step cap is chosen for a target n.

    ``per_n``: ceil(factor * n^(1/kappa)) for each target.
    ``largest_n``: the per_n cap of the largest target, shared by all targets.
    ``fixed``: the constant ``value``.
    """

    rule: str = "largest_n"
    factor: float = 500.0
    value: int | None = None

    def cap(self, n: int, n_max: int, kappa: float) -> int:
        if self.rule == "fixed":
            return int(self.value)
        target = n if self.rule == "per_n" else n_max
        if not math.isfinite(kappa):
            kappa = 1.0
        return math.ceil(self.factor * target ** (1.0 / kappa))


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    model: EnvModel
    n_list: tuple[int, ...] = DEFAULT_N_LIST
    replicates: int = 1000
    seed: int = 0
    t_max: TMaxRule = field(default_factory=TMaxRule)
    theta0: tuple[float, ...] | None = None
    level: float = 0.95
    fresh_walk_per_n: bool = False

    def __post_init__(self):
        ns = tuple(int(n) for n in self.n_list)
        if not ns or any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n_list must be non-empty, positive and strictly increasing")
        object.__setattr__(self, "n_list", ns)
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.model.box is None:
            raise ConfigError("the model needs a parameter box")
        if not self.model.in_box(self.model.theta, interior=True):
            raise ConfigError("true parameter must lie in the interior of the box")
        if self.theta0 is not None:
            t0 = tuple(float(t) for t in self.theta0)
            if len(t0) != self.model.dim or not self.model.in_box(t0):
                raise ConfigError("theta0 must be a point of the box")
            object.__setattr__(self, "theta0", t0)
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie in (0, 1)")
        if self.t_max.rule not in TMAX_RULES:
            raise ConfigError(f"t_max rule must be one of {sorted(TMAX_RULES)}")
        if self.t_max.rule == "fixed" and (self.t_max.value is None or self.t_max.value < self.n_list[-1]):
            raise ConfigError("fixed t_max needs a value >= the largest n")

    @property
    def kappa(self) -> float:
        return solve_kappa(self.model)

    @property
    def theta_star(self) -> np.ndarray:
        return self.model.theta

    def reference(self) -> np.ndarray:
        return np.asarray(self.theta0) if self.theta0 is not None else self.model.box_center()

    def cap(self, n: int) -> int:
        return self.t_max.cap(n, self.n_list[-1], self.kappa)

    def with_overrides(self, **kw) -> "ExperimentSpec":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


def _check_keys(section: str, got: dict, allowed: set) -> None:
    extra = set(got) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(extra))}")


def build_model(cfg: dict) -> EnvModel:
    cfg = dict(cfg)
    family = cfg.get("family")
    if family not in MODEL_KEYS:
        raise ConfigError(f"model.family must be one of {sorted(MODEL_KEYS)}")
    _check_keys("[model]", cfg, MODEL_KEYS[family])
    box = cfg.pop("box", None)
    if box is not None:
        cfg["box"] = tuple(tuple(b) for b in box)
    kappa = cfg.pop("kappa", None)
    try:
        if kappa is not None:
            if family == "two_point" and "p" not in cfg:
                base = two_point_benchmark(kappa, cfg.get("a1", 0.4), cfg.get("a2", 0.7))
                cfg["p"] = base.p
            elif family == "temkin" and "p" not in cfg:
                cfg["p"] = temkin_benchmark(kappa, cfg["a"]).p
            else:
                raise ConfigError("give either kappa or p, not both")
        cfg.pop("family")
        return make_model(family, **cfg)
    except (TypeError, KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid model section: {exc}") from exc


def spec_from_dict(cfg: dict) -> ExperimentSpec:
    _check_keys("spec", cfg, TOP_KEYS)
    if "model" not in cfg or "name" not in cfg:
        raise ConfigError("spec needs 'name' and a [model] section")
    model = build_model(cfg["model"])
    tcfg = cfg.get("t_max", {})
    _check_keys("[t_max]", tcfg, TMAX_KEYS)
    kw = {k: cfg[k] for k in ("replicates", "seed", "n_list", "level", "fresh_walk_per_n") if k in cfg}
    if "theta0" in cfg:
        kw["theta0"] = tuple(cfg["theta0"])
    try:
        return ExperimentSpec(name=str(cfg["name"]), model=model, t_max=TMaxRule(**tcfg), **kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            cfg = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return spec_from_dict(cfg)
