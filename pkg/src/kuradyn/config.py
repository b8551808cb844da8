"""Experiment configuration: flat key-path text files.

One run is described by one text file of ``key.path = value`` lines
(``#`` comments allowed).  Values are typed: booleans ``true``/``false``,
integers, floats, comma-separated float lists, strings.  Serialization
uses repr for floats, so parse -> format -> parse is the identity; the
echoed config in a run's output reproduces the run bit-exactly.

All times are seconds, all angles radians.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .graphs import GENERATORS, SkeletonGraph, build_graph, read_graph_file
from .integrate import IntegratorConfig, default_max_step


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; the message names the field."""


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (tuple, list)):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


def _parse_value(text: str):
    text = text.strip()
    if text == "":
        return None
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if "," in text:
        return tuple(float(p) for p in text.split(",") if p.strip())
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config_text(text: str) -> dict:
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _parse_value(value)
    return {k: v for k, v in out.items() if v is not None}


def format_config_flat(flat: dict) -> str:
    lines = [f"{key} = {_format_value(flat[key])}" for key in sorted(flat)]
    return "\n".join(lines) + "\n"


_MODELS = ("krw", "drc", "averaged")
_THETA0_KINDS = ("uniform", "cohesive", "fixed", "fixed_noise")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one run needs; serializable to and from flat key paths."""

    model: str = "krw"
    graph_generator: str = "triangle"
    graph_file: str | None = None
    graph_n: int | None = None
    graph_k: int | None = None
    graph_p: float | None = None
    graph_self_loops: bool | None = None
    graph_seed: int | None = None
    coupling: float = 1.0
    omega: float | tuple = 0.0
    n_walkers: int = 3
    epsilon: float = 1.0
    kappa: float = 1.0
    epsilons: tuple = ()  # sweep-epsilon rows, strictly decreasing
    horizon: float = 100.0
    trials: int = 10
    seed: int = 0
    theta0_kind: str = "cohesive"
    theta0_gamma: float = float(np.pi / 3)
    theta0_values: tuple = ()
    theta0_radius: float = 0.0
    integrator_method: str = "rk4"
    integrator_max_step: float | None = None  # None -> min(1e-2, epsilon/10)
    integrator_sample_interval: float = 0.1
    integrator_tolerance: float = 1e-9
    sync_tol: float = 1e-3
    sync_dwell: float = 10.0
    escape_radius: float = 0.1
    output_dir: str = "kuradyn-out"
    output_per_trial_csv: bool = False

    _FLAT_KEYS = {
        "model": "model",
        "graph_generator": "graph.generator",
        "graph_file": "graph.file",
        "graph_n": "graph.n",
        "graph_k": "graph.k",
        "graph_p": "graph.p",
        "graph_self_loops": "graph.self_loops",
        "graph_seed": "graph.seed",
        "coupling": "coupling",
        "omega": "omega",
        "n_walkers": "n_walkers",
        "epsilon": "epsilon",
        "kappa": "kappa",
        "epsilons": "epsilons",
        "horizon": "horizon",
        "trials": "trials",
        "seed": "seed",
        "theta0_kind": "theta0.kind",
        "theta0_gamma": "theta0.gamma",
        "theta0_values": "theta0.values",
        "theta0_radius": "theta0.radius",
        "integrator_method": "integrator.method",
        "integrator_max_step": "integrator.max_step",
        "integrator_sample_interval": "integrator.sample_interval",
        "integrator_tolerance": "integrator.tolerance",
        "sync_tol": "sync.tol",
        "sync_dwell": "sync.dwell",
        "escape_radius": "escape.radius",
        "output_dir": "output.dir",
        "output_per_trial_csv": "output.per_trial_csv",
    }

    def to_flat(self) -> dict:
        flat = {}
        for f in fields(self):
            if f.name.startswith("_"):
                continue
            value = getattr(self, f.name)
            if value is None or (isinstance(value, tuple) and not value):
                continue
            flat[self._FLAT_KEYS[f.name]] = value
        return flat

    def to_text(self) -> str:
        return format_config_flat(self.to_flat())

    @classmethod
    def from_flat(cls, flat: dict) -> "ExperimentConfig":
        reverse = {v: k for k, v in cls._FLAT_KEYS.items()}
        kwargs = {}
        for key, value in flat.items():
            if key not in reverse:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[reverse[key]] = value
        # single-element lists parse as scalars; normalize tuple fields
        for name in ("epsilons", "theta0_values"):
            if name in kwargs and isinstance(kwargs[name], (int, float)):
                kwargs[name] = (float(kwargs[name]),)
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls.from_flat(parse_config_text(text))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def validate(self) -> None:
        if self.model not in _MODELS:
            raise ConfigError(f"model: must be one of {_MODELS}, got {self.model!r}")
        if self.graph_file is None and self.graph_generator not in GENERATORS:
            raise ConfigError(
                f"graph.generator: unknown generator {self.graph_generator!r}"
            )
        if self.coupling <= 0:
            raise ConfigError(f"coupling: must be positive, got {self.coupling}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon: must be positive, got {self.epsilon}")
        if self.model == "drc" and self.kappa <= 0:
            raise ConfigError(f"kappa: must be positive, got {self.kappa}")
        if self.horizon < 0:
            raise ConfigError(f"horizon: must be nonnegative, got {self.horizon}")
        if self.trials < 0:
            raise ConfigError(f"trials: must be nonnegative, got {self.trials}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed: must be a 64-bit unsigned integer, got {self.seed}")
        if self.model in ("krw", "averaged") and self.n_walkers < 1:
            raise ConfigError(f"n_walkers: must be positive, got {self.n_walkers}")
        if self.theta0_kind not in _THETA0_KINDS:
            raise ConfigError(
                f"theta0.kind: must be one of {_THETA0_KINDS}, got {self.theta0_kind!r}"
            )
        if self.epsilons and any(
            b >= a for a, b in zip(self.epsilons, self.epsilons[1:])
        ):
            raise ConfigError("epsilons: must be strictly decreasing")
        if self.sync_tol <= 0:
            raise ConfigError(f"sync.tol: must be positive, got {self.sync_tol}")
        if self.sync_dwell < 0:
            raise ConfigError(f"sync.dwell: must be nonnegative, got {self.sync_dwell}")
        if self.escape_radius <= 0:
            raise ConfigError(f"escape.radius: must be positive, got {self.escape_radius}")
        self.integrator(self.epsilon)  # surfaces bad integrator fields

    def build_graph(self) -> SkeletonGraph:
        if self.graph_file is not None:
            g = read_graph_file(self.graph_file)
        else:
            params = {}
            if self.graph_n is not None:
                params["n"] = self.graph_n
            if self.graph_k is not None:
                params["k"] = self.graph_k
            if self.graph_p is not None:
                params["p"] = self.graph_p
            if self.graph_self_loops is not None:
                params["self_loops"] = self.graph_self_loops
            if self.graph_seed is not None:
                params["seed"] = self.graph_seed
            try:
                g = build_graph(self.graph_generator, **params)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"graph: {exc}") from exc
        if self.model == "krw" and not g.has_all_self_loops:
            raise ConfigError(
                "graph: the walker model requires a self-loop on every vertex "
                "(set graph.self_loops = true or add diagonal weights)"
            )
        return g

    def integrator(self, epsilon: float) -> IntegratorConfig:
        max_step = (
            self.integrator_max_step
            if self.integrator_max_step is not None
            else default_max_step(epsilon)
        )
        try:
            return IntegratorConfig(
                max_step=max_step,
                sample_interval=self.integrator_sample_interval,
                method=self.integrator_method,
                tolerance=self.integrator_tolerance,
            )
        except ValueError as exc:
            raise ConfigError(f"integrator: {exc}") from exc

    def theta0_sampler(self, n: int):
        from .analysis import Theta0Sampler

        values = tuple(self.theta0_values) if self.theta0_values else None
        try:
            return Theta0Sampler(
                kind=self.theta0_kind,
                n=n,
                gamma=self.theta0_gamma,
                values=values,
                radius=self.theta0_radius,
            )
        except ValueError as exc:
            raise ConfigError(f"theta0: {exc}") from exc
