"""Run configuration files.

Plain INI: sections ``[mesh] [model] [scheme] [ensemble] [initial]
[output]``, ``key = value`` lines, ``#`` comments.  Unknown sections or
keys are errors.  Built-in experiment files live in ``stochfem/configs``
and can be named without a path (``--config test2``).
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .model import DiffusionSpec, DriftSpec, ModelSpec
from .montecarlo import EnsembleConfig
from .problems import initial_condition
from .solver import SchemeConfig

__all__ = ["RunConfig", "ConfigError", "load_config", "parse_config", "builtin_configs"]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (a usage error)."""


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.replace(",", " ").split())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.replace(",", " ").split())


def _opt_float(s: str):
    return None if s.strip().lower() in ("", "none", "auto") else float(s)


# section -> key -> converter
SCHEMA = {
    "mesh": {
        "nx": int,
        "ny": int,
        "rect": _floats,
        "refinements": int,
        "reference_extra": int,
        "mesh_file": str,
        "level_taus": _floats,
    },
    "model": {
        "drift": str,
        "q": int,
        "coefficients": _floats,
        "scale": float,
        "diffusion": str,
        "delta": float,
    },
    "scheme": {
        "tau": float,
        "n_steps": int,
        "final_time": float,
        "newton_tol": _opt_float,
        "newton_maxit": int,
        "linear_tol": float,
        "noise_load": str,
    },
    "ensemble": {"samples": int, "seed": int, "workers": int},
    "initial": {"kind": str, "epsilon": float, "value": float},
    "output": {"dir": str, "snapshots": _ints},
}


@dataclass(frozen=True)
class RunConfig:
    # mesh
    nx: int = 4
    ny: int = 4
    rect: tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0)
    refinements: int = 0
    reference_extra: int = 1
    mesh_file: str | None = None
    level_taus: tuple[float, ...] = ()
    # model
    drift: str = "u_minus_uq"
    q: int = 3
    coefficients: tuple[float, ...] = ()
    scale: float = 1.0
    diffusion: str = "linear"
    delta: float = 1.0
    # scheme
    tau: float = 1e-6
    n_steps: int | None = None
    final_time: float | None = None
    newton_tol: float | None = None
    newton_maxit: int = 30
    linear_tol: float = 1e-10
    noise_load: str = "interpolated"
    # ensemble
    samples: int = 10
    seed: int = 0
    workers: int | None = None  # None: all available CPUs
    # initial data
    kind: str = "test1"
    epsilon: float = 0.2
    value: float | None = None
    # output
    dir: str = "out"
    snapshots: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ConfigError(f"nx and ny must be >= 1 (got nx={self.nx}, ny={self.ny})")
        if len(self.rect) != 4 or not (self.rect[1] > self.rect[0] and self.rect[3] > self.rect[2]):
            raise ConfigError(f"rect must be 'x0 x1 y0 y1' with x1 > x0 and y1 > y0, got {self.rect}")
        if self.refinements < 0 or self.reference_extra < 0:
            raise ConfigError("refinements and reference_extra must be >= 0")
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.samples < 1 or (self.workers is not None and self.workers < 1):
            raise ConfigError("samples and workers must be >= 1")
        for t in self.level_taus:
            if t != self.tau:
                raise ConfigError(
                    f"all levels must share one time step (scheme tau={self.tau}, level tau={t})"
                )
        if self.resolved_steps() < 1:
            raise ConfigError("need at least one time step")

    def resolved_steps(self) -> int:
        if self.n_steps is not None:
            return self.n_steps
        if self.final_time is not None:
            return max(int(round(self.final_time / self.tau)), 0)
        return 20

    def model(self) -> ModelSpec:
        if self.drift == "u_minus_uq":
            drift = DriftSpec.u_minus_uq(self.q, scale=self.scale)
        elif self.drift == "template":
            drift = DriftSpec.template(*self.coefficients, scale=self.scale)
        elif self.drift == "zero":
            drift = DriftSpec.zero()
        else:
            raise ConfigError(f"unknown drift {self.drift!r}; expected u_minus_uq, template or zero")
        return ModelSpec(drift, DiffusionSpec(self.diffusion, self.delta))

    def scheme(self) -> SchemeConfig:
        try:
            return SchemeConfig(
                tau=self.tau,
                n_steps=self.resolved_steps(),
                newton_tol=self.newton_tol,
                newton_maxit=self.newton_maxit,
                linear_tol=self.linear_tol,
                noise_load=self.noise_load,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def ensemble(self) -> EnsembleConfig:
        workers = self.workers if self.workers is not None else (os.cpu_count() or 1)
        return EnsembleConfig(self.samples, self.seed, workers)

    def initial(self):
        try:
            return initial_condition(self.kind, self.epsilon, self.value)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    values = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in cp.items(section):
            conv = SCHEMA[section].get(key)
            if conv is None:
                raise ConfigError(f"{source}: unknown key '{key}' in [{section}]")
            try:
                values[key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for {section}.{key}: {raw!r}") from exc
    return RunConfig(**values)


def builtin_configs() -> list[str]:
    d = resources.files("stochfem") / "configs"
    return sorted(p.name[:-4] for p in d.iterdir() if p.name.endswith(".ini"))


def load_config(spec: str | Path | None) -> RunConfig:
    """Load a file path or the name of a built-in config; ``None`` gives defaults."""
    if spec is None:
        return RunConfig()
    path = Path(spec)
    if not path.exists() and str(spec) in builtin_configs():
        text = (resources.files("stochfem") / "configs" / f"{spec}.ini").read_text()
        return parse_config(text, source=f"builtin:{spec}")
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {spec}: {exc}") from exc
    return parse_config(text, source=str(path))
