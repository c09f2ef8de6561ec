"""Run configuration: ``key = value`` files, flag overrides, validation."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..ball import BallGrid
from ..cylinder import CylinderGrid
from ..params import ProblemParams
from ..perturbation import InvalidPotential, PotentialSpec

OUT_ENV = "FRACLANE_OUT"
DEFAULT_OUT = "fraclane-out"


class ConfigError(ValueError):
    pass


def _floats(text):
    text = str(text).strip()
    if not text:
        return ()
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(x) for x in _floats(text))


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class RunConfig:
    n: int = 3
    s: float = 0.5
    p: float = 3.0
    T: float = 20.0
    h: float = 0.05
    ball_N: int = 400
    branch_start: float = 0.05
    target_sup: float = 1e3
    newton_tol: float = 1e-10
    modes: tuple = (0, 1, 2)
    kernel_mode: int = 0
    potential: str = "powerTail"
    mu: float | None = None  # None: 2s + 0.5
    amp: float = 1.0
    radius: float = 1.0
    rho: float | None = None  # None: the fixed-point default
    lambdas: tuple = (0.2, 0.1, 0.05, 0.025)
    out: str = field(default_factory=lambda: os.environ.get(OUT_ENV, DEFAULT_OUT))
    plots: bool = False

    @property
    def params(self) -> ProblemParams:
        return ProblemParams(self.n, self.s, self.p)

    @property
    def grid(self) -> CylinderGrid:
        return CylinderGrid(self.T, self.h)

    @property
    def ball_grid(self) -> BallGrid:
        return BallGrid(self.ball_N)

    @property
    def potential_spec(self) -> PotentialSpec:
        mu = 2 * self.s + 0.5 if self.mu is None else self.mu
        return PotentialSpec(self.potential, amp=self.amp, mu=mu, radius=self.radius)

    def validate(self) -> "RunConfig":
        """Check everything up front; raises ConfigError naming the first problem."""
        try:
            self.params
            self.grid
            self.ball_grid
            self.potential_spec.check(self.s)
        except (ValueError, InvalidPotential) as exc:
            raise ConfigError(str(exc)) from exc
        if self.newton_tol <= 0 or self.target_sup <= 1 or self.branch_start <= 0:
            raise ConfigError("tolerances, branch start and target sup-norm must be positive")
        if any(m < 0 for m in self.modes) or self.kernel_mode < 0:
            raise ConfigError("modes must be non-negative")
        lams = list(self.lambdas)
        if any(not 0 < x <= 1 for x in lams):
            raise ConfigError("lambdas must lie in (0, 1]")
        if any(b >= a for a, b in zip(lams, lams[1:])):
            raise ConfigError("lambdas must be strictly decreasing")
        if self.rho is not None and self.rho <= 0:
            raise ConfigError("rho must be positive")
        return self

    def as_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v, tuple) else v)
                for f in fields(self) for v in [getattr(self, f.name)] if f.name != "out"}


_PARSERS = {
    "n": int, "s": float, "p": float, "T": float, "h": float, "ball_N": int,
    "branch_start": float, "target_sup": float, "newton_tol": float,
    "modes": _ints, "kernel_mode": int, "potential": str, "mu": float, "amp": float,
    "radius": float, "rho": float, "lambdas": _floats, "out": str, "plots": _bool,
}


def parse_config_text(text: str) -> dict:
    """``key = value`` lines, ``#`` comments, blank lines ignored."""
    out = {}
    for k, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {k}: expected key = value")
        key, val = (x.strip() for x in line.split("=", 1))
        out[key] = val
    return out


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Typed config from raw file values, then flag overrides (already typed or raw)."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    kw = {}
    for key, raw in merged.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            kw[key] = raw if not isinstance(raw, str) or _PARSERS[key] is str else _PARSERS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return replace(RunConfig(), **kw).validate()


def load_config(path: str | os.PathLike | None, overrides: dict | None = None) -> RunConfig:
    values = {}
    if path is not None:
        try:
            values = parse_config_text(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    return build_config(values, overrides)
