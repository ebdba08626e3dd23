"""Run configurations and their ``key=value`` text format."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable


class ConfigError(ValueError):
    pass


ESTIMATORS = ("classical", "forms", "quantum-exact", "quantum-sampled")
SOLVERS = ("classical", "vqls")
SHOTS_POLICIES = ("fixed", "scaled")


@dataclass
class AmrConfig:
    theta: float = 0.6
    iterations: int = 10
    estimator: str = "classical"
    solver: str = "classical"
    shots: int = 10000
    shots_policy: str = "fixed"
    shots_epsilon: float = 1e-2  # target precision for the scaled policy
    shots_constant: float = 1.0
    embedding: str = "local"
    global_max_qubits: int = 6
    vqls_max_qubits: int = 5
    vqls_layout: str = "circular"
    quad_degree: int = 4
    edge_points: int = 3
    corner_levels: int = 3
    refine_mode: str = "edges"
    resolution: int = 1
    eta_target: float = 0.0  # stop early once eta drops below this; 0 disables
    seed: int = 0

    def validate(self) -> "AmrConfig":
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError("theta must lie in [0, 1]")
        if self.iterations < 1:
            raise ConfigError("iterations must be at least 1")
        _choice("estimator", self.estimator, ESTIMATORS)
        _choice("solver", self.solver, SOLVERS)
        _choice("shots_policy", self.shots_policy, SHOTS_POLICIES)
        _choice("embedding", self.embedding, ("local", "global"))
        _choice("vqls_layout", self.vqls_layout, ("circular", "alternating"))
        _choice("refine_mode", self.refine_mode, ("edges", "newest"))
        if self.estimator == "quantum-sampled" and self.shots_policy == "fixed" and self.shots <= 0:
            raise ConfigError("sampled estimator needs shots > 0")
        if self.shots_epsilon <= 0:
            raise ConfigError("shots_epsilon must be positive")
        if self.resolution < 1 or self.quad_degree < 1 or self.edge_points < 1 or self.corner_levels < 0:
            raise ConfigError("resolution, quadrature degree and edge points must be positive")
        return self


@dataclass
class FidelityConfig:
    trials: int = 5
    sizes: tuple[int, ...] = (2, 3, 4, 5)
    layouts: tuple[str, ...] = ("circular", "alternating")
    resolution: int = 1
    seed: int = 0

    def validate(self) -> "FidelityConfig":
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        for n in self.sizes:
            if n not in (2, 3, 4, 5):
                raise ConfigError("sizes must be drawn from 2..5 (the optimiser budgets are defined there)")
        for lay in self.layouts:
            _choice("layouts", lay, ("circular", "alternating"))
        return self


@dataclass
class SelftestConfig:
    quick: bool = False
    inject_fault: str = "none"
    seed: int = 0

    def validate(self) -> "SelftestConfig":
        _choice("inject_fault", self.inject_fault, ("none", "jump_sign"))
        return self


def _choice(key: str, value, allowed) -> None:
    if value not in allowed:
        raise ConfigError(f"{key}={value!r} is not one of {', '.join(map(str, allowed))}")


def _coerce(text: str, default):
    t = type(default)
    if t is bool:
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {text!r}")
    if t is tuple:
        items = [s.strip() for s in text.split(",") if s.strip()]
        conv = type(default[0]) if default else str
        return tuple(conv(s) for s in items)
    return t(text.strip())


def parse_pairs(lines: Iterable[str], source: str = "") -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for i, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{i}: expected key=value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def apply_overrides(cfg, pairs: dict[str, str]):
    """Return a copy of ``cfg`` with the given string values applied; unknown keys are rejected."""
    known = {f.name: f for f in fields(cfg)}
    changes = {}
    for key, text in pairs.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r}; known keys: {', '.join(sorted(known))}")
        try:
            changes[key] = _coerce(text, getattr(cfg, key))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from exc
    return dataclasses.replace(cfg, **changes).validate()


def load(cfg, path: str | Path | None = None, overrides: Iterable[str] = ()):
    """Defaults, then the config file, then ``--set`` overrides."""
    pairs = {}
    if path is not None:
        pairs.update(parse_pairs(Path(path).read_text().splitlines(), str(path)))
    pairs.update(parse_pairs(overrides, "--set"))
    return apply_overrides(cfg, pairs)


def dump(cfg) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(map(str, v))
        elif isinstance(v, bool):
            v = str(v).lower()
        lines.append(f"{f.name}={v}")
    return "\n".join(lines) + "\n"
