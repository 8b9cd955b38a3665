"""Experiment configuration: a flat ``key=value`` text format.

Blank lines and ``#`` comments are ignored.  Every key is optional; missing
keys take the defaults below.  Example::

    # grid cell for the failure run
    n_clusters = 1024
    inner = finger-ring
    failure_fraction = 0.3
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields, replace

from .keyspace import DEFAULT_UNIVERSE, DistributionSpec, InvalidDistributionParameters
from .lrt import InvalidFanout, validate_fanout

__all__ = ["ExperimentConfig", "ParseError", "ValidationError", "parse_config"]

INNER_KINDS = ("finger-ring", "direct-oracle")
DISTRIBUTIONS = ("uniform", "normal", "beta", "power-law")


class ParseError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line, self.reason = line, reason


class ValidationError(ValueError):
    def __init__(self, key: str, reason: str):
        super().__init__(f"{key}: {reason}")
        self.key, self.reason = key, reason


@dataclass(frozen=True)
class ExperimentConfig:
    n_clusters: int = 1024
    b: int = 4
    c: int = 1
    inner: str = "finger-ring"
    distribution: str = "uniform"
    dist_params: str = ""
    queries: int = 1000
    alpha_max: int = 10
    churn_steps: int | None = None  # None: ten steps per initial peer
    failure_fraction: float = 0.3
    data_multiplier: int = 20
    seed: int = 1
    universe: int = DEFAULT_UNIVERSE

    def validate(self) -> "ExperimentConfig":
        def need(cond, key, reason):
            if not cond:
                raise ValidationError(key, reason)

        need(self.n_clusters >= 1, "n_clusters", "must be >= 1")
        try:
            validate_fanout(self.b)
        except InvalidFanout:
            raise ValidationError("b", "not of the form 2^(2^j)") from None
        need(self.c >= 1, "c", "must be >= 1")
        need(self.inner in INNER_KINDS, "inner", f"expected one of {', '.join(INNER_KINDS)}")
        need(self.distribution in DISTRIBUTIONS, "distribution", f"expected one of {', '.join(DISTRIBUTIONS)}")
        try:
            self.dist_spec()
        except InvalidDistributionParameters as exc:
            raise ValidationError("dist_params", str(exc)) from None
        need(self.queries >= 1, "queries", "must be >= 1")
        need(1 <= self.alpha_max <= 10, "alpha_max", "must be in [1, 10]")
        need(self.churn_steps is None or self.churn_steps >= 0, "churn_steps", "must be >= 0")
        need(0.0 <= self.failure_fraction < 1.0, "failure_fraction", "must be in [0, 1)")
        need(self.data_multiplier >= 0, "data_multiplier", "must be >= 0")
        need(0 <= self.seed < 2 ** 64, "seed", "must be a 64-bit unsigned integer")
        need(self.universe >= 1, "universe", "must be >= 1")
        return self

    def dist_spec(self, seed: int | None = None) -> DistributionSpec:
        return DistributionSpec.parse(self.distribution, self.dist_params, self.seed if seed is None else seed)

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes).validate()

    def canonical(self) -> str:
        lines = []
        for k, v in sorted(asdict(self).items()):
            if v is None:
                v = "auto"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]

    def one_line(self) -> str:
        return " ".join(self.canonical().split())


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "int | None":
            return None if raw == "auto" else int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ValidationError(key, f"not a number: {raw!r}") from None
    return raw


def coerce(key: str, raw: str):
    if key not in _TYPES:
        raise ValidationError(key, "unknown key")
    return _convert(key, raw.strip())


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ParseError(no, f"expected key=value, got {line!r}")
        if key not in _TYPES:
            raise ParseError(no, f"unknown key {key!r}")
        if key in values:
            raise ParseError(no, f"duplicate key {key!r}")
        values[key] = _convert(key, raw.strip())
    return ExperimentConfig(**values).validate()
