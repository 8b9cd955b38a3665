"""Key universe partitioning and seeded workload generation.

Keys are 0-based integers internally; reports add one to match the
``[1..U]`` universe used in experiment descriptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

__all__ = [
    "DEFAULT_UNIVERSE",
    "DistributionSpec",
    "InvalidDistributionParameters",
    "KeyOutOfUniverse",
    "KeyUniverse",
    "cluster_for_key",
    "peer_for_key",
    "peers_per_cluster_for",
    "range_width",
    "sample_keys",
]

DEFAULT_UNIVERSE = 10 ** 9


class KeyOutOfUniverse(ValueError):
    pass


class InvalidDistributionParameters(ValueError):
    pass


def peers_per_cluster_for(n_clusters: int) -> int:
    """Smallest S = ceil(ln n) for which n / S**2 can reach ``n_clusters``.

    A deployment sized for n keys has about n / ln(n)**2 cluster-peers of
    ln(n) peers each; this inverts that relation for a requested cluster count.
    """
    if n_clusters < 1:
        raise ValueError("need at least one cluster")
    s = 1
    while math.floor(math.exp(s)) / (s * s) < n_clusters:
        s += 1
    return s


@dataclass(frozen=True)
class KeyUniverse:
    """Partition of ``[0, max_key)`` into peer spans and cluster spans.

    A cluster-peer covers ``peers_per_cluster`` consecutive peer spans, so
    ``cluster_span == peers_per_cluster * peer_span`` always holds.
    """

    max_key: int
    peers_per_cluster: int
    peer_span: int
    n: int | None = None
    cluster_span: int = field(init=False)

    def __post_init__(self):
        if self.max_key < 1 or self.peers_per_cluster < 1 or self.peer_span < 1:
            raise ValueError("universe, S and peer span must all be positive")
        object.__setattr__(self, "cluster_span", self.peers_per_cluster * self.peer_span)

    @classmethod
    def from_key_count(cls, max_key: int, n: int) -> "KeyUniverse":
        """Reference sizing: a peer holds ceil(ln n) keys, a cluster ceil(ln n)**2."""
        if n < 2:
            raise ValueError("need n >= 2")
        s = max(1, math.ceil(math.log(n)))
        return cls(max_key=max_key, peers_per_cluster=s, peer_span=s, n=n)

    @classmethod
    def for_clusters(cls, n_clusters: int, universe: int = DEFAULT_UNIVERSE) -> "KeyUniverse":
        """Universe split into exactly ``n_clusters`` equal cluster spans.

        The universe is rounded up to a multiple of ``S * peer_span`` so that
        every cluster, including the last, is full.
        """
        s = peers_per_cluster_for(n_clusters)
        peer_span = max(1, -(-universe // (n_clusters * s)))
        return cls(max_key=n_clusters * s * peer_span, peers_per_cluster=s, peer_span=peer_span)

    @property
    def peer_count(self) -> int:
        return -(-self.max_key // self.peer_span)

    @property
    def cluster_count(self) -> int:
        return -(-self.max_key // self.cluster_span)

    def check(self, k: int) -> None:
        if not 0 <= k < self.max_key:
            raise KeyOutOfUniverse(f"key {k} outside [0, {self.max_key})")

    def cluster_range(self, cluster: int) -> tuple[int, int]:
        lo = (cluster - 1) * self.cluster_span
        return lo, min(self.max_key, lo + self.cluster_span) - 1

    def peer_range(self, peer: int) -> tuple[int, int]:
        lo = (peer - 1) * self.peer_span
        return lo, min(self.max_key, lo + self.peer_span) - 1


def peer_for_key(u: KeyUniverse, k: int) -> int:
    u.check(k)
    return k // u.peer_span + 1


def cluster_for_key(u: KeyUniverse, k: int) -> int:
    u.check(k)
    return k // u.cluster_span + 1


def range_width(u, total_peers: int, alpha: int) -> int:
    """Width of a benchmark range: the per-peer share of the universe times alpha."""
    if total_peers < 1:
        raise ValueError("total_peers must be >= 1")
    if not 1 <= alpha <= 10:
        raise ValueError("alpha must be in [1, 10]")
    max_key = u.max_key if isinstance(u, KeyUniverse) else int(u)
    return (max_key // total_peers) * alpha


_DEFAULTS = {
    "uniform": {},
    # mean and std are fractions of the universe
    "normal": {"mean": 0.5, "std": 0.125},
    "beta": {"alpha": 2.0, "beta": 2.0},
    # Lomax-shaped density (1 + x/scale)**-exponent, scale as a fraction of U
    "power-law": {"exponent": 2.0, "scale": 0.05},
}


@dataclass(frozen=True)
class DistributionSpec:
    kind: str = "uniform"
    params: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _DEFAULTS:
            raise InvalidDistributionParameters(
                f"unknown distribution {self.kind!r}; expected one of {sorted(_DEFAULTS)}")
        given = dict(self.params)
        unknown = set(given) - set(_DEFAULTS[self.kind])
        if unknown:
            raise InvalidDistributionParameters(
                f"{self.kind} does not take parameter(s) {sorted(unknown)}")
        merged = {**_DEFAULTS[self.kind], **{k: float(v) for k, v in given.items()}}
        _validate(self.kind, merged)
        object.__setattr__(self, "params", tuple(sorted(merged.items())))
        object.__setattr__(self, "seed", int(self.seed) & ((1 << 64) - 1))

    @classmethod
    def parse(cls, kind: str, params_text: str = "", seed: int = 0) -> "DistributionSpec":
        """Build from config text such as ``alpha=2,beta=5``."""
        params = {}
        for item in filter(None, (p.strip() for p in params_text.replace(";", ",").split(","))):
            name, sep, value = item.partition("=")
            if not sep:
                raise InvalidDistributionParameters(f"expected name=value, got {item!r}")
            try:
                params[name.strip()] = float(value)
            except ValueError:
                raise InvalidDistributionParameters(f"{name.strip()} is not a number: {value!r}") from None
        return cls(kind.strip(), tuple(params.items()), seed)

    def param(self, name: str) -> float:
        return dict(self.params)[name]

    def params_text(self) -> str:
        return ",".join(f"{k}={v:g}" for k, v in self.params)


def _validate(kind: str, p: dict) -> None:
    if kind == "normal":
        if not p["std"] > 0:
            raise InvalidDistributionParameters("normal std must be > 0")
    elif kind == "beta":
        if not (p["alpha"] > 0 and p["beta"] > 0):
            raise InvalidDistributionParameters("beta alpha and beta must be > 0")
    elif kind == "power-law":
        if not p["exponent"] > 1:
            raise InvalidDistributionParameters("power-law exponent must be > 1")
        if not p["scale"] > 0:
            raise InvalidDistributionParameters("power-law scale must be > 0")
    for name, value in p.items():
        if not math.isfinite(value):
            raise InvalidDistributionParameters(f"{name} must be finite")


def _unit_draws(seed: int, count: int) -> np.ndarray:
    # one uniform per key: a prefix of the stream never depends on ``count``
    return np.random.Generator(np.random.PCG64(seed)).random(count)


def inverse_cdf(spec: DistributionSpec, u: np.ndarray, max_key: int) -> np.ndarray:
    """Map unit draws to real positions in ``[0, max_key)``."""
    p = dict(spec.params)
    if spec.kind == "uniform":
        x = u * max_key
    elif spec.kind == "normal":
        mu, sigma = p["mean"] * max_key, p["std"] * max_key
        lo = special.ndtr((0.0 - mu) / sigma)
        hi = special.ndtr((max_key - mu) / sigma)
        x = mu + sigma * special.ndtri(lo + u * (hi - lo))
    elif spec.kind == "beta":
        x = special.betaincinv(p["alpha"], p["beta"], u) * max_key
    else:
        shape = p["exponent"] - 1.0
        scale = p["scale"] * max_key
        top = 1.0 - (1.0 + max_key / scale) ** -shape
        x = scale * ((1.0 - u * top) ** (-1.0 / shape) - 1.0)
    return x


def sample_keys(spec: DistributionSpec, u: KeyUniverse, count: int) -> np.ndarray:
    if count < 0:
        raise ValueError("count must be >= 0")
    x = inverse_cdf(spec, _unit_draws(spec.seed, count), u.max_key)
    return np.clip(np.floor(x), 0, u.max_key - 1).astype(np.int64)
