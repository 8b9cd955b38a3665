"""Exhaustive small-instance checks against flat brute-force oracles."""

from __future__ import annotations

from bisect import bisect_right

import numpy as np

from . import _rand
from .keyspace import KeyUniverse
from .overlay import ArtSkeleton, build_art

__all__ = ["check_exact", "check_ranges", "run_selftest", "small_skeleton"]


def small_skeleton(n: int, b: int = 2, inner: str = "direct-oracle", peer_span: int = 1, seed: int = 1) -> ArtSkeleton:
    """Skeleton over a universe small enough to enumerate every key."""
    probe = KeyUniverse.for_clusters(n, 1)
    u = KeyUniverse(n * probe.peers_per_cluster * peer_span, probe.peers_per_cluster, peer_span)
    return build_art(n, b=b, inner=inner, seed=seed, keyspace=u)


def _directory(skel: ArtSkeleton):
    rows = []
    for cid in range(1, skel.n_clusters + 1):
        rows.extend((lo, hi, p) for p, lo, hi in skel.cluster(cid).inner.ranges())
    rows.sort()
    return [r[0] for r in rows], rows


def _scan(directory, k):
    los, rows = directory
    lo, hi, p = rows[bisect_right(los, k) - 1]
    assert lo <= k <= hi
    return p


def check_exact(skel: ArtSkeleton) -> tuple[int, int]:
    """Every (start cluster, key) pair; returns (mismatches, checked)."""
    directory = _directory(skel)
    bad = checked = 0
    expected = [_scan(directory, k) for k in range(skel.keyspace.max_key)]
    for cid in range(1, skel.n_clusters + 1):
        start = skel.representative(cid)
        for k, want in enumerate(expected):
            peer, _ = skel.exact_search(start, k)
            checked += 1
            bad += peer != want
    return bad, checked


def check_ranges(skel: ArtSkeleton, queries: int = 1000, seed: int = 1, fill: float = 0.3) -> tuple[int, int]:
    """Seeded range queries over a random data set versus a brute-force filter."""
    rng = np.random.Generator(np.random.PCG64(_rand.mix(seed, skel.n_clusters, skel.b)))
    u = skel.keyspace.max_key
    data = np.unique(rng.integers(0, u, int(fill * u)))
    skel.bulk_load(data)
    stored = data.tolist()
    bad = 0
    n_peers = skel.total_peers
    for _ in range(queries):
        lo, hi = sorted(int(x) for x in rng.integers(0, u, 2))
        start = int(rng.integers(1, n_peers + 1))
        got, _ = skel.range_search(start, lo, hi)
        want = [k for k in stored if lo <= k <= hi]
        bad += sorted(got) != want
    return bad, queries


def run_selftest(sizes=(16, 64, 256), fanouts=(2, 4), inners=("direct-oracle", "finger-ring"),
                 range_queries: int = 1000, log=None) -> int:
    """Run every case; returns the total number of mismatches."""
    total = 0
    for n in sizes:
        for b in fanouts:
            for inner in inners:
                skel = small_skeleton(n, b=b, inner=inner)
                exact = check_exact(skel)
                ranges = check_ranges(skel, range_queries)
                total += exact[0] + ranges[0]
                if log is not None:
                    log(f"n_clusters={n} b={b} inner={inner} exact {exact[0]}/{exact[1]} "
                        f"range {ranges[0]}/{ranges[1]} mismatches")
    return total
