"""Deterministic experiment engine: workloads, churn, failures, load balance.

Every random choice comes from a generator seeded by ``(config seed, stream)``
so a report is a pure function of its configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _rand
from .config import ExperimentConfig
from .inner import DuplicatePeerPosition, EmptyCluster, LastPeerInCluster
from .keyspace import DistributionSpec, cluster_for_key, range_width, sample_keys
from .overlay import ArtSkeleton, LevelExhausted, UnreachableAfterRepair, build_art

__all__ = [
    "CSV_COLUMNS",
    "HopLedger",
    "MetricsReport",
    "MetricsRow",
    "build_for",
    "run_churn_bench",
    "run_failure_bench",
    "run_loadbal_bench",
    "run_query_bench",
]

CSV_COLUMNS = (
    "experiment", "N_total", "N_clusters", "b", "c", "inner", "distribution", "op_class",
    "hops_mean", "hops_p50", "hops_p99", "hops_max", "skeleton_hops_mean", "success_rate",
    "max_routing_entries", "cluster_size_max", "violations", "seed", "config_hash",
)

# generator streams
_START, _EXACT, _RANGE_LO, _ALPHA, _CHURN, _CHURN_KEYS, _FAIL_ORDER, _DATA = range(10, 18)

ROUTING_ERRORS = (UnreachableAfterRepair, LevelExhausted, EmptyCluster)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(_rand.mix(seed, stream)))


class HopLedger:
    """Raw per-operation message counts, grouped by operation class."""

    def __init__(self):
        self.events: dict[str, list] = {}
        self.failures: dict[str, int] = {}

    def record(self, op_class: str, trace) -> None:
        self.events.setdefault(op_class, []).append(
            (trace.skeleton_hops, trace.intra_hops, trace.retries, trace.total))
        self.failures.setdefault(op_class, 0)

    def record_failure(self, op_class: str) -> None:
        self.events.setdefault(op_class, [])
        self.failures[op_class] = self.failures.get(op_class, 0) + 1

    def classes(self) -> list:
        return list(self.events)

    def totals(self, op_class: str) -> np.ndarray:
        return np.array([e[3] for e in self.events.get(op_class, [])], dtype=float)

    def stats(self, op_class: str) -> dict:
        ev = self.events.get(op_class, [])
        failed = self.failures.get(op_class, 0)
        attempts = len(ev) + failed
        if not ev:
            return {"mean": 0.0, "p50": 0.0, "p99": 0.0, "max": 0.0, "skeleton_mean": 0.0,
                    "success_rate": 1.0 if attempts == 0 else 0.0, "count": 0}
        arr = np.array(ev, dtype=float)
        total = arr[:, 3]
        return {
            "mean": float(total.mean()),
            "p50": float(np.percentile(total, 50)),
            "p99": float(np.percentile(total, 99)),
            "max": float(total.max()),
            "skeleton_mean": float(arr[:, 0].mean()),
            "success_rate": len(ev) / attempts,
            "count": len(ev),
        }

    def message_total(self) -> int:
        return int(sum(e[3] for ev in self.events.values() for e in ev))


@dataclass
class MetricsRow:
    experiment: str
    N_total: int
    N_clusters: int
    b: int
    c: int
    inner: str
    distribution: str
    op_class: str
    hops_mean: float = 0.0
    hops_p50: float = 0.0
    hops_p99: float = 0.0
    hops_max: float = 0.0
    skeleton_hops_mean: float = 0.0
    success_rate: float = 1.0
    max_routing_entries: float = 0.0
    cluster_size_max: int = 0
    violations: int = 0
    seed: int = 0
    config_hash: str = ""

    def values(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


@dataclass
class MetricsReport:
    rows: list = field(default_factory=list)
    info: dict = field(default_factory=dict)  # experiment-specific extras, not in the CSV


class _LivePeers:
    """Live peer ids with O(1) uniform choice, insertion and removal."""

    def __init__(self, ids):
        self.ids = list(ids)
        self.pos = {p: i for i, p in enumerate(self.ids)}

    def __len__(self):
        return len(self.ids)

    def choose(self, rng: np.random.Generator) -> int:
        return self.ids[int(rng.integers(len(self.ids)))]

    def add(self, p):
        self.pos[p] = len(self.ids)
        self.ids.append(p)

    def remove(self, p):
        i = self.pos.pop(p)
        last = self.ids.pop()
        if i < len(self.ids):
            self.ids[i] = last
            self.pos[last] = i


def build_for(cfg: ExperimentConfig) -> ArtSkeleton:
    return build_art(cfg.n_clusters, b=cfg.b, c=cfg.c, inner=cfg.inner, seed=cfg.seed, universe=cfg.universe)


def _size_histogram(skel: ArtSkeleton) -> dict:
    """Cluster-size histogram; unmaterialised clusters still hold their initial peers."""
    hist: dict[int, int] = {}
    for cp in skel._clusters.values():
        hist[cp.peer_count] = hist.get(cp.peer_count, 0) + 1
    rest = skel.n_clusters - len(skel._clusters)
    if rest:
        s = skel.keyspace.peers_per_cluster
        hist[s] = hist.get(s, 0) + rest
    return hist


def _cluster_size_max(skel: ArtSkeleton) -> int:
    return max(_size_histogram(skel))


def _row(experiment, skel, cfg, op_class, stats=None, n_total=None, violations=0, **extra) -> MetricsRow:
    row = MetricsRow(
        experiment=experiment,
        N_total=skel.total_peers if n_total is None else n_total,
        N_clusters=skel.n_clusters, b=skel.b, c=skel.c, inner=cfg.inner,
        distribution=cfg.distribution, op_class=op_class,
        max_routing_entries=skel.max_routing_entries(),
        cluster_size_max=_cluster_size_max(skel),
        violations=violations, seed=cfg.seed, config_hash=cfg.config_hash,
    )
    if stats is not None:
        row.hops_mean, row.hops_p50, row.hops_p99 = stats["mean"], stats["p50"], stats["p99"]
        row.hops_max, row.skeleton_hops_mean = stats["max"], stats["skeleton_mean"]
        row.success_rate = stats["success_rate"]
    for k, v in extra.items():
        setattr(row, k, v)
    return row


def _exact_workload(skel, cfg, live: _LivePeers, ledger: HopLedger, op_class="exact", tally=None):
    """Seeded exact-match queries; identical streams across benches."""
    starts = _rng(cfg.seed, _START)
    keys = sample_keys(cfg.dist_spec(_rand.mix(cfg.seed, _EXACT)), skel.keyspace, cfg.queries)
    for k in keys.tolist():
        s = live.choose(starts)
        target = cluster_for_key(skel.keyspace, k)
        if not skel.cluster_alive(target):
            # nobody owns k any more; not a routing question
            if tally is not None:
                tally["unowned"] += 1
            continue
        try:
            peer, trace = skel.exact_search(s, k)
        except ROUTING_ERRORS:
            ledger.record_failure(op_class)
            continue
        if peer == skel.cluster(target).inner.owner(k):
            ledger.record(op_class, trace)
        else:
            ledger.record_failure(op_class)


def _range_workload(skel, cfg, live: _LivePeers, ledger: HopLedger):
    starts = _rng(cfg.seed, _START + 100)
    alphas = _rng(cfg.seed, _ALPHA)
    los = sample_keys(cfg.dist_spec(_rand.mix(cfg.seed, _RANGE_LO)), skel.keyspace, cfg.queries)
    n_total = skel.total_peers
    for lo in los.tolist():
        s = live.choose(starts)
        alpha = int(alphas.integers(1, cfg.alpha_max + 1))
        hi = min(skel.keyspace.max_key - 1, lo + range_width(skel.keyspace, n_total, alpha) - 1)
        try:
            _, trace = skel.range_search(s, lo, hi)
        except ROUTING_ERRORS:
            ledger.record_failure("range")
            continue
        ledger.record("range", trace)


def run_query_bench(skel: ArtSkeleton, cfg: ExperimentConfig, classes=("exact", "range")) -> MetricsReport:
    """Seeded exact and range queries from uniformly chosen start peers."""
    live = _LivePeers(range(1, skel.total_peers + 1))
    ledger = HopLedger()
    if "exact" in classes:
        _exact_workload(skel, cfg, live, ledger)
    if "range" in classes:
        _range_workload(skel, cfg, live, ledger)
    report = MetricsReport(info={"ledger": ledger})
    for op in classes:
        report.rows.append(_row("query", skel, cfg, op, ledger.stats(op)))
    return report


def _key_stream(spec: DistributionSpec, universe, hint: int):
    """Endless prefix-stable key stream."""
    n, used = max(16, 2 * hint), 0
    while True:
        chunk = sample_keys(spec, universe, n).tolist()
        yield from chunk[used:]
        used, n = n, 2 * n


def run_churn_bench(skel: ArtSkeleton, cfg: ExperimentConfig, join_fraction: float = 0.5,
                    snapshots: bool = True) -> MetricsReport:
    """Random join/leave sequence; tracks cluster-size extremes every step.

    A step is a violation when, after it, some cluster is empty or holds more
    than ``8 * log2(N_total)**2`` peers, or when it was a departure rejected
    because it would have emptied a cluster.
    """
    n0 = skel.total_peers
    steps = 10 * n0 if cfg.churn_steps is None else cfg.churn_steps
    rng = _rng(cfg.seed, _CHURN)
    keys = _key_stream(cfg.dist_spec(_rand.mix(cfg.seed, _CHURN_KEYS)), skel.keyspace, steps)
    live = _LivePeers(range(1, n0 + 1))
    ledger = HopLedger()
    hist = _size_histogram(skel)
    before = skel.snapshot() if snapshots else None
    lo_size, hi_size = min(hist), max(hist)

    def move(size, delta):
        nonlocal lo_size, hi_size
        hist[size] -= 1
        hist[size + delta] = hist.get(size + delta, 0) + 1
        if hist[size] == 0:
            del hist[size]
        lo_size, hi_size = min(lo_size, size + delta), max(hi_size, size + delta)
        if lo_size not in hist:
            lo_size += 1
        if hi_size not in hist:
            hi_size -= 1

    violations = rejected = duplicates = 0
    for _ in range(steps):
        bad = False
        if rng.random() < join_fraction:
            entrance = live.choose(rng)
            while True:
                k = next(keys)
                cid = cluster_for_key(skel.keyspace, k)
                size = skel.peer_count(cid)
                try:
                    peer, trace = skel.join_peer(entrance, k)
                except DuplicatePeerPosition:
                    duplicates += 1  # position taken: the newcomer draws another key
                    continue
                break
            ledger.record("join", trace)
            live.add(peer)
            move(size, +1)
        else:
            w = live.choose(rng)
            cid = skel.cluster_of(w)
            size = skel.peer_count(cid)
            try:
                trace = skel.leave_peer(w)
            except LastPeerInCluster:
                rejected += 1
                bad = True
                ledger.record_failure("leave")
            else:
                ledger.record("leave", trace)
                live.remove(w)
                move(size, -1)
        ceiling = 8 * math.log2(max(2, skel.total_peers)) ** 2
        if bad or lo_size == 0 or hi_size > ceiling:
            violations += 1
    info = {
        "ledger": ledger, "steps": steps, "violation_steps": violations,
        "violation_fraction": violations / steps if steps else 0.0,
        "rejected_departures": rejected, "duplicate_positions": duplicates,
        "final_peers": skel.total_peers, "min_cluster_size": lo_size, "max_cluster_size": hi_size,
        "snapshot_before": before, "snapshot_after": skel.snapshot() if snapshots else None,
    }
    report = MetricsReport(info=info)
    for op in ("join", "leave"):
        report.rows.append(_row("churn", skel, cfg, op, ledger.stats(op), n_total=n0, violations=violations))
    return report


def failure_steps(fraction: float, step: float = 0.05) -> list:
    """Cumulative failure fractions checked: 0, 0.05, ... up to ``fraction``."""
    count = int(round(fraction / step + 1e-9))
    out = [round(i * step, 10) for i in range(count + 1)]
    if out[-1] < fraction - 1e-12:
        out.append(fraction)
    return out


def run_failure_bench(skel: ArtSkeleton, cfg: ExperimentConfig) -> MetricsReport:
    """Fail peers in 5% increments, re-running the exact workload after each."""
    n0 = skel.total_peers
    order = _rng(cfg.seed, _FAIL_ORDER).permutation(np.arange(1, n0 + 1)).tolist()
    live = _LivePeers(range(1, n0 + 1))
    failed = 0
    report = MetricsReport()
    series = []
    baseline = None
    for frac in failure_steps(cfg.failure_fraction):
        goal = int(round(frac * n0))
        while failed < goal:
            p = order[failed]
            skel.fail_peer(p)
            live.remove(p)
            failed += 1
        ledger = HopLedger()
        tally = {"unowned": 0}
        _exact_workload(skel, cfg, live, ledger, tally=tally)
        st = ledger.stats("exact")
        if baseline is None:
            baseline = st["mean"] or 1.0
        breaks = sum(1 for e in skel.events if e[0] == "skeleton-break")
        series.append({
            "fraction": frac, "success_rate": st["success_rate"], "mean_hops": st["mean"],
            "inflation": st["mean"] / baseline, "retries": sum(e[2] for e in ledger.events.get("exact", [])),
            "skeleton_breaks": breaks, "unowned_queries": tally["unowned"],
        })
        report.rows.append(_row("failure", skel, cfg, f"exact@{frac:g}", st, n_total=n0, violations=breaks))
    report.info = {"series": series, "final": series[-1]}
    return report


def _ratio(kc: np.ndarray) -> float:
    if kc.max() == 0:
        return 1.0
    return float(kc.max() / kc.min()) if kc.min() > 0 else math.inf


def run_loadbal_bench(skel: ArtSkeleton, cfg: ExperimentConfig) -> MetricsReport:
    """Bulk-load data, then split overloaded peers against a lighter neighbour.

    A peer is overloaded when it stores more than twice its cluster's mean
    key count.  Each boundary move costs two intra-cluster messages.
    """
    n0 = skel.total_peers
    count = cfg.data_multiplier * n0
    keys = sample_keys(cfg.dist_spec(_rand.mix(cfg.seed, _DATA)), skel.keyspace, count)
    skel.bulk_load(keys)
    per_cluster_msgs, overloaded_events, unresolved = [], 0, 0
    key_counts, peer_counts = [], []
    for cid in range(1, skel.n_clusters + 1):
        cp = skel.cluster(cid)
        inner = cp.inner
        msgs = 0
        if inner.key_count and inner.peer_count > 1:
            mean = inner.key_count / inner.peer_count
            for _ in range(4 * inner.peer_count):
                peers = inner.peers
                loads = [inner.load_of(p) for p in peers]
                worst = max(range(len(peers)), key=loads.__getitem__)
                if loads[worst] <= 2 * mean:
                    break
                overloaded_events += 1
                nbrs = [j for j in (worst - 1, worst + 1) if 0 <= j < len(peers)]
                j = min(nbrs, key=loads.__getitem__)
                left, right = sorted((worst, j))
                moved = inner.rebalance(peers[left], peers[right])
                if not moved:
                    break
                msgs += moved
            if max(inner.load_of(p) for p in inner.peers) > 2 * mean:
                unresolved += 1
        per_cluster_msgs.append(msgs)
        key_counts.append(inner.key_count)
        peer_counts.append(inner.peer_count)
    kc = np.array(key_counts, dtype=float)
    info = {
        "keys_loaded": int(kc.sum()),
        "cluster_keys_mean": float(kc.mean()),
        "cluster_keys_max": int(kc.max()),
        "cluster_keys_min": int(kc.min()),
        "key_ratio": _ratio(kc),
        # mean size of the cluster holding a random stored key
        "cluster_keys_weighted_mean": float((kc * kc).sum() / kc.sum()) if kc.sum() else 0.0,
        "cluster_size_mean": float(np.mean(peer_counts)),
        "rebalance_messages": int(sum(per_cluster_msgs)),
        "overload_events": overloaded_events,
        "unresolved_clusters": unresolved,
        "key_counts": key_counts,
        "peer_counts": peer_counts,
    }
    msgs = np.array(per_cluster_msgs, dtype=float)
    rebalance = {"mean": float(msgs.mean()), "p50": float(np.percentile(msgs, 50)),
                 "p99": float(np.percentile(msgs, 99)), "max": float(msgs.max()), "skeleton_mean": 0.0,
                 "success_rate": 1 - unresolved / skel.n_clusters}
    spread = {"mean": float(kc.mean()), "p50": float(np.percentile(kc, 50)),
              "p99": float(np.percentile(kc, 99)), "max": float(kc.max()), "skeleton_mean": 0.0,
              "success_rate": 1.0}
    report = MetricsReport(info=info)
    report.rows.append(_row("load", skel, cfg, "rebalance", rebalance, n_total=n0, violations=overloaded_events))
    report.rows.append(_row("load", skel, cfg, "cluster_keys", spread, n_total=n0, violations=overloaded_events))
    return report
