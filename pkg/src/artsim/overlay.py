"""The ART overlay: a static LRT skeleton of cluster-peers with random spines,
two-layer collection indexes and pluggable intra-cluster overlays.

Clusters are addressed by their LRT label (1..N').  Because keys are split
into equal consecutive cluster spans, label order is key order.

A *view* is an LRT over a contiguous run of cluster labels: the skeleton
itself, or (recursively) one collection re-rooted at its first cluster.  Views
carry no state of their own; everything about them is derived from
``(offset, size)`` and the seed.

Clusters are materialised lazily.  Until an operation touches a cluster, its
peers, positions and keys are implied by the key space (and the bulk-loaded
key array, if any), which keeps 2**17-cluster skeletons cheap.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right, insort
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import _rand
from .inner import (
    EmptyCluster,
    InnerOverlay,
    LastPeerInCluster,
    UnknownPeer,
    make_inner,
)
from .keyspace import DEFAULT_UNIVERSE, KeyUniverse, cluster_for_key
from .lrt import Fanout, TreeGeometry, geometry

__all__ = [
    "ArtSkeleton",
    "ClusterPeer",
    "FailureEvent",
    "InvalidConfig",
    "InvalidRange",
    "LevelExhausted",
    "RouteTrace",
    "RsiEntry",
    "SnapshotError",
    "TraceHop",
    "UnknownCluster",
    "UnreachableAfterRepair",
    "bucket_shape",
    "build_art",
    "lrt_node_table",
    "parse_snapshot",
]

SNAPSHOT_HEADER = "ART-SKELETON v1"


class InvalidConfig(ValueError):
    pass


class UnknownCluster(KeyError):
    pass


class UnreachableAfterRepair(RuntimeError):
    pass


class LevelExhausted(RuntimeError):
    pass


class InvalidRange(ValueError):
    pass


class SnapshotError(ValueError):
    pass


class TraceHop(NamedTuple):
    kind: str  # "skeleton" | "intra" | "retry"
    src: int  # cluster id for skeleton/retry hops, peer id for intra hops
    dst: int
    via: str = ""


@dataclass
class RouteTrace:
    """Every message an operation sent, in order."""

    hops: list = field(default_factory=list)
    outcome: str = ""

    def add(self, kind, src, dst, via=""):
        self.hops.append(TraceHop(kind, src, dst, via))

    def extend(self, other: "RouteTrace"):
        self.hops.extend(other.hops)

    @property
    def skeleton_hops(self) -> int:
        return sum(1 for h in self.hops if h.kind == "skeleton")

    @property
    def intra_hops(self) -> int:
        return sum(1 for h in self.hops if h.kind == "intra")

    @property
    def retries(self) -> int:
        return sum(1 for h in self.hops if h.kind == "retry")

    @property
    def total(self) -> int:
        return len(self.hops)

    def __len__(self):
        return len(self.hops)


class RsiEntry(NamedTuple):
    target: int
    epoch: int  # target's endpoint epoch when the entry was chosen
    version: int  # number of resamples so far


@dataclass
class ClusterPeer:
    id: int
    key_range: tuple
    inner: InnerOverlay
    representative: int | None
    epoch: int = 0  # bumped whenever a failure forces a new representative

    @property
    def peer_count(self) -> int:
        return self.inner.peer_count

    @property
    def alive(self) -> bool:
        return self.inner.peer_count > 0


@dataclass(frozen=True)
class FailureEvent:
    peer: int
    cluster: int
    lost_keys: int
    representative: int | None
    skeleton_break: bool


@lru_cache(maxsize=None)
def bucket_shape(z: int, c: int = 1) -> tuple[int, int]:
    """(bucket count, collections per bucket) of a two-layer index over ``z`` collections."""
    if z <= 1:
        return 1, 1
    b = min(z, math.ceil(math.log2(z) ** (2 * c)))
    per = -(-z // b)
    return -(-z // per), per


@lru_cache(maxsize=None)
def lrt_node_table(b: int, n: int, j: int) -> int:
    """Routing entries held by node ``j`` of a plain LRT over ``n`` nodes.

    A node keeps one left-spine pointer per level; the spine node of a level
    also keeps one pointer per collection of that level; inside a collection
    the same structure repeats, down to groups of at most b+1 nodes that
    simply know each other.
    """
    if n <= 1:
        return 0
    if n <= b + 1:
        return n - 1
    g = geometry(b, n)
    entries = g.height
    i = g.level_of(j)
    if i == 0:
        # the root also points at its other children
        return entries + g.populated[1] - 1
    start = g.starts[i]
    if j == start:
        entries += g.collection_count(i)
    size = g.collection_size(i)
    first = start + (j - start) // size * size
    last = min(start + g.populated[i] - 1, first + size - 1)
    return entries + lrt_node_table(b, last - first + 1, j - first + 1)


@lru_cache(maxsize=None)
def _max_node_table(b: int, n: int) -> int:
    return max((lrt_node_table(b, n, j) for j in range(1, n + 1)), default=0)


class ArtSkeleton:
    """A built ART network.  Use :func:`build_art` to construct one."""

    def __init__(self, n_clusters: int, b=4, c: int = 1, inner: str = "finger-ring",
                 seed: int = 1, universe: int = DEFAULT_UNIVERSE, keyspace: KeyUniverse | None = None):
        try:
            fan = b if isinstance(b, Fanout) else Fanout(b)
        except ValueError as exc:
            raise InvalidConfig(str(exc)) from None
        if not isinstance(n_clusters, int) or n_clusters < 1:
            raise InvalidConfig("need at least one cluster")
        if not isinstance(c, int) or c < 1:
            raise InvalidConfig("c must be a positive integer")
        try:
            self.inner_cls = make_inner(inner)
        except ValueError as exc:
            raise InvalidConfig(str(exc)) from None
        self.keyspace = keyspace or KeyUniverse.for_clusters(n_clusters, universe)
        if self.keyspace.cluster_count != n_clusters:
            raise InvalidConfig("key space does not split into the requested cluster count")
        self.geometry: TreeGeometry = geometry(fan.b, n_clusters)
        self.b, self.c, self.seed = fan.b, c, int(seed) & ((1 << 64) - 1)
        self.n_clusters = n_clusters
        self.height = self.geometry.height
        self._clusters: dict[int, ClusterPeer] = {}
        self._rsi: dict[tuple, RsiEntry] = {}
        self._dead: list = []  # sorted labels of clusters with no live peer
        self._peer_home: dict[int, int] = {}  # peers created after build
        self._initial_peers = self.keyspace.peer_count
        self._next_peer = self._initial_peers + 1
        self._peer_total = self._initial_peers
        self._base_keys = None
        self.events: list = []

    # -- clusters and peers ------------------------------------------------

    def _check_cluster(self, cid: int):
        if not 1 <= cid <= self.n_clusters:
            raise UnknownCluster(cid)

    def _initial_ids(self, cid: int) -> range:
        s = self.keyspace.peers_per_cluster
        return range((cid - 1) * s + 1, min(cid * s, self._initial_peers) + 1)

    def cluster(self, cid: int) -> ClusterPeer:
        """The cluster with label ``cid``, materialising it on first use."""
        cp = self._clusters.get(cid)
        if cp is not None:
            return cp
        self._check_cluster(cid)
        lo, hi = self.keyspace.cluster_range(cid)
        ids = list(self._initial_ids(cid))
        positions = [min(hi, self.keyspace.peer_range(p)[1]) for p in ids]
        positions[-1] = hi
        keys = ()
        if self._base_keys is not None:
            a, z = np.searchsorted(self._base_keys, [lo, hi + 1])
            keys = self._base_keys[a:z].tolist()
        cp = ClusterPeer(cid, (lo, hi), self.inner_cls(lo, hi, ids, positions, keys), ids[0])
        self._clusters[cid] = cp
        return cp

    def materialized(self, cid: int) -> bool:
        return cid in self._clusters

    def representative(self, cid: int):
        cp = self._clusters.get(cid)
        if cp is None:
            self._check_cluster(cid)
            return self._initial_ids(cid)[0]
        return cp.representative

    def cluster_alive(self, cid: int) -> bool:
        cp = self._clusters.get(cid)
        return cp is None or cp.alive

    def epoch(self, cid: int) -> int:
        cp = self._clusters.get(cid)
        return 0 if cp is None else cp.epoch

    def cluster_of(self, peer: int) -> int:
        """Cluster currently holding live peer ``peer``."""
        cid = self._peer_home.get(peer)
        if cid is None:
            if not 1 <= peer <= self._initial_peers:
                raise UnknownPeer(peer)
            cid = (peer - 1) // self.keyspace.peers_per_cluster + 1
        cp = self._clusters.get(cid)
        if cp is not None and peer not in cp.inner:
            raise UnknownPeer(peer)
        return cid

    def peer_count(self, cid: int) -> int:
        cp = self._clusters.get(cid)
        return len(self._initial_ids(cid)) if cp is None else cp.peer_count

    def key_count(self, cid: int) -> int:
        cp = self._clusters.get(cid)
        if cp is not None:
            return cp.inner.key_count
        if self._base_keys is None:
            return 0
        lo, hi = self.keyspace.cluster_range(cid)
        a, z = np.searchsorted(self._base_keys, [lo, hi + 1])
        return int(z - a)

    @property
    def total_peers(self) -> int:
        return self._peer_total

    def bulk_load(self, keys) -> int:
        """Store many keys at once without routing; returns distinct keys added."""
        arr = np.unique(np.asarray(keys, dtype=np.int64))
        if arr.size and (arr[0] < 0 or arr[-1] >= self.keyspace.max_key):
            raise ValueError("keys outside the universe")
        added = 0
        if self._clusters:
            owners = arr // self.keyspace.cluster_span + 1
            live = np.isin(owners, np.fromiter(self._clusters, dtype=np.int64))
            for k, cid in zip(arr[live].tolist(), owners[live].tolist()):
                added += self._clusters[cid].inner.insert_key(k)
            arr = arr[~live]
        # unmaterialised clusters read their slice of this array on first use
        before = 0 if self._base_keys is None else self._base_keys.size
        self._base_keys = arr if self._base_keys is None else np.union1d(self._base_keys, arr)
        return added + int(self._base_keys.size - before)

    # -- random spine ------------------------------------------------------

    def _default_rsi(self, cid: int, level: int) -> int:
        g = self.geometry
        return g.starts[level] + _rand.draw_index(g.populated[level], self.seed, _rand.RSI, cid, level)

    def rsi_entry(self, cid: int, level: int) -> RsiEntry:
        self._check_cluster(cid)
        if not 0 <= level < self.height:
            raise ValueError(f"level {level} outside skeleton height {self.height}")
        e = self._rsi.get((cid, level))
        return e if e is not None else RsiEntry(self._default_rsi(cid, level), 0, 0)

    def rsi_table(self, cid: int) -> list:
        return [self.rsi_entry(cid, i).target for i in range(self.height)]

    def _live_at_level(self, level: int) -> int:
        g = self.geometry
        lo = g.starts[level]
        hi = lo + g.populated[level] - 1
        return g.populated[level] - (bisect_right(self._dead, hi) - bisect_left(self._dead, lo))

    def rsi_resample(self, cid: int, level: int) -> RsiEntry:
        """Replace RSI[level] of ``cid`` with a fresh choice among live clusters."""
        old = self.rsi_entry(cid, level)
        live = self._live_at_level(level)
        if live == 0:
            raise LevelExhausted(f"no cluster at level {level} has a live representative")
        version = old.version + 1
        r = _rand.draw_index(live, self.seed, _rand.RESAMPLE, cid, level, version)
        # r-th live label of the level, skipping dead ones in order
        target = self.geometry.starts[level] + r
        for d in self._dead[bisect_left(self._dead, self.geometry.starts[level]):]:
            if d > target:
                break
            target += 1
        entry = RsiEntry(target, self.epoch(target), version)
        self._rsi[(cid, level)] = entry
        return entry

    def _nested_spine(self, off: int, n: int, level: int) -> int:
        g = geometry(self.b, n)
        return g.starts[level] + _rand.draw_index(g.populated[level], self.seed, _rand.NESTED_SPINE, off, n, level)

    # -- skeleton routing --------------------------------------------------

    def _hop(self, trace: RouteTrace, src: int, dst: int, via: str):
        if src == dst:
            return
        if not self.cluster_alive(dst):
            raise UnreachableAfterRepair(f"cluster {dst} on the route has no live peer")
        trace.add("skeleton", src, dst, via)

    def _rsi_hop(self, trace: RouteTrace, cur: int, level: int) -> int:
        for attempt in range(self.height + 1):
            e = self.rsi_entry(cur, level)
            if self.cluster_alive(e.target) and self.epoch(e.target) == e.epoch:
                self._hop(trace, cur, e.target, f"rsi:{level}")
                return e.target
            # the cached endpoint is gone: one wasted message, then repair
            trace.add("retry", cur, e.target, f"rsi:{level}")
            if attempt == self.height:
                break
            try:
                self.rsi_resample(cur, level)
            except LevelExhausted:
                break
        raise UnreachableAfterRepair(f"RSI[{level}] of cluster {cur} could not be repaired")

    def _lrt_route(self, trace: RouteTrace, n: int, cur: int, t: int, ident, at: int, via: str) -> int:
        """Walk a plain LRT over ``n`` nodes from node ``cur`` to node ``t``.

        ``ident(label)`` maps a node to the cluster that answers for it and
        ``at`` is the cluster currently holding the message.  Returns the
        cluster reached.
        """
        b = self.b
        while cur != t:
            if n <= b + 1:
                self._hop(trace, at, ident(t), via)
                return ident(t)
            g = geometry(b, n)
            i = g.level_of(t)
            if i == 0 or (i == 1 and cur == 1):
                self._hop(trace, at, ident(t), via)
                return ident(t)
            start = g.starts[i]
            size = g.collection_size(i)
            first = start + (t - start) // size * size
            last = min(start + g.populated[i] - 1, first + size - 1)
            if not first <= cur <= last:
                spine = ident(start)
                self._hop(trace, at, spine, via)
                self._hop(trace, spine, ident(first), via)
                at, cur = ident(first), first
            off = first - 1
            ident = (lambda base, f: (lambda x: f(x + base)))(off, ident)
            n, cur, t = last - first + 1, cur - off, t - off
        return at

    def art_lookup(self, s: int, target: int):
        """Route from cluster ``s`` to cluster ``target``; returns (target, trace)."""
        self._check_cluster(s)
        self._check_cluster(target)
        trace = RouteTrace()
        self._route(trace, s, target)
        return target, trace

    def _route(self, trace: RouteTrace, s: int, target: int):
        b = self.b
        off, n = 0, self.n_clusters
        cur, t = s, target
        while cur != t:
            if n <= b:
                self._hop(trace, off + cur, off + t, "flat")
                return
            g = geometry(b, n)
            i = g.level_of(t)
            if i == 1 and cur == 1:
                # a root's children are its own tree links
                self._hop(trace, off + cur, off + t, "flat")
                return
            if g.level_of(cur) != i:
                if off == 0:
                    cur = self._rsi_hop(trace, cur, i)
                else:
                    x = self._nested_spine(off, n, i)
                    self._hop(trace, off + cur, off + x, f"spine:{i}")
                    cur = x
                if cur == t:
                    return
            if i <= 1:
                self._hop(trace, off + cur, off + t, "flat")
                return
            start = g.starts[i]
            size = g.collection_size(i)
            m, mx = (t - start) // size, (cur - start) // size
            first = start + m * size
            last = min(start + g.populated[i] - 1, first + size - 1)
            if m != mx:
                z = g.collection_count(i)
                buckets, per = bucket_shape(z, self.c)
                bx, bk = mx // per, m // per
                in_bucket = min(per, z - bk * per)
                coll = lambda q, base=start, sz=size, o=off: o + base + (q - 1) * sz
                at = off + cur
                if bx != bk:
                    rep = lambda q, base=start, step=per * size, o=off: o + base + (q - 1) * step
                    at = self._lrt_route(trace, buckets, bx + 1, bk + 1, rep, at, f"index1:{i}")
                    at = self._lrt_route(trace, in_bucket, 1, m % per + 1,
                                         lambda r, q0=bk * per: coll(q0 + r), at, f"index2:{i}")
                else:
                    at = self._lrt_route(trace, in_bucket, mx % per + 1, m % per + 1,
                                         lambda r, q0=bk * per: coll(q0 + r), at, f"index2:{i}")
                self._hop(trace, at, off + first, f"index2:{i}")
                cur = first
            off, n = off + first - 1, last - first + 1
            cur, t = cur - first + 1, t - first + 1

    # -- key operations ----------------------------------------------------

    def _intra(self, trace: RouteTrace, cp: ClusterPeer, k: int, entry) -> int:
        visited = cp.inner.locate_path(k, entry)
        for a, z in zip(visited, visited[1:]):
            trace.add("intra", a, z)
        return visited[-1]

    def _reach_cluster(self, trace: RouteTrace, s_peer: int, k: int):
        self.keyspace.check(k)
        src = self.cluster_of(s_peer)
        tgt = cluster_for_key(self.keyspace, k)
        if src == tgt:
            return self.cluster(tgt), s_peer
        self._route(trace, src, tgt)
        cp = self.cluster(tgt)
        if not cp.alive:
            raise EmptyCluster(f"cluster {tgt} has no live peer")
        return cp, cp.representative

    def exact_search(self, s: int, k: int):
        """Peer responsible for key ``k``, found from peer ``s``; returns (peer, trace)."""
        trace = RouteTrace()
        cp, entry = self._reach_cluster(trace, s, k)
        peer = self._intra(trace, cp, k, entry)
        trace.outcome = "found" if cp.inner.has_key(k) else "absent"
        return peer, trace

    def range_search(self, s: int, lo: int, hi: int):
        """Stored keys in ``[lo, hi]`` found from peer ``s``; returns (keys, trace)."""
        if lo > hi:
            raise InvalidRange(f"empty range [{lo}, {hi}]")
        self.keyspace.check(hi)
        peer, trace = self.exact_search(s, lo)
        cid = self.cluster_of(peer)
        cp = self.cluster(cid)
        answer = cp.inner.keys_between(lo, hi)
        while True:
            if peer is not None:
                nxt = cp.inner.successor(peer)
                while nxt is not None and cp.inner.range_of(nxt)[0] <= hi:
                    trace.add("intra", peer, nxt, "scan")
                    peer, nxt = nxt, cp.inner.successor(nxt)
            if cp.key_range[1] >= hi:
                break
            trace.add("skeleton", cid, cid + 1, "successor")
            cid += 1
            cp = self.cluster(cid)
            peer = cp.inner.peers[0] if cp.alive else None
            answer.extend(cp.inner.keys_between(lo, hi))
        trace.outcome = f"{len(answer)} keys"
        return answer, trace

    def insert_key(self, s: int, k: int) -> RouteTrace:
        peer, trace = self.exact_search(s, k)
        cp = self.cluster(self.cluster_of(peer))
        trace.outcome = "inserted" if cp.inner.insert_key(k) else "duplicate"
        return trace

    def delete_key(self, s: int, k: int) -> RouteTrace:
        peer, trace = self.exact_search(s, k)
        cp = self.cluster(self.cluster_of(peer))
        trace.outcome = "deleted" if cp.inner.delete_key(k) else "absent"
        return trace

    # -- membership --------------------------------------------------------

    def _mark_alive(self, cid: int, alive: bool):
        i = bisect_left(self._dead, cid)
        present = i < len(self._dead) and self._dead[i] == cid
        if alive and present:
            del self._dead[i]
        elif not alive and not present:
            insort(self._dead, cid)

    def join_peer(self, entrance: int, w_key: int):
        """A new peer enters at ``entrance`` carrying ``w_key``; returns (peer id, trace)."""
        trace = RouteTrace()
        self.keyspace.check(w_key)
        tgt = cluster_for_key(self.keyspace, w_key)
        if self.cluster_alive(tgt):
            cp, entry = self._reach_cluster(trace, entrance, w_key)
            owner = self._intra(trace, cp, w_key, entry)
            new = self._next_peer
            cp.inner.add_peer(new, w_key, owner)
            trace.add("intra", owner, new, "handoff")
        else:
            # refill an emptied cluster: route to its vacant slot
            src = self.cluster_of(entrance)
            self._mark_alive(tgt, True)
            try:
                if src != tgt:
                    self._route(trace, src, tgt)
            except BaseException:
                self._mark_alive(tgt, False)
                raise
            cp = self.cluster(tgt)
            new = self._next_peer
            cp.inner.add_peer(new, w_key)
            cp.representative = new
        self._next_peer += 1
        self._peer_total += 1
        self._peer_home[new] = cp.id
        trace.outcome = "joined"
        return new, trace

    def leave_peer(self, w: int) -> RouteTrace:
        """Graceful departure initiated by ``w`` itself."""
        cid = self.cluster_of(w)
        cp = self.cluster(cid)
        if cp.peer_count == 1:
            self.events.append(("last-peer-departure", cid, w))
            raise LastPeerInCluster(f"peer {w} is the last peer of cluster {cid}")
        trace = RouteTrace()
        neighbour = cp.inner.successor(w)
        if neighbour is None:
            neighbour = cp.inner.peers[-2]
        cp.inner.remove_peer(w)
        self._peer_total -= 1
        trace.add("intra", w, neighbour, "handoff")
        if cp.representative == w:
            cp.representative = cp.inner.peers[0]
        self._peer_home.pop(w, None)
        trace.outcome = "left"
        return trace

    def fail_peer(self, w: int) -> FailureEvent:
        """Crash ``w`` without handoff; its keys are lost."""
        cid = self.cluster_of(w)
        cp = self.cluster(cid)
        lost = cp.inner.fail_peer(w)
        self._peer_total -= 1
        self._peer_home.pop(w, None)
        broken = False
        if cp.representative == w:
            if cp.alive:
                cp.representative = cp.inner.peers[0]
                cp.epoch += 1
            else:
                cp.representative = None
                cp.epoch += 1
                broken = True
                self._mark_alive(cid, False)
                self.events.append(("skeleton-break", cid, w))
        ev = FailureEvent(w, cid, lost, cp.representative, broken)
        return ev

    def live_peers(self, cid: int) -> list:
        cp = self._clusters.get(cid)
        return list(self._initial_ids(cid)) if cp is None else cp.inner.peers

    # -- routing state -----------------------------------------------------

    def _view_chain(self, cid: int):
        """(offset, size, label, level) for every view containing ``cid``, outermost first."""
        off, n, x = 0, self.n_clusters, cid
        out = []
        while True:
            g = geometry(self.b, n)
            i = g.level_of(x)
            out.append((off, n, x, i))
            if i == 0 or n <= self.b:
                return out
            start = g.starts[i]
            size = g.collection_size(i)
            first = start + (x - start) // size * size
            last = min(start + g.populated[i] - 1, first + size - 1)
            if last - first + 1 <= self.b:
                return out
            off, n, x = off + first - 1, last - first + 1, x - first + 1

    def _index_share(self, n: int, i: int, x: int) -> tuple[float, float]:
        """First- and second-layer index entries of an ``n``-view charged to member ``x``."""
        g = geometry(self.b, n)
        q = (x - g.starts[i]) // g.collection_size(i) // _level_index(self.b, self.c, n, i).per
        shape = _level_index(self.b, self.c, n, i)
        return shape.first_share, shape.second_shares[q]

    def routing_breakdown(self, cid: int) -> dict:
        """Routing entries held by cluster ``cid``, split by structure.

        The RSI table is held whole.  Each index structure (the first-layer
        LRT of a level, the second-layer LRT of a bucket, the random spine of
        a nested view) is striped evenly across the clusters it indexes.
        """
        self._check_cluster(cid)
        first = second = spines = 0.0
        for depth, (off, n, x, i) in enumerate(self._view_chain(cid)):
            if depth:
                spines += geometry(self.b, n).height / n
            if i >= 2:
                f, sec = self._index_share(n, i, x)
                first += f
                second += sec
        return {"rsi": self.height, "first_layer": first, "second_layer": second,
                "nested_spines": spines, "total": self.height + first + second + spines}

    def routing_entries(self, cid: int) -> float:
        return self.routing_breakdown(cid)["total"]

    def max_routing_entries(self) -> float:
        """Largest per-cluster routing state, computed over view shapes."""
        return self.height + _max_view_share(self.b, self.c, self.n_clusters, False)

    def max_index_node_tables(self) -> tuple[int, int]:
        """Largest whole table of any single (first-layer, second-layer) index node."""
        return _max_index_node(self.b, self.c, self.n_clusters)

    def routing_budget(self) -> float:
        n = self.n_clusters
        return max(8.0, 2 * n ** 0.25 / math.log2(n) + self.height) if n >= 2 else 8.0

    # -- snapshot ----------------------------------------------------------

    def index_shapes(self) -> list:
        """(view size, level, collections, buckets, per bucket) for every distinct view."""
        seen, out, todo = set(), [], [self.n_clusters]
        while todo:
            n = todo.pop()
            if n in seen or n <= self.b:
                continue
            seen.add(n)
            g = geometry(self.b, n)
            for i in range(2, g.height):
                z = g.collection_count(i)
                out.append((n, i, z, *bucket_shape(z, self.c)))
            for i in range(1, g.height):
                size = g.collection_size(i)
                full, tail = divmod(g.populated[i], size)
                if full:
                    todo.append(size)
                if tail:
                    todo.append(tail)
        return sorted(out, key=lambda r: (-r[0], r[1]))

    def snapshot(self) -> str:
        """Versioned text dump of the skeleton (not of peer contents)."""
        g, u = self.geometry, self.keyspace
        lines = [
            SNAPSHOT_HEADER,
            f"geometry b={self.b} c={self.c} n_clusters={self.n_clusters} height={self.height} seed={self.seed}",
            f"keyspace max_key={u.max_key} peers_per_cluster={u.peers_per_cluster} peer_span={u.peer_span}",
        ]
        for i in range(self.height):
            lines.append(f"level {i} start={g.starts[i]} populated={g.populated[i]}")
        for shape in self.index_shapes():
            lines.append("index view={} level={} collections={} buckets={} per={}".format(*shape))
        for cid in range(1, self.n_clusters + 1):
            lo, hi = u.cluster_range(cid)
            rsi = " ".join(f"{e.target}@{e.epoch}" for e in (self.rsi_entry(cid, i) for i in range(self.height)))
            lines.append(f"cluster {cid} {lo} {hi} rsi {rsi}")
        return "\n".join(lines) + "\n"


class _LevelIndex(NamedTuple):
    buckets: int
    per: int
    first_total: int
    first_share: float
    second_shares: tuple  # per bucket


@lru_cache(maxsize=None)
def _level_index(b: int, c: int, n: int, i: int) -> _LevelIndex:
    """Two-layer index of level ``i`` of an ``n``-view and its striped cost."""
    g = geometry(b, n)
    z = g.collection_count(i)
    size = g.collection_size(i)
    buckets, per = bucket_shape(z, c)
    members = g.populated[i]
    first_total = sum(lrt_node_table(b, buckets, q) for q in range(1, buckets + 1))
    shares = []
    for q in range(buckets):
        in_bucket = min(per, z - q * per)
        lo = q * per * size
        bucket_n = min(members, lo + per * size) - lo
        total = sum(lrt_node_table(b, in_bucket, r) for r in range(1, in_bucket + 1))
        shares.append(total / bucket_n)
    return _LevelIndex(buckets, per, first_total, first_total / members, tuple(shares))


def _collection_sizes(b: int, n: int, i: int):
    """Distinct collection sizes at level ``i`` of an ``n``-view, with the buckets holding them."""
    g = geometry(b, n)
    size = g.collection_size(i)
    full, tail = divmod(g.populated[i], size)
    return size, full, tail


@lru_cache(maxsize=None)
def _max_view_share(b: int, c: int, n: int, nested: bool) -> float:
    """Max over members of an n-view of the striped entries they hold in it and below."""
    g = geometry(b, n)
    base = g.height / n if nested else 0.0
    if n <= b:
        return base
    best = 0.0  # the view root holds nothing beyond its spine share
    for i in range(1, g.height):
        size, full, tail = _collection_sizes(b, n, i)
        below_full = _max_view_share(b, c, size, True) if full and size > b else 0.0
        below_tail = _max_view_share(b, c, tail, True) if tail > b else 0.0
        if i == 1:
            best = max(best, below_full, below_tail)
            continue
        idx = _level_index(b, c, n, i)
        z = g.collection_count(i)
        for q, second in enumerate(idx.second_shares):
            last_coll = min(z, (q + 1) * idx.per) - 1
            below = below_full
            if tail and last_coll == z - 1:
                below = max(below, below_tail) if last_coll > q * idx.per else below_tail
            best = max(best, idx.first_share + second + below)
    return base + best


@lru_cache(maxsize=None)
def _max_index_node(b: int, c: int, n: int) -> tuple[int, int]:
    if n <= b:
        return 0, 0
    g = geometry(b, n)
    first = second = 0
    for i in range(1, g.height):
        if i >= 2:
            z = g.collection_count(i)
            buckets, per = bucket_shape(z, c)
            first = max(first, _max_node_table(b, buckets))
            second = max(second, _max_node_table(b, min(per, z)))
        size, full, tail = _collection_sizes(b, n, i)
        for sub in {size if full else 0, tail}:
            if sub > b:
                f, s2 = _max_index_node(b, c, sub)
                first, second = max(first, f), max(second, s2)
    return first, second


def build_art(n_clusters: int, b=4, c: int = 1, inner: str = "finger-ring", seed: int = 1,
              universe: int = DEFAULT_UNIVERSE, keyspace: KeyUniverse | None = None) -> ArtSkeleton:
    """Build a skeleton of ``n_clusters`` cluster-peers."""
    return ArtSkeleton(n_clusters, b=b, c=c, inner=inner, seed=seed, universe=universe, keyspace=keyspace)


def parse_snapshot(text: str) -> dict:
    """Inverse of :meth:`ArtSkeleton.snapshot`, as plain data."""
    lines = text.splitlines()
    if not lines or lines[0] != SNAPSHOT_HEADER:
        raise SnapshotError(f"expected header {SNAPSHOT_HEADER!r}")
    out = {"levels": [], "indexes": [], "clusters": {}}

    def fields(parts):
        kv = {}
        for p in parts:
            k, sep, v = p.partition("=")
            if not sep:
                raise SnapshotError(f"expected key=value, got {p!r}")
            kv[k] = int(v)
        return kv

    for no, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        tag = parts[0]
        try:
            if tag in ("geometry", "keyspace"):
                out[tag] = fields(parts[1:])
            elif tag == "level":
                out["levels"].append((int(parts[1]), *fields(parts[2:]).values()))
            elif tag == "index":
                out["indexes"].append(tuple(fields(parts[1:]).values()))
            elif tag == "cluster":
                cid, lo, hi = int(parts[1]), int(parts[2]), int(parts[3])
                if parts[4] != "rsi":
                    raise SnapshotError("missing rsi marker")
                rsi = [tuple(int(v) for v in p.split("@")) for p in parts[5:]]
                out["clusters"][cid] = ((lo, hi), rsi)
            else:
                raise SnapshotError(f"unknown record {tag!r}")
        except (ValueError, IndexError) as exc:
            raise SnapshotError(f"line {no}: {exc}") from None
    if "geometry" not in out or "keyspace" not in out:
        raise SnapshotError("missing geometry or keyspace record")
    return out
