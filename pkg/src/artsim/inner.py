"""Peer organisation inside one cluster-peer.

A cluster covers an inclusive key range ``[lo, hi]``.  Its live peers are
kept in key order; each peer has a *position* key and owns the keys from just
above its predecessor's position up to its own position.  The first peer also
owns everything from ``lo`` and the last one everything up to ``hi``, so the
sub-ranges always tile the cluster range.

Stored keys are kept in one sorted list per cluster; a peer's keys are the
slice falling in its sub-range, so moving a boundary never copies data.

Two hop models are provided.  :class:`FingerRing` behaves like a ring with
power-of-two skip fingers (logarithmic locate).  :class:`DirectOracle`
answers every locate in one message, which isolates skeleton hops in tests.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right, insort

__all__ = [
    "DirectOracle",
    "DuplicatePeerPosition",
    "EmptyCluster",
    "FingerRing",
    "InnerOverlay",
    "KeyOutsideCluster",
    "LastPeerInCluster",
    "UnknownPeer",
    "make_inner",
]


class EmptyCluster(LookupError):
    pass


class KeyOutsideCluster(ValueError):
    pass


class DuplicatePeerPosition(ValueError):
    pass


class UnknownPeer(KeyError):
    pass


class LastPeerInCluster(RuntimeError):
    """Removing this peer would empty the cluster; escalated to the skeleton."""


class InnerOverlay:
    kind = "abstract"

    def __init__(self, lo: int, hi: int, peers=(), positions=(), keys=()):
        if lo > hi:
            raise ValueError("empty key range")
        self.lo, self.hi = lo, hi
        self._pos = list(positions)
        self._ids = list(peers)
        if len(self._pos) != len(self._ids):
            raise ValueError("peers and positions differ in length")
        if any(a >= b for a, b in zip(self._pos, self._pos[1:])):
            raise ValueError("positions must be strictly increasing")
        self._index = {p: i for i, p in enumerate(self._ids)}
        if len(self._index) != len(self._ids):
            raise ValueError("duplicate peer id")
        self._keys = sorted(keys)
        if self._keys and not (lo <= self._keys[0] and self._keys[-1] <= hi):
            raise KeyOutsideCluster("initial keys outside the cluster range")

    @classmethod
    def evenly(cls, lo: int, hi: int, peer_ids, keys=()):
        """Peers splitting ``[lo, hi]`` into equal consecutive spans."""
        ids = list(peer_ids)
        span = (hi - lo + 1) // max(1, len(ids))
        if ids and span < 1:
            raise ValueError("more peers than keys in the range")
        positions = [lo + (i + 1) * span - 1 for i in range(len(ids))]
        if ids:
            positions[-1] = hi
        return cls(lo, hi, ids, positions, keys)

    # -- directory ------------------------------------------------------

    @property
    def peer_count(self) -> int:
        return len(self._ids)

    @property
    def key_count(self) -> int:
        return len(self._keys)

    @property
    def peers(self) -> list:
        return list(self._ids)

    def __contains__(self, peer) -> bool:
        return peer in self._index

    def _reindex(self, start: int = 0):
        for i in range(start, len(self._ids)):
            self._index[self._ids[i]] = i

    def _slot(self, peer) -> int:
        try:
            return self._index[peer]
        except KeyError:
            raise UnknownPeer(peer) from None

    def _owner_slot(self, k: int) -> int:
        if not self._ids:
            raise EmptyCluster(f"cluster [{self.lo}, {self.hi}] has no live peers")
        if not self.lo <= k <= self.hi:
            raise KeyOutsideCluster(f"key {k} outside [{self.lo}, {self.hi}]")
        return min(bisect_left(self._pos, k), len(self._ids) - 1)

    def owner(self, k: int):
        return self._ids[self._owner_slot(k)]

    def position(self, peer) -> int:
        return self._pos[self._slot(peer)]

    def range_of(self, peer) -> tuple[int, int]:
        i = self._slot(peer)
        lo = self.lo if i == 0 else self._pos[i - 1] + 1
        hi = self.hi if i == len(self._ids) - 1 else self._pos[i]
        return lo, hi

    def successor(self, peer):
        i = self._slot(peer) + 1
        return self._ids[i] if i < len(self._ids) else None

    def ranges(self) -> list:
        return [(p, *self.range_of(p)) for p in self._ids]

    # -- keys ------------------------------------------------------------

    def _check_key(self, k):
        if not self.lo <= k <= self.hi:
            raise KeyOutsideCluster(f"key {k} outside [{self.lo}, {self.hi}]")

    def has_key(self, k: int) -> bool:
        i = bisect_left(self._keys, k)
        return i < len(self._keys) and self._keys[i] == k

    def insert_key(self, k: int) -> bool:
        """Store ``k``; False if it was already present."""
        self._check_key(k)
        if self.has_key(k):
            return False
        insort(self._keys, k)
        return True

    def delete_key(self, k: int) -> bool:
        self._check_key(k)
        i = bisect_left(self._keys, k)
        if i < len(self._keys) and self._keys[i] == k:
            del self._keys[i]
            return True
        return False

    def keys_between(self, lo: int, hi: int) -> list:
        return self._keys[bisect_left(self._keys, lo):bisect_right(self._keys, hi)]

    def keys_of(self, peer) -> list:
        return self.keys_between(*self.range_of(peer))

    def load_of(self, peer) -> int:
        lo, hi = self.range_of(peer)
        return bisect_right(self._keys, hi) - bisect_left(self._keys, lo)

    @property
    def keys(self) -> list:
        return list(self._keys)

    # -- hop model -------------------------------------------------------

    def path(self, entry_slot: int, target_slot: int) -> list:
        """Slots visited from ``entry_slot`` to ``target_slot``, both included."""
        raise NotImplementedError

    def hop_ceiling(self) -> int:
        raise NotImplementedError

    def locate_path(self, k: int, entry=None) -> list:
        """Peers visited while locating ``k`` from ``entry`` (default: first peer)."""
        target = self._owner_slot(k)
        entry_slot = 0 if entry is None else self._slot(entry)
        if len(self._ids) == 1:
            return [self._ids[0]]
        return [self._ids[s] for s in self.path(entry_slot, target)]

    def locate(self, k: int, entry=None):
        """Peer responsible for ``k`` and the messages spent reaching it from ``entry``."""
        visited = self.locate_path(k, entry)
        return visited[-1], len(visited) - 1

    # -- membership ------------------------------------------------------

    def add_peer(self, peer, position: int, entry=None) -> int:
        """Insert ``peer`` at key ``position``; returns messages spent.

        The new peer takes the lower part of the sub-range it lands in
        (up to and including ``position``); the old owner keeps the rest.
        """
        self._check_key(position)
        if peer in self._index:
            raise ValueError(f"peer {peer} already present")
        if not self._ids:
            self._ids.append(peer)
            self._pos.append(position)
            self._index[peer] = 0
            return 0
        i = bisect_left(self._pos, position)
        if i < len(self._pos) and self._pos[i] == position:
            raise DuplicatePeerPosition(f"position {position} already taken")
        _, hops = self.locate(position, entry)
        self._pos.insert(i, position)
        self._ids.insert(i, peer)
        self._reindex(i)
        return hops + 1  # handoff of the split sub-range

    def _drop(self, i: int):
        peer = self._ids.pop(i)
        self._pos.pop(i)
        del self._index[peer]
        self._reindex(i)

    def remove_peer(self, peer) -> int:
        """Graceful departure: keys merge into a neighbour, one message."""
        i = self._slot(peer)
        if len(self._ids) == 1:
            raise LastPeerInCluster(f"peer {peer} is the last peer of its cluster")
        self._drop(i)
        return 1

    def fail_peer(self, peer) -> int:
        """Crash without handoff; returns the number of keys lost."""
        lo, hi = self.range_of(peer)
        a, b = bisect_left(self._keys, lo), bisect_right(self._keys, hi)
        del self._keys[a:b]
        self._drop(self._slot(peer))
        return b - a

    def rebalance(self, left, right) -> int:
        """Move the boundary between two adjacent peers to their median key.

        Returns messages spent (request and handoff), or 0 if nothing moved.
        """
        i, j = self._slot(left), self._slot(right)
        if j != i + 1:
            raise ValueError("peers are not adjacent")
        lo = self.range_of(left)[0]
        hi = self.range_of(right)[1]
        keys = self.keys_between(lo, hi)
        if len(keys) < 2:
            return 0
        cut = keys[(len(keys) - 1) // 2]
        nxt = self._pos[j] if j < len(self._ids) - 1 else self.hi + 1
        prev = self._pos[i - 1] if i > 0 else self.lo - 1
        if cut == self._pos[i] or not prev < cut < nxt:
            return 0
        self._pos[i] = cut
        return 2

    def snapshot(self) -> tuple:
        return tuple(self._ids), tuple(self._pos), tuple(self._keys)


class FingerRing(InnerOverlay):
    """Ring with implicit skip fingers at distances 1, 2, 4, ...

    Fingers are index based, so they are repaired implicitly on every
    membership change and always address live peers.  Greedy forwarding
    covers the clockwise distance one set bit at a time.
    """

    kind = "finger-ring"

    def path(self, entry_slot, target_slot):
        n = len(self._ids)
        out, cur = [entry_slot], entry_slot
        dist = (target_slot - entry_slot) % n
        # greedy: longest finger that does not overshoot
        for bit in range(dist.bit_length() - 1, -1, -1):
            if dist >> bit & 1:
                cur = (cur + (1 << bit)) % n
                out.append(cur)
        return out

    def hop_ceiling(self) -> int:
        n = max(1, len(self._ids))
        return n.bit_length()  # floor(log2 n) + 1


class DirectOracle(InnerOverlay):
    """Every peer knows the full directory: one message per locate."""

    kind = "direct-oracle"

    def path(self, entry_slot, target_slot):
        return [entry_slot] if entry_slot == target_slot else [entry_slot, target_slot]

    def hop_ceiling(self) -> int:
        return 1


_KINDS = {cls.kind: cls for cls in (FingerRing, DirectOracle)}


def make_inner(kind: str):
    try:
        return _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown inner overlay {kind!r}; expected one of {sorted(_KINDS)}") from None
