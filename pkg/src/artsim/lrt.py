"""Level Range Tree geometry.

Labels are 1-based and assigned in level order: the root is label 1 and the
labels of every level are consecutive.  Level ``i >= 1`` holds ``b**(2**(i-1))``
slots, so the fanout grows doubly exponentially and the height stays
``O(log log N)``.

Everything here is pure integer arithmetic on immutable inputs.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

__all__ = [
    "SATURATED",
    "CollectionRef",
    "Fanout",
    "InvalidCollection",
    "InvalidFanout",
    "LabelOutOfRange",
    "TreeGeometry",
    "collection_bounds",
    "collection_index",
    "geometry",
    "level_of_label",
    "level_population",
    "level_start_label",
    "lrt_height",
    "max_nesting_depth",
    "routing_overhead_estimate",
    "t1_hop_bound",
    "validate_fanout",
]

# populations above this (and above N) are reported as SATURATED
_SATURATION_LIMIT = 1 << 64


class InvalidFanout(ValueError):
    pass


class LabelOutOfRange(ValueError):
    pass


class InvalidCollection(ValueError):
    pass


class _Saturated:
    """Marker for a level population too large to matter (beyond N)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "SATURATED"

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("SATURATED")

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True


SATURATED = _Saturated()


@dataclass(frozen=True)
class Fanout:
    b: int

    def __post_init__(self):
        if not _is_double_power_of_two(self.b):
            raise InvalidFanout(f"fanout {self.b!r} is not of the form 2**(2**j)")

    def __int__(self):
        return self.b


def _is_double_power_of_two(b) -> bool:
    if not isinstance(b, int) or isinstance(b, bool) or b < 2:
        return False
    if b & (b - 1):
        return False
    exponent = b.bit_length() - 1
    return exponent & (exponent - 1) == 0


def validate_fanout(b: int) -> Fanout:
    return Fanout(b)


def _raw_population(b: int, i: int, cap: int) -> int | None:
    """b**(2**(i-1)) by repeated squaring, or None once it exceeds ``cap``."""
    if i == 0:
        return 1
    value = b
    for _ in range(i - 1):
        value *= value
        if value > cap:
            return None
    return value if value <= cap else None


@dataclass(frozen=True)
class TreeGeometry:
    """Shape of an LRT over ``node_count`` entities with fanout ``fanout``.

    ``starts[i]`` is the first label of level ``i`` and ``populated[i]`` the
    number of labels actually present there (only the last level can be
    partial).
    """

    fanout: Fanout
    node_count: int
    starts: tuple = field(init=False, repr=False, compare=False)
    populated: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if isinstance(self.fanout, int):
            object.__setattr__(self, "fanout", Fanout(self.fanout))
        if self.node_count < 1:
            raise ValueError("node_count must be >= 1")
        b, n = self.fanout.b, self.node_count
        starts, populated = [], []
        start, i = 1, 0
        while start <= n:
            pop = _raw_population(b, i, n)
            full = pop if pop is not None else n + 1
            starts.append(start)
            populated.append(min(full, n - start + 1))
            start += full
            i += 1
        object.__setattr__(self, "starts", tuple(starts))
        object.__setattr__(self, "populated", tuple(populated))

    @property
    def b(self) -> int:
        return self.fanout.b

    @property
    def height(self) -> int:
        return len(self.starts)

    def level_of(self, label: int) -> int:
        if not 1 <= label <= self.node_count:
            raise LabelOutOfRange(f"label {label} outside [1, {self.node_count}]")
        return bisect_right(self.starts, label) - 1

    def collection_size(self, level: int) -> int:
        """Nominal member count of one collection at ``level`` (>= 1)."""
        if level == 1:
            return self.b
        return self.level_capacity(level - 1)

    def level_capacity(self, level: int) -> int:
        pop = _raw_population(self.b, level, _SATURATION_LIMIT)
        if pop is None:
            raise OverflowError(f"level {level} population is astronomically large")
        return pop

    def collection_count(self, level: int) -> int:
        """Number of non-empty collections at ``level`` (>= 1)."""
        if level == 1:
            return 1
        size = self.collection_size(level)
        return -(-self.populated[level] // size)

    def collection_span(self, level: int, index: int) -> tuple[int, int]:
        """Inclusive populated label range of collection ``index`` (1-based)."""
        first = self.starts[level] + (index - 1) * self.collection_size(level)
        last = min(self.starts[level] + self.populated[level] - 1,
                   first + self.collection_size(level) - 1)
        return first, last


@lru_cache(maxsize=4096)
def geometry(b: int, n: int) -> TreeGeometry:
    """Cached geometry constructor; geometries are immutable."""
    return TreeGeometry(Fanout(b), n)


class CollectionRef(NamedTuple):
    level: int
    index: int


def level_population(g: TreeGeometry, i: int):
    if i < 0:
        raise ValueError("level index must be >= 0")
    pop = _raw_population(g.b, i, max(g.node_count, _SATURATION_LIMIT))
    return SATURATED if pop is None else pop


def level_start_label(g: TreeGeometry, i: int):
    if i < 0:
        raise ValueError("level index must be >= 0")
    if i < g.height:
        return g.starts[i]
    start = g.starts[-1]
    for level in range(g.height - 1, i):
        pop = level_population(g, level)
        if pop is SATURATED:
            return SATURATED
        start += pop
    return start


def level_of_label(g: TreeGeometry, j: int) -> int:
    """Walk the left spine until the next spine label passes ``j``."""
    if not 1 <= j <= g.node_count:
        raise LabelOutOfRange(f"label {j} outside [1, {g.node_count}]")
    i, x = 0, 1
    while True:
        nxt = x + level_population(g, i)
        if j < nxt:
            return i
        x = nxt
        i += 1


def collection_index(g: TreeGeometry, i: int, j: int) -> CollectionRef:
    if i < 1 or i >= g.height:
        raise LabelOutOfRange(f"level {i} has no collections in this tree")
    start = g.starts[i]
    if not start <= j < start + g.populated[i]:
        raise LabelOutOfRange(f"label {j} is not at level {i}")
    if i == 1:
        return CollectionRef(1, 1)
    m = -(-(j - start + 1) // level_population(g, i - 1))
    return CollectionRef(i, m)


def collection_bounds(g: TreeGeometry, ref: CollectionRef) -> tuple[int, int]:
    """Nominal inclusive label bounds of a collection."""
    level, m = ref
    if level < 1 or m < 1:
        raise InvalidCollection(f"invalid collection {ref!r}")
    if level == 1:
        if m != 1:
            raise InvalidCollection("level 1 is a single collection")
        return 2, g.b + 1
    if level >= g.height:
        raise InvalidCollection(f"level {level} beyond tree height {g.height}")
    size = level_population(g, level - 1)
    if m > size:
        raise InvalidCollection(f"level {level} has only {size} collections")
    first = level_start_label(g, level) + (m - 1) * size
    return first, first + size - 1


def lrt_height(g: TreeGeometry) -> int:
    return g.height


def _max_collection_members(g: TreeGeometry) -> int:
    best = 0
    for level in range(1, g.height):
        size = g.collection_size(level)
        best = max(best, min(size, g.populated[level]))
    return best


def max_nesting_depth(g: TreeGeometry) -> int:
    """Recursion depth until no collection has more than b members."""
    depth = 1
    size = _max_collection_members(g)
    while size > g.b:
        depth += 1
        size = _max_collection_members(geometry(g.b, size))
    return depth


def routing_overhead_estimate(n: int, c: int) -> float:
    if n < 2 or c < 1:
        raise ValueError("need N >= 2 and c >= 1")
    return n ** 0.25 / math.log2(n) ** c


def t1_hop_bound(n: int, b) -> float:
    b = int(b)
    if n < b:
        raise ValueError("need N >= b")
    return math.log(math.log2(n), b) ** 2
