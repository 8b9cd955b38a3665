import pytest
from hypothesis import given, settings, strategies as st

from artsim.inner import (
    DirectOracle,
    DuplicatePeerPosition,
    EmptyCluster,
    FingerRing,
    KeyOutsideCluster,
    LastPeerInCluster,
    UnknownPeer,
    make_inner,
)

KINDS = [FingerRing, DirectOracle]


def scan_owner(ov, k):
    """Linear scan of the directory: first peer whose range reaches k."""
    for peer, lo, hi in ov.ranges():
        if lo <= k <= hi:
            return peer
    raise AssertionError("no owner")


def assert_tiles(ov):
    rs = ov.ranges()
    assert rs[0][1] == ov.lo and rs[-1][2] == ov.hi
    for (_, _, hi), (_, lo, _) in zip(rs, rs[1:]):
        assert lo == hi + 1


@pytest.mark.parametrize("cls", KINDS)
def test_single_peer_locate_is_free(cls):
    ov = cls.evenly(0, 99, [7])
    assert ov.locate(42) == (7, 0)


def test_direct_oracle_costs_one():
    ov = DirectOracle.evenly(0, 99, range(1, 6))
    for k in range(100):
        peer, hops = ov.locate(k, entry=1)
        assert peer == scan_owner(ov, k)
        assert hops == (0 if peer == 1 else 1)


def test_finger_ring_16_exhaustive():
    ov = FingerRing.evenly(0, 159, range(1, 17))
    worst = 0
    for entry in ov.peers:
        for k in range(160):
            peer, hops = ov.locate(k, entry)
            assert peer == scan_owner(ov, k)
            worst = max(worst, hops)
    assert worst <= 5


@pytest.mark.parametrize("size", [1, 2, 3, 7, 8, 31, 100, 4096])
def test_finger_ring_hop_ceiling(size):
    ov = FingerRing.evenly(0, 10 * size - 1, range(size))
    ceiling = size.bit_length()
    step = max(1, size // 64)
    for entry in range(0, size, step):
        for target in range(size):
            assert ov.locate(10 * target + 3, entry)[1] <= ceiling


@pytest.mark.parametrize("cls", KINDS)
def test_add_to_empty(cls):
    ov = cls(0, 99)
    assert ov.add_peer(1, 50) == 0
    assert ov.peer_count == 1
    assert ov.range_of(1) == (0, 99)


@pytest.mark.parametrize("cls", KINDS)
def test_add_then_locate_everywhere(cls):
    ov = cls.evenly(0, 159, range(1, 17))
    ov.add_peer(99, 37)
    assert ov.peer_count == 17
    assert_tiles(ov)
    for k in range(160):
        assert ov.locate(k, 5)[0] == scan_owner(ov, k)
    assert ov.owner(37) == 99 and ov.owner(38) != 99


@pytest.mark.parametrize("cls", KINDS)
def test_add_remove_is_identity(cls):
    ov = cls.evenly(0, 159, range(1, 17), keys=range(0, 160, 3))
    before = ov.ranges(), ov.keys
    ov.add_peer(99, 37)
    ov.remove_peer(99)
    assert (ov.ranges(), ov.keys) == before


def test_duplicate_position():
    ov = FingerRing.evenly(0, 99, [1, 2])
    with pytest.raises(DuplicatePeerPosition):
        ov.add_peer(3, ov.position(1))


def test_remove_from_two():
    ov = FingerRing.evenly(0, 99, [1, 2])
    assert ov.remove_peer(1) == 1
    assert ov.range_of(2) == (0, 99)
    ov = FingerRing.evenly(0, 99, [1, 2])
    ov.remove_peer(2)
    assert ov.range_of(1) == (0, 99)


def test_remove_middle_of_eight():
    ov = FingerRing.evenly(0, 79, range(8), keys=range(80))
    ov.remove_peer(4)
    assert_tiles(ov)
    for k in range(80):
        peer, _ = ov.locate(k)
        assert peer == scan_owner(ov, k) and k in ov.keys_of(peer)


def test_remove_errors():
    ov = FingerRing.evenly(0, 99, [1, 2])
    with pytest.raises(UnknownPeer):
        ov.remove_peer(9)
    ov.remove_peer(1)
    with pytest.raises(LastPeerInCluster):
        ov.remove_peer(2)


def test_locate_errors():
    ov = FingerRing(0, 99)
    with pytest.raises(EmptyCluster):
        ov.locate(3)
    ov.add_peer(1, 5)
    with pytest.raises(KeyOutsideCluster):
        ov.locate(100)


def test_fail_loses_keys():
    ov = FingerRing.evenly(0, 99, range(4), keys=range(100))
    lost = ov.fail_peer(1)
    assert lost == 25
    assert ov.key_count == 75
    assert_tiles(ov)
    assert ov.keys_of(ov.owner(30)) == list(range(50, 75))


def test_rebalance_moves_boundary_to_median():
    ov = FingerRing.evenly(0, 99, [1, 2], keys=list(range(0, 10)) + [60])
    assert ov.load_of(1) == 10 and ov.load_of(2) == 1
    assert ov.rebalance(1, 2) == 2
    assert_tiles(ov)
    assert ov.load_of(1) == 6 and ov.load_of(2) == 5


def test_make_inner():
    assert make_inner("finger-ring") is FingerRing
    with pytest.raises(ValueError):
        make_inner("chord")


ops = st.lists(
    st.tuples(st.sampled_from(["add", "remove", "fail", "insert", "delete", "rebalance"]),
              st.integers(0, 999)),
    max_size=60,
)


@settings(max_examples=150, deadline=None)
@given(cls=st.sampled_from(KINDS), script=ops)
def test_partition_and_oracle_under_random_ops(cls, script):
    ov = cls.evenly(0, 999, range(5))
    oracle = set()
    next_id = 100
    for op, x in script:
        if op == "add":
            if x not in [ov.position(p) for p in ov.peers]:
                ov.add_peer(next_id, x)
                next_id += 1
        elif op == "remove" and ov.peer_count > 1:
            ov.remove_peer(ov.peers[x % ov.peer_count])
        elif op == "fail" and ov.peer_count > 1:
            victim = ov.peers[x % ov.peer_count]
            oracle -= set(ov.keys_of(victim))
            ov.fail_peer(victim)
        elif op == "insert":
            assert ov.insert_key(x) == (x not in oracle)
            oracle.add(x)
        elif op == "delete":
            assert ov.delete_key(x) == (x in oracle)
            oracle.discard(x)
        elif op == "rebalance" and ov.peer_count > 1:
            i = x % (ov.peer_count - 1)
            ov.rebalance(ov.peers[i], ov.peers[i + 1])
        assert_tiles(ov)
        assert ov.keys == sorted(oracle)
    for k in range(0, 1000, 37):
        peer, hops = ov.locate(k, ov.peers[-1])
        assert peer == scan_owner(ov, k)
        assert 0 <= hops <= ov.hop_ceiling()
