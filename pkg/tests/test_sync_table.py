import random

import pytest

from ndpsync.errors import ProtocolError
from ndpsync.sync_table import (GLOBAL_OWNER_FLAG, NO_OWNER, IndexingCounters,
                                STEntry, SynchronizationTable, TableFull)


def test_owner_encoding_constants():
    assert NO_OWNER == (1 << 64) - 1
    assert GLOBAL_OWNER_FLAG == 1 << 63
    e = STEntry()
    assert e.table_info == NO_OWNER
    assert not e.occupied


def test_reserve_takes_lowest_free_slot():
    t = SynchronizationTable(4)
    t.reserve(100)
    t.reserve(200)
    t.reserve(300)
    assert [e.addr for e in t.entries[:3]] == [100, 200, 300]
    t.release(200)
    t.reserve(400)  # slot 1 is the lowest free again
    assert t.entries[1].addr == 400
    assert t.occupied_count == 3


def test_reserve_initializes_entry():
    t = SynchronizationTable(2)
    e = t.reserve(5)
    e.local_wait = 0b1010
    e.table_info = 3
    e.local_wait = 0
    t.release(5)
    e2 = t.reserve(5)
    assert e2 is e  # same slot reused
    assert e2.local_wait == 0 and e2.global_wait == 0
    assert e2.table_info == NO_OWNER


def test_full_table_raises():
    t = SynchronizationTable(2)
    t.reserve(1)
    t.reserve(2)
    assert t.full()
    with pytest.raises(TableFull):
        t.reserve(3)


def test_duplicate_reservation_rejected():
    t = SynchronizationTable(2)
    t.reserve(1)
    with pytest.raises(ProtocolError):
        t.reserve(1)


def test_release_requires_empty_wait_lists():
    t = SynchronizationTable(2)
    e = t.reserve(9)
    e.global_wait = 0b10
    with pytest.raises(ProtocolError):
        t.release(9)
    e.global_wait = 0
    e.local_wait = 1
    with pytest.raises(ProtocolError):
        t.release(9)
    e.local_wait = 0
    t.release(9)
    assert t.lookup(9) is None


def test_release_of_absent_entry_rejected():
    t = SynchronizationTable(1)
    with pytest.raises(ProtocolError):
        t.release(12)


def test_lookup_random_churn():
    rng = random.Random(31)
    t = SynchronizationTable(8)
    live = {}
    for _ in range(4000):
        if live and (t.full() or rng.random() < 0.5):
            addr = rng.choice(sorted(live))
            assert t.lookup(addr) is live[addr]
            t.release(addr)
            del live[addr]
        else:
            addr = rng.randrange(1, 10_000)
            if addr in live:
                continue
            live[addr] = t.reserve(addr)
        assert t.occupied_count == len(live)
    assert t.occupied_count == len(live)


def test_counters_alias_low_bits():
    c = IndexingCounters(size=256)
    assert c.index_of(0x1234) == 0x34
    c.increment(0x1234)
    c.increment(0x341234)  # same low 8 bits, same counter
    assert c.get(0x99934) == 2
    assert c.total() == 2
    c.decrement(0x1234)
    c.decrement(0x55534)
    assert c.total() == 0


def test_counter_underflow_rejected():
    c = IndexingCounters(size=16)
    with pytest.raises(ProtocolError):
        c.decrement(5)
    c.increment(5)
    c.decrement(5)
    with pytest.raises(ProtocolError):
        c.decrement(5)
