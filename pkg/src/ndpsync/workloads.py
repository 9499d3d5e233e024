"""Workloads: per-core programs driving the synchronization schemes.

A program is a generator yielding steps:

    ("compute", n)                     burn n instructions
    ("mem", addr, write)               one 64-byte data access
    ("lock_acquire", addr)             blocking
    ("lock_release", addr)
    ("barrier_wait", addr, n, within)  blocking, n participants
    ("sem_wait", addr, initial)        blocking
    ("sem_post", addr)
    ("cond_wait", cv, lock)            blocking; releases and re-acquires lock
    ("cond_signal", cv) / ("cond_broadcast", cv)

Shared workload state is mutated inside critical sections, so the final
state is a function of the set of executed operations, not their
interleaving. digest() hashes that state in a canonical order and must be
identical for every scheme given the same configuration and seed.
"""

from __future__ import annotations

import hashlib
import json
import random

from .errors import ConfigError
from .topology import CoreId, SystemConfig, global_core_id

_SYNC_REGION = 0x10_000      # per-unit offset for synchronization variables
_DATA_REGION = 0x4_000_000   # per-unit offset for data
_LINE = 64

WORKLOAD_NAMES = ("lock", "barrier", "semaphore", "condvar",
                  "stack", "queue", "array_map", "hash_table", "linked_list")


def _canon_digest(payload) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


class Workload:
    """Base: addressing helpers and the program/digest contract."""

    name = "base"

    def __init__(self, cfg: SystemConfig, seed: int, params: dict | None = None):
        self.cfg = cfg
        self.seed = seed
        self.params = dict(params or {})
        self.completed_ops = 0
        self._spawned = False

    # one generator per client core; single use per instance
    def programs(self) -> dict[CoreId, object]:
        assert not self._spawned, "workload instances drive exactly one run"
        self._spawned = True
        return {core: self._program(core, idx)
                for idx, core in enumerate(self.cfg.clients())}

    def _program(self, core: CoreId, idx: int):
        raise NotImplementedError

    def digest(self) -> str:
        raise NotImplementedError

    def expected_ops(self) -> dict | None:
        """Declared operation totals for the termination monitor, if static."""
        return None

    # -- addressing -----------------------------------------------------------

    def _sync_addr(self, unit: int, slot: int) -> int:
        return unit * self.cfg.unit_mem_bytes + _SYNC_REGION + slot * _LINE

    def _data_addr(self, unit: int, slot: int) -> int:
        return unit * self.cfg.unit_mem_bytes + _DATA_REGION + slot * _LINE

    def _rng(self, idx: int) -> random.Random:
        return random.Random(self.seed * 1_000_003 + idx)

    def _param(self, key: str, default):
        return self.params.get(key, default)


class LockMicro(Workload):
    """Every client repeatedly acquires one lock after local compute."""

    name = "lock"

    def __init__(self, cfg, seed, params=None):
        super().__init__(cfg, seed, params)
        self.iterations = int(self._param("iterations", 50))
        self.interval = int(self._param("interval", 200))
        self.cs_instr = int(self._param("cs_instr", 0))
        self.lock = self._sync_addr(0, 0)
        self.grants: list[int] = [0] * cfg.total_clients

    def _program(self, core, idx):
        for _ in range(self.iterations):
            yield ("compute", self.interval)
            yield ("lock_acquire", self.lock)
            if self.cs_instr:
                yield ("compute", self.cs_instr)
            self.grants[idx] += 1
            yield ("lock_release", self.lock)
            self.completed_ops += 1

    def digest(self):
        return _canon_digest({"workload": self.name, "grants": self.grants})

    def expected_ops(self):
        n = self.cfg.total_clients * self.iterations
        return {"lock_acquire": n, "lock_release": n}


class BarrierMicro(Workload):
    """Clients meet at one barrier, iterations times.

    With participants < total clients only the first `participants` client
    indices take part (the rest finish immediately), which exercises the
    one-level protocol where per-unit aggregation is impossible.
    """

    name = "barrier"

    def __init__(self, cfg, seed, params=None):
        super().__init__(cfg, seed, params)
        self.iterations = int(self._param("iterations", 20))
        self.interval = int(self._param("interval", 200))
        self.participants = int(self._param("participants", cfg.total_clients))
        if not 0 < self.participants <= cfg.total_clients:
            raise ConfigError("participants must be in 1..total clients")
        self.bar = self._sync_addr(0, 0)
        self.rounds: list[int] = [0] * cfg.total_clients

    def _program(self, core, idx):
        if idx >= self.participants:
            return
        within = self.cfg.num_units == 1
        rng = self._rng(idx)
        for _ in range(self.iterations):
            yield ("compute", self.interval + rng.randrange(self.interval + 1))
            yield ("barrier_wait", self.bar, self.participants, within)
            self.rounds[idx] += 1
            self.completed_ops += 1

    def digest(self):
        return _canon_digest({"workload": self.name, "rounds": self.rounds})

    def expected_ops(self):
        return {"barrier_wait": self.participants * self.iterations}


class SemaphoreMicro(Workload):
    """First half of the clients consume resources, second half produce."""

    name = "semaphore"

    def __init__(self, cfg, seed, params=None):
        super().__init__(cfg, seed, params)
        self.iterations = int(self._param("iterations", 30))
        self.interval = int(self._param("interval", 200))
        self.initial = int(self._param("sem_initial", 2))
        self.sem = self._sync_addr(0, 0)
        self.n_consumers = cfg.total_clients // 2
        self.consumed: list[int] = [0] * cfg.total_clients

    def _program(self, core, idx):
        if idx < self.n_consumers:
            for _ in range(self.iterations):
                yield ("compute", self.interval)
                yield ("sem_wait", self.sem, self.initial)
                self.consumed[idx] += 1
                self.completed_ops += 1
        else:
            posts = self.iterations if idx - self.n_consumers < self.n_consumers else 0
            for _ in range(posts):
                yield ("compute", self.interval)
                yield ("sem_post", self.sem)
                self.completed_ops += 1

    def digest(self):
        return _canon_digest({"workload": self.name, "consumed": self.consumed})


class CondvarMicro(Workload):
    """Half the clients park on one condition variable, half signal until
    every waiter has been woken its full number of iterations."""

    name = "condvar"

    def __init__(self, cfg, seed, params=None):
        super().__init__(cfg, seed, params)
        self.iterations = int(self._param("iterations", 10))
        self.interval = int(self._param("interval", 200))
        self.signal_cap = int(self._param("signal_cap", 100_000))
        self.lock = self._sync_addr(0, 0)
        self.cv = self._sync_addr(0, 1)
        self.n_waiters = max(1, cfg.total_clients // 2)
        self.wakes: list[int] = [0] * cfg.total_clients
        self._woken_total = 0

    def _program(self, core, idx):
        if idx < self.n_waiters:
            for _ in range(self.iterations):
                yield ("compute", self.interval)
                yield ("lock_acquire", self.lock)
                yield ("cond_wait", self.cv, self.lock)
                yield ("lock_release", self.lock)
                self.wakes[idx] += 1
                self._woken_total += 1
                self.completed_ops += 1
        else:
            target = self.n_waiters * self.iterations
            guard = 0
            while self._woken_total < target and guard < self.signal_cap:
                yield ("compute", self.interval)
                yield ("cond_signal", self.cv)
                guard += 1

    def digest(self):
        return _canon_digest({"workload": self.name, "wakes": self.wakes})


class StackPush(Workload):
    """One coarse lock protects a global stack; every client pushes."""

    name = "stack"

    def __init__(self, cfg, seed, params=None):
        super().__init__(cfg, seed, params)
        self.ops_per_core = int(self._param("ops_per_core", 20))
        self.gap = int(self._param("gap", 150))
        self.lock = self._sync_addr(0, 0)
        self.head_addr = self._data_addr(0, 0)
        self.items: list[list[int]] = []

    def _slot_addr(self, slot: int) -> int:
        u = slot % self.cfg.num_units
        return self._data_addr(u, 1 + slot // self.cfg.num_units)

    def _program(self, core, idx):
        for k in range(self.ops_per_core):
            yield ("compute", self.gap)
            yield ("lock_acquire", self.lock)
            slot = len(self.items)
            yield ("mem", self._slot_addr(slot), True)
            yield ("mem", self.head_addr, True)
            self.items.append([idx, k])
            yield ("lock_release", self.lock)
            self.completed_ops += 1

    def digest(self):
        return _canon_digest({"workload": self.name, "size": len(self.items),
                              "items": sorted(self.items)})

    def expected_ops(self):
        n = self.cfg.total_clients * self.ops_per_core
        return {"lock_acquire": n, "lock_release": n}


class QueuePop(Workload):
    """Clients drain a pre-filled queue under a head lock."""

    name = "queue"

    def __init__(self, cfg, seed, params=None):
        super().__init__(cfg, seed, params)
        self.ops_per_core = int(self._param("ops_per_core", 20))
        self.gap = int(self._param("gap", 150))
        self.head_lock = self._sync_addr(0, 0)
        self.head_ptr_addr = self._data_addr(0, 0)
        total = cfg.total_clients * self.ops_per_core
        self.values = list(range(total + 8))
        self.head = 0

    def _elem_addr(self, i: int) -> int:
        u = i % self.cfg.num_units
        return self._data_addr(u, 1 + i // self.cfg.num_units)

    def _program(self, core, idx):
        for _ in range(self.ops_per_core):
            yield ("compute", self.gap)
            yield ("lock_acquire", self.head_lock)
            i = self.head
            yield ("mem", self._elem_addr(i), False)
            yield ("mem", self.head_ptr_addr, True)
            self.head += 1
            yield ("lock_release", self.head_lock)
            self.completed_ops += 1

    def digest(self):
        return _canon_digest({"workload": self.name, "head": self.head,
                              "remaining": self.values[self.head:]})

    def expected_ops(self):
        n = self.cfg.total_clients * self.ops_per_core
        return {"lock_acquire": n, "lock_release": n}


class ArrayMap(Workload):
    """Fixed-size map under one coarse lock; long critical sections."""

    name = "array_map"

    def __init__(self, cfg, seed, params=None):
        super().__init__(cfg, seed, params)
        self.ops_per_core = int(self._param("ops_per_core", 20))
        self.gap = int(self._param("gap", 150))
        self.cs_accesses = int(self._param("cs_accesses", 10))
        self.slots = int(self._param("slots", 64))
        self.lock = self._sync_addr(0, 0)
        self.cells = [0] * self.slots

    def _slot_addr(self, s: int) -> int:
        u = s % self.cfg.num_units
        return self._data_addr(u, s // self.cfg.num_units)

    def _program(self, core, idx):
        rng = self._rng(idx)
        for _ in range(self.ops_per_core):
            yield ("compute", self.gap)
            key = rng.randrange(self.slots)
            yield ("lock_acquire", self.lock)
            for j in range(self.cs_accesses):
                yield ("mem", self._slot_addr((key + j) % self.slots), j == 0)
            self.cells[key] += 1
            yield ("lock_release", self.lock)
            self.completed_ops += 1

    def digest(self):
        return _canon_digest({"workload": self.name, "cells": self.cells})

    def expected_ops(self):
        n = self.cfg.total_clients * self.ops_per_core
        return {"lock_acquire": n, "lock_release": n}


class HashTable(Workload):
    """Per-bucket locks spread across the units; fine-grained inserts."""

    name = "hash_table"

    def __init__(self, cfg, seed, params=None):
        super().__init__(cfg, seed, params)
        self.ops_per_core = int(self._param("ops_per_core", 20))
        self.gap = int(self._param("gap", 150))
        self.buckets = int(self._param("buckets", 64))
        self.chains: list[list[int]] = [[] for _ in range(self.buckets)]

    def _bucket_lock(self, b: int) -> int:
        u = b % self.cfg.num_units
        return self._sync_addr(u, 0x200 + b // self.cfg.num_units)

    def _bucket_data(self, b: int, depth: int) -> int:
        u = b % self.cfg.num_units
        return self._data_addr(u, 0x1000 + (b // self.cfg.num_units) * 8 + depth % 8)

    def _program(self, core, idx):
        rng = self._rng(idx)
        for _ in range(self.ops_per_core):
            yield ("compute", self.gap)
            key = rng.randrange(1_000_000)
            b = key % self.buckets
            yield ("lock_acquire", self._bucket_lock(b))
            yield ("mem", self._bucket_data(b, 0), False)
            depth = len(self.chains[b])
            yield ("mem", self._bucket_data(b, 1 + depth), True)
            self.chains[b].append(key)
            yield ("lock_release", self._bucket_lock(b))
            self.completed_ops += 1

    def digest(self):
        return _canon_digest({"workload": self.name,
                              "chains": [sorted(c) for c in self.chains]})

    def expected_ops(self):
        n = self.cfg.total_clients * self.ops_per_core
        return {"lock_acquire": n, "lock_release": n}


class LinkedList(Workload):
    """Hand-over-hand traversal: many simultaneously live node locks.

    Node lines are 64 bytes apart, so their lock addresses alias the
    256-entry indexing counters every 4 nodes; with a small table this
    drives the overflow path hard.
    """

    name = "linked_list"

    def __init__(self, cfg, seed, params=None):
        super().__init__(cfg, seed, params)
        self.ops_per_core = int(self._param("ops_per_core", 10))
        self.gap = int(self._param("gap", 150))
        self.nodes = int(self._param("nodes", 32))
        self.visits = [0] * self.nodes

    def _node_addr(self, i: int) -> int:
        u = min(i * self.cfg.num_units // self.nodes, self.cfg.num_units - 1)
        return self._sync_addr(u, 0x400 + i)

    def _program(self, core, idx):
        rng = self._rng(idx)
        for _ in range(self.ops_per_core):
            yield ("compute", self.gap)
            depth = rng.randrange(self.nodes)
            yield ("lock_acquire", self._node_addr(0))
            yield ("mem", self._node_addr(0), False)
            self.visits[0] += 1
            for i in range(1, depth + 1):
                yield ("lock_acquire", self._node_addr(i))
                yield ("mem", self._node_addr(i), False)
                self.visits[i] += 1
                yield ("lock_release", self._node_addr(i - 1))
            yield ("lock_release", self._node_addr(depth))
            self.completed_ops += 1

    def digest(self):
        return _canon_digest({"workload": self.name, "visits": self.visits})


_REGISTRY = {w.name: w for w in (LockMicro, BarrierMicro, SemaphoreMicro, CondvarMicro,
                                 StackPush, QueuePop, ArrayMap, HashTable, LinkedList)}


def make_workload(cfg: SystemConfig, name: str, seed: int = 0,
                  params: dict | None = None) -> Workload:
    try:
        cls = _REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown workload {name!r}; choose from {sorted(_REGISTRY)}") from None
    return cls(cfg, seed, params)
