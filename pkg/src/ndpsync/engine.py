"""Coordinator state machines for every synchronization primitive.

A Coordinator is one synchronization service point: the per-unit hardware
engine (schemes "syncron" and "flat"), the per-unit software server
("hier"), or the single global server ("central"). All schemes share the
protocol logic below; they differ in routing (who receives core requests),
backing store (fixed-capacity table with a memory fallback path versus an
unbounded cache-modelled dict), and message cost, which the runtime层
charges.

Hierarchical operation (syncron/hier): cores talk only to their local
coordinator; coordinators exchange *_global messages with the master of a
variable (the unit whose memory holds it) and aggregate their local
waiters so that one global message covers a whole unit. The master grants
to its own local waiters first, then to units in ascending id order.

Table overflow (syncron/flat): when a variable cannot live in the table,
the master services it via a memory-resident record; non-master engines
redirect requests with *_overflow opcodes carrying a packed {unit, core}
id and track the episode in their indexing counters until the master
broadcasts decrease_indexing_counter at quiescence.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import ProtocolError
from .messages import Message, OpClass, Opcode, classify_opcode, pack_core, unpack_core
from .sync_table import (GLOBAL_OWNER_FLAG, NO_OWNER, IndexingCounters,
                         SynchronizationTable)
from .topology import CoreId, SystemConfig, master_se_of, resolve_core, global_core_id

# info value on a cond grant that wakes every parked waiter of a unit
WAKE_ALL = (1 << 64) - 1

LOCK = "lock"
BARRIER = "barrier"
SEMAPHORE = "semaphore"
CONDVAR = "condvar"

_FAMILY = {}
for _op in Opcode:
    name = _op.name.lower()
    _FAMILY[_op] = name.split("_", 1)[0]
_FAMILY[Opcode.DECREASE_INDEXING_COUNTER] = "control"

_OVERFLOW_FORM = {
    Opcode.LOCK_ACQUIRE_LOCAL: Opcode.LOCK_ACQUIRE_OVERFLOW,
    Opcode.LOCK_RELEASE_LOCAL: Opcode.LOCK_RELEASE_OVERFLOW,
    Opcode.BARRIER_WAIT_LOCAL_WITHIN_UNIT: Opcode.BARRIER_WAIT_OVERFLOW,
    Opcode.BARRIER_WAIT_LOCAL_ACROSS_UNITS: Opcode.BARRIER_WAIT_OVERFLOW,
    Opcode.SEM_WAIT_LOCAL: Opcode.SEM_WAIT_OVERFLOW,
    Opcode.SEM_POST_LOCAL: Opcode.SEM_POST_OVERFLOW,
    Opcode.COND_WAIT_LOCAL: Opcode.COND_WAIT_OVERFLOW,
    Opcode.COND_SIGNAL_LOCAL: Opcode.COND_SIGNAL_OVERFLOW,
    Opcode.COND_BROAD_LOCAL: Opcode.COND_BROAD_OVERFLOW,
}

_PRIMITIVE = {"lock": LOCK, "barrier": BARRIER, "sem": SEMAPHORE, "cond": CONDVAR}


def _low_bit(mask: int) -> int:
    assert mask
    return (mask & -mask).bit_length() - 1


def _bits(mask: int):
    while mask:
        b = _low_bit(mask)
        yield b
        mask &= mask - 1


@dataclass
class MemoryRecord:
    """Memory-resident image of a variable serviced via the overflow path.

    One 64-byte line: per-unit waiting lists, a 64-bit info word and a
    bit per unit marking engines that redirected requests here.
    """

    addr: int
    wait_lists: list[int]
    var_info: int = NO_OWNER
    overflow_info: int = 0


@dataclass
class VarMeta:
    """Live coordination state for one variable at one coordinator."""

    primitive: str
    backing: str  # "entry" | "record" | "server"
    locals: int = 0                 # waiting cores (this unit; global ids when routing is flat)
    remote_agg: int = 0             # units waiting as aggregates (master only)
    remote_ovf: dict = field(default_factory=dict)  # unit -> mask of packed overflow waiters
    ovf_units: int = 0              # units owed a decrease_indexing_counter at quiescence
    owner: tuple | None = None      # ("core", CoreId) | ("unit", u)
    pending_global: bool = False    # non-master: upward announce outstanding
    # barrier
    arrivals: int = 0
    target: int = 0
    one_level: bool = False
    # semaphore
    sem_count: int = 0
    sem_declared: int | None = None
    sem_demand: dict = field(default_factory=dict)  # unit -> outstanding remote waiters
    sem_credit: int = 0             # non-master: grants received, not yet consumed
    # condition variable
    cond_lock: int = 0


@dataclass
class Output:
    """Everything one handled message produced; the runtime charges costs."""

    sends: list = field(default_factory=list)      # (dst node, Message)
    internal: list = field(default_factory=list)   # self-injected requests (condvar resume)
    mem_ops: list = field(default_factory=list)    # ("read"|"write", addr) on the record line
    touches: list = field(default_factory=list)    # variable lines a server accessed
    table_events: list = field(default_factory=list)  # ("st_reserve"|"st_release", addr)
    overflowed: bool = False

    @property
    def wakeups(self):
        """Cores whose blocking request completes with this service."""
        done = []
        for dst, m in self.sends:
            if dst[0] == "core" and classify_opcode(m.opcode) in (OpClass.GRANT, OpClass.DEPART):
                done.append(CoreId(dst[1], dst[2]))
        return done


class Coordinator:
    def __init__(self, cfg: SystemConfig, unit: int, server: bool):
        self.cfg = cfg
        self.unit = unit
        self.server = server
        # single: every request lands here directly (no inter-coordinator traffic)
        self.flat = cfg.scheme in ("flat", "central")
        self.central = cfg.scheme == "central"
        self.table = None if server else SynchronizationTable(cfg.st_entries)
        self.counters = None if server else IndexingCounters(cfg.index_counters)
        self.meta: dict[int, VarMeta] = {}
        self.records: dict[int, MemoryRecord] = {}
        self.enrolled: dict[int, int] = {}      # addr -> outstanding redirected acquires
        self.cond_resume: dict[int, int] = {}   # core key -> condvar being resumed
        self.core_bits = max(1, (cfg.cores_per_unit - 1).bit_length())

    # -- identity helpers ---------------------------------------------------

    def node(self):
        return ("coord", self.unit)

    def is_master_for(self, addr: int) -> bool:
        return self.central or master_se_of(self.cfg, addr) == self.unit

    def _coord_node(self, unit: int):
        return ("coord", 0) if self.central else ("coord", unit)

    def _sender_core(self, msg: Message) -> CoreId:
        if self.flat:
            unit, local = unpack_core(msg.core_id, self.core_bits)
            return CoreId(unit, local)
        return CoreId(self.unit, msg.core_id)

    def _key(self, core: CoreId) -> int:
        return global_core_id(self.cfg, core) if self.flat else core.local

    def _core_from_key(self, key: int) -> CoreId:
        return resolve_core(self.cfg, key) if self.flat else CoreId(self.unit, key)

    def _wire_core_id(self, core: CoreId) -> int:
        if self.flat:
            return pack_core(core.unit, core.local, self.core_bits)
        return core.local

    # -- entry / record management -------------------------------------------

    def _get_or_reserve(self, addr: int, primitive: str, out: Output):
        meta = self.meta.get(addr)
        if meta is not None:
            if meta.primitive != primitive:
                raise ProtocolError(
                    f"variable {addr:#x} used as {primitive} but live as {meta.primitive}")
            return meta, False
        if self.server:
            meta = VarMeta(primitive=primitive, backing="server")
        else:
            assert addr not in self.enrolled, "reserve while enrolled in an overflow episode"
            self.table.reserve(addr)
            out.table_events.append(("st_reserve", addr))
            meta = VarMeta(primitive=primitive, backing="entry")
        self.meta[addr] = meta
        return meta, True

    def _release_var(self, addr: int, meta: VarMeta, out: Output) -> None:
        if meta.backing == "entry":
            entry = self.table.lookup(addr)
            entry.local_wait = 0
            entry.global_wait = 0
            self.table.release(addr)
            out.table_events.append(("st_release", addr))
            del self.meta[addr]
        elif meta.backing == "server":
            del self.meta[addr]
        # record-backed state is dropped by the memory-path epilogue once quiescent

    def _project_entry(self, addr: int, meta: VarMeta) -> None:
        if meta.backing != "entry":
            return
        entry = self.table.lookup(addr)
        if entry is None:
            return
        entry.local_wait = meta.locals
        gw = meta.remote_agg
        for u in meta.sem_demand:
            gw |= 1 << u
        entry.global_wait = gw
        entry.table_info = self._info_word(addr, meta)

    def _project_record(self, rec: MemoryRecord, meta: VarMeta) -> None:
        all_ones = (1 << self.cfg.cores_per_unit) - 1
        for u in range(self.cfg.num_units):
            if meta.remote_agg >> u & 1 or u in meta.sem_demand:
                rec.wait_lists[u] = all_ones
            elif u == self.unit and not self.flat:
                rec.wait_lists[u] = meta.locals
            else:
                rec.wait_lists[u] = meta.remote_ovf.get(u, 0)
        if self.flat:
            cpu = self.cfg.cores_per_unit
            for u in range(self.cfg.num_units):
                rec.wait_lists[u] |= (meta.locals >> (u * cpu)) & all_ones
        rec.var_info = self._info_word(rec.addr, meta)
        rec.overflow_info = meta.ovf_units

    def _info_word(self, addr: int, meta: VarMeta) -> int:
        if meta.primitive == LOCK:
            if meta.owner is None:
                return NO_OWNER
            kind, who = meta.owner
            if kind == "unit":
                return GLOBAL_OWNER_FLAG | who
            return self._key(who)
        if meta.primitive == BARRIER:
            return meta.arrivals
        if meta.primitive == SEMAPHORE:
            return meta.sem_count if self.is_master_for(addr) else meta.sem_credit
        return meta.cond_lock

    # -- top-level dispatch ---------------------------------------------------

    def handle(self, msg: Message, src) -> Output:
        out = Output()
        op = msg.opcode
        cls = classify_opcode(op)

        if op is Opcode.DECREASE_INDEXING_COUNTER:
            self._on_decrease(msg.addr)
            return out

        if cls in (OpClass.OVERFLOW_ACQUIRE, OpClass.OVERFLOW_RELEASE):
            if self.server or not self.is_master_for(msg.addr):
                raise ProtocolError(f"{op.name} delivered to a non-master coordinator")
            out.overflowed = True
            self._memory_path(msg, src, out)
            return out

        if cls is OpClass.OVERFLOW_GRANT:
            self._deliver_overflow_wake(msg, out)
            return out

        if op is Opcode.COND_WAIT_LOCAL:
            # release the named lock on the caller's behalf before parking
            rel = replace(msg, addr=msg.info, opcode=Opcode.LOCK_RELEASE_LOCAL, info=0)
            self._handle_inner(rel, src, out)

        if op is Opcode.LOCK_ACQUIRE_LOCAL and msg.info:
            # lock re-acquisition for a condvar waiter: the grant must wake
            # the condvar wait, not a plain acquire
            self.cond_resume[self._key(self._sender_core(msg))] = msg.info

        self._handle_inner(msg, src, out)
        return out

    def _handle_inner(self, msg: Message, src, out: Output) -> None:
        addr = msg.addr
        cls = classify_opcode(msg.opcode)
        meta = self.meta.get(addr)

        if meta is not None and meta.backing == "record":
            out.overflowed = True
            self._memory_path(msg, src, out)
            return

        if (meta is None and not self.server
                and cls in (OpClass.ACQUIRE, OpClass.RELEASE)
                and (self.table.full() or self.counters.get(addr) > 0)):
            out.overflowed = True
            if self.is_master_for(addr):
                self._memory_path(msg, src, out)
            else:
                self._redirect(msg, out)
            return

        self._dispatch(msg, src, out)
        if not self.server:
            m = self.meta.get(addr)
            if m is not None:
                self._project_entry(addr, m)
        if self.server:
            # the lock line released by a cond wait is recorded by its own
            # inner dispatch, so one touch per dispatched message suffices
            out.touches.append(addr)

    def _dispatch(self, msg: Message, src, out: Output) -> None:
        fam = _FAMILY[msg.opcode]
        if fam == "lock":
            self._on_lock(msg, src, out)
        elif fam == "barrier":
            self._on_barrier(msg, src, out)
        elif fam == "sem":
            self._on_sem(msg, src, out)
        elif fam == "cond":
            self._on_cond(msg, src, out)
        else:  # pragma: no cover
            raise ProtocolError(f"unroutable opcode {msg.opcode.name}")

    # -- overflow path ---------------------------------------------------------

    def _redirect(self, msg: Message, out: Output) -> None:
        """Non-master with no table room: forward to the master via memory."""
        core = self._sender_core(msg)
        packed = pack_core(core.unit, core.local, self.core_bits)
        if classify_opcode(msg.opcode) is OpClass.ACQUIRE:
            if msg.addr not in self.enrolled:
                self.enrolled[msg.addr] = 0
                self.counters.increment(msg.addr)
            self.enrolled[msg.addr] += 1
        ovf = _OVERFLOW_FORM[msg.opcode]
        dst = self._coord_node(master_se_of(self.cfg, msg.addr))
        out.sends.append((dst, Message(msg.addr, ovf, packed, msg.info)))

    def _on_decrease(self, addr: int) -> None:
        n = self.enrolled.get(addr)
        if n is None:
            raise ProtocolError(f"decrease_indexing_counter for unenrolled variable {addr:#x}")
        if n > 0:
            # crossed with a fresh redirect: the new episode's decrease balances it
            return
        del self.enrolled[addr]
        self.counters.decrement(addr)

    def _deliver_overflow_wake(self, msg: Message, out: Output) -> None:
        unit, local = unpack_core(msg.core_id, self.core_bits)
        if unit != self.unit:
            raise ProtocolError(f"{msg.opcode.name} routed to unit {self.unit} for core of unit {unit}")
        core = CoreId(unit, local)
        n = self.enrolled.get(msg.addr)
        if n is not None and n > 0:
            self.enrolled[msg.addr] = n - 1
        op = msg.opcode
        if op is Opcode.LOCK_GRANT_OVERFLOW:
            self._grant_lock_to_core(msg.addr, core, out)
        elif op is Opcode.SEM_GRANT_OVERFLOW:
            out.sends.append((("core", core.unit, core.local),
                              Message(msg.addr, Opcode.SEM_GRANT_LOCAL, core.local, 0)))
        elif op is Opcode.BARRIER_DEPARTURE_OVERFLOW:
            out.sends.append((("core", core.unit, core.local),
                              Message(msg.addr, Opcode.BARRIER_DEPART_LOCAL, core.local, 0)))
        elif op is Opcode.COND_GRANT_OVERFLOW:
            self._start_resume(core, msg.addr, msg.info, out)
        else:  # pragma: no cover
            raise ProtocolError(f"unexpected overflow wake {op.name}")

    def _memory_path(self, msg: Message, src, out: Output) -> None:
        """Master services the variable from its local memory."""
        addr = msg.addr
        op = msg.opcode
        meta = self.meta.get(addr)
        out.mem_ops.append(("read", addr))
        if meta is None:
            if _FAMILY[op] == "cond" and classify_opcode(op) in (OpClass.RELEASE, OpClass.OVERFLOW_RELEASE):
                return  # lost signal: nothing parked anywhere
            if op in (Opcode.LOCK_RELEASE_LOCAL, Opcode.LOCK_RELEASE_GLOBAL, Opcode.LOCK_RELEASE_OVERFLOW):
                raise ProtocolError(f"lock release for unknown variable {addr:#x}")
            meta = VarMeta(primitive=_PRIMITIVE[_FAMILY[op]], backing="record")
            self.meta[addr] = meta
            self.records[addr] = MemoryRecord(addr, [0] * self.cfg.num_units)
            self.counters.increment(addr)
        elif meta.backing == "entry":
            # migrate a live entry to memory: a remote engine overflowed first
            entry = self.table.lookup(addr)
            entry.local_wait = 0
            entry.global_wait = 0
            self.table.release(addr)
            out.table_events.append(("st_release", addr))
            meta.backing = "record"
            self.records[addr] = MemoryRecord(addr, [0] * self.cfg.num_units)
            self.counters.increment(addr)

        self._dispatch(msg, src, out)

        meta = self.meta.get(addr)
        assert meta is not None and meta.backing == "record"
        if self._quiesced(meta):
            self.counters.decrement(addr)
            for u in _bits(meta.ovf_units):
                out.sends.append((self._coord_node(u),
                                  Message(addr, Opcode.DECREASE_INDEXING_COUNTER, 0, 0)))
            del self.records[addr]
            del self.meta[addr]
        else:
            self._project_record(self.records[addr], meta)
        out.mem_ops.append(("write", addr))

    def _quiesced(self, meta: VarMeta) -> bool:
        if meta.locals or meta.remote_agg or meta.sem_demand or meta.owner is not None:
            return False
        if any(meta.remote_ovf.values()) or meta.arrivals or meta.sem_credit:
            return False
        if meta.primitive == SEMAPHORE:
            if meta.sem_declared is None:
                return meta.sem_count == 0
            return meta.sem_count == meta.sem_declared
        return True

    # -- locks -------------------------------------------------------------------

    def _grant_lock_to_core(self, addr: int, core: CoreId, out: Output) -> None:
        node = ("core", core.unit, core.local)
        tag = self.cond_resume.pop(self._key(core), None)
        if tag is None:
            out.sends.append((node, Message(addr, Opcode.LOCK_GRANT_LOCAL, core.local, 0)))
        else:
            # waking a condvar waiter: the grant carries the condvar, lock in info
            out.sends.append((node, Message(tag, Opcode.COND_GRANT_LOCAL, core.local, addr)))

    def _on_lock(self, msg: Message, src, out: Output) -> None:
        addr = msg.addr
        op = msg.opcode

        if op is Opcode.LOCK_ACQUIRE_LOCAL:
            core = self._sender_core(msg)
            meta, fresh = self._get_or_reserve(addr, LOCK, out)
            if self.is_master_for(addr):
                if meta.owner is None:
                    assert not meta.locals and not meta.remote_agg and not any(meta.remote_ovf.values())
                    meta.owner = ("core", core)
                    self._grant_lock_to_core(addr, core, out)
                else:
                    meta.locals |= 1 << self._key(core)
            else:
                meta.locals |= 1 << self._key(core)
                if fresh:
                    meta.pending_global = True
                    out.sends.append((self._coord_node(master_se_of(self.cfg, addr)),
                                      Message(addr, Opcode.LOCK_ACQUIRE_GLOBAL, self.unit, 0)))
                else:
                    assert meta.pending_global or meta.owner is not None

        elif op is Opcode.LOCK_ACQUIRE_GLOBAL:
            s = src[1]
            meta, _ = self._get_or_reserve(addr, LOCK, out)
            if meta.owner is None:
                assert not meta.locals and not meta.remote_agg
                meta.owner = ("unit", s)
                out.sends.append((self._coord_node(s),
                                  Message(addr, Opcode.LOCK_GRANT_GLOBAL, self.unit, 0)))
            else:
                meta.remote_agg |= 1 << s

        elif op is Opcode.LOCK_ACQUIRE_OVERFLOW:
            unit, local = unpack_core(msg.core_id, self.core_bits)
            core = CoreId(unit, local)
            meta = self.meta[addr]
            meta.ovf_units |= 1 << unit
            if meta.owner is None:
                meta.owner = ("core", core)
                out.sends.append((self._coord_node(unit),
                                  Message(addr, Opcode.LOCK_GRANT_OVERFLOW, msg.core_id, 0)))
            else:
                meta.remote_ovf[unit] = meta.remote_ovf.get(unit, 0) | (1 << local)

        elif op is Opcode.LOCK_RELEASE_LOCAL:
            core = self._sender_core(msg)
            meta = self.meta.get(addr)
            if meta is None or meta.owner != ("core", core):
                raise ProtocolError(f"lock {addr:#x} released by non-owner core {core}")
            if self.is_master_for(addr):
                self._lock_next(addr, meta, out)
            else:
                meta.owner = None
                if meta.locals:
                    self._grant_next_local(addr, meta, out)
                else:
                    # one aggregated release covers every local handoff
                    out.sends.append((self._coord_node(master_se_of(self.cfg, addr)),
                                      Message(addr, Opcode.LOCK_RELEASE_GLOBAL, self.unit, 0)))
                    self._release_var(addr, meta, out)

        elif op is Opcode.LOCK_RELEASE_GLOBAL:
            s = src[1]
            meta = self.meta.get(addr)
            if meta is None or meta.owner != ("unit", s):
                raise ProtocolError(f"lock {addr:#x} released by non-owner unit {s}")
            self._lock_next(addr, meta, out)

        elif op is Opcode.LOCK_RELEASE_OVERFLOW:
            unit, local = unpack_core(msg.core_id, self.core_bits)
            core = CoreId(unit, local)
            meta = self.meta.get(addr)
            if meta is None or meta.owner != ("core", core):
                raise ProtocolError(f"lock {addr:#x} released by non-owner overflow core {core}")
            self._lock_next(addr, meta, out)

        elif op is Opcode.LOCK_GRANT_GLOBAL:
            meta = self.meta.get(addr)
            if meta is None or not meta.pending_global:
                raise ProtocolError(f"unsolicited lock grant for {addr:#x}")
            meta.pending_global = False
            assert meta.locals, "token granted with no local waiters"
            self._grant_next_local(addr, meta, out)

        else:  # pragma: no cover
            raise ProtocolError(f"lock opcode {op.name} not valid at a coordinator")

    def _grant_next_local(self, addr: int, meta: VarMeta, out: Output) -> None:
        key = _low_bit(meta.locals)
        meta.locals &= meta.locals - 1
        core = self._core_from_key(key)
        meta.owner = ("core", core)
        self._grant_lock_to_core(addr, core, out)

    def _lock_next(self, addr: int, meta: VarMeta, out: Output) -> None:
        """Master: hand the lock to the next waiter, locals first."""
        meta.owner = None
        if meta.locals:
            self._grant_next_local(addr, meta, out)
            return
        units = sorted(set(u for u, m in meta.remote_ovf.items() if m) | set(_bits(meta.remote_agg)))
        if units:
            u = units[0]
            if meta.remote_ovf.get(u):
                local = _low_bit(meta.remote_ovf[u])
                meta.remote_ovf[u] &= meta.remote_ovf[u] - 1
                core = CoreId(u, local)
                meta.owner = ("core", core)
                out.sends.append((self._coord_node(u),
                                  Message(addr, Opcode.LOCK_GRANT_OVERFLOW,
                                          pack_core(u, local, self.core_bits), 0)))
            else:
                meta.remote_agg &= ~(1 << u)
                meta.owner = ("unit", u)
                out.sends.append((self._coord_node(u),
                                  Message(addr, Opcode.LOCK_GRANT_GLOBAL, self.unit, 0)))
            return
        self._release_var(addr, meta, out)

    # -- barriers ------------------------------------------------------------------

    def _on_barrier(self, msg: Message, src, out: Output) -> None:
        addr = msg.addr
        op = msg.opcode
        cpu = self.cfg.clients_per_unit

        if op is Opcode.BARRIER_DEPART_GLOBAL:
            meta = self.meta.get(addr)
            if meta is None:
                raise ProtocolError(f"barrier departure for unknown variable {addr:#x}")
            self._barrier_depart_locals(addr, meta, out)
            self._release_var(addr, meta, out)
            return

        if op is Opcode.BARRIER_WAIT_GLOBAL:
            s = src[1]
            meta, _ = self._get_or_reserve(addr, BARRIER, out)
            self._barrier_target(meta, msg.info)
            meta.remote_agg |= 1 << s
            if msg.info == self.cfg.total_clients:
                meta.arrivals += cpu  # a whole unit arrived at once
            else:
                meta.one_level = True
                meta.arrivals += 1
            self._barrier_check(addr, meta, out)
            return

        if op is Opcode.BARRIER_WAIT_OVERFLOW:
            unit, local = unpack_core(msg.core_id, self.core_bits)
            meta = self.meta[addr]
            self._barrier_target(meta, msg.info)
            meta.ovf_units |= 1 << unit
            meta.remote_ovf[unit] = meta.remote_ovf.get(unit, 0) | (1 << local)
            meta.arrivals += 1
            self._barrier_check(addr, meta, out)
            return

        core = self._sender_core(msg)
        meta, _ = self._get_or_reserve(addr, BARRIER, out)
        self._barrier_target(meta, msg.info)
        key = self._key(core)
        if meta.locals >> key & 1:
            raise ProtocolError(f"core {core} arrived twice at barrier {addr:#x}")
        meta.locals |= 1 << key

        single_point = self.flat or op is Opcode.BARRIER_WAIT_LOCAL_WITHIN_UNIT
        if single_point:
            meta.arrivals += 1
            if meta.arrivals == meta.target:
                self._barrier_depart_locals(addr, meta, out)
                meta.arrivals = 0
                self._release_var(addr, meta, out)
            return

        two_level = msg.info == self.cfg.total_clients
        meta.one_level = not two_level
        if self.is_master_for(addr):
            meta.arrivals += 1
            self._barrier_check(addr, meta, out)
        elif two_level:
            # announce once the whole unit has arrived
            if bin(meta.locals).count("1") == cpu:
                out.sends.append((self._coord_node(master_se_of(self.cfg, addr)),
                                  Message(addr, Opcode.BARRIER_WAIT_GLOBAL, self.unit, msg.info)))
        else:
            # partial participation: forward each arrival, track it for departure
            out.sends.append((self._coord_node(master_se_of(self.cfg, addr)),
                              Message(addr, Opcode.BARRIER_WAIT_GLOBAL, self.unit, msg.info)))

    def _barrier_target(self, meta: VarMeta, info: int) -> None:
        if meta.target == 0:
            meta.target = info
        elif meta.target != info:
            raise ProtocolError(f"barrier participant count mismatch: {meta.target} vs {info}")

    def _barrier_depart_locals(self, addr: int, meta: VarMeta, out: Output) -> None:
        for key in _bits(meta.locals):
            core = self._core_from_key(key)
            out.sends.append((("core", core.unit, core.local),
                              Message(addr, Opcode.BARRIER_DEPART_LOCAL, core.local, 0)))
        meta.locals = 0

    def _barrier_check(self, addr: int, meta: VarMeta, out: Output) -> None:
        if meta.arrivals != meta.target:
            return
        for u in _bits(meta.remote_agg):
            out.sends.append((self._coord_node(u),
                              Message(addr, Opcode.BARRIER_DEPART_GLOBAL, self.unit, 0)))
        meta.remote_agg = 0
        for u in sorted(meta.remote_ovf):
            for local in _bits(meta.remote_ovf[u]):
                out.sends.append((self._coord_node(u),
                                  Message(addr, Opcode.BARRIER_DEPARTURE_OVERFLOW,
                                          pack_core(u, local, self.core_bits), 0)))
            meta.remote_ovf[u] = 0
        self._barrier_depart_locals(addr, meta, out)
        meta.arrivals = 0
        self._release_var(addr, meta, out)

    # -- semaphores -----------------------------------------------------------------

    def _sem_declare(self, meta: VarMeta, initial: int) -> None:
        if meta.sem_declared is None:
            meta.sem_declared = initial
            meta.sem_count += initial
        elif meta.sem_declared != initial:
            raise ProtocolError(
                f"semaphore initial resources re-declared: {meta.sem_declared} vs {initial}")

    def _on_sem(self, msg: Message, src, out: Output) -> None:
        addr = msg.addr
        op = msg.opcode

        if op is Opcode.SEM_WAIT_LOCAL:
            core = self._sender_core(msg)
            meta, _ = self._get_or_reserve(addr, SEMAPHORE, out)
            if self.is_master_for(addr):
                self._sem_declare(meta, msg.info)
                if meta.sem_count > 0:
                    meta.sem_count -= 1
                    out.sends.append((("core", core.unit, core.local),
                                      Message(addr, Opcode.SEM_GRANT_LOCAL, core.local, 0)))
                else:
                    meta.locals |= 1 << self._key(core)
                self._sem_try_release(addr, meta, out)
            else:
                if meta.sem_credit > 0:
                    meta.sem_credit -= 1
                    out.sends.append((("core", core.unit, core.local),
                                      Message(addr, Opcode.SEM_GRANT_LOCAL, core.local, 0)))
                else:
                    meta.locals |= 1 << self._key(core)
                    out.sends.append((self._coord_node(master_se_of(self.cfg, addr)),
                                      Message(addr, Opcode.SEM_WAIT_GLOBAL, self.unit,
                                              (msg.info << 32) | 1)))

        elif op is Opcode.SEM_WAIT_GLOBAL:
            s = src[1]
            meta, _ = self._get_or_reserve(addr, SEMAPHORE, out)
            self._sem_declare(meta, msg.info >> 32)
            meta.sem_demand[s] = meta.sem_demand.get(s, 0) + (msg.info & 0xFFFFFFFF)
            self._sem_drain(addr, meta, out)

        elif op is Opcode.SEM_WAIT_OVERFLOW:
            unit, local = unpack_core(msg.core_id, self.core_bits)
            meta = self.meta[addr]
            meta.ovf_units |= 1 << unit
            self._sem_declare(meta, msg.info)
            if meta.sem_count > 0:
                meta.sem_count -= 1
                out.sends.append((self._coord_node(unit),
                                  Message(addr, Opcode.SEM_GRANT_OVERFLOW, msg.core_id, 0)))
            else:
                meta.remote_ovf[unit] = meta.remote_ovf.get(unit, 0) | (1 << local)

        elif op is Opcode.SEM_POST_LOCAL:
            if self.is_master_for(addr):
                meta, _ = self._get_or_reserve(addr, SEMAPHORE, out)
                meta.sem_count += 1
                self._sem_drain(addr, meta, out)
            else:
                out.sends.append((self._coord_node(master_se_of(self.cfg, addr)),
                                  Message(addr, Opcode.SEM_POST_GLOBAL, self.unit, 1)))

        elif op is Opcode.SEM_POST_GLOBAL:
            meta, _ = self._get_or_reserve(addr, SEMAPHORE, out)
            meta.sem_count += msg.info
            self._sem_drain(addr, meta, out)

        elif op is Opcode.SEM_POST_OVERFLOW:
            meta = self.meta[addr]
            meta.sem_count += 1
            self._sem_drain(addr, meta, out)

        elif op is Opcode.SEM_GRANT_GLOBAL:
            meta = self.meta.get(addr)
            if meta is None:
                raise ProtocolError(f"semaphore grant for unknown variable {addr:#x}")
            meta.sem_credit += msg.info
            while meta.sem_credit > 0 and meta.locals:
                key = _low_bit(meta.locals)
                meta.locals &= meta.locals - 1
                meta.sem_credit -= 1
                core = self._core_from_key(key)
                out.sends.append((("core", core.unit, core.local),
                                  Message(addr, Opcode.SEM_GRANT_LOCAL, core.local, 0)))
            if not meta.locals and meta.sem_credit == 0:
                self._release_var(addr, meta, out)

        else:  # pragma: no cover
            raise ProtocolError(f"semaphore opcode {op.name} not valid at a coordinator")

    def _sem_drain(self, addr: int, meta: VarMeta, out: Output) -> None:
        while meta.sem_count > 0 and meta.locals:
            key = _low_bit(meta.locals)
            meta.locals &= meta.locals - 1
            meta.sem_count -= 1
            core = self._core_from_key(key)
            out.sends.append((("core", core.unit, core.local),
                              Message(addr, Opcode.SEM_GRANT_LOCAL, core.local, 0)))
        while meta.sem_count > 0:
            units = sorted(set(u for u, m in meta.remote_ovf.items() if m) | set(meta.sem_demand))
            if not units:
                break
            u = units[0]
            if meta.remote_ovf.get(u):
                local = _low_bit(meta.remote_ovf[u])
                meta.remote_ovf[u] &= meta.remote_ovf[u] - 1
                meta.sem_count -= 1
                out.sends.append((self._coord_node(u),
                                  Message(addr, Opcode.SEM_GRANT_OVERFLOW,
                                          pack_core(u, local, self.core_bits), 0)))
            else:
                batch = min(meta.sem_count, meta.sem_demand[u])
                meta.sem_count -= batch
                if meta.sem_demand[u] == batch:
                    del meta.sem_demand[u]
                else:
                    meta.sem_demand[u] -= batch
                out.sends.append((self._coord_node(u),
                                  Message(addr, Opcode.SEM_GRANT_GLOBAL, self.unit, batch)))
        self._sem_try_release(addr, meta, out)

    def _sem_try_release(self, addr: int, meta: VarMeta, out: Output) -> None:
        if meta.backing == "record":
            return  # the memory path decides quiescence
        if self._quiesced(meta):
            self._release_var(addr, meta, out)

    # -- condition variables -----------------------------------------------------------

    def _on_cond(self, msg: Message, src, out: Output) -> None:
        addr = msg.addr
        op = msg.opcode

        if op is Opcode.COND_WAIT_LOCAL:
            core = self._sender_core(msg)
            meta, _ = self._get_or_reserve(addr, CONDVAR, out)
            self._cond_lock_set(meta, msg.info)
            meta.locals |= 1 << self._key(core)
            if not self.is_master_for(addr) and not meta.pending_global:
                meta.pending_global = True
                out.sends.append((self._coord_node(master_se_of(self.cfg, addr)),
                                  Message(addr, Opcode.COND_WAIT_GLOBAL, self.unit, msg.info)))

        elif op is Opcode.COND_WAIT_GLOBAL:
            s = src[1]
            meta, _ = self._get_or_reserve(addr, CONDVAR, out)
            self._cond_lock_set(meta, msg.info)
            meta.remote_agg |= 1 << s

        elif op is Opcode.COND_WAIT_OVERFLOW:
            unit, local = unpack_core(msg.core_id, self.core_bits)
            meta = self.meta[addr]
            self._cond_lock_set(meta, msg.info)
            meta.ovf_units |= 1 << unit
            meta.remote_ovf[unit] = meta.remote_ovf.get(unit, 0) | (1 << local)

        elif op in (Opcode.COND_SIGNAL_LOCAL, Opcode.COND_BROAD_LOCAL):
            if self.is_master_for(addr):
                if op is Opcode.COND_SIGNAL_LOCAL:
                    self._cond_wake_one(addr, out)
                else:
                    self._cond_wake_all(addr, out)
            else:
                fwd = (Opcode.COND_SIGNAL_GLOBAL if op is Opcode.COND_SIGNAL_LOCAL
                       else Opcode.COND_BROAD_GLOBAL)
                out.sends.append((self._coord_node(master_se_of(self.cfg, addr)),
                                  Message(addr, fwd, self.unit, 0)))

        elif op in (Opcode.COND_SIGNAL_GLOBAL, Opcode.COND_SIGNAL_OVERFLOW):
            self._cond_wake_one(addr, out)

        elif op in (Opcode.COND_BROAD_GLOBAL, Opcode.COND_BROAD_OVERFLOW):
            self._cond_wake_all(addr, out)

        elif op is Opcode.COND_GRANT_GLOBAL:
            meta = self.meta.get(addr)
            if meta is None or not meta.locals:
                raise ProtocolError(f"condvar wake for {addr:#x} with no parked waiter")
            wakes = bin(meta.locals).count("1") if msg.info == WAKE_ALL else 1
            for _ in range(wakes):
                key = _low_bit(meta.locals)
                meta.locals &= meta.locals - 1
                self._start_resume(self._core_from_key(key), addr, meta.cond_lock, out)
            if meta.locals:
                # still parked waiters: announce again
                out.sends.append((self._coord_node(master_se_of(self.cfg, addr)),
                                  Message(addr, Opcode.COND_WAIT_GLOBAL, self.unit, meta.cond_lock)))
            else:
                self._release_var(addr, meta, out)

        else:  # pragma: no cover
            raise ProtocolError(f"condvar opcode {op.name} not valid at a coordinator")

    def _cond_lock_set(self, meta: VarMeta, lock_addr: int) -> None:
        if meta.cond_lock == 0:
            meta.cond_lock = lock_addr
        elif meta.cond_lock != lock_addr:
            raise ProtocolError(
                f"condvar associated with lock {meta.cond_lock:#x}, wait names {lock_addr:#x}")

    def _cond_wake_one(self, addr: int, out: Output) -> None:
        meta = self.meta.get(addr)
        if meta is None:
            return  # lost signal
        if meta.locals:
            key = _low_bit(meta.locals)
            meta.locals &= meta.locals - 1
            self._start_resume(self._core_from_key(key), addr, meta.cond_lock, out)
        else:
            units = sorted(set(u for u, m in meta.remote_ovf.items() if m) | set(_bits(meta.remote_agg)))
            if not units:
                return  # lost signal
            u = units[0]
            if meta.remote_ovf.get(u):
                local = _low_bit(meta.remote_ovf[u])
                meta.remote_ovf[u] &= meta.remote_ovf[u] - 1
                out.sends.append((self._coord_node(u),
                                  Message(addr, Opcode.COND_GRANT_OVERFLOW,
                                          pack_core(u, local, self.core_bits), meta.cond_lock)))
            else:
                meta.remote_agg &= ~(1 << u)
                out.sends.append((self._coord_node(u),
                                  Message(addr, Opcode.COND_GRANT_GLOBAL, self.unit, 1)))
        if not self._cond_busy(meta):
            self._release_var(addr, meta, out)

    def _cond_wake_all(self, addr: int, out: Output) -> None:
        meta = self.meta.get(addr)
        if meta is None:
            return
        while meta.locals:
            key = _low_bit(meta.locals)
            meta.locals &= meta.locals - 1
            self._start_resume(self._core_from_key(key), addr, meta.cond_lock, out)
        for u in sorted(meta.remote_ovf):
            for local in _bits(meta.remote_ovf[u]):
                out.sends.append((self._coord_node(u),
                                  Message(addr, Opcode.COND_GRANT_OVERFLOW,
                                          pack_core(u, local, self.core_bits), meta.cond_lock)))
            meta.remote_ovf[u] = 0
        for u in _bits(meta.remote_agg):
            out.sends.append((self._coord_node(u),
                              Message(addr, Opcode.COND_GRANT_GLOBAL, self.unit, WAKE_ALL)))
        meta.remote_agg = 0
        if not self._cond_busy(meta):
            self._release_var(addr, meta, out)

    def _cond_busy(self, meta: VarMeta) -> bool:
        return bool(meta.locals or meta.remote_agg or any(meta.remote_ovf.values()))

    def _start_resume(self, core: CoreId, cv_addr: int, lock_addr: int, out: Output) -> None:
        """Wake one waiter: re-acquire its lock, then deliver the cond grant."""
        if lock_addr == 0:
            raise ProtocolError(f"condvar {cv_addr:#x} woken without an associated lock")
        if self.cfg.scheme == "flat" and master_se_of(self.cfg, lock_addr) != self.unit:
            # the lock lives at another master: re-acquire over the wire
            out.sends.append((self._coord_node(master_se_of(self.cfg, lock_addr)),
                              Message(lock_addr, Opcode.LOCK_ACQUIRE_LOCAL,
                                      pack_core(core.unit, core.local, self.core_bits), cv_addr)))
        else:
            out.internal.append(Message(lock_addr, Opcode.LOCK_ACQUIRE_LOCAL,
                                        self._wire_core_id(core), cv_addr))
