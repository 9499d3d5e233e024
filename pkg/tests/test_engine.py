import pytest

from ndpsync.engine import Coordinator
from ndpsync.errors import ProtocolError
from ndpsync.messages import Message, Opcode
from ndpsync.sim import Simulation
from ndpsync.topology import SystemConfig
from ndpsync.verifier import verify_trace
from ndpsync.workloads import Workload, make_workload


class Script(Workload):
    name = "script"

    def __init__(self, cfg, steps=None):
        super().__init__(cfg, seed=0)
        self.steps = steps or {}

    def _program(self, core, idx):
        for step in self.steps.get(idx, ()):
            yield step
        self.completed_ops += 1

    def digest(self):
        return "script"


def run_script(steps, units=2, cores=3, scheme="syncron", **cfg_kw):
    cfg = SystemConfig(num_units=units, cores_per_unit=cores, scheme=scheme, **cfg_kw)
    sim = Simulation(cfg, Script(cfg, steps), trace=True)
    stats = sim.run()
    return stats, sim


# -- two-unit lock walkthrough ---------------------------------------------------


def replay_two_unit_contention(scheme):
    # 2 units x 2 clients, everyone grabs the same unit-0 lock at t=0
    cfg = SystemConfig(num_units=2, cores_per_unit=3, scheme=scheme)
    wl = make_workload(cfg, "lock", seed=0, params={"iterations": 1, "interval": 0})
    sim = Simulation(cfg, wl, trace=True)
    stats = sim.run()
    return stats, sim


def test_two_unit_lock_grant_order_and_message_counts():
    stats, sim = replay_two_unit_contention("syncron")
    order = [(r.unit, r.local) for r in sim.trace if r.kind == "cs_enter"]
    # master's unit first (closest requests), then the remote unit in fifo order
    assert order == [(0, 0), (0, 1), (1, 0), (1, 1)]
    # the remote unit aggregates: one global acquire, one global release
    assert stats.by_opcode["lock_acquire_global"] == 1
    assert stats.by_opcode["lock_release_global"] == 1
    assert stats.by_opcode["lock_grant_global"] == 1
    assert stats.by_opcode["lock_acquire_local"] == 4
    assert stats.by_opcode["lock_grant_local"] == 4
    assert stats.by_opcode["lock_release_local"] == 4
    assert verify_trace(sim.trace, sim.workload.expected_ops()) == []


def test_two_unit_contention_same_pattern_under_hier_plus_state_traffic():
    s_stats, _ = replay_two_unit_contention("syncron")
    h_stats, h_sim = replay_two_unit_contention("hier")
    keys = {k for k in s_stats.by_opcode} | {k for k in h_stats.by_opcode}
    assert {k: h_stats.by_opcode.get(k, 0) for k in keys} == \
           {k: s_stats.by_opcode.get(k, 0) for k in keys}
    # software servers pay cache/memory traffic for every state update
    assert h_stats.energy_cache_fj > 0
    assert h_stats.mem_sync_var > 0
    assert s_stats.energy_cache_fj == 0
    assert s_stats.mem_sync_var == 0
    assert verify_trace(h_sim.trace, h_sim.workload.expected_ops()) == []


def test_flat_pays_more_inter_unit_traffic_on_remote_lock():
    # every client hammers a unit-0 lock; under flat, remote cores cross per request
    def one(scheme):
        cfg = SystemConfig(num_units=4, cores_per_unit=16, scheme=scheme)
        wl = make_workload(cfg, "lock", seed=0, params={"iterations": 10})
        return Simulation(cfg, wl).run()

    flat, syn = one("flat"), one("syncron")
    assert flat.bytes_inter > syn.bytes_inter
    assert flat.messages_inter > syn.messages_inter


# -- overflow paths ------------------------------------------------------------


def test_non_master_divert_emits_overflow_acquire():
    # ST size 1 at the non-master engine: unit-1 holds lock A when B arrives
    A, B = 64, 128  # both mastered by unit 0, distinct counter slots
    steps = {
        2: [("lock_acquire", A), ("compute", 10_000), ("lock_release", A)],
        3: [("compute", 500), ("lock_acquire", B), ("lock_release", B)],
    }
    stats, sim = run_script(steps, st_entries=1)
    assert stats.by_opcode["lock_acquire_overflow"] == 1
    assert stats.by_opcode["lock_grant_overflow"] == 1
    assert stats.by_opcode["lock_release_overflow"] == 1
    assert stats.by_opcode["decrease_indexing_counter"] == 1
    assert stats.sync_overflowed > 0
    assert stats.counters_end_total == 0
    assert verify_trace(sim.trace) == []


def test_master_full_table_services_via_memory():
    # one unit, ST size 1, two overlapping locks: the second lives in memory
    A, B = 64, 128
    steps = {
        0: [("lock_acquire", A), ("compute", 10_000), ("lock_release", A)],
        1: [("compute", 500), ("lock_acquire", B), ("lock_release", B)],
    }
    stats, sim = run_script(steps, units=1, st_entries=1)
    assert stats.sync_overflowed > 0
    assert stats.mem_sync_var >= 2  # at least read + write per memory service
    assert stats.counters_end_total == 0
    assert stats.overflow_fraction > 0
    assert verify_trace(sim.trace) == []


def test_entry_migrates_to_memory_when_overflow_request_arrives():
    # unit-0 core holds A (table entry at the master); unit-1's full table
    # diverts its request for A, forcing the master entry into memory
    A, B = 64, 128
    steps = {
        0: [("lock_acquire", A), ("compute", 40_000), ("lock_release", A)],
        2: [("compute", 100), ("lock_acquire", B), ("compute", 40_000), ("lock_release", B)],
        3: [("compute", 2_000), ("lock_acquire", A), ("lock_release", A)],
    }
    stats, sim = run_script(steps, st_entries=1)
    assert stats.by_opcode["lock_acquire_overflow"] == 1
    assert stats.by_opcode["lock_grant_overflow"] == 1
    assert stats.mem_sync_var > 0  # record reads/writes at the master
    assert stats.counters_end_total == 0
    order = [(r.unit, r.local) for r in sim.trace if r.kind == "cs_enter" and r.addr == A]
    assert order == [(0, 0), (1, 1)]
    assert verify_trace(sim.trace) == []


def test_decrease_at_zero_counter_rejected():
    cfg = SystemConfig(num_units=2, cores_per_unit=3)
    coord = Coordinator(cfg, 1, server=False)
    with pytest.raises(ProtocolError):
        coord.handle(Message(64, Opcode.DECREASE_INDEXING_COUNTER, 0, 0), ("coord", 0))


# -- lock protocol edges ----------------------------------------------------------


def test_release_by_non_owner_rejected():
    cfg = SystemConfig(num_units=1, cores_per_unit=3)
    coord = Coordinator(cfg, 0, server=False)
    out = coord.handle(Message(64, Opcode.LOCK_ACQUIRE_LOCAL, 0, 0), ("core", 0, 0))
    assert any(m.opcode is Opcode.LOCK_GRANT_LOCAL for _, m in out.sends)
    with pytest.raises(ProtocolError):
        coord.handle(Message(64, Opcode.LOCK_RELEASE_LOCAL, 1, 0), ("core", 0, 1))


def test_release_global_by_non_owner_rejected():
    cfg = SystemConfig(num_units=2, cores_per_unit=3)
    coord = Coordinator(cfg, 0, server=False)
    coord.handle(Message(64, Opcode.LOCK_ACQUIRE_GLOBAL, 1, 0), ("coord", 1))
    with pytest.raises(ProtocolError):
        coord.handle(Message(64, Opcode.LOCK_RELEASE_GLOBAL, 1, 0), ("coord", 1))
        coord.handle(Message(64, Opcode.LOCK_RELEASE_GLOBAL, 1, 0), ("coord", 1))


def test_grant_goes_local_first_then_ascending_units():
    cfg = SystemConfig(num_units=4, cores_per_unit=3)
    coord = Coordinator(cfg, 0, server=False)
    addr = 64
    coord.handle(Message(addr, Opcode.LOCK_ACQUIRE_GLOBAL, 3, 0), ("coord", 3))  # owner
    coord.handle(Message(addr, Opcode.LOCK_ACQUIRE_GLOBAL, 2, 0), ("coord", 2))
    coord.handle(Message(addr, Opcode.LOCK_ACQUIRE_LOCAL, 1, 0), ("core", 0, 1))
    coord.handle(Message(addr, Opcode.LOCK_ACQUIRE_GLOBAL, 1, 0), ("coord", 1))
    grants = []
    out = coord.handle(Message(addr, Opcode.LOCK_RELEASE_GLOBAL, 3, 0), ("coord", 3))
    grants += out.sends
    # local waiter wins over both queued units
    assert grants[-1][0] == ("core", 0, 1)
    assert grants[-1][1].opcode is Opcode.LOCK_GRANT_LOCAL
    out = coord.handle(Message(addr, Opcode.LOCK_RELEASE_LOCAL, 1, 0), ("core", 0, 1))
    assert out.sends[-1][0] == ("coord", 1)  # then ascending unit ids
    out = coord.handle(Message(addr, Opcode.LOCK_RELEASE_GLOBAL, 1, 0), ("coord", 1))
    assert out.sends[-1][0] == ("coord", 2)
    coord.handle(Message(addr, Opcode.LOCK_RELEASE_GLOBAL, 2, 0), ("coord", 2))
    assert coord.meta.get(addr) is None  # fully quiesced
    assert coord.table.occupied_count == 0


# -- barriers ------------------------------------------------------------------


def test_two_level_barrier_message_economy():
    # 60 participants on 4x15 clients: the master aggregates its own unit
    # internally, each remote engine sends one announce and gets one depart
    cfg = SystemConfig(num_units=4, cores_per_unit=16)
    wl = make_workload(cfg, "barrier", seed=0, params={"iterations": 2})
    sim = Simulation(cfg, wl, trace=True)
    stats = sim.run()
    assert stats.by_opcode["barrier_wait_global"] == 2 * 3
    assert stats.by_opcode["barrier_depart_global"] == 2 * 3
    assert stats.by_opcode["barrier_wait_local_across_units"] == 2 * 60
    assert stats.by_opcode["barrier_depart_local"] == 2 * 60
    assert verify_trace(sim.trace, sim.workload.expected_ops()) == []


def test_one_level_barrier_forwards_every_wait():
    # 20 participants of 60: no unit can know its local quota, so every
    # arrival reaches the master individually (15 direct + 5 forwarded)
    cfg = SystemConfig(num_units=4, cores_per_unit=16)
    wl = make_workload(cfg, "barrier", seed=0,
                       params={"iterations": 2, "participants": 20})
    sim = Simulation(cfg, wl, trace=True)
    stats = sim.run()
    assert stats.by_opcode["barrier_wait_global"] == 2 * 5
    assert stats.by_opcode["barrier_wait_local_across_units"] == 2 * 20
    assert stats.by_opcode["barrier_depart_local"] == 2 * 20
    assert verify_trace(sim.trace, sim.workload.expected_ops()) == []


def test_barrier_double_arrival_rejected():
    cfg = SystemConfig(num_units=1, cores_per_unit=3)
    coord = Coordinator(cfg, 0, server=False)
    msg = Message(64, Opcode.BARRIER_WAIT_LOCAL_WITHIN_UNIT, 0, 2)
    coord.handle(msg, ("core", 0, 0))
    with pytest.raises(ProtocolError):
        coord.handle(msg, ("core", 0, 0))


def test_barrier_target_mismatch_rejected():
    cfg = SystemConfig(num_units=1, cores_per_unit=4)
    coord = Coordinator(cfg, 0, server=False)
    coord.handle(Message(64, Opcode.BARRIER_WAIT_LOCAL_WITHIN_UNIT, 0, 2), ("core", 0, 0))
    with pytest.raises(ProtocolError):
        coord.handle(Message(64, Opcode.BARRIER_WAIT_LOCAL_WITHIN_UNIT, 1, 3), ("core", 0, 1))


# -- semaphores ------------------------------------------------------------------


def test_semaphore_grants_local_first_and_bounded():
    # 2 units, resources=1: unit-0 waiters drain before unit-1's
    S = 64
    steps = {
        0: [("sem_wait", S, 1)],
        1: [("compute", 100), ("sem_wait", S, 1)],
        2: [("compute", 200), ("sem_wait", S, 1)],
        3: [("compute", 3_000), ("sem_post", S),
            ("compute", 3_000), ("sem_post", S),
            ("compute", 3_000), ("sem_post", S)],
    }
    stats, sim = run_script(steps)
    grants = [(r.unit, r.local) for r in sim.trace if r.kind == "sem_acquire"]
    assert grants == [(0, 0), (0, 1), (1, 0)]
    assert stats.ops["sem_wait"] == 3 and stats.ops["sem_post"] == 3
    assert verify_trace(sim.trace) == []


def test_semaphore_initial_resources_mismatch_rejected():
    cfg = SystemConfig(num_units=1, cores_per_unit=3)
    coord = Coordinator(cfg, 0, server=False)
    coord.handle(Message(64, Opcode.SEM_WAIT_LOCAL, 0, 2), ("core", 0, 0))
    with pytest.raises(ProtocolError):
        coord.handle(Message(64, Opcode.SEM_WAIT_LOCAL, 1, 3), ("core", 0, 1))


def test_semaphore_alternating_producer_consumer_across_units():
    # consumers on both units with zero initial resources; posts arrive from
    # unit 1 and never let in-flight grants exceed what was posted
    S = 64
    steps = {
        0: [("sem_wait", S, 0), ("compute", 50), ("sem_wait", S, 0)],
        2: [("compute", 100), ("sem_wait", S, 0), ("compute", 50), ("sem_wait", S, 0)],
        3: [("compute", 2_000), ("sem_post", S), ("compute", 8_000), ("sem_post", S),
            ("compute", 8_000), ("sem_post", S), ("compute", 8_000), ("sem_post", S)],
    }
    stats, sim = run_script(steps)
    assert stats.ops["sem_wait"] == 4 and stats.ops["sem_post"] == 4
    assert verify_trace(sim.trace) == []


# -- condition variables ------------------------------------------------------------


def test_condvar_broadcast_wakes_all_serialized_by_lock():
    CV, L = 64, 128
    waiter = [("lock_acquire", L), ("cond_wait", CV, L), ("lock_release", L)]
    steps = {i: list(waiter) for i in range(4)}
    steps[4] = [("compute", 30_000), ("lock_acquire", L),
                ("cond_broadcast", CV), ("lock_release", L)]
    stats, sim = run_script(steps, units=2, cores=4)
    wakes = [(r.unit, r.local) for r in sim.trace if r.kind == "cond_wake"]
    assert len(wakes) == 4 and len(set(wakes)) == 4
    assert stats.ops["cond_wait"] == 4
    assert stats.ops["cond_broadcast"] == 1
    assert verify_trace(sim.trace) == []  # includes pairwise-disjoint sections


def test_condvar_signal_wakes_one_at_a_time():
    CV, L = 64, 128
    waiter = [("lock_acquire", L), ("cond_wait", CV, L), ("lock_release", L)]
    steps = {0: list(waiter), 2: list(waiter)}
    steps[3] = [("compute", 30_000), ("lock_acquire", L), ("cond_signal", CV),
                ("lock_release", L), ("compute", 30_000), ("lock_acquire", L),
                ("cond_signal", CV), ("lock_release", L)]
    stats, sim = run_script(steps)
    wakes = [r for r in sim.trace if r.kind == "cond_wake"]
    assert len(wakes) == 2
    assert wakes[0].t < wakes[1].t
    assert stats.ops["cond_signal"] == 2
    assert verify_trace(sim.trace) == []


def test_lost_signal_returns_without_wake():
    # a signal with no parked waiter is absorbed
    CV = 64
    steps = {0: [("cond_signal", CV)]}
    stats, sim = run_script(steps, units=1)
    assert stats.ops["cond_signal"] == 1
    assert [r for r in sim.trace if r.kind == "cond_wake"] == []


def test_cond_wait_requires_lock_address():
    cfg = SystemConfig(num_units=1, cores_per_unit=3)
    coord = Coordinator(cfg, 0, server=False)
    with pytest.raises(ProtocolError):
        coord.handle(Message(64, Opcode.COND_WAIT_LOCAL, 0, 0), ("core", 0, 0))
