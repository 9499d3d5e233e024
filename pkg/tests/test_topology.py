import pytest

from ndpsync.errors import ConfigError
from ndpsync.topology import (CoreId, SystemConfig, global_core_id,
                              master_se_of, resolve_core)

GIB = 1024 * 1024 * 1024


def test_defaults():
    cfg = SystemConfig()
    assert cfg.num_units == 4
    assert cfg.cores_per_unit == 16
    assert cfg.clients_per_unit == 15  # one core slot reserved, uniform across schemes
    assert cfg.total_cores == 64
    assert cfg.total_clients == 60
    assert cfg.total_mem_bytes == 4 * GIB


def test_master_se_contiguous_partitioning():
    cfg = SystemConfig()
    assert master_se_of(cfg, 0) == 0
    assert master_se_of(cfg, GIB - 1) == 0
    assert master_se_of(cfg, GIB) == 1
    # 3.5 GiB lives in the fourth unit
    assert master_se_of(cfg, 7 * GIB // 2) == 3
    assert master_se_of(cfg, 4 * GIB - 1) == 3


def test_master_se_rejects_out_of_range():
    cfg = SystemConfig()
    with pytest.raises(ConfigError):
        master_se_of(cfg, 4 * GIB)
    with pytest.raises(ConfigError):
        master_se_of(cfg, -1)


def test_resolve_core_examples():
    cfg = SystemConfig()
    assert resolve_core(cfg, 17) == CoreId(1, 1)
    assert resolve_core(cfg, 63) == CoreId(3, 15)
    assert resolve_core(cfg, 0) == CoreId(0, 0)
    with pytest.raises(ConfigError):
        resolve_core(cfg, 64)
    with pytest.raises(ConfigError):
        resolve_core(cfg, -1)


def test_global_core_id_roundtrip():
    cfg = SystemConfig(num_units=3, cores_per_unit=5)
    for g in range(cfg.total_cores):
        assert global_core_id(cfg, resolve_core(cfg, g)) == g
    with pytest.raises(ConfigError):
        global_core_id(cfg, CoreId(3, 0))
    with pytest.raises(ConfigError):
        global_core_id(cfg, CoreId(0, 5))


def test_clients_deterministic_order():
    cfg = SystemConfig(num_units=2, cores_per_unit=3)
    assert cfg.clients() == [CoreId(0, 0), CoreId(0, 1), CoreId(1, 0), CoreId(1, 1)]
    assert cfg.server_core(1) == CoreId(1, 2)


def test_clients_per_unit_uniform_across_schemes():
    # comparisons stay apples-to-apples: every scheme leaves the same slot free
    for scheme in ("syncron", "flat", "central", "hier", "ideal"):
        cfg = SystemConfig(scheme=scheme)
        assert cfg.clients_per_unit == 15, scheme


def test_validation_errors():
    for kwargs in (
        {"scheme": "magic"},
        {"memory": "sram"},
        {"num_units": 0},
        {"cores_per_unit": 0},
        {"st_entries": 0},
        {"index_counters": 0},
        {"unit_mem_bytes": 0},
        {"inbox_depth": 0},
        {"clients_per_unit": 0},
        {"clients_per_unit": 17},
        {"scheme": "hier", "cores_per_unit": 1},
        {"scheme": "central", "clients_per_unit": 16},  # server slot must stay free
    ):
        with pytest.raises(ConfigError):
            SystemConfig(**kwargs)


def test_future_extensions_rejected():
    with pytest.raises(ConfigError):
        SystemConfig(enable_fairness_threshold=True)
    with pytest.raises(ConfigError):
        SystemConfig(enable_se_rmw=True)


def test_single_core_unit_client_allowed():
    cfg = SystemConfig(num_units=1, cores_per_unit=1, scheme="syncron")
    assert cfg.clients_per_unit == 1
    assert cfg.clients() == [CoreId(0, 0)]
