"""System shape: memory units, cores, and variable-to-unit ownership.

Memory is partitioned contiguously across units. The unit whose memory
holds an address owns that address: its synchronization engine (or
per-unit server, depending on the scheme) is the master coordinator for
every synchronization variable stored there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError

MIB = 1024 * 1024

SCHEMES = ("syncron", "flat", "central", "hier", "ideal")
MEMORY_TECHS = ("hbm", "hmc", "ddr4")

# Schemes that dedicate one core per unit (hier) or one core in the whole
# system (central) as a software synchronization server.
SERVER_SCHEMES = ("central", "hier")


@dataclass(frozen=True, order=True)
class CoreId:
    """A core addressed as (unit, local index within the unit)."""

    unit: int
    local: int


@dataclass
class SystemConfig:
    """Static system description; validated on construction."""

    num_units: int = 4
    cores_per_unit: int = 16
    clients_per_unit: int | None = None  # default: cores_per_unit - 1
    st_entries: int = 64
    index_counters: int = 256
    unit_mem_bytes: int = 1024 * MIB
    scheme: str = "syncron"
    memory: str = "hbm"
    inbox_depth: int = 16
    # Documented future extensions; activation is rejected.
    enable_fairness_threshold: bool = False
    enable_se_rmw: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        if self.memory not in MEMORY_TECHS:
            raise ConfigError(f"unknown memory tech {self.memory!r}, expected one of {MEMORY_TECHS}")
        if self.num_units < 1:
            raise ConfigError("num_units must be >= 1")
        if self.cores_per_unit < 1:
            raise ConfigError("cores_per_unit must be >= 1")
        if self.scheme in SERVER_SCHEMES and self.cores_per_unit < 2:
            raise ConfigError(f"scheme {self.scheme!r} needs cores_per_unit >= 2 (a server core must exist)")
        if self.clients_per_unit is None:
            self.clients_per_unit = self.cores_per_unit - 1 if self.cores_per_unit > 1 else 1
        limit = self.cores_per_unit - 1 if self.scheme in SERVER_SCHEMES else self.cores_per_unit
        if not 1 <= self.clients_per_unit <= limit:
            raise ConfigError(
                f"clients_per_unit={self.clients_per_unit} out of range [1, {limit}] for scheme {self.scheme!r}")
        if self.st_entries < 1:
            raise ConfigError("st_entries must be >= 1")
        if self.index_counters < 1:
            raise ConfigError("index_counters must be >= 1")
        if self.unit_mem_bytes < 1:
            raise ConfigError("unit_mem_bytes must be >= 1")
        if self.inbox_depth < 1:
            raise ConfigError("inbox_depth must be >= 1")
        if self.enable_fairness_threshold:
            raise ConfigError("fairness threshold is documented future work; cannot be enabled")
        if self.enable_se_rmw:
            raise ConfigError("engine-side read-modify-write is documented future work; cannot be enabled")

    # -- derived quantities ------------------------------------------------

    @property
    def total_cores(self) -> int:
        return self.num_units * self.cores_per_unit

    @property
    def total_clients(self) -> int:
        return self.num_units * self.clients_per_unit

    @property
    def total_mem_bytes(self) -> int:
        return self.num_units * self.unit_mem_bytes

    def clients(self) -> list[CoreId]:
        """Client cores in deterministic (unit, local) order."""
        return [CoreId(u, l) for u in range(self.num_units) for l in range(self.clients_per_unit)]

    def server_core(self, unit: int) -> CoreId:
        """The per-unit server slot (last core of the unit)."""
        return CoreId(unit, self.cores_per_unit - 1)


def master_se_of(cfg: SystemConfig, addr: int) -> int:
    """Unit whose engine masters `addr` (contiguous partitioning)."""
    if not 0 <= addr < cfg.total_mem_bytes:
        raise ConfigError(f"address {addr:#x} outside system memory (0..{cfg.total_mem_bytes:#x})")
    return addr // cfg.unit_mem_bytes


def resolve_core(cfg: SystemConfig, global_id: int) -> CoreId:
    """Map a flat core index to (unit, local); inverse of global_core_id."""
    if not 0 <= global_id < cfg.total_cores:
        raise ConfigError(f"core id {global_id} outside [0, {cfg.total_cores})")
    return CoreId(global_id // cfg.cores_per_unit, global_id % cfg.cores_per_unit)


def global_core_id(cfg: SystemConfig, core: CoreId) -> int:
    if not (0 <= core.unit < cfg.num_units and 0 <= core.local < cfg.cores_per_unit):
        raise ConfigError(f"core {core} outside system")
    return core.unit * cfg.cores_per_unit + core.local
