"""Deterministic simulator for hardware-assisted synchronization in
near-data-processing systems.

The package models a system of memory units, each with simple in-order
cores and a per-unit synchronization engine, and compares the hierarchical
hardware scheme against flat, server-based (central/hier) and ideal
baselines on microbenchmarks and lock-based data structures.
"""

from .topology import SystemConfig, CoreId, master_se_of, resolve_core
from .messages import Message, Opcode, OpClass, encode, decode, classify_opcode, CodecError
from .sync_table import SynchronizationTable, STEntry, IndexingCounters, TableFull
from .errors import ConfigError, ProtocolError, SimulationDeadlock
from .sim import LatencyModel, EnergyModel, Stats
from .cli import RunConfig, run_once

__all__ = [
    "SystemConfig", "CoreId", "master_se_of", "resolve_core",
    "Message", "Opcode", "OpClass", "encode", "decode", "classify_opcode", "CodecError",
    "SynchronizationTable", "STEntry", "IndexingCounters", "TableFull",
    "ConfigError", "ProtocolError", "SimulationDeadlock",
    "LatencyModel", "EnergyModel", "Stats",
    "RunConfig", "run_once",
]
