"""Command-line front end: single runs, parameter sweeps, trace export.

Outputs (all under --out, default current directory):
  stats.json   schema_version, the resolved configuration(s), full statistics
  stats.csv    one flattened row per run, stable column order
  trace.jsonl  one JSON object per trace record      (with --trace)
  trace.bin    concatenated 18-byte wire messages    (with --trace)

Identical invocations produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import itertools
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .sim import LatencyModel, Simulation, Stats
from .topology import MIB, SCHEMES, SystemConfig
from .verifier import verify_trace
from .workloads import WORKLOAD_NAMES, make_workload

SCHEMA_VERSION = 1

CSV_COLUMNS = (
    "run", "scheme", "workload", "units", "cores_per_unit", "st_entries",
    "link_latency_ns", "memory", "seed", "time_ns", "completed_ops",
    "throughput_ops_per_s", "messages_intra", "messages_inter",
    "bytes_intra", "bytes_inter", "mem_local", "mem_remote", "mem_sync_var",
    "energy_network_fj", "energy_memory_fj", "energy_cache_fj", "energy_total_fj",
    "overflow_fraction", "st_max_occupancy", "counters_end_total",
    "saturation_events", "max_inbox_depth", "digest",
)

# sweepable key -> value parser
_SWEEP_KEYS = {
    "scheme": str, "workload": str, "memory": str,
    "units": int, "cores_per_unit": int, "st_entries": int, "seed": int,
    "link_latency_ns": float,
}

_INT_SYSTEM_KEYS = ("units", "cores_per_unit", "clients_per_unit", "st_entries",
                    "index_counters", "inbox_depth", "unit_mem_mib")


@dataclass
class RunConfig:
    """One resolved simulation run: system shape, cost knobs, workload, seed."""

    scheme: str = "syncron"
    workload: str = "lock"
    units: int = 4
    cores_per_unit: int = 16
    clients_per_unit: int | None = None
    st_entries: int = 64
    index_counters: int = 256
    inbox_depth: int = 16
    unit_mem_mib: int = 1024
    memory: str = "hbm"
    link_latency_ns: float | None = None
    seed: int = 0
    workload_params: dict = field(default_factory=dict)

    def system_config(self) -> SystemConfig:
        return SystemConfig(
            num_units=self.units,
            cores_per_unit=self.cores_per_unit,
            clients_per_unit=self.clients_per_unit,
            st_entries=self.st_entries,
            index_counters=self.index_counters,
            unit_mem_bytes=self.unit_mem_mib * MIB,
            scheme=self.scheme,
            memory=self.memory,
            inbox_depth=self.inbox_depth,
        )

    def latency_model(self) -> LatencyModel:
        return LatencyModel.create(self.memory, self.link_latency_ns)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "workload": self.workload,
            "units": self.units,
            "cores_per_unit": self.cores_per_unit,
            "clients_per_unit": self.clients_per_unit,
            "st_entries": self.st_entries,
            "index_counters": self.index_counters,
            "inbox_depth": self.inbox_depth,
            "unit_mem_mib": self.unit_mem_mib,
            "memory": self.memory,
            "link_latency_ns": self.link_latency_ns,
            "seed": self.seed,
            "workload_params": {k: self.workload_params[k]
                                for k in sorted(self.workload_params)},
        }

    def replace(self, **kw) -> "RunConfig":
        d = self.to_dict()
        d["workload_params"] = dict(self.workload_params)
        d.update(kw)
        return RunConfig(**d)


def run_once(rc: RunConfig, trace: bool = False):
    """Build and run one simulation; returns (stats, simulation)."""
    if rc.workload not in WORKLOAD_NAMES:
        raise ConfigError(f"unknown workload {rc.workload!r}; choose from {WORKLOAD_NAMES}")
    cfg = rc.system_config()
    workload = make_workload(cfg, rc.workload, rc.seed, rc.workload_params)
    sim = Simulation(cfg, workload, latency=rc.latency_model(), trace=trace)
    stats = sim.run()
    return stats, sim


def stats_payload(rc: RunConfig, stats: Stats) -> dict:
    return {"config": rc.to_dict(), "stats": stats.to_dict()}


def csv_row(index: int, rc: RunConfig, stats: Stats) -> dict:
    return {
        "run": index,
        "scheme": rc.scheme,
        "workload": rc.workload,
        "units": rc.units,
        "cores_per_unit": rc.cores_per_unit,
        "st_entries": rc.st_entries,
        "link_latency_ns": "" if rc.link_latency_ns is None else rc.link_latency_ns,
        "memory": rc.memory,
        "seed": rc.seed,
        "time_ns": stats.time_ps / 1000.0,
        "completed_ops": stats.completed_ops,
        "throughput_ops_per_s": stats.throughput_ops_per_s,
        "messages_intra": stats.messages_intra,
        "messages_inter": stats.messages_inter,
        "bytes_intra": stats.bytes_intra,
        "bytes_inter": stats.bytes_inter,
        "mem_local": stats.mem_local,
        "mem_remote": stats.mem_remote,
        "mem_sync_var": stats.mem_sync_var,
        "energy_network_fj": stats.energy_network_fj,
        "energy_memory_fj": stats.energy_memory_fj,
        "energy_cache_fj": stats.energy_cache_fj,
        "energy_total_fj": (stats.energy_network_fj + stats.energy_memory_fj
                            + stats.energy_cache_fj),
        "overflow_fraction": stats.overflow_fraction,
        "st_max_occupancy": max(stats.st_max_occupancy, default=0.0),
        "counters_end_total": stats.counters_end_total,
        "saturation_events": stats.saturation_events,
        "max_inbox_depth": stats.max_inbox_depth,
        "digest": stats.digest,
    }


# -- configuration file -----------------------------------------------------------

def load_config_file(path: str) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    rc = RunConfig()
    try:
        if parser.has_section("system"):
            sec = parser["system"]
            for key in _INT_SYSTEM_KEYS:
                if key in sec:
                    setattr(rc, key, sec.getint(key))
            if "scheme" in sec:
                rc.scheme = sec["scheme"].strip()
            if "memory" in sec:
                rc.memory = sec["memory"].strip()
        if parser.has_section("latency"):
            sec = parser["latency"]
            if "link_latency_ns" in sec:
                rc.link_latency_ns = sec.getfloat("link_latency_ns")
        if parser.has_section("workload"):
            sec = parser["workload"]
            for key, value in sec.items():
                if key == "name":
                    rc.workload = value.strip()
                else:
                    rc.workload_params[key] = int(value)
        if parser.has_section("run"):
            sec = parser["run"]
            if "seed" in sec:
                rc.seed = sec.getint("seed")
    except ValueError as exc:
        raise ConfigError(f"bad value in {path}: {exc}") from exc
    return rc


# -- argument handling ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ndpsync",
        description="Deterministic simulator for hierarchical hardware synchronization "
                    "in near-data-processing systems.")
    p.add_argument("--config", metavar="FILE", help="INI file with [system]/[latency]/[workload]/[run] sections")
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--workload", choices=WORKLOAD_NAMES)
    p.add_argument("--units", type=int)
    p.add_argument("--cores-per-unit", type=int)
    p.add_argument("--st-entries", type=int)
    p.add_argument("--link-latency-ns", type=float)
    p.add_argument("--memory", choices=("hbm", "hmc", "ddr4"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")
    p.add_argument("--trace", action="store_true", help="write trace.jsonl and trace.bin")
    p.add_argument("--sweep", action="append", default=[], metavar="KEY=V1,V2,...",
                   help="sweep a parameter; repeatable, sweeps combine as a cartesian product")
    p.add_argument("--verify", action="store_true",
                   help="run safety monitors on the trace; non-zero exit on violations")
    return p


def parse_sweeps(specs: list[str]) -> list[tuple[str, list]]:
    sweeps = []
    for spec in specs:
        key, eq, values = spec.partition("=")
        key = key.strip().replace("-", "_")
        if not eq or key not in _SWEEP_KEYS:
            raise ConfigError(f"bad sweep {spec!r}; expected KEY=V1,V2 with KEY in "
                              f"{sorted(_SWEEP_KEYS)}")
        cast = _SWEEP_KEYS[key]
        try:
            parsed = [cast(v.strip()) for v in values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad sweep value in {spec!r}: {exc}") from exc
        if not parsed:
            raise ConfigError(f"sweep {spec!r} lists no values")
        sweeps.append((key, parsed))
    return sweeps


def expand_runs(base: RunConfig, sweeps: list[tuple[str, list]]) -> list[RunConfig]:
    if not sweeps:
        return [base]
    keys = [k for k, _ in sweeps]
    combos = itertools.product(*(vals for _, vals in sweeps))
    return [base.replace(**dict(zip(keys, combo))) for combo in combos]


# -- output writers --------------------------------------------------------------

def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, rows: list[dict]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def _write_trace(out: Path, suffix: str, sim: Simulation) -> None:
    lines = [json.dumps(rec.to_json_dict(), sort_keys=True) for rec in sim.trace]
    (out / f"trace{suffix}.jsonl").write_text("\n".join(lines) + ("\n" if lines else ""))
    (out / f"trace{suffix}.bin").write_bytes(bytes(sim.wire_log))


# -- entry point ------------------------------------------------------------------

def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        base = load_config_file(args.config) if args.config else RunConfig()
        for attr in ("scheme", "workload", "units", "cores_per_unit",
                     "st_entries", "link_latency_ns", "memory", "seed"):
            value = getattr(args, attr)
            if value is not None:
                setattr(base, attr, value)
        runs = expand_runs(base, parse_sweeps(args.sweep))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    want_trace = args.trace or args.verify

    payloads, rows, failures = [], [], 0
    for index, rc in enumerate(runs):
        try:
            stats, sim = run_once(rc, trace=want_trace)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        payloads.append(stats_payload(rc, stats))
        rows.append(csv_row(index, rc, stats))
        print(f"[{index}] {rc.scheme:8s} {rc.workload:12s} units={rc.units} "
              f"st={rc.st_entries} time={stats.time_ps / 1000.0:.1f} ns "
              f"ops={stats.completed_ops} "
              f"thr={stats.throughput_ops_per_s:.4g} ops/s "
              f"ovf={stats.overflow_fraction:.4f}")
        if args.trace:
            _write_trace(out, "" if len(runs) == 1 else f"_{index:03d}", sim)
        if args.verify:
            violations = verify_trace(sim.trace, sim.workload.expected_ops())
            for v in violations:
                print(f"[{index}] violation: {v}", file=sys.stderr)
            if violations:
                failures += 1
            else:
                print(f"[{index}] verification passed ({len(sim.trace)} trace records)")

    if len(runs) == 1:
        _write_json(out / "stats.json", {"schema_version": SCHEMA_VERSION, **payloads[0]})
    else:
        _write_json(out / "stats.json",
                    {"schema_version": SCHEMA_VERSION, "runs": payloads})
    _write_csv(out / "stats.csv", rows)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
