"""Experiment configuration: one JSON schema shared by every subcommand.

Field-level validation raises :class:`ConfigError` naming the offending
field; the CLI maps that to exit code 2.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .core import ChannelModel, Topology, load_topology, snr_db_to_linear, topology_from_dict
from .policies import POLICY_KINDS, PolicySpec
from .traffic import Catalog, RequestSource, Workload, finite_workload, spatial_workload

DEFAULTS = {
    "topology": "berlin",
    "catalog": {"contents": 10_000, "alpha": 1.2, "total_rate": 1.0},
    "source": {"mode": "spatial"},
    "channel": {"bandwidth_hz": 5e6, "snr_db": 10.0, "backhaul_delay_s": 0.1,
                "content_size_bits": 1e6},
    "gain": "hit_rate",
    "capacity": 100,
    "policies": [{"policy": "lru"}],
    "warmup_requests": 100_000,
    "measure_requests": 100_000,
    "seeds": [1],
    "snapshot_every": 0,
    "greedy_reference": False,
    "initial_allocation": None,
    "popularity_noise_var": 0.0,
    "noise_seed": 0,
    "workload_grid": 200,
    "backend": "auto",
    "analysis": None,
}


class ConfigError(Exception):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


def load_config(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError("config", f"file not found: {path}")
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be an object")
    return resolve_config(doc)


def resolve_config(doc: dict) -> dict:
    """Fill defaults; unknown keys are rejected to catch typos."""
    resolved = json.loads(json.dumps(DEFAULTS))
    for key, value in doc.items():
        if key not in DEFAULTS:
            raise ConfigError(key, "unknown configuration key")
        if isinstance(DEFAULTS[key], dict) and isinstance(value, dict) and key != "analysis":
            resolved[key].update(value)
        else:
            resolved[key] = value
    return resolved


# ---------------------------------------------------------------------------
# object builders


def build_topology(doc: dict) -> Topology:
    spec = doc["topology"]
    try:
        if isinstance(spec, str):
            if spec != "berlin" and not os.path.exists(spec):
                raise ConfigError("topology", f"file not found: {spec}")
            return load_topology(spec)
        return topology_from_dict(spec)
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError("topology", str(exc)) from None


def build_catalog(doc: dict) -> Catalog:
    c = doc["catalog"]
    try:
        return Catalog(int(c["contents"]), float(c["alpha"]), float(c.get("total_rate", 1.0)))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError("catalog", str(exc)) from None


def build_channel(doc: dict) -> ChannelModel:
    c = doc["channel"]
    try:
        return ChannelModel(
            bandwidth_hz=float(c["bandwidth_hz"]),
            snr_linear=snr_db_to_linear(float(c["snr_db"])),
            backhaul_delay_s=float(c["backhaul_delay_s"]),
            content_size_bits=float(c["content_size_bits"]),
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError("channel", str(exc)) from None


def build_source(doc: dict, topology: Topology) -> RequestSource:
    s = doc["source"]
    mode = s.get("mode", "spatial")
    try:
        if mode == "spatial":
            return RequestSource(topology, "spatial", density=float(s.get("density", 1.0)))
        if mode == "finite":
            users = s["users"]
            xy = np.array([[float(u["x_m"]), float(u["y_m"])] for u in users])
            w = np.array([float(u.get("weight", 1.0)) for u in users])
            return RequestSource(topology, "finite", user_xy=xy, user_weight=w)
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError("source", str(exc)) from None
    raise ConfigError("source.mode", f"unknown mode {mode!r}")


def build_workload(doc: dict, topology: Topology, catalog: Catalog,
                   source: RequestSource) -> Workload:
    if source.mode == "finite":
        return finite_workload(source, catalog)
    return spatial_workload(topology, catalog, grid=int(doc["workload_grid"]))


def build_policy_spec(entry: dict, n_stations: int, q_value: float | None = None) -> PolicySpec:
    kind = entry.get("policy")
    if kind not in POLICY_KINDS:
        raise ConfigError("policies.policy", f"unknown policy {kind!r}")
    gamma = entry.get("gamma")
    if gamma is not None:
        if len(gamma) != n_stations:
            raise ConfigError("policies.gamma", f"expected {n_stations} entries")
        gamma = tuple(float(g) for g in gamma)
    q = q_value if q_value is not None else entry.get("q", 1.0)
    try:
        return PolicySpec(
            kind=kind,
            q=float(q),
            gamma=gamma,
            gain=entry.get("gain", "hit_rate"),
            virtual_cache_size=entry.get("virtual_cache"),
        )
    except ValueError as exc:
        raise ConfigError("policies", str(exc)) from None


@dataclass(frozen=True)
class RunCell:
    run_id: str
    policy_entry: dict
    q: float
    seed: int


@dataclass
class RunManifest:
    cells: list

    def __iter__(self):
        return iter(self.cells)


def build_manifest(doc: dict, n_stations: int) -> RunManifest:
    seeds = doc["seeds"]
    if isinstance(seeds, int):
        seeds = [seeds]
    if not seeds:
        raise ConfigError("seeds", "need at least one seed")
    cells = []
    seen = set()
    for entry in doc["policies"]:
        qs = entry.get("q", 1.0)
        if not isinstance(qs, list):
            qs = [qs]
        for q in qs:
            build_policy_spec(entry, n_stations, q)  # validate early
            for seed in seeds:
                gain = entry.get("gain", "hit_rate")
                run_id = f"{entry['policy']}-{gain}-q{q:g}-s{seed}"
                if run_id in seen:
                    raise ConfigError("policies", f"duplicate run id {run_id}")
                seen.add(run_id)
                cells.append(RunCell(run_id=run_id, policy_entry=dict(entry), q=float(q),
                                     seed=int(seed)))
    return RunManifest(cells)
