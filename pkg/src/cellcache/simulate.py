"""Request-driven experiments: warm-up, measurement, metrics, snapshots."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ChannelModel, Topology
from .engine import make_engine
from .gain import make_gain_model
from .policies import PolicySpec
from .traffic import Catalog, RequestSource


@dataclass
class ExperimentConfig:
    topology: Topology
    catalog: Catalog
    source: RequestSource
    policy: PolicySpec
    capacity: int
    seed: int
    warmup_requests: int = 0
    measure_requests: int = 0
    channel: ChannelModel | None = None
    initial_allocation: list | None = None  # per-station content lists
    snapshot_every: int = 0
    reference_occupancy: np.ndarray | None = None
    backend: str = "auto"

    def __post_init__(self):
        if self.warmup_requests < 0 or self.measure_requests < 0:
            raise ValueError("request counts must be >= 0")
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")


@dataclass
class Snapshot:
    requests_processed: int
    hit_rate: float
    mean_delay: float
    cosine_to_reference: float


@dataclass
class MetricsReport:
    requests: int
    hit_rate: float
    mean_delay: float
    occupancy: np.ndarray
    per_bs_hit_rate: np.ndarray
    cosine_to_reference: float = math.nan
    snapshots: list = field(default_factory=list)


def cosine_distance(u, v) -> float:
    """1 - cos angle between two nonnegative vectors (0 same direction)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine distance undefined for a zero vector")
    return float(1.0 - float(np.dot(u, v)) / (nu * nv))


def greedy_occupancy_vector(allocation) -> np.ndarray:
    """Copy count per content of a static allocation."""
    return allocation.occupancy_vector()


def run_experiment(config: ExperimentConfig) -> MetricsReport:
    """Warm the caches up, then measure; deterministic under the seed."""
    spec = config.policy
    gain_model = None
    if spec.kind == "qlru_delta" or spec.gain == "comp_delay":
        gain_model = make_gain_model(spec.gain, config.channel)
    engine = make_engine(
        config.backend,
        topology=config.topology,
        catalog=config.catalog,
        source=config.source,
        spec=spec,
        capacity=config.capacity,
        seed=config.seed,
        gain_model=gain_model,
        initial_allocation=config.initial_allocation,
    )
    if config.warmup_requests:
        engine.run(config.warmup_requests, False)
    engine.begin_measurement()

    snapshots = []
    remaining = config.measure_requests
    chunk_size = config.snapshot_every or config.measure_requests
    while remaining > 0:
        chunk = min(chunk_size, remaining)
        engine.run(chunk, True)
        remaining -= chunk
        if config.snapshot_every:
            snapshots.append(_snapshot(engine, config))

    return _report(engine, config, snapshots)


def _current_metrics(engine, config):
    reqs = engine.reqs
    hit_rate = engine.hits / reqs if reqs else 0.0
    if config.policy.gain == "comp_delay" and reqs:
        mean_delay = engine.delay_sum / reqs
    else:
        mean_delay = math.nan
    cos = math.nan
    if config.reference_occupancy is not None and reqs:
        occ = engine.occupancy_average()
        if occ.any():
            cos = cosine_distance(occ, config.reference_occupancy)
    return hit_rate, mean_delay, cos


def _snapshot(engine, config) -> Snapshot:
    hit_rate, mean_delay, cos = _current_metrics(engine, config)
    return Snapshot(requests_processed=engine.reqs, hit_rate=hit_rate,
                    mean_delay=mean_delay, cosine_to_reference=cos)


def _report(engine, config, snapshots) -> MetricsReport:
    hit_rate, mean_delay, cos = _current_metrics(engine, config)
    covered = np.asarray(engine.covered_cnt, dtype=np.float64)
    hits = np.asarray(engine.hit_cnt, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_bs = np.where(covered > 0, hits / covered, np.nan)
    return MetricsReport(
        requests=engine.reqs,
        hit_rate=hit_rate,
        mean_delay=mean_delay,
        occupancy=engine.occupancy_average(),
        per_bs_hit_rate=per_bs,
        cosine_to_reference=cos,
        snapshots=snapshots,
    )
