"""Geometry, coverage and wireless-channel primitives.

Everything here is immutable after construction and shared by the
traffic, gain, policy and analysis layers.  Cache placements for a
single content are represented as bitmasks over station ids ("bit b set
iff station b holds a copy"), with a thin :class:`Configuration` wrapper
for code that prefers an object.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources


# ---------------------------------------------------------------------------
# placement bitmask algebra


def with_copy(mask: int, b: int) -> int:
    """Placement with a copy added at station b (idempotent)."""
    return mask | (1 << b)


def without_copy(mask: int, b: int) -> int:
    """Placement with the copy at station b removed (idempotent)."""
    return mask & ~(1 << b)


def has_copy(mask: int, b: int) -> bool:
    return bool(mask & (1 << b))


def copy_count(mask: int) -> int:
    """Number of stations holding a copy (the placement's weight)."""
    return bin(mask).count("1")


def stations_in(mask: int) -> list[int]:
    """Station ids present in the mask, ascending."""
    out = []
    b = 0
    m = mask
    while m:
        if m & 1:
            out.append(b)
        m >>= 1
        b += 1
    return out


@dataclass(frozen=True)
class Configuration:
    """Which stations hold a given content, as a bitmask."""

    mask: int = 0

    def add(self, b: int) -> "Configuration":
        return Configuration(with_copy(self.mask, b))

    def drop(self, b: int) -> "Configuration":
        return Configuration(without_copy(self.mask, b))

    def holds(self, b: int) -> bool:
        return has_copy(self.mask, b)

    @property
    def weight(self) -> int:
        return copy_count(self.mask)

    def stations(self) -> list[int]:
        return stations_in(self.mask)


# ---------------------------------------------------------------------------
# topology


@dataclass(frozen=True)
class BaseStation:
    """A base station with an attached cache and a disc coverage area."""

    id: int
    x: float
    y: float
    range: float

    def __post_init__(self):
        if self.range <= 0:
            raise ValueError(f"station {self.id}: range must be > 0, got {self.range}")

    def covers(self, x: float, y: float) -> bool:
        dx = x - self.x
        dy = y - self.y
        return dx * dx + dy * dy <= self.range * self.range


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle user locations are drawn from."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("region must have positive width and height")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


def default_region(stations: list[BaseStation]) -> Region:
    """Bounding box of the stations expanded by the largest range."""
    pad = max(s.range for s in stations)
    xs = [s.x for s in stations]
    ys = [s.y for s in stations]
    return Region(min(xs) - pad, min(ys) - pad, max(xs) + pad, max(ys) + pad)


@dataclass(frozen=True)
class Topology:
    stations: tuple[BaseStation, ...]
    region: Region

    def __post_init__(self):
        ids = [s.id for s in self.stations]
        if ids != list(range(len(ids))):
            raise ValueError("station ids must be 0..B-1 in order")
        for s in self.stations:
            if not self.region.contains(s.x, s.y):
                raise ValueError(f"station {s.id} lies outside the region")

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    def coverage_mask(self, x: float, y: float) -> int:
        mask = 0
        for s in self.stations:
            if s.covers(x, y):
                mask |= 1 << s.id
        return mask

    def nearest_covering(self, x: float, y: float) -> int:
        """Id of the closest covering station, or -1 if uncovered."""
        best = -1
        best_d2 = math.inf
        for s in self.stations:
            dx = x - s.x
            dy = y - s.y
            d2 = dx * dx + dy * dy
            if d2 <= s.range * s.range and d2 < best_d2:
                best = s.id
                best_d2 = d2
        return best


def make_topology(stations: list[BaseStation], region: Region | None = None) -> Topology:
    if not stations:
        raise ValueError("need at least one station")
    return Topology(tuple(stations), region or default_region(stations))


def coverage_set(topology: Topology, point: tuple[float, float]) -> set[int]:
    """Station ids whose range reaches the point (may be empty)."""
    x, y = point
    return {s.id for s in topology.stations if s.covers(x, y)}


# ---------------------------------------------------------------------------
# topology files


def topology_from_dict(doc: dict) -> Topology:
    try:
        raw = doc["stations"]
    except KeyError:
        raise ValueError("topology JSON must contain a 'stations' array") from None
    stations = [
        BaseStation(id=int(s["id"]), x=float(s["x_m"]), y=float(s["y_m"]), range=float(s["range_m"]))
        for s in sorted(raw, key=lambda s: int(s["id"]))
    ]
    region = None
    if doc.get("region") is not None:
        r = doc["region"]
        region = Region(float(r["x0"]), float(r["y0"]), float(r["x1"]), float(r["y1"]))
    return make_topology(stations, region)


def load_topology(path: str) -> Topology:
    """Load a topology JSON file; the name "berlin" loads the bundled layout."""
    if path == "berlin":
        text = resources.files("cellcache").joinpath("data/berlin.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return topology_from_dict(json.loads(text))


def berlin_topology() -> Topology:
    """Bundled 10-station downtown layout (approximate digitization)."""
    return load_topology("berlin")


# ---------------------------------------------------------------------------
# wireless channel


@dataclass(frozen=True)
class ChannelModel:
    """Aggregate-capacity channel abstraction for joint transmission.

    `snr_linear` is the common per-link SNR on linear scale.  A
    nonconstant SNR can be plugged in through `snr_sampler`
    (callable(uniform: float) -> linear SNR); `snr_min` must then bound
    its support from below so probability normalizers stay finite.
    """

    bandwidth_hz: float = 5e6
    snr_linear: float = 10.0
    backhaul_delay_s: float = 0.1
    content_size_bits: float = 1e6
    snr_sampler: object = None
    snr_min: float | None = None

    def __post_init__(self):
        for name in ("bandwidth_hz", "snr_linear", "backhaul_delay_s", "content_size_bits"):
            if getattr(self, name) <= 0:
                raise ValueError(f"channel: {name} must be > 0")

    @property
    def lowest_snr(self) -> float:
        if self.snr_sampler is not None:
            if self.snr_min is None:
                raise ValueError("channel: snr_min required with a nonconstant SNR")
            return self.snr_min
        return self.snr_linear

    def single_link_delay(self, snr: float | None = None) -> float:
        """Seconds to push one content over one link (inf at zero SNR)."""
        cap = aggregate_capacity(self, self.snr_linear if snr is None else snr)
        if cap == 0.0:
            return math.inf
        return self.content_size_bits / cap

    def joint_delay(self, snr_sum: float) -> float:
        cap = aggregate_capacity(self, snr_sum)
        if cap == 0.0:
            return math.inf
        return self.content_size_bits / cap


def aggregate_capacity(channel: ChannelModel, snr_sum: float) -> float:
    """Joint-transmission capacity in bits/s for a summed SNR.

    A zero SNR sum yields capacity 0; callers converting to delay must
    treat that as "transmission impossible".
    """
    if snr_sum < 0:
        raise ValueError("snr_sum must be >= 0")
    return channel.bandwidth_hz * math.log2(1.0 + snr_sum)


def snr_db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)
