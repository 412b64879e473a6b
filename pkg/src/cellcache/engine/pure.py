"""Reference engine: drives the policy pipeline one request at a time.

Slow but transparent; the compiled kernel is validated against it.
"""

from __future__ import annotations

import numpy as np

from ..core import Topology, stations_in
from ..gain import make_gain_model
from ..policies import CacheList, PolicySpec, process_request
from ..rng import STREAM_CONTENT, STREAM_LOCATION, make_streams
from ..traffic import Catalog, Request, RequestSource, ZipfSampler, draw_location


class PureEngine:
    def __init__(self, topology: Topology, catalog: Catalog, source: RequestSource,
                 spec: PolicySpec, capacity: int, seed: int, gain_model=None,
                 initial_allocation=None):
        self.topology = topology
        self.catalog = catalog
        self.source = source
        self.spec = spec
        self.capacity = capacity
        self.gain_model = gain_model
        if self.gain_model is None and (spec.kind == "qlru_delta" or spec.gain == "comp_delay"):
            self.gain_model = make_gain_model(spec.gain)
        self.comp_mode = spec.gain == "comp_delay"

        b = topology.n_stations
        f = catalog.n_contents
        self.streams = make_streams(seed, b)
        self.sampler = ZipfSampler(f, catalog.alpha)
        self.caches = [CacheList(capacity) for _ in range(b)]
        self.virtual = None
        if spec.virtual_cache_size:
            self.virtual = [CacheList(spec.virtual_cache_size) for _ in range(b)]

        self.index = 0
        self.hits = 0
        self.reqs = 0
        self.delay_sum = 0.0
        self.covered_cnt = np.zeros(b, dtype=np.int64)
        self.hit_cnt = np.zeros(b, dtype=np.int64)
        self.ncopies = np.zeros(f, dtype=np.int64)
        self.area = np.zeros(f, dtype=np.float64)
        self.last_flush = np.zeros(f, dtype=np.int64)
        self.measure_r = 0

        if initial_allocation is not None:
            self._load_allocation(initial_allocation)

    def _load_allocation(self, per_station_contents):
        """Pre-fill caches; lists are front-to-rear per station."""
        for b, contents in enumerate(per_station_contents):
            if len(contents) > self.capacity:
                raise ValueError(f"initial allocation exceeds capacity at station {b}")
            for f in reversed(contents):
                self.caches[b].insert_front(f)
                self.ncopies[f] += 1

    def begin_measurement(self):
        self.hits = 0
        self.reqs = 0
        self.delay_sum = 0.0
        self.covered_cnt[:] = 0
        self.hit_cnt[:] = 0
        self.area[:] = 0.0
        self.last_flush[:] = 0
        self.measure_r = 0

    def _bump(self, f: int, dv: int, r: int):
        # flush per-request occupancy samples up to just before request r
        self.area[f] += self.ncopies[f] * (r - 1 - self.last_flush[f])
        self.last_flush[f] = r - 1
        self.ncopies[f] += dv

    def run(self, n: int, measure: bool):
        streams = self.streams
        sampler = self.sampler
        caches = self.caches
        for _ in range(n):
            self.index += 1
            content = sampler.sample(streams[STREAM_CONTENT])
            x, y, mask, user = draw_location(self.source, streams[STREAM_LOCATION])
            req = Request(self.index, (x, y), content, mask, user)
            r = self.measure_r + 1 if measure else 0
            out = process_request(caches, self.spec, self.topology, req, streams,
                                  self.gain_model, self.virtual)
            if measure:
                for b in out.inserted:
                    self._bump(content, +1, r)
                for _, g in out.evicted:
                    self._bump(g, -1, r)
                self.measure_r = r
                self.reqs += 1
                if out.served:
                    self.hits += 1
                if self.comp_mode:
                    self.delay_sum += out.delay
                for b in stations_in(mask):
                    self.covered_cnt[b] += 1
                for b in stations_in(out.j_mask):
                    self.hit_cnt[b] += 1
            else:
                for b in out.inserted:
                    self.ncopies[content] += 1
                for _, g in out.evicted:
                    self.ncopies[g] -= 1

    def occupancy_average(self) -> np.ndarray:
        """Per-content network copy count averaged over measured requests."""
        if self.measure_r == 0:
            return np.zeros(self.catalog.n_contents)
        pending = self.ncopies * (self.measure_r - self.last_flush)
        return (self.area + pending) / self.measure_r

    def cache_contents(self) -> list[list[int]]:
        return [c.contents() for c in self.caches]
