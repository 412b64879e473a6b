"""Array marshaling for the compiled request loop.

Builds the probability/delay tables by calling the bound gain model (so
the kernel multiplies exactly the floats the pure engine would), lays
out per-station caches as intrusive lists in flat arrays, and exposes
the same counters as the pure engine.
"""

from __future__ import annotations

import numpy as np

from ..core import Topology
from ..gain import make_gain_model
from ..policies import POLICY_KINDS, PolicySpec
from ..rng import STREAM_BS, stream_seed
from ..traffic import Catalog, RequestSource, ZipfSampler
from . import _speedups

_POLICY_CODE = {kind: i for i, kind in enumerate(POLICY_KINDS)}


class CompiledEngine:
    def __init__(self, topology: Topology, catalog: Catalog, source: RequestSource,
                 spec: PolicySpec, capacity: int, seed: int, gain_model=None,
                 initial_allocation=None):
        b = topology.n_stations
        f = catalog.n_contents
        if b > 60:
            raise ValueError("compiled engine supports at most 60 stations")
        self.topology = topology
        self.catalog = catalog
        self.source = source
        self.spec = spec
        self.capacity = capacity
        self.gain_model = gain_model
        if self.gain_model is None and (spec.kind == "qlru_delta" or spec.gain == "comp_delay"):
            self.gain_model = make_gain_model(spec.gain)
        self.comp_mode = spec.gain == "comp_delay"
        model = self.gain_model
        if model is not None and getattr(getattr(model, "channel", None), "snr_sampler", None):
            raise RuntimeError("compiled engine supports constant SNR only; use the pure engine")

        move_p = np.zeros(b + 1)
        insert_f = np.zeros(b + 1)
        delay_hit = np.zeros(b + 1)
        miss_delay = 0.0
        if model is not None:
            # probability of any decision depends only on the hit-set size
            # under constant SNR; tabulate through the model itself
            for k in range(1, b + 1):
                j = (1 << k) - 1
                move_p[k] = model.move_prob(0, j, j)
            for k in range(0, b):
                cover = (1 << (k + 1)) - 1
                x = cover & ~(1 << k)
                insert_f[k] = model.insert_factor(k, x, cover)
        if self.comp_mode:
            for k in range(1, b + 1):
                delay_hit[k] = model.delay_with_copies(k)
            miss_delay = model.delay_with_copies(0)
            delay_hit[0] = miss_delay

        sampler = ZipfSampler(f, catalog.alpha)
        finite = source.mode == "finite"
        if finite:
            ux = np.ascontiguousarray(source.user_xy[:, 0])
            uy = np.ascontiguousarray(source.user_xy[:, 1])
            ucdf = np.ascontiguousarray(source.user_cdf)
            umask = np.ascontiguousarray(source.user_mask)
            unearest = np.ascontiguousarray(source.user_nearest.astype(np.int32))
        else:
            ux = uy = ucdf = np.zeros(1)
            umask = np.zeros(1, dtype=np.int64)
            unearest = np.zeros(1, dtype=np.int32)

        has_virtual = spec.virtual_cache_size is not None
        vcap = spec.virtual_cache_size or 0
        vshape = (b, vcap) if has_virtual else (1, 1)
        vpos_shape = (b, f) if has_virtual else (1, 1)

        region = topology.region
        self._arr = {
            "n_contents": f,
            "n_stations": b,
            "capacity": capacity,
            "policy": _POLICY_CODE[spec.kind],
            "comp_mode": self.comp_mode,
            "finite_mode": finite,
            "has_virtual": has_virtual,
            "alpha": sampler.alpha,
            "zipf_hx1": sampler._h_x1,
            "zipf_hn": sampler._h_n,
            "zipf_s": sampler._s,
            "sx": np.array([s.x for s in topology.stations]),
            "sy": np.array([s.y for s in topology.stations]),
            "r2": np.array([s.range * s.range for s in topology.stations]),
            "rx0": region.x0,
            "ry0": region.y0,
            "rw": region.x1 - region.x0,
            "rh": region.y1 - region.y0,
            "ux": ux,
            "uy": uy,
            "ucdf": ucdf,
            "umask": umask,
            "unearest": unearest,
            "q_arr": np.array([spec.q_at(i) for i in range(b)]),
            "move_p": move_p,
            "insert_f": insert_f,
            "delay_hit": delay_hit,
            "miss_delay": miss_delay,
            "cont": np.full((b, capacity), -1, dtype=np.int64),
            "nxt": np.full((b, capacity), -1, dtype=np.int32),
            "prv": np.full((b, capacity), -1, dtype=np.int32),
            "pos": np.full((b, f), -1, dtype=np.int32),
            "head": np.full(b, -1, dtype=np.int32),
            "tail": np.full(b, -1, dtype=np.int32),
            "count": np.zeros(b, dtype=np.int32),
            "vcap": vcap,
            "vcont": np.full(vshape, -1, dtype=np.int64),
            "vnxt": np.full(vshape, -1, dtype=np.int32),
            "vprv": np.full(vshape, -1, dtype=np.int32),
            "vpos": np.full(vpos_shape, -1, dtype=np.int32),
            "vhead": np.full(b if has_virtual else 1, -1, dtype=np.int32),
            "vtail": np.full(b if has_virtual else 1, -1, dtype=np.int32),
            "vcount": np.zeros(b if has_virtual else 1, dtype=np.int32),
            "rng": np.array([stream_seed(seed, k) for k in range(STREAM_BS + b)], dtype=np.uint64),
            "covered_cnt": np.zeros(b, dtype=np.int64),
            "hit_cnt": np.zeros(b, dtype=np.int64),
            "ncopies": np.zeros(f, dtype=np.int64),
            "last_flush": np.zeros(f, dtype=np.int64),
            "area": np.zeros(f, dtype=np.float64),
        }
        if initial_allocation is not None:
            self._load_allocation(initial_allocation)
        self._k = _speedups.Kernel(self._arr)

    def _load_allocation(self, per_station_contents):
        a = self._arr
        for b, contents in enumerate(per_station_contents):
            if len(contents) > self.capacity:
                raise ValueError(f"initial allocation exceeds capacity at station {b}")
            for slot, f in enumerate(contents):
                a["cont"][b, slot] = f
                a["pos"][b, f] = slot
                a["prv"][b, slot] = slot - 1
                a["nxt"][b, slot] = slot + 1 if slot + 1 < len(contents) else -1
                a["ncopies"][f] += 1
            if contents:
                a["head"][b] = 0
                a["tail"][b] = len(contents) - 1
                a["count"][b] = len(contents)

    # -- pure-engine-compatible surface ------------------------------------

    def run(self, n: int, measure: bool):
        self._k.run(n, measure)

    def begin_measurement(self):
        self._k.reset_measurement()

    @property
    def hits(self):
        return self._k.hits

    @property
    def reqs(self):
        return self._k.reqs

    @property
    def delay_sum(self):
        return self._k.delay_sum

    @property
    def measure_r(self):
        return self._k.measure_r

    @property
    def covered_cnt(self):
        return self._arr["covered_cnt"]

    @property
    def hit_cnt(self):
        return self._arr["hit_cnt"]

    @property
    def ncopies(self):
        return self._arr["ncopies"]

    def occupancy_average(self) -> np.ndarray:
        r = self._k.measure_r
        if r == 0:
            return np.zeros(self.catalog.n_contents)
        pending = self._arr["ncopies"] * (r - self._arr["last_flush"])
        return (self._arr["area"] + pending) / r

    def cache_contents(self) -> list[list[int]]:
        out = []
        a = self._arr
        for b in range(self.topology.n_stations):
            row = []
            slot = a["head"][b]
            while slot >= 0:
                row.append(int(a["cont"][b, slot]))
                slot = a["nxt"][b, slot]
            out.append(row)
        return out
