"""Per-station cache lists and the online policy family.

Policies: the gain-aware admission/refresh policy ``qlru_delta``, plus
the baselines ``qlru``, ``lru``, ``fifo``, ``lru_one`` and ``lru_all``.
All share one request pipeline (:func:`process_request`), which is the
reference semantics the compiled engine mirrors.

Randomness discipline (kept bit-compatible with the compiled engine):

* content and location use their own streams;
* the serving-cache choice on a hit and the retrieval choice on a miss
  use two further shared streams;
* every refresh/admission coin of station b uses station b's stream;
* degenerate coins (p <= 0 or p >= 1) and singleton choices consume no
  draw, so e.g. qLRU at q=1 replays LRU's stream positions exactly.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

from .core import Topology, stations_in
from .rng import STREAM_BS, STREAM_CHANNEL, STREAM_RETRIEVAL, STREAM_SERVING
from .traffic import Request

POLICY_KINDS = ("qlru_delta", "qlru", "lru", "fifo", "lru_one", "lru_all")


class CacheList:
    """Ordered content list: insertions at the front, evictions at the rear."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: OrderedDict[int, None] = OrderedDict()

    def __contains__(self, f: int) -> bool:
        return f in self._items

    def __len__(self) -> int:
        return len(self._items)

    def contents(self) -> list[int]:
        """Front-to-rear content ids."""
        return list(self._items)

    def position(self, f: int):
        """0-based position from the front, or None."""
        if f not in self._items:
            return None
        for i, g in enumerate(self._items):
            if g == f:
                return i
        return None

    def promote(self, f: int) -> None:
        self._items.move_to_end(f, last=False)

    def insert_front(self, f: int):
        """Insert a new content at the front; returns the evicted id or None."""
        if f in self._items:
            raise ValueError(f"content {f} already cached")
        evicted = None
        if len(self._items) >= self.capacity:
            evicted, _ = self._items.popitem(last=True)
        self._items[f] = None
        self._items.move_to_end(f, last=False)
        return evicted


def lookup(cache: CacheList, f: int):
    """Position of f from the front, or None when absent."""
    return cache.position(f)


@dataclass(frozen=True)
class PolicySpec:
    """Which policy runs, with its admission/refresh parameters.

    `q` is the global admission scale; station b uses q ** gamma[b]
    (gamma defaults to all ones).  `gain` names the gain model driving
    qlru_delta's decisions and fixes the serving mode for metrics.
    `virtual_cache_size` switches on an id-only admission filter.
    """

    kind: str
    q: float = 1.0
    gamma: tuple = None
    gain: str = "hit_rate"
    virtual_cache_size: int = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if not (0.0 < self.q <= 1.0):
            raise ValueError("q must lie in (0, 1]")
        if self.gamma is not None:
            object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
            if any(g <= 0 for g in self.gamma):
                raise ValueError("gamma entries must be > 0")
        if self.virtual_cache_size is not None and self.virtual_cache_size < 1:
            raise ValueError("virtual cache size must be >= 1")

    def q_at(self, b: int) -> float:
        if self.gamma is None:
            return self.q
        return self.q ** self.gamma[b]


@dataclass
class HitOutcome:
    """What one request did to the network."""

    j_mask: int
    served: bool
    delay: float
    gain_sample: float
    promoted: list = field(default_factory=list)
    inserted: list = field(default_factory=list)
    evicted: list = field(default_factory=list)  # (station, content) pairs

    @property
    def hit_set(self) -> set:
        return set(stations_in(self.j_mask))


def process_request(caches, spec: PolicySpec, topology: Topology, request: Request,
                    streams, gain_model=None, virtual_caches=None) -> HitOutcome:
    """Run one request through the network and update cache states.

    `caches` is one CacheList per station; `streams` the list from
    :func:`cellcache.rng.make_streams`.  The request must fall inside
    some station's range (`request.cover_mask` nonzero).
    """
    f = request.content
    cover = request.cover_mask or topology.coverage_mask(*request.location)
    if cover == 0:
        raise ValueError("request location is not covered by any station")
    i_list = stations_in(cover)
    j_mask = 0
    for b in i_list:
        if f in caches[b]:
            j_mask |= 1 << b
    j_list = stations_in(j_mask)
    hit = j_mask != 0

    comp_mode = spec.gain == "comp_delay"
    if comp_mode and gain_model is None:
        raise ValueError("comp_delay runs need a bound gain model")
    if spec.kind == "qlru_delta" and gain_model is None:
        raise ValueError("qlru_delta needs a bound gain model")

    snrs = _sample_snrs(gain_model, i_list, streams) if comp_mode else None

    # delay accounting; the retrieval draw happens on every miss in
    # comp mode, before any cache decision
    if comp_mode:
        chan = gain_model.channel
        if hit:
            if snrs is None:
                delay = gain_model.delay_with_copies(len(j_list))
            else:
                delay = chan.joint_delay(sum(snrs[b] for b in j_list))
        else:
            bstar = i_list[streams[STREAM_RETRIEVAL].choice_index(len(i_list))]
            link = chan.snr_linear if snrs is None else snrs[bstar]
            delay = chan.backhaul_delay_s + chan.single_link_delay(link)
        gain_sample = gain_model.d_max - delay
    else:
        delay = math.nan
        gain_sample = 1.0 if hit else 0.0

    outcome = HitOutcome(j_mask=j_mask, served=hit, delay=delay, gain_sample=gain_sample)

    # hit-side updates
    if hit:
        if spec.kind == "qlru_delta":
            for b in j_list:
                p = gain_model.move_prob(b, j_mask, cover, snrs)
                if streams[STREAM_BS + b].bernoulli(p):
                    caches[b].promote(f)
                    outcome.promoted.append(b)
        elif spec.kind in ("qlru", "lru"):
            serving = j_list[streams[STREAM_SERVING].choice_index(len(j_list))]
            caches[serving].promote(f)
            outcome.promoted.append(serving)
        elif spec.kind == "lru_one":
            ref = topology.nearest_covering(*request.location)
            if f in caches[ref]:
                caches[ref].promote(f)
                outcome.promoted.append(ref)
        elif spec.kind == "lru_all":
            for b in j_list:
                caches[b].promote(f)
                outcome.promoted.append(b)
        # fifo: hits leave positions unchanged

    # insertion side: qlru_delta lets caches without a copy admit one even
    # on partial hits (the gain model zeroes it out where meaningless);
    # every other policy admits only on a full miss
    if spec.kind == "qlru_delta":
        targets = [b for b in i_list if not (j_mask >> b) & 1]
    else:
        targets = [] if hit else i_list
    if targets and spec.kind == "lru_one":
        ref = topology.nearest_covering(*request.location)

    for b in targets:
        if spec.kind == "qlru_delta":
            p = spec.q_at(b) * gain_model.insert_factor(b, j_mask, cover, snrs)
        elif spec.kind == "qlru":
            p = spec.q_at(b)
        elif spec.kind == "lru_one":
            p = 1.0 if b == ref else 0.0
        else:  # lru, fifo, lru_all
            p = 1.0

        if virtual_caches is not None:
            vc = virtual_caches[b]
            admit = f in vc
            if admit:
                vc.promote(f)
            else:
                vc.insert_front(f)
            # a gated-out station never touches its coin stream
            decide = admit and streams[STREAM_BS + b].bernoulli(p)
        else:
            decide = streams[STREAM_BS + b].bernoulli(p)

        if decide:
            evicted = caches[b].insert_front(f)
            outcome.inserted.append(b)
            if evicted is not None:
                outcome.evicted.append((b, evicted))

    return outcome


def _sample_snrs(gain_model, i_list, streams):
    """Per-request link SNRs for the covering stations (None = constant)."""
    chan = gain_model.channel
    if chan.snr_sampler is None:
        return None
    return {b: chan.snr_sampler(streams[STREAM_CHANNEL].next_double()) for b in i_list}
