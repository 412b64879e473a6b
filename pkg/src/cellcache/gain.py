"""Pluggable gain models and the update/insertion probabilities they induce.

A gain model scores how much a request benefits from the current
placement of its content.  Two concrete models ship: a hit indicator
(`HitRateGain`) and delay savings under joint transmission
(`CompDelayGain`).  Both reduce a user to its coverage mask, so all
evaluations take (placement mask, coverage mask) pairs.

Probabilities follow the two-rule policy core: on a hit, a cache
holding a copy refreshes it with probability ``beta * (gain lost if its
copy vanished)``; on a miss (or partial hit), a cache without a copy
admits one with probability ``q_b * delta * (gain gained by one more
copy)``.  ``beta`` and ``delta`` are fixed normalizers keeping those
expressions in [0, 1] over every reachable state.
"""

from __future__ import annotations

import math

import numpy as np

from .core import ChannelModel, copy_count, has_copy, with_copy, without_copy


def _mask(x) -> int:
    return x.mask if hasattr(x, "mask") else int(x)


class HitRateGain:
    """Gain 1 when some covering cache holds the content, else 0."""

    name = "hit_rate"
    beta = 1.0
    delta = 1.0

    def expected_gain(self, x_mask: int, cover_mask: int) -> float:
        return 1.0 if (x_mask & cover_mask) else 0.0

    def class_gain(self, x_mask: int, cover_masks: np.ndarray) -> np.ndarray:
        return ((cover_masks & x_mask) != 0).astype(np.float64)

    def move_prob(self, b: int, x_mask: int, cover_mask: int, snrs=None) -> float:
        # refresh iff this cache holds the only reachable copy
        j = x_mask & cover_mask
        return 1.0 if j == (1 << b) else 0.0

    def insert_factor(self, b: int, x_mask: int, cover_mask: int, snrs=None) -> float:
        return 1.0 if (x_mask & cover_mask) == 0 else 0.0


class CompDelayGain:
    """Delay savings with caches covering a user transmitting jointly.

    With k copies reachable, the request is served at the aggregate
    capacity of k links; without any, it pays the backhaul delay plus a
    single-link transmission from a uniformly drawn covering station.
    Gains are measured as savings relative to the no-copy state, so the
    empty placement has gain exactly 0. `d_max` is kept only for
    per-request gain bookkeeping; no probability depends on it.
    """

    name = "comp_delay"

    def __init__(self, channel: ChannelModel, d_max: float | None = None):
        self.channel = channel
        low = channel.lowest_snr
        if low <= 0:
            raise ValueError("delay gain needs a strictly positive SNR lower bound")
        worst_link = channel.single_link_delay(low)
        if not math.isfinite(worst_link):
            raise ValueError("delay gain: zero capacity reachable, normalizers unbounded")
        # A single refresh/insert can never be worth more than the larger of
        # the backhaul delay and the worst single-link transmission delay.
        bound = max(channel.backhaul_delay_s, worst_link)
        self.beta = 1.0 / bound
        self.delta = 1.0 / bound
        self._mean_miss_delay = channel.backhaul_delay_s + channel.single_link_delay()
        self.d_max = self._mean_miss_delay if d_max is None else d_max
        self._delay_k: dict[int, float] = {}

    def delay_with_copies(self, k: int) -> float:
        """Expected request delay when k covering caches hold the content."""
        if k == 0:
            return self._mean_miss_delay
        d = self._delay_k.get(k)
        if d is None:
            d = self.channel.joint_delay(k * self.channel.snr_linear)
            self._delay_k[k] = d
        return d

    def expected_gain(self, x_mask: int, cover_mask: int) -> float:
        k = copy_count(x_mask & cover_mask)
        if k == 0:
            return 0.0
        return self._mean_miss_delay - self.delay_with_copies(k)

    def class_gain(self, x_mask: int, cover_masks: np.ndarray) -> np.ndarray:
        counts = np.bitwise_count(np.bitwise_and(cover_masks, x_mask))
        table = np.array(
            [0.0] + [self._mean_miss_delay - self.delay_with_copies(k)
                     for k in range(1, int(counts.max(initial=0)) + 1)]
        )
        return table[counts]

    def _joint_delay_of(self, j_mask: int, snrs) -> float:
        if snrs is None:
            return self.delay_with_copies(copy_count(j_mask))
        total = 0.0
        m = j_mask
        b = 0
        while m:
            if m & 1:
                total += snrs[b]
            m >>= 1
            b += 1
        return self.channel.joint_delay(total)

    def move_prob(self, b: int, x_mask: int, cover_mask: int, snrs=None) -> float:
        j = x_mask & cover_mask
        if j == (1 << b):
            # sole copy: the miss-side retrieval term cancels in expectation
            return self.beta * self.channel.backhaul_delay_s
        return self.beta * (self._joint_delay_of(without_copy(j, b), snrs)
                            - self._joint_delay_of(j, snrs))

    def insert_factor(self, b: int, x_mask: int, cover_mask: int, snrs=None) -> float:
        j = x_mask & cover_mask
        if j == 0:
            return self.delta * self.channel.backhaul_delay_s
        return self.delta * (self._joint_delay_of(j, snrs)
                             - self._joint_delay_of(with_copy(j, b), snrs))


GAIN_MODELS = {"hit_rate": HitRateGain, "comp_delay": CompDelayGain}


def make_gain_model(name: str, channel: ChannelModel | None = None):
    if name == "hit_rate":
        return HitRateGain()
    if name == "comp_delay":
        return CompDelayGain(channel or ChannelModel())
    raise ValueError(f"unknown gain model {name!r}")


# ---------------------------------------------------------------------------
# operations on gains


def marginal_gain(model, b: int, x, cover_mask: int) -> float:
    """Expected per-request gain lost if cache b dropped its copy."""
    x_mask = _mask(x)
    if not has_copy(x_mask, b):
        raise ValueError(f"station {b} holds no copy in {x_mask:#x}")
    return (model.expected_gain(x_mask, cover_mask)
            - model.expected_gain(without_copy(x_mask, b), cover_mask))


def total_gain(model, x, workload, f: int) -> float:
    """Expected gain per time unit of placement x for content f."""
    x_mask = _mask(x)
    return float(np.dot(workload.class_rates(f), model.class_gain(x_mask, workload.masks)))


def marginal_total_gain(model, b: int, x, workload, f: int) -> float:
    """Gain-rate drop if cache b removed its copy of f (network-wide)."""
    x_mask = _mask(x)
    if not has_copy(x_mask, b):
        raise ValueError(f"station {b} holds no copy in {x_mask:#x}")
    return total_gain(model, x_mask, workload, f) - total_gain(model, without_copy(x_mask, b), workload, f)


def move_to_front_prob(model, b: int, x, cover_mask: int, snrs=None) -> float:
    x_mask = _mask(x)
    if not has_copy(x_mask & cover_mask, b):
        raise ValueError(f"station {b} is not a covering holder in {x_mask:#x}")
    return model.move_prob(b, x_mask, cover_mask, snrs)


def insert_prob(model, b: int, x, cover_mask: int, q_b: float, snrs=None) -> float:
    x_mask = _mask(x)
    if has_copy(x_mask, b):
        raise ValueError(f"station {b} already holds a copy in {x_mask:#x}")
    if not has_copy(cover_mask, b):
        raise ValueError(f"station {b} does not cover the user")
    return q_b * model.insert_factor(b, x_mask, cover_mask, snrs)


def normalizers(model, topology=None) -> tuple[float, float]:
    """The (beta, delta) probability normalizers of a gain model."""
    return model.beta, model.delta


def unit_gain_table(model, workload) -> np.ndarray:
    """Expected gain per unit content rate for every placement mask.

    Only valid for separable demand (rate = content rate x class
    weight); placement exploits it to score marginals in O(1).
    """
    if workload.rate_matrix is not None:
        raise ValueError("unit gain table needs separable demand")
    n = 1 << workload.n_stations
    table = np.empty(n)
    for x in range(n):
        table[x] = float(np.dot(workload.weights, model.class_gain(x, workload.masks)))
    return table


def content_gain_table(model, workload, f: int) -> np.ndarray:
    """G_f over every placement mask (works for any demand shape)."""
    n = 1 << workload.n_stations
    rates = workload.class_rates(f)
    table = np.empty(n)
    for x in range(n):
        table[x] = float(np.dot(rates, model.class_gain(x, workload.masks)))
    return table
