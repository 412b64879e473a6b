"""Offline placement baselines: lazy greedy and an exact tiny-instance oracle.

Placements assign each content a station bitmask subject to every cache
holding exactly `capacity` contents.  Greedy repeatedly commits the
(content, station) copy with the largest marginal gain rate; with a
submodular gain the stale-priority heap is exact and the result carries
the classic half-optimal guarantee.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .gain import content_gain_table, total_gain, unit_gain_table


@dataclass
class Allocation:
    """Per-content placement masks for a whole catalog."""

    masks: np.ndarray  # int64[n_contents]
    n_stations: int

    def contents_at(self, b: int) -> list[int]:
        bit = 1 << b
        return [int(f) for f in np.flatnonzero(self.masks & bit)]

    def per_station_contents(self) -> list[list[int]]:
        return [self.contents_at(b) for b in range(self.n_stations)]

    def occupancy_vector(self) -> np.ndarray:
        """Network copy count per content (sum of mask bits)."""
        return np.bitwise_count(self.masks).astype(np.float64)


class _MarginalScorer:
    """O(1) marginal gain lookups, exploiting that a gain table over all
    2^B masks is affordable for the station counts considered here."""

    def __init__(self, model, workload):
        self.workload = workload
        if workload.rate_matrix is None:
            self._unit = unit_gain_table(model, workload)
            self._tables = None
        else:
            self._unit = None
            self._tables = [content_gain_table(model, workload, f)
                            for f in range(workload.n_contents)]

    def gain(self, f: int, mask: int) -> float:
        if self._unit is not None:
            return self.workload.rates[f] * self._unit[mask]
        return self._tables[f][mask]

    def marginal(self, f: int, b: int, mask: int) -> float:
        return self.gain(f, mask | (1 << b)) - self.gain(f, mask)


def greedy_allocation(model, workload, capacity: int, lazy: bool = True) -> Allocation:
    """Fill every cache greedily by marginal gain rate.

    Ties break toward the smaller content id, then the smaller station
    id.  Zero-gain placements still happen (caches are filled exactly),
    which keeps occupancy comparisons against online policies fair.
    `lazy=False` rescores every candidate each step; use it when the
    configured gain is not submodular.
    """
    b_n = workload.n_stations
    f_n = workload.n_contents
    if capacity > f_n:
        raise ValueError(f"capacity {capacity} exceeds catalog size {f_n}")
    scorer = _MarginalScorer(model, workload)
    masks = np.zeros(f_n, dtype=np.int64)
    residual = [capacity] * b_n
    target = capacity * b_n
    placed = 0

    if not lazy:
        while placed < target:
            best = None
            for f in range(f_n):
                for b in range(b_n):
                    if residual[b] == 0 or (masks[f] >> b) & 1:
                        continue
                    key = (-scorer.marginal(f, b, int(masks[f])), f, b)
                    if best is None or key < best:
                        best = key
            _, f, b = best
            masks[f] |= 1 << b
            residual[b] -= 1
            placed += 1
        return Allocation(masks, b_n)

    heap = [(-scorer.marginal(f, b, 0), f, b) for f in range(f_n) for b in range(b_n)]
    heapq.heapify(heap)
    while placed < target:
        negg, f, b = heapq.heappop(heap)
        if residual[b] == 0 or (masks[f] >> b) & 1:
            continue
        cur = scorer.marginal(f, b, int(masks[f]))
        if cur != -negg:  # stale entry, rescore and reconsider
            heapq.heappush(heap, (-cur, f, b))
            continue
        masks[f] |= 1 << b
        residual[b] -= 1
        placed += 1
    return Allocation(masks, b_n)


def allocation_gain(model, workload, allocation: Allocation) -> float:
    """Total expected gain rate of a static placement."""
    scorer = _MarginalScorer(model, workload)
    return float(sum(scorer.gain(f, int(allocation.masks[f]))
                     for f in range(workload.n_contents)))


def brute_force_allocation(model, workload, capacity: int,
                           budget: int = 10_000_000) -> tuple[Allocation, float]:
    """Exact optimum by enumerating per-station content subsets.

    Refuses instances whose (F choose C)^B enumeration exceeds the
    budget.  Ties resolve to the first allocation in enumeration order,
    which is lexicographic in the per-station subsets.
    """
    b_n = workload.n_stations
    f_n = workload.n_contents
    if capacity > f_n:
        raise ValueError(f"capacity {capacity} exceeds catalog size {f_n}")
    per_station = math.comb(f_n, capacity)
    if per_station ** b_n > budget:
        raise ValueError(
            f"enumeration of {per_station}^{b_n} allocations exceeds budget {budget}")

    scorer = _MarginalScorer(model, workload)
    gain_of = [np.array([scorer.gain(f, x) for x in range(1 << b_n)])
               for f in range(f_n)]
    subsets = list(combinations(range(f_n), capacity))
    best_gain = -math.inf
    best_masks = None
    masks = np.zeros(f_n, dtype=np.int64)
    for combo in product(subsets, repeat=b_n):
        masks[:] = 0
        for b, subset in enumerate(combo):
            bit = 1 << b
            for f in subset:
                masks[f] |= bit
        g = sum(gain_of[f][masks[f]] for f in range(f_n))
        if g > best_gain:
            best_gain = g
            best_masks = masks.copy()
    return Allocation(best_masks, b_n), float(best_gain)


# ---------------------------------------------------------------------------
# closed-form metrics of a static placement (no simulation noise)


def expected_hit_rate(workload, allocation: Allocation) -> float:
    """Request-averaged hit probability of a frozen placement."""
    from .gain import HitRateGain

    scorer = _MarginalScorer(HitRateGain(), workload)
    rate_total = sum(workload.content_rate(f) for f in range(workload.n_contents))
    return float(sum(scorer.gain(f, int(allocation.masks[f]))
                     for f in range(workload.n_contents)) / rate_total)


def expected_mean_delay(delay_model, workload, allocation: Allocation) -> float:
    """Request-averaged delay of a frozen placement under a delay gain."""
    scorer = _MarginalScorer(delay_model, workload)
    rate_total = sum(workload.content_rate(f) for f in range(workload.n_contents))
    saving = sum(scorer.gain(f, int(allocation.masks[f]))
                 for f in range(workload.n_contents)) / rate_total
    return float(delay_model.delay_with_copies(0) - saving)
