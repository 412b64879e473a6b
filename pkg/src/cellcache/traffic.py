"""Content catalog, Zipf popularity and stationary request generation.

The simulator is request-indexed: inter-arrival times never matter to
list-based caches, so a "request process" here is just a deterministic
stream of (content, location) pairs under a seed.  Absolute rates are
carried separately (see :class:`Workload`) for the solvers that need
them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Topology
from .rng import STREAM_CONTENT, STREAM_LOCATION, SplitMix64


def zipf_popularity(n_contents: int, alpha: float) -> np.ndarray:
    """Probability vector p_k proportional to (k+1)^-alpha over 0-based ids."""
    if n_contents < 1:
        raise ValueError("need at least one content")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    ranks = np.arange(1, n_contents + 1, dtype=np.float64)
    w = ranks ** (-alpha)
    return w / w.sum()


@dataclass(frozen=True)
class Catalog:
    n_contents: int
    alpha: float
    total_rate: float = 1.0
    popularity: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.total_rate <= 0:
            raise ValueError("total_rate must be > 0")
        object.__setattr__(self, "popularity", zipf_popularity(self.n_contents, self.alpha))

    @property
    def rates(self) -> np.ndarray:
        return self.total_rate * self.popularity


def noisy_popularity(popularity: np.ndarray, sigma2: float, seed: int) -> np.ndarray:
    """True popularities scaled by i.i.d. log-normal noise with mean 1.

    sigma2 is the variance of the log; the multiplier variance is
    exp(sigma2) - 1.  sigma2 = 0 returns the input unchanged.
    """
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    if sigma2 == 0:
        return np.array(popularity, dtype=np.float64, copy=True)
    gen = np.random.default_rng(seed)
    mult = gen.lognormal(mean=-sigma2 / 2.0, sigma=math.sqrt(sigma2), size=len(popularity))
    return popularity * mult


# ---------------------------------------------------------------------------
# Zipf sampling
#
# Rejection-inversion for a bounded discrete power law (Hormann &
# Derflinger).  O(1) per draw regardless of catalog size, which is what
# makes million-content streams affordable.  The compiled engine carries
# the same expressions verbatim; changing anything here breaks
# pure/compiled stream parity.


def _helper1(b: float) -> float:
    # log1p(b)/b with a series fallback near 0
    if abs(b) > 1e-8:
        return math.log1p(b) / b
    return 1.0 - b / 2.0 + b * b / 3.0 - b * b * b / 4.0


def _helper2(b: float) -> float:
    # expm1(b)/b with a series fallback near 0
    if abs(b) > 1e-8:
        return math.expm1(b) / b
    return 1.0 + b / 2.0 + b * b / 6.0 + b * b * b / 24.0


class ZipfSampler:
    """Draws 0-based content ids with p proportional to (id+1)^-alpha."""

    def __init__(self, n_contents: int, alpha: float):
        if n_contents < 1:
            raise ValueError("need at least one content")
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.n = n_contents
        self.alpha = alpha
        self._h_x1 = self._h_integral(1.5) - 1.0
        self._h_n = self._h_integral(n_contents + 0.5)
        self._s = 2.0 - self._h_integral_inverse(self._h_integral(2.5) - self._h(2.0))

    def _h_integral(self, x: float) -> float:
        logx = math.log(x)
        return _helper2((1.0 - self.alpha) * logx) * logx

    def _h(self, x: float) -> float:
        return math.exp(-self.alpha * math.log(x))

    def _h_integral_inverse(self, x: float) -> float:
        t = x * (1.0 - self.alpha)
        if t < -1.0:
            t = -1.0
        return math.exp(_helper1(t) * x)

    def sample(self, stream: SplitMix64) -> int:
        if self.n == 1:
            return 0
        while True:
            u = self._h_n + stream.next_double() * (self._h_x1 - self._h_n)
            x = self._h_integral_inverse(u)
            k = int(math.floor(x + 0.5))
            if k < 1:
                k = 1
            elif k > self.n:
                k = self.n
            if (k - x) <= self._s or u >= self._h_integral(k + 0.5) - self._h(k):
                return k - 1


# ---------------------------------------------------------------------------
# request sources


@dataclass(frozen=True)
class Request:
    index: int
    location: tuple[float, float]
    content: int
    cover_mask: int = 0
    user: int = -1


class RequestSource:
    """Where requests come from: homogeneous spatial users or a fixed set.

    Spatial mode draws locations uniformly over the topology region and
    rejects uncovered points (only covered users interact with the
    caches).  Finite mode draws one of the configured users with
    probability proportional to its total request rate; content draws
    are independent of the user draw.
    """

    def __init__(self, topology: Topology, mode: str = "spatial",
                 user_xy=None, user_weight=None, density: float = 1.0):
        if mode not in ("spatial", "finite"):
            raise ValueError(f"unknown source mode {mode!r}")
        self.topology = topology
        self.mode = mode
        self.density = density
        if mode == "spatial":
            if density <= 0:
                raise ValueError("spatial density must be > 0")
            self.user_xy = None
            self.user_cdf = None
            self.user_mask = None
            self.user_nearest = None
        else:
            xy = np.asarray(user_xy, dtype=np.float64)
            if xy.ndim != 2 or xy.shape[1] != 2 or len(xy) == 0:
                raise ValueError("finite mode needs an (n, 2) user position array")
            w = np.ones(len(xy)) if user_weight is None else np.asarray(user_weight, dtype=np.float64)
            if len(w) != len(xy) or (w < 0).any() or w.sum() <= 0:
                raise ValueError("user weights must be nonnegative with positive sum")
            masks = np.array([topology.coverage_mask(x, y) for x, y in xy], dtype=np.int64)
            if (masks == 0).any():
                bad = int(np.flatnonzero(masks == 0)[0])
                raise ValueError(f"user {bad} is not covered by any station")
            cdf = np.cumsum(w / w.sum())
            cdf[-1] = 1.0
            self.user_xy = xy
            self.user_cdf = cdf
            self.user_mask = masks
            self.user_nearest = np.array(
                [topology.nearest_covering(x, y) for x, y in xy], dtype=np.int64
            )


def draw_user_index(cdf: np.ndarray, u: float) -> int:
    """First index whose cumulative weight exceeds u (binary search)."""
    lo, hi = 0, len(cdf) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cdf[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


def draw_location(source: RequestSource, stream: SplitMix64) -> tuple[float, float, int, int]:
    """Sample (x, y, cover_mask, user_index); resamples uncovered points."""
    if source.mode == "finite":
        idx = draw_user_index(source.user_cdf, stream.next_double())
        x, y = source.user_xy[idx]
        return float(x), float(y), int(source.user_mask[idx]), idx
    region = source.topology.region
    w = region.x1 - region.x0
    h = region.y1 - region.y0
    while True:
        x = region.x0 + stream.next_double() * w
        y = region.y0 + stream.next_double() * h
        mask = source.topology.coverage_mask(x, y)
        if mask:
            return x, y, mask, -1


def next_request(source: RequestSource, catalog: Catalog, streams, index: int = 0,
                 sampler: ZipfSampler | None = None) -> Request:
    """Draw one request; deterministic given the stream states."""
    sampler = sampler or ZipfSampler(catalog.n_contents, catalog.alpha)
    content = sampler.sample(streams[STREAM_CONTENT])
    x, y, mask, user = draw_location(source, streams[STREAM_LOCATION])
    return Request(index=index, location=(x, y), content=content, cover_mask=mask, user=user)


# ---------------------------------------------------------------------------
# aggregated demand for the solvers and the offline baselines


class Workload:
    """Demand aggregated into coverage classes.

    Users with the same coverage set are interchangeable for every gain
    model shipped here, so solvers and offline placement work on
    (class coverage mask, per-class rate) pairs instead of raw users or
    locations.  The per-content per-class request rate is
    ``rates[f] * weights[k]`` unless an explicit ``rate_matrix`` is
    given (arbitrary per-user-per-content rates, analysis use only).
    """

    def __init__(self, n_stations: int, masks, weights, rates, rate_matrix=None):
        self.n_stations = n_stations
        self.masks = np.asarray(masks, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.rates = np.asarray(rates, dtype=np.float64)
        self.rate_matrix = None if rate_matrix is None else np.asarray(rate_matrix, dtype=np.float64)
        if len(self.masks) != len(self.weights):
            raise ValueError("masks and weights must have equal length")
        if self.rate_matrix is not None and self.rate_matrix.shape != (len(self.rates), len(self.masks)):
            raise ValueError("rate_matrix must be (n_contents, n_classes)")
        if (self.masks == 0).any():
            raise ValueError("every class must be covered by at least one station")

    @property
    def n_contents(self) -> int:
        return len(self.rates)

    @property
    def n_classes(self) -> int:
        return len(self.masks)

    def class_rates(self, f: int) -> np.ndarray:
        if self.rate_matrix is not None:
            return self.rate_matrix[f]
        return self.rates[f] * self.weights

    def content_rate(self, f: int) -> float:
        if self.rate_matrix is not None:
            return float(self.rate_matrix[f].sum())
        return float(self.rates[f])


def spatial_workload(topology: Topology, catalog: Catalog, grid: int = 200) -> Workload:
    """Deterministic grid quadrature of homogeneous spatial demand.

    Covered cell centers are binned by coverage mask; weights are the
    covered-area shares.  A fixed grid (rather than Monte Carlo) keeps
    solver fixed points reproducible.
    """
    region = topology.region
    xs = region.x0 + (np.arange(grid) + 0.5) * (region.x1 - region.x0) / grid
    ys = region.y0 + (np.arange(grid) + 0.5) * (region.y1 - region.y0) / grid
    acc: dict[int, float] = {}
    for y in ys:
        for x in xs:
            mask = topology.coverage_mask(x, y)
            if mask:
                acc[mask] = acc.get(mask, 0.0) + 1.0
    if not acc:
        raise ValueError("no grid point is covered; check topology/region")
    masks = np.array(sorted(acc), dtype=np.int64)
    weights = np.array([acc[int(m)] for m in masks])
    weights /= weights.sum()
    return Workload(topology.n_stations, masks, weights, catalog.rates)


def finite_workload(source: RequestSource, catalog: Catalog) -> Workload:
    if source.mode != "finite":
        raise ValueError("finite_workload needs a finite-mode source")
    weights = np.diff(np.concatenate([[0.0], source.user_cdf]))
    return Workload(source.topology.n_stations, source.user_mask, weights, catalog.rates)
