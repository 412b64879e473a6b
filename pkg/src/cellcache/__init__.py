"""cellcache: overlapping edge-cache simulation and analysis toolkit."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    BaseStation,
    ChannelModel,
    Configuration,
    Region,
    Topology,
    aggregate_capacity,
    berlin_topology,
    coverage_set,
    load_topology,
    make_topology,
)
from .gain import CompDelayGain, HitRateGain, make_gain_model  # noqa: F401
from .policies import CacheList, HitOutcome, PolicySpec  # noqa: F401
from .traffic import Catalog, RequestSource, Workload, zipf_popularity  # noqa: F401
