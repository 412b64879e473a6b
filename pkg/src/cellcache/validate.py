"""Self-check battery behind the `validate` subcommand.

Each check is quick (< a few seconds) and prints one PASS/FAIL line;
the full statistical validation lives in the test suite.
"""

from __future__ import annotations

import numpy as np

from . import analysis
from .core import ChannelModel, berlin_topology
from .engine import HAVE_COMPILED
from .engine.pure import PureEngine
from .gain import CompDelayGain, HitRateGain, make_gain_model
from .placement import allocation_gain, brute_force_allocation, greedy_allocation
from .policies import PolicySpec
from .traffic import Catalog, RequestSource, Workload, zipf_popularity


def _zipf_normalization():
    p = zipf_popularity(5000, 1.2)
    return abs(p.sum() - 1.0) < 1e-12 and (np.diff(p) <= 0).all()


def _probability_ranges():
    rng = np.random.default_rng(0)
    models = [HitRateGain(), CompDelayGain(ChannelModel())]
    for model in models:
        for _ in range(10_000):
            cover = int(rng.integers(1, 1 << 10))
            x = int(rng.integers(0, 1 << 10)) & cover
            bits = [b for b in range(10) if (cover >> b) & 1]
            b = int(rng.choice(bits))
            if (x >> b) & 1:
                p = model.move_prob(b, x, cover)
            else:
                p = 0.3 * model.insert_factor(b, x, cover)
            if not (0.0 <= p <= 1.0):
                return False
    return True


def _equivalence_qlru1_lru():
    topo = berlin_topology()
    cat = Catalog(800, 1.0)
    src = RequestSource(topo, "spatial")
    states = []
    for kind, q in (("qlru", 1.0), ("lru", 1.0)):
        eng = PureEngine(topology=topo, catalog=cat, source=src,
                         spec=PolicySpec(kind=kind, q=q), capacity=20, seed=11)
        eng.run(20_000, True)
        states.append((eng.cache_contents(), eng.hits))
    return states[0] == states[1]


def _engine_parity():
    if not HAVE_COMPILED:
        return True  # nothing to compare against
    from .engine.compiled import CompiledEngine

    topo = berlin_topology()
    cat = Catalog(800, 1.0)
    src = RequestSource(topo, "spatial")
    spec = PolicySpec(kind="qlru_delta", q=0.1, gain="comp_delay")
    gm = make_gain_model("comp_delay", ChannelModel())
    kw = dict(topology=topo, catalog=cat, source=src, spec=spec, capacity=20,
              seed=5, gain_model=gm)
    pe, ce = PureEngine(**kw), CompiledEngine(**kw)
    for e in (pe, ce):
        e.run(20_000, True)
    return (pe.cache_contents() == ce.cache_contents() and pe.hits == ce.hits
            and pe.delay_sum == ce.delay_sum)


def _tiny_workload():
    masks = np.array([0b01, 0b11, 0b10])
    rate_matrix = np.array([[2.0, 1.0, 0.5], [0.7, 0.4, 1.1]])
    return Workload(2, masks, np.array([0.4, 0.3, 0.3]), rate_matrix.sum(axis=1),
                    rate_matrix=rate_matrix)


def _balance_identity():
    wl = _tiny_workload()
    report = analysis.check_balance(0, HitRateGain(), wl, gamma=[1.0, 0.7])
    return report.ok


def _stationary_two_state():
    wl = Workload(1, np.array([0b1]), np.array([1.0]), np.array([2.0]))
    chain = analysis.build_ea_chain(0, HitRateGain(), wl, q=0.5, tc=[1.0])
    pi = analysis.stationary(chain)
    up = chain.up_rates()[0, 0]
    down = chain.down_rates()[1, 0]
    expect = np.array([down, up]) / (up + down)
    return np.allclose(pi, expect, rtol=1e-12, atol=0)


def _greedy_vs_brute():
    wl = _tiny_workload()
    model = HitRateGain()
    greedy = greedy_allocation(model, wl, 1)
    _, best = brute_force_allocation(model, wl, 1)
    g = allocation_gain(model, wl, greedy)
    return g >= 0.5 * best - 1e-12


CHECKS = [
    ("zipf popularity normalized and monotone", _zipf_normalization),
    ("update/admission probabilities within [0, 1]", _probability_ranges),
    ("qLRU(q=1) replays LRU exactly", _equivalence_qlru1_lru),
    ("compiled engine matches pure engine", _engine_parity),
    ("potential satisfies pairwise/aggregate balance", _balance_identity),
    ("two-state chain stationary closed form", _stationary_two_state),
    ("greedy within half of exhaustive optimum", _greedy_vs_brute),
]


def run_validation(doc=None, echo=print) -> int:
    failures = 0
    for name, fn in CHECKS:
        try:
            ok = fn()
        except Exception as exc:  # a crash is a failure with a reason
            ok = False
            echo(f"FAIL {name} ({exc})")
            failures += 1
            continue
        echo(f"{'PASS' if ok else 'FAIL'} {name}")
        failures += 0 if ok else 1
    return failures
