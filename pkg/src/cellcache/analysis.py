"""Characteristic-time solvers and small-scale optimality machinery.

Two layers live here.  The first is the classic timer decoupling for
caches: a content, once admitted, survives a per-station characteristic
time that is refreshed by (possibly thinned) hits; the time is fixed by
forcing expected occupancy to equal capacity.  The second models, per
content, the network placement as a continuous-time Markov chain over
station bitmasks whose admission rates scale with a parameter q, and
verifies the vanishing-q behaviour numerically: state resistances from
minimum-weight in-trees, the potential ``gain minus weighted copy
count`` whose maximizers carry all limiting mass, pairwise/aggregate
balance identities, and the KKT conditions of the relaxed placement
problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.optimize import linprog
from scipy.optimize import root as opt_root
from scipy.sparse.csgraph import connected_components

from .gain import content_gain_table

EPS_INSERT_FLOOR = 1e-6  # keeps admission chains irreducible (gain units)


# ---------------------------------------------------------------------------
# single-cache characteristic time


def sojourn_rate(delta_g: float, beta: float, tc: float) -> float:
    """Eviction rate of a cached copy refreshed at gain-rate delta_g.

    Expected sojourn is expm1(beta*dG*tc)/(beta*dG); the rate is its
    inverse, continuously extended to 1/tc at dG = 0.
    """
    if tc <= 0:
        raise ValueError("tc must be > 0")
    if beta <= 0:
        raise ValueError("beta must be > 0")
    if delta_g < 0:
        raise ValueError("delta_g must be >= 0")
    z = beta * delta_g
    if z == 0.0:
        return 1.0 / tc
    return z / math.expm1(z * tc)


def _occupancy_curve(tc, promote_rates, insert_rates):
    """Per-content in-cache probability under renewal-on-hit timers.

    pi = 1 / (1 + promote / (insert * expm1(promote * tc))), with the
    promote -> 0 limit insert*tc / (1 + insert*tc); safe as expm1
    overflows to inf (pi -> 1).
    """
    promote = np.asarray(promote_rates, dtype=np.float64)
    insert = np.asarray(insert_rates, dtype=np.float64)
    pi = np.empty_like(promote)
    zero = promote == 0
    with np.errstate(over="ignore"):
        grown = np.expm1(promote[~zero] * tc)
        pi[~zero] = 1.0 / (1.0 + promote[~zero] / (insert[~zero] * grown))
    pi[zero] = insert[zero] * tc / (1.0 + insert[zero] * tc)
    return pi


@dataclass
class CtaSolution:
    tc: object  # float for a single cache, ndarray for a network
    residual: float
    iterations: int = 0
    occupancy: np.ndarray | None = None
    stationary: list | None = None


def solve_tc_single(rates, capacity: int, policy: str = "lru", q: float = 1.0,
                    promote_rates=None, insert_rates=None, rtol: float = 1e-9) -> CtaSolution:
    """Characteristic time of one cache from the occupancy equation.

    Built-in policies fix (promote, insert) rates per content from the
    request rates: lru -> (r, r), qlru -> (r, q r), fifo -> (0, r).
    Pass explicit rate vectors for anything else (e.g. gain-thinned
    refreshes).  Requires capacity < number of contents.
    """
    rates = np.asarray(rates, dtype=np.float64)
    n = len(rates)
    if capacity >= n:
        raise ValueError("capacity must be smaller than the catalog")
    if promote_rates is None or insert_rates is None:
        if policy == "lru":
            promote_rates, insert_rates = rates, rates
        elif policy == "qlru":
            promote_rates, insert_rates = rates, q * rates
        elif policy == "fifo":
            promote_rates, insert_rates = np.zeros_like(rates), rates
        else:
            raise ValueError(f"no built-in occupancy curve for policy {policy!r}")

    def excess(tc):
        return float(_occupancy_curve(tc, promote_rates, insert_rates).sum()) - capacity

    lo, hi = 1e-12, 1.0
    it = 0
    while excess(hi) < 0:
        hi *= 4.0
        it += 1
        if it > 400:
            raise RuntimeError("failed to bracket the characteristic time")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0:
            lo = mid
        else:
            hi = mid
        if abs(excess(mid)) < rtol * capacity:
            break
    tc = 0.5 * (lo + hi)
    occ = _occupancy_curve(tc, promote_rates, insert_rates)
    return CtaSolution(tc=tc, residual=abs(float(occ.sum()) - capacity), occupancy=occ)


def cta_hit_rate(rates, capacity: int, policy: str = "lru", q: float = 1.0) -> float:
    """Predicted request hit probability for one cache."""
    sol = solve_tc_single(rates, capacity, policy=policy, q=q)
    rates = np.asarray(rates, dtype=np.float64)
    return float(np.dot(rates / rates.sum(), sol.occupancy))


# ---------------------------------------------------------------------------
# per-content placement chains


@dataclass
class EAChain:
    """Continuous-time chain of one content's placement bitmask.

    Transitions flip single bits: downward (copy eviction) at the
    thinned-timer rate of the losing station, upward (copy admission)
    at the per-request insertion expectation scaled by q ** gamma_b.
    Rates are kept in factored form so they can be rebuilt in arbitrary
    precision for vanishing-q studies.
    """

    content: int
    n_stations: int
    q: float
    gamma: np.ndarray
    beta: float
    tc: np.ndarray
    gain_table: np.ndarray        # G_f over all 2^B masks
    delta_g_down: np.ndarray      # (S, B): gain lost dropping bit b from state
    up_base: np.ndarray           # (S, B): q-free admission rate factor

    @property
    def n_states(self) -> int:
        return 1 << self.n_stations

    @property
    def q_station(self) -> np.ndarray:
        return self.q ** self.gamma

    def up_rates(self) -> np.ndarray:
        return self.up_base * self.q_station[None, :]

    def down_rates(self) -> np.ndarray:
        s, b_n = self.delta_g_down.shape
        down = np.zeros((s, b_n))
        for b in range(b_n):
            bit = 1 << b
            for y in range(s):
                if y & bit:
                    down[y, b] = sojourn_rate(self.delta_g_down[y, b], self.beta, self.tc[b])
        return down

    def generator(self) -> np.ndarray:
        s = self.n_states
        q_mat = np.zeros((s, s))
        up = self.up_rates()
        down = self.down_rates()
        for x in range(s):
            for b in range(self.n_stations):
                bit = 1 << b
                if x & bit:
                    q_mat[x, x ^ bit] += down[x, b]
                elif up[x, b] > 0:
                    q_mat[x, x ^ bit] += up[x, b]
        np.fill_diagonal(q_mat, -q_mat.sum(axis=1))
        return q_mat

    def structural_edges(self) -> np.ndarray:
        """Boolean (S, S) adjacency of algebraically positive rates."""
        s = self.n_states
        adj = np.zeros((s, s), dtype=bool)
        for x in range(s):
            for b in range(self.n_stations):
                bit = 1 << b
                if x & bit:
                    adj[x, x ^ bit] = True
                elif self.up_base[x, b] > 0 and self.q > 0:
                    adj[x, x ^ bit] = True
        return adj


def _chain_ingredients(model, workload, f: int, delta: float):
    """Gain table plus factored up/down rate ingredients for content f."""
    b_n = workload.n_stations
    s = 1 << b_n
    g = content_gain_table(model, workload, f)
    rates_k = workload.class_rates(f)
    cover_rate = np.array([
        float(rates_k[(workload.masks >> b) & 1 == 1].sum()) for b in range(b_n)
    ])
    delta_g_down = np.zeros((s, b_n))
    up_base = np.zeros((s, b_n))
    for b in range(b_n):
        bit = 1 << b
        for x in range(s):
            if x & bit:
                delta_g_down[x, b] = g[x] - g[x ^ bit]
            else:
                base = delta * (g[x | bit] - g[x])
                if base == 0.0 and cover_rate[b] > 0.0:
                    # admission floor: zero-marginal inserts keep the
                    # chain irreducible without changing q-exponents
                    base = delta * cover_rate[b] * EPS_INSERT_FLOOR
                up_base[x, b] = base
    return g, delta_g_down, up_base


def build_ea_chain(f: int, model, workload, q: float, gamma=None, beta=None,
                   delta=None, tc=None) -> EAChain:
    """Assemble one content's placement chain.

    `tc` may be a scalar or per-station vector; when omitted, the
    vanishing-q schedule ln(1/q^(b)) / (beta * gamma_b) is used, which
    is the regime the stability results are stated in.
    """
    b_n = workload.n_stations
    gamma = np.ones(b_n) if gamma is None else np.asarray(gamma, dtype=np.float64)
    beta = model.beta if beta is None else beta
    delta = model.delta if delta is None else delta
    if tc is None:
        if not (0.0 < q < 1.0):
            raise ValueError("the default schedule needs q in (0, 1)")
        tc = np.array([tc_schedule(q ** gamma[b], beta, gamma[b]) for b in range(b_n)])
    else:
        tc = np.broadcast_to(np.asarray(tc, dtype=np.float64), (b_n,)).copy()
    g, delta_g_down, up_base = _chain_ingredients(model, workload, f, delta)
    return EAChain(content=f, n_stations=b_n, q=q, gamma=gamma, beta=beta, tc=tc,
                   gain_table=g, delta_g_down=delta_g_down, up_base=up_base)


def tc_schedule(q_b: float, beta: float, gamma_b: float) -> float:
    """Asymptotic characteristic time for a station running parameter q_b."""
    if not (0.0 < q_b < 1.0):
        raise ValueError("schedule defined for q_b in (0, 1)")
    return math.log(1.0 / q_b) / (beta * gamma_b)


class ReducibleChainError(ValueError):
    def __init__(self, components):
        self.components = components
        super().__init__(f"chain is reducible; strongly connected groups: {components}")


def _check_irreducible(chain: EAChain):
    adj = chain.structural_edges()
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    if n_comp > 1:
        groups = [sorted(int(s) for s in np.flatnonzero(labels == c)) for c in range(n_comp)]
        raise ReducibleChainError(groups)


def stationary(chain: EAChain) -> np.ndarray:
    """Stationary distribution by dense linear solve (float64)."""
    _check_irreducible(chain)
    q_mat = chain.generator()
    s = chain.n_states
    a = q_mat.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(s)
    b[-1] = 1.0
    pi = np.linalg.solve(a, b)
    return pi


def stationary_residual(chain: EAChain, pi: np.ndarray) -> float:
    return float(np.abs(pi @ chain.generator()).max())


def stationary_log(chain: EAChain, dps: int = 60) -> np.ndarray:
    """log of the stationary distribution, solved in high precision.

    With the vanishing-q schedule, probabilities span hundreds of
    orders of magnitude; rebuilding the rates with mpmath keeps the
    tiny components meaningful.  Returns float64 logs.
    """
    _check_irreducible(chain)
    s = chain.n_states
    b_n = chain.n_stations
    with mpmath.workdps(dps):
        q_mp = [mpmath.mpf(chain.q) ** mpmath.mpf(float(g)) for g in chain.gamma]
        gen = mpmath.zeros(s, s)
        for x in range(s):
            for b in range(b_n):
                bit = 1 << b
                if x & bit:
                    z = mpmath.mpf(chain.beta) * mpmath.mpf(float(chain.delta_g_down[x, b]))
                    if z == 0:
                        rate = 1 / mpmath.mpf(float(chain.tc[b]))
                    else:
                        rate = z / mpmath.expm1(z * mpmath.mpf(float(chain.tc[b])))
                    gen[x, x ^ bit] += rate
                elif chain.up_base[x, b] > 0:
                    gen[x, x ^ bit] += mpmath.mpf(float(chain.up_base[x, b])) * q_mp[b]
        for x in range(s):
            total = mpmath.mpf(0)
            for y in range(s):
                if y != x:
                    total += gen[x, y]
            gen[x, x] = -total
        a = gen.T
        for y in range(s):
            a[s - 1, y] = mpmath.mpf(1)
        rhs = mpmath.zeros(s, 1)
        rhs[s - 1, 0] = mpmath.mpf(1)
        pi = mpmath.lu_solve(a, rhs)
        return np.array([float(mpmath.log(pi[x, 0])) for x in range(s)])


# ---------------------------------------------------------------------------
# resistances and in-trees


@dataclass
class ResistanceGraph:
    """q-exponents of the chain's transition rates, as edge weights."""

    n_stations: int
    r: np.ndarray  # (S, S), inf where no direct transition exists

    @property
    def n_states(self) -> int:
        return 1 << self.n_stations


def resistance_graph(f: int, model, workload, gamma=None, delta=None) -> ResistanceGraph:
    """Edge resistances: gamma-weighted bit additions upward, marginal
    gain of the dropped copy downward (single-bit drops only)."""
    b_n = workload.n_stations
    gamma = np.ones(b_n) if gamma is None else np.asarray(gamma, dtype=np.float64)
    delta = model.delta if delta is None else delta
    g, delta_g_down, _ = _chain_ingredients(model, workload, f, delta)
    s = 1 << b_n
    r = np.full((s, s), np.inf)
    np.fill_diagonal(r, 0.0)
    for x in range(s):
        for y in range(s):
            if x == y:
                continue
            added = y & ~x
            removed = x & ~y
            if removed == 0 and added != 0:
                r[x, y] = sum(gamma[b] for b in range(b_n) if (added >> b) & 1)
            elif added == 0 and removed != 0 and (removed & (removed - 1)) == 0:
                b = removed.bit_length() - 1
                r[x, y] = delta_g_down[x, b]
    return ResistanceGraph(n_stations=b_n, r=r)


@dataclass
class InTreeResult:
    resistance: float
    unreachable: int | None = None


def _min_arborescence_cost(n: int, edges, root: int):
    """Minimum spanning arborescence rooted at `root` (edge contraction).

    Returns (cost, offending_node): cost is inf when some node cannot
    be reached, with a representative of the cut-off part reported.
    """
    edges = [(u, v, float(w)) for u, v, w in edges if u != v and math.isfinite(w)]
    rep = list(range(n))  # representative original node per current id
    total = 0.0
    while True:
        in_w = [math.inf] * n
        pre = [-1] * n
        for u, v, w in edges:
            if v != root and w < in_w[v]:
                in_w[v] = w
                pre[v] = u
        for v in range(n):
            if v != root and not math.isfinite(in_w[v]):
                return math.inf, rep[v]
        total += sum(in_w[v] for v in range(n) if v != root)

        comp = [-1] * n
        visited = [-1] * n
        cnt = 0
        for start in range(n):
            x = start
            while x != root and visited[x] == -1 and comp[x] == -1:
                visited[x] = start
                x = pre[x]
            if x != root and comp[x] == -1 and visited[x] == start:
                comp[x] = cnt
                y = pre[x]
                while y != x:
                    comp[y] = cnt
                    y = pre[y]
                cnt += 1
        if cnt == 0:
            return total, None
        for v in range(n):
            if comp[v] == -1:
                comp[v] = cnt
                cnt += 1
        new_rep = [0] * cnt
        for v in range(n):
            new_rep[comp[v]] = rep[v]
        edges = [
            (comp[u], comp[v], w - in_w[v] if v != root else w)
            for u, v, w in edges
            if comp[u] != comp[v]
        ]
        root = comp[root]
        n = cnt
        rep = new_rep


def min_intree_resistance(graph: ResistanceGraph, root: int) -> InTreeResult:
    """Weight of the cheapest spanning in-tree directed toward `root`.

    Solved as a minimum arborescence on the edge-reversed graph.
    Infinite-resistance pairs carry no edge; if that disconnects some
    state from the root, the result is infinite and names one such
    state.
    """
    s = graph.n_states
    edges = []
    for u in range(s):
        for v in range(s):
            if u != v and math.isfinite(graph.r[u, v]):
                edges.append((v, u, graph.r[u, v]))  # reversed
    cost, offender = _min_arborescence_cost(s, edges, root)
    if math.isinf(cost):
        return InTreeResult(resistance=math.inf, unreachable=offender)
    return InTreeResult(resistance=cost)


def state_resistances(graph: ResistanceGraph) -> np.ndarray:
    """Minimum in-tree resistance of every state."""
    return np.array([min_intree_resistance(graph, x).resistance
                     for x in range(graph.n_states)])


def enumerate_intree_cost(n: int, weights: np.ndarray, root: int) -> float:
    """Brute-force oracle: try every parent assignment (tiny graphs only)."""
    if n > 6:
        raise ValueError("enumeration oracle is for <= 6 nodes")
    nodes = [v for v in range(n) if v != root]
    best = math.inf

    def rec(i, parents, cost):
        nonlocal best
        if cost >= best:
            return
        if i == len(nodes):
            for v in nodes:  # every node must drain to the root
                seen = set()
                x = v
                while x != root:
                    if x in seen:
                        return
                    seen.add(x)
                    x = parents[x]
            best = min(best, cost)
            return
        v = nodes[i]
        for p in range(n):
            if p != v and math.isfinite(weights[v, p]):
                parents[v] = p
                rec(i + 1, parents, cost + weights[v, p])
        parents.pop(v, None)

    rec(0, {}, 0.0)
    return best


# ---------------------------------------------------------------------------
# potential, stable states, balance and KKT verifiers


def phi(f: int, model, workload, gamma=None) -> np.ndarray:
    """Potential over placements: gain rate minus gamma-weighted copies."""
    b_n = workload.n_stations
    gamma = np.ones(b_n) if gamma is None else np.asarray(gamma, dtype=np.float64)
    g = content_gain_table(model, workload, f)
    weight = np.array([sum(gamma[b] for b in range(b_n) if (x >> b) & 1)
                       for x in range(1 << b_n)])
    return g - weight


def stable_states(f: int, model, workload, gamma=None, tol: float = 1e-9) -> list[int]:
    """Placements keeping positive mass as q vanishes: argmax of the
    potential (ties included)."""
    values = phi(f, model, workload, gamma)
    top = values.max()
    return [int(x) for x in np.flatnonzero(values >= top - tol * max(1.0, abs(top)))]


@dataclass
class BalanceReport:
    ok: bool
    worst_violation: float
    failing_subset: tuple | None = None
    failing_pair: tuple | None = None


def check_balance(f: int, model, workload, gamma=None, tol: float = 1e-9,
                  phi_override=None) -> BalanceReport:
    """Verify the potential solves the aggregate balance system.

    Checks, over every proper subset A of states, that the maxima of
    potential-minus-resistance across the A boundary agree in both
    directions, and the stronger per-(parent, child) identity.  The
    subset enumeration is 2^(2^B), so station counts above 4 are
    refused.
    """
    b_n = workload.n_stations
    if b_n > 4:
        raise ValueError("balance check enumerates subsets of states; needs B <= 4")
    values = phi(f, model, workload, gamma) if phi_override is None else np.asarray(phi_override)
    graph = resistance_graph(f, model, workload, gamma)
    s = 1 << b_n
    worst = 0.0
    failing_pair = None
    for x in range(s):
        for b in range(b_n):
            bit = 1 << b
            if x & bit:
                continue
            y = x | bit
            diff = abs((values[x] - graph.r[x, y]) - (values[y] - graph.r[y, x]))
            if diff > worst:
                worst = diff
                failing_pair = (x, y)
    if worst > tol:
        return BalanceReport(False, worst, failing_pair=failing_pair)

    edges = [(u, v, values[u] - graph.r[u, v])
             for u in range(s) for v in range(s)
             if u != v and math.isfinite(graph.r[u, v])]
    failing_subset = None
    for a_mask in range(1, (1 << s) - 1):
        lhs = -math.inf
        rhs = -math.inf
        for u, v, val in edges:
            if (a_mask >> u) & 1 and not (a_mask >> v) & 1:
                if val > lhs:
                    lhs = val
            elif (a_mask >> v) & 1 and not (a_mask >> u) & 1:
                if val > rhs:
                    rhs = val
        diff = abs(lhs - rhs)
        if diff > worst:
            worst = diff
            failing_subset = tuple(sorted(x for x in range(s) if (a_mask >> x) & 1))
    return BalanceReport(worst <= tol, worst, failing_subset=failing_subset,
                         failing_pair=failing_pair if worst > tol else None)


@dataclass
class KktReport:
    feasible: bool
    capacity_error: float
    mass_error: float
    gradient_ok: bool
    worst_offstable_mass: float
    dominance_ok: bool
    relaxed_value: float
    integer_value: float

    @property
    def passed(self) -> bool:
        return self.feasible and self.gradient_ok and self.dominance_ok


def check_kkt(pis, model, workload, gamma, capacity: int, integer_value: float,
              mass_tol: float = 0.02, tie_tol: float = 0.0,
              project: bool = True) -> KktReport:
    """Check the small-q limit against the relaxed placement optimum.

    `pis` is an (n_contents, 2^B) array of per-content stationary
    distributions.  Feasibility asks per-station expected occupancy to
    sit at capacity; the gradient condition asks mass off the potential
    maximizers to vanish; dominance asks the relaxed objective to reach
    at least the exact integer optimum (`integer_value`).  The limit
    may legitimately split mass across potential ties (a fractional
    relaxed optimum); `tie_tol` widens the maximizer set to absorb the
    finite precision of fitted gammas.  `project` evaluates the
    objective on the q -> 0 limit points (stray mass pushed onto the
    stable sets).
    """
    pis = np.asarray(pis, dtype=np.float64)
    f_n, s = pis.shape
    b_n = workload.n_stations
    mass_error = float(np.abs(pis.sum(axis=1) - 1.0).max())
    occ = np.zeros(b_n)
    for b in range(b_n):
        bits = np.array([(x >> b) & 1 for x in range(s)], dtype=np.float64)
        occ[b] = float((pis @ bits).sum())
    capacity_error = float(np.abs(occ - capacity).max())
    feasible = capacity_error <= mass_tol * capacity and mass_error <= 1e-6

    gradient_ok = True
    worst_off = 0.0
    projected = pis.copy()
    for f in range(f_n):
        values = phi(f, model, workload, gamma)
        top = values.max()
        stable = {x for x in range(s)
                  if top - values[x] <= tie_tol + 1e-9 * max(1.0, abs(top))}
        off = float(sum(pis[f, x] for x in range(s) if x not in stable))
        worst_off = max(worst_off, off)
        if off > mass_tol:
            gradient_ok = False
        if project:
            keep = np.array([x in stable for x in range(s)])
            kept = projected[f] * keep
            total = kept.sum()
            projected[f] = kept / total if total > 0 else projected[f]

    value = 0.0
    for f in range(f_n):
        g = content_gain_table(model, workload, f)
        value += float(projected[f] @ g)
    dominance_ok = value >= integer_value - 1e-9 * max(1.0, abs(integer_value))
    return KktReport(feasible=feasible, capacity_error=capacity_error,
                     mass_error=mass_error, gradient_ok=gradient_ok,
                     worst_offstable_mass=worst_off, dominance_ok=dominance_ok,
                     relaxed_value=value, integer_value=integer_value)


@dataclass
class RelaxedOptimum:
    value: float
    alpha: np.ndarray          # (n_contents, 2^B) optimal mixture
    station_price: np.ndarray  # capacity multipliers: the limit gammas
    content_price: np.ndarray  # per-content multipliers: max of the potential


def relaxed_optimum(model, workload, capacity: int) -> RelaxedOptimum:
    """Exact optimum of the distribution-relaxed placement problem.

    Contents hold a probability mixture over placement masks instead of
    one mask; expected per-station occupancy must equal capacity.  The
    LP's capacity duals are the exponents gamma_b the online policy
    needs, and complementary slackness pins the mixture support to the
    maximizers of the potential, which is what the vanishing-q chain
    limit is checked against.
    """
    b_n = workload.n_stations
    f_n = workload.n_contents
    s = 1 << b_n
    gains = np.concatenate([content_gain_table(model, workload, f) for f in range(f_n)])
    a_eq = np.zeros((b_n + f_n, f_n * s))
    b_eq = np.zeros(b_n + f_n)
    for b in range(b_n):
        for f in range(f_n):
            for x in range(s):
                a_eq[b, f * s + x] = (x >> b) & 1
        b_eq[b] = capacity
    for f in range(f_n):
        a_eq[b_n + f, f * s:(f + 1) * s] = 1.0
        b_eq[b_n + f] = 1.0
    res = linprog(-gains, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"relaxed placement LP failed: {res.message}")
    marginals = np.asarray(res.eqlin.marginals)
    return RelaxedOptimum(
        value=-float(res.fun),
        alpha=res.x.reshape(f_n, s),
        station_price=-marginals[:b_n],
        content_price=-marginals[b_n:],
    )


def strict_station_prices(model, workload, capacity: int, alpha: np.ndarray,
                          price_cap: float = 50.0):
    """Capacity multipliers with maximal complementarity margin.

    Among all optimal duals of the relaxed placement problem, pick the
    one maximizing the smallest reduced cost over non-support states
    (the Chebyshev center of the optimal dual face).  A dual vertex, as
    returned by a simplex solver, typically has spurious zero reduced
    costs that would make the vanishing-q limit look tied where the
    optimum is not; the centered dual restores strict complementarity.
    Returns (gamma, zeta, margin); margin 0 means degenerate optimum.
    """
    b_n = workload.n_stations
    f_n = workload.n_contents
    s = 1 << b_n
    support = [(f, x) for f in range(f_n) for x in range(s) if alpha[f, x] > 1e-6]
    gains = [content_gain_table(model, workload, f) for f in range(f_n)]
    nv = b_n + f_n + 1  # gamma, zeta, margin
    a_eq, b_eq, a_ub, b_ub = [], [], [], []
    for f in range(f_n):
        for x in range(s):
            row = np.zeros(nv)
            for b in range(b_n):
                row[b] = (x >> b) & 1
            row[b_n + f] = 1.0
            if (f, x) in set(support):
                a_eq.append(row)
                b_eq.append(gains[f][x])
            else:
                # zeta_f + gamma.x - G >= margin
                r = -row.copy()
                r[-1] = 1.0
                a_ub.append(r)
                b_ub.append(-gains[f][x])
    c = np.zeros(nv)
    c[-1] = -1.0  # maximize the margin
    bounds = [(0, price_cap)] * b_n + [(None, None)] * f_n + [(0, price_cap)]
    res = linprog(c, A_ub=np.array(a_ub), b_ub=np.array(b_ub),
                  A_eq=np.array(a_eq), b_eq=np.array(b_eq),
                  bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"strict dual LP failed: {res.message}")
    return res.x[:b_n], res.x[b_n:b_n + f_n], float(res.x[-1])


# ---------------------------------------------------------------------------
# network characteristic times (capacity-driven mode)


def solve_tc_network(model, workload, capacity: int, q: float, gamma=None,
                     beta=None, delta=None, rtol: float = 1e-6, damping: float = 1.0,
                     max_outer: int = 250, tc0=None) -> CtaSolution:
    """Joint characteristic times for overlapping caches.

    Outer fixed point: given the time vector, per-content chains yield
    stationary occupancies; each station's time is then re-solved by
    bisection against its capacity equation, with damped (geometric)
    updates until the joint residual falls under rtol * capacity.
    """
    b_n = workload.n_stations
    f_n = workload.n_contents
    if b_n > 8:
        raise ValueError("network solver enumerates 2^B states; needs B <= 8")
    if capacity >= f_n:
        raise ValueError("capacity must be smaller than the catalog")
    gamma = np.ones(b_n) if gamma is None else np.asarray(gamma, dtype=np.float64)
    beta = model.beta if beta is None else beta
    delta = model.delta if delta is None else delta
    s = 1 << b_n

    ingredients = [_chain_ingredients(model, workload, f, delta) for f in range(f_n)]
    q_station = q ** gamma
    up = np.stack([ing[2] for ing in ingredients]) * q_station[None, None, :]  # (F,S,B)
    dgd = np.stack([ing[1] for ing in ingredients])  # (F,S,B)
    bits = np.array([[(x >> b) & 1 for b in range(b_n)] for x in range(s)], dtype=bool)

    def stationaries(tc: np.ndarray) -> np.ndarray:
        z = beta * dgd
        with np.errstate(over="ignore", invalid="ignore"):
            denom = np.expm1(z * tc[None, None, :])
            down = np.where(z == 0.0, 1.0 / tc[None, None, :],
                            np.where(np.isinf(denom), 0.0, z / np.where(denom == 0, 1.0, denom)))
        gen = np.zeros((f_n, s, s))
        for x in range(s):
            for b in range(b_n):
                y = x ^ (1 << b)
                if bits[x, b]:
                    gen[:, x, y] += down[:, x, b]
                else:
                    gen[:, x, y] += up[:, x, b]
        gen[:, np.arange(s), np.arange(s)] = -gen.sum(axis=2)
        a = np.transpose(gen, (0, 2, 1)).copy()
        a[:, -1, :] = 1.0
        rhs = np.zeros((f_n, s, 1))
        rhs[:, -1, 0] = 1.0
        return np.linalg.solve(a, rhs)[:, :, 0]

    def occupancy(tc: np.ndarray) -> np.ndarray:
        pis = stationaries(tc)
        return np.array([(pis * bits[None, :, b]).sum() for b in range(b_n)])

    if tc0 is None:
        if (gamma != 1.0).any() and 0.0 < q < 1.0:
            # station-parameterized runs start from the asymptotic schedule
            tc = np.full(b_n, math.log(1.0 / q) / beta)
        else:
            lam = np.array([workload.content_rate(f) for f in range(f_n)])
            tc = np.full(b_n, float(solve_tc_single(lam, capacity, policy="qlru", q=q).tc))
    else:
        tc = np.broadcast_to(np.asarray(tc0, dtype=np.float64), (b_n,)).copy()

    def sweep(tc):
        """One Gauss-Seidel pass: bisection per station, damped in log."""
        for b in range(b_n):
            lo = hi = tc[b]
            probe = tc.copy()

            def excess(t):
                probe[b] = t
                return occupancy(probe)[b] - capacity

            e_cur = excess(tc[b])
            if e_cur < 0:
                while excess(hi) < 0 and hi < 1e18:
                    hi *= 4.0
                lo = hi / 4.0 if hi > tc[b] else lo
            else:
                while excess(lo) > 0 and lo > 1e-15:
                    lo /= 4.0
                hi = lo * 4.0 if lo < tc[b] else hi
            for _ in range(60):
                mid = math.sqrt(lo * hi)
                if excess(mid) < 0:
                    lo = mid
                else:
                    hi = mid
            solved = math.sqrt(lo * hi)
            tc[b] = math.exp((1.0 - damping) * math.log(tc[b]) + damping * math.log(solved))
        return tc

    def residual_of(tc):
        return float(np.abs(occupancy(tc) - capacity).max())

    residual = residual_of(tc)
    outer = 0
    for outer in range(1, max_outer + 1):
        tc = sweep(tc)
        residual = residual_of(tc)
        if residual < rtol * capacity:
            break
        if outer >= 3:
            # coordinate sweeps can stall under strong station coupling;
            # polish the joint root in log space
            polish = opt_root(lambda z: occupancy(np.exp(z)) - capacity,
                              np.log(tc), method="hybr")
            cand = np.exp(polish.x)
            if np.isfinite(cand).all() and residual_of(cand) < residual:
                tc = cand
                residual = residual_of(tc)
            if residual < rtol * capacity:
                break
    if residual >= rtol * capacity:
        raise RuntimeError(
            f"network characteristic times did not converge; residual {residual:.3e}")

    pis = stationaries(tc)
    occ = np.array([(pis * bits[None, :, b]).sum() for b in range(b_n)])
    return CtaSolution(tc=tc, residual=residual, iterations=outer,
                       occupancy=occ, stationary=[pis[f] for f in range(f_n)])


def fit_gamma(model, workload, capacity: int, q_grid, beta=None, delta=None,
              iters: int = 5) -> np.ndarray:
    """Self-consistent per-station exponents of the vanishing-q regime.

    Station b should run parameter q ** gamma_b with gamma chosen so
    every characteristic time grows like ln(1/q) / beta.  Measured
    slopes m_b of the capacity-driven times under the current exponents
    update gamma_b <- gamma_b / (beta * m_b) until the growth is
    uniform.  This is the measured counterpart of the smooth-growth
    assumption behind the stability results; the fitted gammas are also
    the capacity multipliers of the relaxed placement problem.
    """
    beta = model.beta if beta is None else beta
    b_n = workload.n_stations
    logs = np.log(1.0 / np.asarray(q_grid, dtype=np.float64))
    gamma = np.ones(b_n)
    for _ in range(iters):
        tcs = np.array([
            solve_tc_network(model, workload, capacity, q, gamma=gamma,
                             beta=beta, delta=delta).tc
            for q in q_grid
        ])
        slopes = np.array([np.polyfit(logs, tcs[:, b], 1)[0] for b in range(b_n)])
        new_gamma = gamma / (beta * slopes)
        if np.allclose(new_gamma, gamma, rtol=1e-3):
            gamma = new_gamma
            break
        gamma = new_gamma
    return gamma
