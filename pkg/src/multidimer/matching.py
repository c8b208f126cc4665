"""Exact combinatorics of N-dimer covers on small graphs.

Feasibility runs through an integral max-flow with vertex capacities (Hall's
condition projected from the blow-up graph); everything enumerative is exact
integer/rational arithmetic so the Fig.-4-style values (1/6, 2/3, Z = 24) come
out as equalities, not approximations.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import networkx as nx

from .lattice import RegionGraph

ENUM_MAX_EDGES = 24
ENUM_MAX_N = 8


class GuardRailError(ValueError):
    """Instance too large for exact enumeration; sample instead."""


@dataclass(frozen=True)
class MultiDimerCover:
    """Edge multiplicities summing to N_v at each vertex."""

    region: RegionGraph
    M: tuple

    def __post_init__(self):
        if len(self.M) != self.region.n_edges:
            raise ValueError("M must assign one multiplicity per edge")

    def validate(self):
        r = self.region
        for wi in range(r.n_white):
            if sum(self.M[e] for e in r.white_adjacency[wi]) != r.white_N[wi]:
                raise ValueError(f"white vertex {wi} degree sum != N_v")
        for bi in range(r.n_black):
            if sum(self.M[e] for e in r.black_adjacency[bi]) != r.black_N[bi]:
                raise ValueError(f"black vertex {bi} degree sum != N_v")
        return self


@dataclass(frozen=True)
class ExactMeasure:
    """Enumerated multinomial dimer measure with exact rational weights."""

    region: RegionGraph
    weights: tuple                    # Fraction per edge
    support: tuple                    # (MultiDimerCover, unnormalized Fraction)
    Z: Fraction

    def probabilities(self):
        return tuple(w / self.Z for _c, w in self.support)


def _as_edge_weights(region: RegionGraph, weights) -> tuple:
    """Normalize a weight spec (None, scalar, per-type, per-edge) to Fractions."""
    m = region.n_edges
    if weights is None:
        return (Fraction(1),) * m
    if isinstance(weights, (int, Fraction)):
        return (Fraction(weights),) * m
    weights = list(weights)
    if len(weights) == region.lattice.degree and m != region.lattice.degree:
        return tuple(Fraction(weights[t - 1]) for (_w, _b, t) in region.edges)
    if len(weights) != m:
        raise ValueError(f"expected {m} edge weights (or {region.lattice.degree} per-type)")
    return tuple(Fraction(w) for w in weights)


# ---------------------------------------------------------------------------
# Feasibility via max-flow
# ---------------------------------------------------------------------------

def _flow_network(region: RegionGraph, white_N=None, black_N=None):
    wN = region.white_N if white_N is None else white_N
    bN = region.black_N if black_N is None else black_N
    G = nx.DiGraph()
    for wi in range(region.n_white):
        G.add_edge("s", ("w", wi), capacity=wN[wi])
    for bi in range(region.n_black):
        G.add_edge(("b", bi), "t", capacity=bN[bi])
    for wi, bi, _t in region.edges:
        cap = min(wN[wi], bN[bi])
        if G.has_edge(("w", wi), ("b", bi)):
            G[("w", wi)][("b", bi)]["capacity"] += cap
        else:
            G.add_edge(("w", wi), ("b", bi), capacity=cap)
    return G


def _deficient_set(R, region):
    """Hall counterexample from the residual network: whites reachable from s."""
    seen = {"s"}
    stack = ["s"]
    while stack:
        u = stack.pop()
        for v in R[u]:
            if v not in seen and R[u][v]["capacity"] - R[u][v]["flow"] > 0:
                seen.add(v)
                stack.append(v)
    C = [i for i in range(region.n_white) if ("w", i) in seen]
    NC = sorted({bi for wi, bi, _t in region.edges if wi in set(C)})
    return tuple(C), tuple(NC)


def check_feasible(region: RegionGraph):
    """Decide whether an N-dimer cover exists.

    Returns a dict with ``feasible`` plus either a ``witness`` cover or the
    violating sets ``(C, N(C))`` and a ``reason``.
    """
    if sum(region.white_N) != sum(region.black_N):
        return {"feasible": False, "reason": "unbalanced",
                "witness": None, "violating": None}
    need = sum(region.white_N)
    G = _flow_network(region)
    R = nx.algorithms.flow.preflow_push(G, "s", "t")
    value = R.graph["flow_value"]
    if value == need:
        flow = {(u, v): R[u][v]["flow"] for u, v in G.edges if R[u][v]["flow"] > 0}
        M = [0] * region.n_edges
        group = {}
        for ei, (wi, bi, _t) in enumerate(region.edges):
            group.setdefault((wi, bi), []).append(ei)
        for (wi, bi), eis in group.items():
            f = flow.get((("w", wi), ("b", bi)), 0)
            M[eis[0]] = f  # parallel edges are interchangeable; pile onto the first
        cover = MultiDimerCover(region, tuple(M)).validate()
        return {"feasible": True, "witness": cover, "violating": None, "reason": None}
    C, NC = _deficient_set(R, region)
    return {"feasible": False, "witness": None, "violating": (C, NC),
            "reason": "hall"}


def check_edge_feasible(region: RegionGraph):
    """Clause (ii): each edge must occur in some cover.  Returns dead edges."""
    base = check_feasible(region)
    if not base["feasible"]:
        return {"ok": False, "dead_edges": tuple(range(region.n_edges)),
                "reason": base["reason"]}
    dead = []
    for ei, (wi, bi, _t) in enumerate(region.edges):
        wN = list(region.white_N)
        bN = list(region.black_N)
        wN[wi] -= 1
        bN[bi] -= 1
        need = sum(wN)
        G = _flow_network(region, wN, bN)
        value, _ = nx.maximum_flow(G, "s", "t")
        if value != need:
            dead.append(ei)
    return {"ok": not dead, "dead_edges": tuple(dead), "reason": None}


# ---------------------------------------------------------------------------
# Enumeration and exact measures
# ---------------------------------------------------------------------------

def _check_guard_rails(region, unsafe):
    if unsafe:
        return
    if region.n_edges > ENUM_MAX_EDGES or region.interior_N > ENUM_MAX_N:
        raise GuardRailError(
            f"enumeration guard rails exceeded (|E|={region.n_edges} > {ENUM_MAX_EDGES} "
            f"or N={region.interior_N} > {ENUM_MAX_N}); use sample_cover instead "
            f"or pass unsafe=True")


def enumerate_covers(region: RegionGraph, unsafe: bool = False):
    """All N-dimer covers, duplicate-free, in a deterministic order.

    Backtracking over edges in lexicographic (white coord, black coord, type)
    order with per-vertex residual pruning.
    """
    _check_guard_rails(region, unsafe)
    order = sorted(range(region.n_edges),
                   key=lambda e: (region.white_coords[region.edges[e][0]],
                                  region.black_coords[region.edges[e][1]],
                                  region.edges[e][2]))
    m = len(order)
    # static upper bound on what edges after position p can still carry, per vertex
    cap_w_after = [[0] * (m + 1) for _ in range(region.n_white)]
    cap_b_after = [[0] * (m + 1) for _ in range(region.n_black)]
    for p in range(m - 1, -1, -1):
        wi, bi, _t = region.edges[order[p]]
        cap = min(region.white_N[wi], region.black_N[bi])
        for v in range(region.n_white):
            cap_w_after[v][p] = cap_w_after[v][p + 1] + (cap if v == wi else 0)
        for v in range(region.n_black):
            cap_b_after[v][p] = cap_b_after[v][p + 1] + (cap if v == bi else 0)

    res_w = list(region.white_N)
    res_b = list(region.black_N)
    M = [0] * region.n_edges
    out = []

    def rec(p):
        if p == m:
            if all(r == 0 for r in res_w) and all(r == 0 for r in res_b):
                out.append(MultiDimerCover(region, tuple(M)))
            return
        ei = order[p]
        wi, bi, _t = region.edges[ei]
        lo = max(0, res_w[wi] - cap_w_after[wi][p + 1],
                 res_b[bi] - cap_b_after[bi][p + 1])
        hi = min(res_w[wi], res_b[bi])
        for k in range(lo, hi + 1):
            M[ei] = k
            res_w[wi] -= k
            res_b[bi] -= k
            ok = True
            if res_w[wi] > cap_w_after[wi][p + 1] or res_b[bi] > cap_b_after[bi][p + 1]:
                ok = False
            if ok:
                rec(p + 1)
            res_w[wi] += k
            res_b[bi] += k
        M[ei] = 0

    rec(0)
    return out


def lift_count(cover: MultiDimerCover) -> int:
    """Number of blow-up matchings projecting to the cover: prod N_v! / prod M_e!."""
    r = cover.region
    num = 1
    for n in r.white_N:
        num *= factorial(n)
    for n in r.black_N:
        num *= factorial(n)
    den = 1
    for m in cover.M:
        den *= factorial(m)
    assert num % den == 0
    return num // den


def cover_weight(cover: MultiDimerCover, weights) -> Fraction:
    """Unnormalized measure weight |pi^-1(M)| * prod w_e^M_e."""
    w = _as_edge_weights(cover.region, weights)
    out = Fraction(lift_count(cover))
    for we, me in zip(w, cover.M):
        out *= we ** me
    return out


def exact_measure(region: RegionGraph, weights=None, unsafe: bool = False) -> ExactMeasure:
    w = _as_edge_weights(region, weights)
    if any(we <= 0 for we in w):
        raise ValueError("edge weights must be positive")
    covers = enumerate_covers(region, unsafe=unsafe)
    support = tuple((c, cover_weight(c, w)) for c in covers)
    Z = sum((wt for _c, wt in support), Fraction(0))
    return ExactMeasure(region=region, weights=w, support=support, Z=Z)


def partition_function(region: RegionGraph, weights=None, unsafe: bool = False) -> Fraction:
    """Z_{G,N}(w) by direct enumeration over covers."""
    return exact_measure(region, weights, unsafe=unsafe).Z


def partition_function_generating(region: RegionGraph, weights=None,
                                  unsafe: bool = False) -> Fraction:
    """Z via the generating-function route: N! * [x^N] P(x)^K / K!.

    P(x) = sum_e w_e x_u x_v; only the degree-2K part of exp(P) contributes,
    K = sum N_v / 2.  Expansion is sparse multiplication with per-vertex
    exponent caps (monomials exceeding any N_v can never recover).
    """
    _check_guard_rails(region, unsafe)
    w = _as_edge_weights(region, weights)
    total = sum(region.white_N) + sum(region.black_N)
    if total % 2:
        return Fraction(0)
    K = total // 2
    nw = region.n_white
    caps = list(region.white_N) + list(region.black_N)
    nvert = len(caps)
    zero = tuple([0] * nvert)
    poly = {zero: Fraction(1)}
    terms = [(wi, nw + bi, we) for (wi, bi, _t), we in zip(region.edges, w)]
    for _step in range(K):
        nxt = {}
        for mono, coeff in poly.items():
            for u, v, we in terms:
                if mono[u] + 1 > caps[u] or mono[v] + 1 > caps[v]:
                    continue
                m2 = list(mono)
                m2[u] += 1
                m2[v] += 1
                m2 = tuple(m2)
                nxt[m2] = nxt.get(m2, Fraction(0)) + coeff * we
        poly = nxt
        if not poly:
            return Fraction(0)
    target = tuple(caps)
    coeff = poly.get(target, Fraction(0))
    nfact = 1
    for n in caps:
        nfact *= factorial(n)
    return coeff * nfact / factorial(K)


def cover_probability(cover: MultiDimerCover, weights=None, unsafe: bool = False) -> Fraction:
    measure = exact_measure(cover.region, weights, unsafe=unsafe)
    return cover_weight(cover, measure.weights) / measure.Z


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_cover(region: RegionGraph, weights=None, seed: int = 0,
                 chain_steps: int = 2000, unsafe: bool = False) -> MultiDimerCover:
    """Draw one cover: exact inverse-CDF on enumerable graphs, Metropolis
    cycle-push chain otherwise."""
    try:
        measure = exact_measure(region, weights, unsafe=unsafe)
    except GuardRailError:
        chain = MetropolisChain(region, weights, seed=seed)
        chain.run(chain_steps)
        return chain.state
    if not measure.support:
        raise ValueError("region is infeasible; no covers to sample")
    rng = random.Random(seed)
    # exact inverse CDF with a rational uniform draw at 64-bit resolution
    u = Fraction(rng.getrandbits(64), 2 ** 64) * measure.Z
    acc = Fraction(0)
    for cover, wt in measure.support:
        acc += wt
        if u < acc:
            return cover
    return measure.support[-1][0]


def _simple_cycles_upto(region: RegionGraph, max_len: int = 8):
    """Simple alternating cycles of length <= max_len, as edge-index tuples.

    The cycles alternate white/black automatically (bipartite); each cycle is
    a tuple of edge indices e_1..e_2k where consecutive edges share a vertex
    and the shift move adds +1 on odd positions and -1 on even positions.
    """
    # adjacency as (neighbor, edge index): from white via edge to black, etc.
    from_w = [[] for _ in range(region.n_white)]
    from_b = [[] for _ in range(region.n_black)]
    for ei, (wi, bi, _t) in enumerate(region.edges):
        from_w[wi].append((bi, ei))
        from_b[bi].append((wi, ei))
    found = {}

    def dfs(start_w, w, path_edges, seen_w, seen_b):
        if len(path_edges) + 2 > max_len:
            return
        for b, e1 in from_w[w]:
            if b in seen_b:
                continue
            for w2, e2 in from_b[b]:
                if e2 == e1:
                    continue
                if w2 == start_w:
                    cyc = path_edges + [e1, e2]
                    if len(set(cyc)) == len(cyc):
                        found.setdefault(frozenset(cyc), tuple(cyc))
                elif w2 not in seen_w:
                    dfs(start_w, w2, path_edges + [e1, e2],
                        seen_w | {w2}, seen_b | {b})

    for w0 in range(region.n_white):
        dfs(w0, w0, [], {w0}, set())
    return sorted(found.values())


class MetropolisChain:
    """Reversible cycle-push chain targeting the multinomial dimer measure.

    Moves shift one unit of multiplicity around a uniformly chosen short
    alternating cycle; acceptance uses the lift-count and weight ratio.  Face
    cycles of length <= 8 are a heuristic move set (documented: ergodicity in
    d >= 3 is not addressed by the theory).
    """

    def __init__(self, region: RegionGraph, weights=None, seed: int = 0,
                 max_cycle_len: int = 8, initial: MultiDimerCover | None = None):
        self.region = region
        self.weights = _as_edge_weights(region, weights)
        self.rng = random.Random(seed)
        self.cycles = _simple_cycles_upto(region, max_cycle_len)
        if not self.cycles:
            raise ValueError("no short cycles; chain has no moves")
        if initial is None:
            res = check_feasible(region)
            if not res["feasible"]:
                raise ValueError(f"region infeasible ({res['reason']}); cannot start chain")
            initial = res["witness"]
        self.state = initial
        self.accepted = 0
        self.proposed = 0

    def _ratio(self, cycle, direction):
        """pi(M')/pi(M) for shifting one unit around the cycle."""
        M = self.state.M
        ratio = Fraction(1)
        for pos, ei in enumerate(cycle):
            up = (pos % 2 == 0) if direction > 0 else (pos % 2 == 1)
            if up:
                ratio *= self.weights[ei] / (M[ei] + 1)
            else:
                if M[ei] == 0:
                    return None
                ratio *= Fraction(M[ei]) / self.weights[ei]
        return ratio

    def step(self):
        self.proposed += 1
        cycle = self.cycles[self.rng.randrange(len(self.cycles))]
        direction = 1 if self.rng.random() < 0.5 else -1
        ratio = self._ratio(cycle, direction)
        if ratio is None:
            return False
        if ratio < 1 and self.rng.random() >= float(ratio):
            return False
        M = list(self.state.M)
        for pos, ei in enumerate(cycle):
            up = (pos % 2 == 0) if direction > 0 else (pos % 2 == 1)
            M[ei] += 1 if up else -1
        self.state = MultiDimerCover(self.region, tuple(M))
        self.accepted += 1
        return True

    def run(self, steps: int):
        for _ in range(steps):
            self.step()
        return self.state


def edge_expectations(region: RegionGraph, weights=None, unsafe: bool = False):
    """Exact E[M_e] as Fractions, by enumeration."""
    measure = exact_measure(region, weights, unsafe=unsafe)
    exp = [Fraction(0)] * region.n_edges
    for cover, wt in measure.support:
        for ei, me in enumerate(cover.M):
            exp[ei] += wt * me
    return tuple(e / measure.Z for e in exp)


def edge_variance(region: RegionGraph, edge_index: int, weights=None,
                  unsafe: bool = False) -> Fraction:
    """Exact Var[M_e / N] for one edge."""
    measure = exact_measure(region, weights, unsafe=unsafe)
    N = Fraction(region.interior_N)
    m1 = Fraction(0)
    m2 = Fraction(0)
    for cover, wt in measure.support:
        x = cover.M[edge_index] / N
        m1 += wt * x
        m2 += wt * x * x
    m1 /= measure.Z
    m2 /= measure.Z
    return m2 - m1 * m1


def concentration_check(region: RegionGraph, weights, N_list, critical,
                        unsafe: bool = False):
    """Table of sup_e |E[M_e/N] - c_e| for each N in N_list.

    ``region`` carries the base multiplicity pattern (interior_N divides every
    N); ``critical`` are the target critical edge weights (per edge, floats).
    """
    rows = []
    for N in N_list:
        scaled = region.with_multiplicity(N)
        exp = edge_expectations(scaled, weights, unsafe=unsafe)
        gap = max(abs(float(e) / N - float(c)) for e, c in zip(exp, critical))
        rows.append((N, gap))
    return rows
