"""Metropolis process on the cliques of a uniform hypergraph.

From a clique ``K`` the chain draws a vertex ``v`` uniformly; it adds ``v``
when ``K + {v}`` is still a clique, and removes a member ``v`` with
probability ``1 / fugacity``.  The stationary law is proportional to
``fugacity ** |K|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from hoclust.errors import BudgetError, ContractError, ParameterError
from hoclust.models import Hypergraph
from hoclust.rng import as_generator

STATE_BUDGET = 10**5


def is_clique(G: Hypergraph, S) -> bool:
    """True iff every ``d``-subset of ``S`` is an edge (sets below ``d`` vertices qualify)."""
    S = sorted(int(v) for v in S)
    if any(v < 0 or v >= G.N for v in S):
        raise ParameterError("vertex out of range")
    if len(S) < G.d:
        return True
    return all(e in G.edge_set for e in combinations(S, G.d))


def extends_clique(G: Hypergraph, K, v: int) -> bool:
    """Whether ``K + {v}`` is a clique, given that ``K`` is one; checks only
    the edges through ``v``."""
    if len(K) < G.d - 1:
        return True
    es = G.edge_set
    return all(tuple(sorted(s + (v,))) in es for s in combinations(sorted(K), G.d - 1))


@dataclass(frozen=True)
class CliqueState:
    """Vertex set of the current clique; ``valid`` caches the last check."""

    K: frozenset
    valid: bool = True

    @classmethod
    def of(cls, G: Hypergraph, vertices=()) -> "CliqueState":
        K = frozenset(int(v) for v in vertices)
        return cls(K, is_clique(G, K))

    def recheck(self, G: Hypergraph) -> "CliqueState":
        return CliqueState(self.K, is_clique(G, self.K))

    def __len__(self):
        return len(self.K)


@dataclass(frozen=True)
class ChainConfig:
    fugacity: float = 1.0
    max_steps: int = 10**5
    target_size: int = 0

    def __post_init__(self):
        if not self.fugacity >= 1:
            raise ParameterError("fugacity must be >= 1")
        if self.max_steps < 0 or self.target_size < 0:
            raise ParameterError("max_steps and target_size must be nonnegative")


def _step(G, K: set, fugacity: float, g) -> None:
    """In-place transition on a mutable vertex set."""
    v = int(g.integers(G.N))
    if v in K:
        if g.random() < 1.0 / fugacity:
            K.remove(v)
    elif extends_clique(G, K, v):
        K.add(v)


def metropolis_step(G: Hypergraph, K: CliqueState, fugacity: float, rng=None) -> CliqueState:
    """One transition of the chain from clique ``K``."""
    if fugacity < 1:
        raise ParameterError("fugacity must be >= 1")
    if not K.valid:
        raise ContractError("state is not a clique")
    g = as_generator(rng)
    S = set(K.K)
    _step(G, S, fugacity, g)
    return CliqueState(frozenset(S), True)


def run_chain(G: Hypergraph, config: ChainConfig, initial: CliqueState | None = None, rng=None) -> dict:
    """Run until the clique has at least ``target_size`` vertices or
    ``max_steps`` transitions have been made."""
    g = as_generator(rng)
    if initial is None:
        initial = CliqueState(frozenset())
    if not initial.valid or not is_clique(G, initial.K):
        raise ContractError("initial state is not a clique")
    K = set(initial.K)
    steps = 0
    largest = len(K)
    while len(K) < config.target_size and steps < config.max_steps:
        _step(G, K, config.fugacity, g)
        steps += 1
        largest = max(largest, len(K))
    return {
        "hit": len(K) >= config.target_size,
        "steps": steps,
        "final_size": len(K),
        "max_size": largest,
        "final": sorted(K),
    }


def gateway_target(N: int, d: int, eps: float = 0.1) -> int:
    """Clique size ``m = 2k - ceil(((1 + 2 eps/3) (d-1)! log2 N)^(1/(d-1)))`` with
    ``k = ceil(((1 + 2 eps/3) d!/2 log2 N)^(1/(d-1)))``."""
    if N < 2 or d < 2:
        raise ParameterError("need N >= 2 and d >= 2")
    c = (1 + 2 * eps / 3) * math.log2(N)
    k = math.ceil((c * math.factorial(d) / 2) ** (1 / (d - 1)))
    return 2 * k - math.ceil((c * math.factorial(d - 1)) ** (1 / (d - 1)))


def enumerate_cliques(G: Hypergraph, budget: int = STATE_BUDGET) -> list:
    """All cliques (including the empty set) as sorted tuples, grown in increasing order."""
    out = [()]
    level = [()]
    while level:
        nxt = []
        for K in level:
            start = K[-1] + 1 if K else 0
            for v in range(start, G.N):
                if extends_clique(G, K, v):
                    nxt.append(K + (v,))
        out.extend(nxt)
        if len(out) > budget:
            raise BudgetError("too many cliques to enumerate", len(out), budget)
        level = nxt
    return out


def transition_matrix(G: Hypergraph, fugacity, states=None):
    """Exact sparse transition probabilities as ``{i: {j: Fraction}}`` over ``states``."""
    lam = Fraction(fugacity)
    if lam < 1:
        raise ParameterError("fugacity must be >= 1")
    states = enumerate_cliques(G) if states is None else states
    index = {s: i for i, s in enumerate(states)}
    inv_n = Fraction(1, G.N)
    P = {}
    for i, s in enumerate(states):
        row = {}
        S = set(s)
        for v in range(G.N):
            if v in S:
                t = tuple(sorted(S - {v}))
                row[index[t]] = row.get(index[t], 0) + inv_n / lam
            elif extends_clique(G, s, v):
                t = tuple(sorted(S | {v}))
                row[index[t]] = row.get(index[t], 0) + inv_n
        row[i] = row.get(i, 0) + (1 - sum(row.values()))
        P[i] = row
    return states, P


def stationary_check(G: Hypergraph, fugacity, budget: int = STATE_BUDGET) -> dict:
    """Verify detailed balance and stationarity of ``fugacity ** |K|`` exactly.

    Arithmetic is in rationals; the reported residuals are converted to float.
    """
    states = enumerate_cliques(G, budget)
    states, P = transition_matrix(G, fugacity, states)
    lam = Fraction(fugacity)
    w = [lam ** len(s) for s in states]
    Z = sum(w)
    pi = [x / Z for x in w]
    db = Fraction(0)
    piP = [Fraction(0)] * len(states)
    for i, row in P.items():
        for j, p in row.items():
            piP[j] += pi[i] * p
            back = P[j].get(i, Fraction(0))
            db = max(db, abs(pi[i] * p - pi[j] * back))
    stat = max(abs(a - b) for a, b in zip(piP, pi))
    db_f, stat_f = float(db), float(stat)
    return {
        "n_states": len(states),
        "detailed_balance_residual": db_f,
        "stationarity_residual": stat_f,
        "rows_sum_to_one": all(sum(r.values()) == 1 for r in P.values()),
        "ok": db_f <= 1e-12 and stat_f <= 1e-10,
    }


def hitting_time_experiment(Ns, d: int = 3, runs: int = 30, fugacity: float = 1.1, max_steps: int = 10**5,
                            rng=None, kappa_exponent: float = 0.3, eps: float = 0.1) -> list:
    """Median hitting time of the target size on planted-clique graphs, one row per ``N``.

    Each run draws a fresh graph with ``kappa = round(N ** kappa_exponent)``
    and starts from the empty clique; censored runs count as ``max_steps``.
    """
    from hoclust.models import sample_hypergraph
    from hoclust.rng import RngStream

    rows = []
    for a, N in enumerate(Ns):
        target = gateway_target(N, d, eps)
        kappa = int(round(N**kappa_exponent))
        times, hits = [], 0
        for r in range(runs):
            if isinstance(rng, RngStream):
                gg, gc = rng.child(a, r, 0), rng.child(a, r, 1)
            else:
                gg = gc = as_generator(rng)
            G = sample_hypergraph("hpc", N, d, gg, kappa=kappa)
            rec = run_chain(G, ChainConfig(fugacity, max_steps, target), None, gc)
            times.append(rec["steps"])
            hits += rec["hit"]
        rows.append({"N": N, "kappa": kappa, "target": target, "median_steps": float(np.median(times)),
                     "hits": hits, "runs": runs})
    return rows
