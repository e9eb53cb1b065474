"""Support recovery: exhaustive CHC/ROHC search, entrywise thresholding,
tensor power iteration and aggregated SVD.

Failed recoveries (no marked tuple, no gap to cut) are returned as results
with ``ok=False`` so Monte-Carlo loops can count them as errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from hoclust.errors import BudgetError, ParameterError, ShapeError
from hoclust.models import Support, gaussian_split
from hoclust.rng import as_generator
from hoclust.search import DEFAULT_BUDGET, block_argmax, check_budget, count_subset_tuples, sign_support_matrix, subset_matrix
from hoclust.tensor import as_tensor, contract_all, matricize, top_singular_triple

ROHC_SEARCH_BUDGET = 5 * 10**7


@dataclass
class RecoveryResult:
    support: Support | None
    ok: bool = True
    diagnostics: dict = field(default_factory=dict)
    tuples: np.ndarray | None = None

    def matches(self, truth: Support) -> bool:
        """Exact recovery: every mode set equal (and, for entrywise
        estimates, the selected tuples are exactly the planted block)."""
        if not self.ok or self.support is None or truth is None:
            return False
        if self.support.sets != truth.sets:
            return False
        if self.tuples is not None:
            expect = math.prod(len(s) for s in truth.sets)
            if self.tuples.shape[0] != expect:
                return False
        return True

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "support": None if self.support is None else self.support.to_json(),
            "diagnostics": self.diagnostics,
        }


def failure(reason: str, **diag) -> RecoveryResult:
    return RecoveryResult(None, ok=False, diagnostics={"failure": reason, **diag})


# ------------------------------------------------------------------- gap cut


@dataclass(frozen=True)
class GapCut:
    groups: tuple[np.ndarray, ...]
    gaps: tuple[float, ...]
    signal: tuple[int, ...]

    def signal_indices(self) -> np.ndarray:
        return np.sort(np.concatenate([self.groups[g] for g in self.signal]))


def largest_gap_cut(values, num_gaps: int = 1) -> GapCut:
    """Sort ``values`` and cut at the ``num_gaps`` largest consecutive gaps.

    Groups are listed from smallest to largest values and hold original
    indices.  Equal gaps are resolved toward the smallest-value gap.  With
    one gap the group with the larger absolute mean is flagged as signal
    (the smaller group on a tie); with two gaps the two smaller groups are
    flagged (earlier group on a size tie).
    """
    x = np.asarray(values, dtype=float).ravel()
    if num_gaps not in (1, 2):
        raise ParameterError("num_gaps must be 1 or 2")
    if x.size < num_gaps + 1:
        raise ParameterError(f"need at least {num_gaps + 1} values")
    order = np.argsort(x, kind="stable")
    gaps = np.diff(x[order])
    pick = np.sort(np.argsort(-gaps, kind="stable")[:num_gaps])
    bounds = [0] + [int(p) + 1 for p in pick] + [x.size]
    groups = tuple(order[a:b] for a, b in zip(bounds[:-1], bounds[1:]))
    if num_gaps == 1:
        m = [abs(float(np.mean(x[g]))) for g in groups]
        if m[0] != m[1]:
            signal = (0,) if m[0] > m[1] else (1,)
        else:
            signal = (0,) if groups[0].size <= groups[1].size else (1,)
    else:
        by_size = sorted(range(3), key=lambda i: groups[i].size)
        signal = tuple(sorted(by_size[:2]))
    return GapCut(groups, tuple(float(gaps[p]) for p in pick), signal)


# ------------------------------------------------------------ exhaustive search


def chc_search(Y, k, budget: int = DEFAULT_BUDGET) -> RecoveryResult:
    """Support tuple with the largest block sum over all ``k_i``-subsets."""
    Y = as_tensor(Y, 2)
    k = tuple(int(v) for v in k)
    if len(k) != Y.ndim or any(not 1 <= ki <= ni for ki, ni in zip(k, Y.shape)):
        raise ParameterError(f"bad sparsity {k} for shape {Y.shape}")
    check_budget(count_subset_tuples(Y.shape, k), budget)
    mats = [subset_matrix(n, ki) for n, ki in zip(Y.shape, k)]
    value, rows = block_argmax(Y, mats, budget)
    sets = tuple(tuple(np.flatnonzero(m[r])) for m, r in zip(mats, rows))
    return RecoveryResult(Support(sets), diagnostics={"block_sum": value})


def rohc_marking(B, us, mu: float, k) -> bool:
    """Marking rule: for every mode, the coordinates where the contraction of
    ``B`` agrees in sign with ``u_i`` above the threshold are exactly ``S(u_i)``."""
    kbar = [int(np.count_nonzero(u)) for u in us]
    base = mu / (2 * math.sqrt(2) * math.sqrt(math.prod(k)))
    for i, u in enumerate(us):
        c = contract_all(B, us, skip=i)
        thr = base * math.prod(kbar[z] for z in range(len(us)) if z != i)
        if not np.array_equal(c * u >= thr, u != 0):
            return False
    return True


def rohc_search(Y, k, mu: float, rng=None, budget: int = ROHC_SEARCH_BUDGET, split=None) -> RecoveryResult:
    """Exhaustive sign-support search with a marking step on an independent copy.

    ``split`` may pass a precomputed ``(A, B)`` pair; otherwise ``Y`` is split
    with fresh noise from ``rng``.
    """
    Y = as_tensor(Y, 2)
    k = tuple(int(v) for v in k)
    if len(k) != Y.ndim or any(not 1 <= ki <= ni for ki, ni in zip(k, Y.shape)):
        raise ParameterError(f"bad sparsity {k} for shape {Y.shape}")
    A, B = split if split is not None else gaussian_split(Y, rng)
    total = math.prod(sum(math.comb(n, t) * 2**t for t in range(1, ki + 1)) for n, ki in zip(Y.shape, k))
    if total > budget:
        raise BudgetError(f"{total} sign-support tuples exceed the budget {budget}", total, budget)
    mats = [[sign_support_matrix(n, t) for t in range(1, ki + 1)] for n, ki in zip(Y.shape, k)]
    best, n_marked = None, 0
    for kbar in product(*[range(1, ki + 1) for ki in k]):
        cand = [mats[i][t - 1] for i, t in enumerate(kbar)]
        value, rows = block_argmax(A, cand, budget)
        us = [c[r] for c, r in zip(cand, rows)]
        if rohc_marking(B, us, mu, k):
            n_marked += 1
            if best is None or sum(kbar) > best[0]:
                best = (sum(kbar), us, value)
    if best is None:
        return failure("no_marked_tuple", marked=0)
    us = best[1]
    sets = tuple(tuple(np.flatnonzero(u)) for u in us)
    diag = {"marked": n_marked, "signs": [u[u != 0].tolist() for u in us], "score": best[2]}
    return RecoveryResult(Support(sets), diagnostics=diag)


def rohc_search_vectors(result: RecoveryResult, shape) -> list[np.ndarray]:
    """Rebuild the selected sign-support vectors from a search result."""
    out = []
    for s, signs, n in zip(result.support.sets, result.diagnostics["signs"], shape):
        u = np.zeros(n)
        u[list(s)] = signs
        out.append(u)
    return out


# ---------------------------------------------------------------- thresholding


def threshold_level(shape) -> float:
    return math.sqrt(2 * (len(shape) + 1) * math.log(max(shape)))


def threshold_recover(Y) -> RecoveryResult:
    """Keep every entry with ``|Y| >= sqrt(2 (d+1) log n)``, ``n = max n_i``."""
    Y = as_tensor(Y, 2)
    thr = threshold_level(Y.shape)
    tuples = np.argwhere(np.abs(Y) >= thr)
    sets = tuple(tuple(np.unique(tuples[:, z])) for z in range(Y.ndim))
    return RecoveryResult(Support(sets), diagnostics={"threshold": thr, "count": int(tuples.shape[0])}, tuples=tuples)


# ------------------------------------------------------------ power iteration


def default_t_max(shape, C: float = 5.0) -> int:
    return max(1, math.ceil(C * math.log(max(shape))))


def power_iterate(A, t_max: int) -> list[np.ndarray]:
    """Spectral initialization from each unfolding, then ``t_max`` rounds of
    normalized alternating contractions (updated vectors used immediately)."""
    if t_max < 0:
        raise ParameterError("t_max must be non-negative")
    us = [top_singular_triple(matricize(A, i)).left for i in range(A.ndim)]
    for _ in range(t_max):
        for i in range(A.ndim):
            w = contract_all(A, us, skip=i)
            nw = np.linalg.norm(w)
            if nw == 0:
                break
            us[i] = w / nw
    return us


def power_iteration_recover(Y, problem: str = "chc", t_max: int | None = None, rng=None,
                            split=None) -> RecoveryResult:
    Y = as_tensor(Y, 2)
    if problem not in ("chc", "rohc"):
        raise ParameterError(f"unknown problem {problem!r}")
    if t_max is None:
        t_max = default_t_max(Y.shape)
    A, B = split if split is not None else gaussian_split(Y, rng)
    us = power_iterate(A, t_max)
    sets, gaps = [], []
    for i in range(Y.ndim):
        v = contract_all(B, us, skip=i)
        if np.ptp(v) == 0:
            return failure("no_gap", mode=i, u=us)
        cut = largest_gap_cut(v, 1 if problem == "chc" else 2)
        sets.append(tuple(cut.signal_indices()))
        gaps.append(list(cut.gaps))
    return RecoveryResult(Support(tuple(sets)), diagnostics={"t_max": t_max, "gaps": gaps, "u": us})


# -------------------------------------------------------------- aggregated SVD


def aggregate_pair(Y, i: int, j: int) -> np.ndarray:
    """Matrix of subtensor sums over all modes except ``i`` and ``j``,
    scaled by the square root of their size product."""
    others = [z for z in range(Y.ndim) if z not in (i, j)]
    M = Y.sum(axis=tuple(others))
    if i > j:
        M = M.T
    return M / math.sqrt(math.prod(Y.shape[z] for z in others))


def aggregated_svd_recover(Y, rng=None) -> RecoveryResult:
    Y = as_tensor(Y, 2)
    if Y.ndim < 3:
        raise ShapeError("aggregated SVD needs an order >= 3 tensor")
    g = as_generator(rng)
    sets, gaps, partners = [], [], []
    for i in range(Y.ndim):
        others = [j for j in range(Y.ndim) if j != i]
        istar = min(others, key=lambda j: (Y.shape[j], j))
        M = aggregate_pair(Y, i, istar)
        if not np.any(M):
            return failure("degenerate_aggregate", mode=i)
        Amat, Bmat = gaussian_split(M, g)
        v = top_singular_triple(Amat).right
        proj = Bmat @ v
        if np.ptp(proj) == 0:
            return failure("no_gap", mode=i)
        cut = largest_gap_cut(proj, 1)
        sets.append(tuple(cut.signal_indices()))
        gaps.append(cut.gaps[0])
        partners.append(istar)
    return RecoveryResult(Support(tuple(sets)), diagnostics={"gaps": gaps, "partners": partners})
