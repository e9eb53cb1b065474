"""Exhaustive enumeration helpers shared by scan tests and search algorithms.

Candidate vectors for one mode are stacked as rows of a matrix; contracting
the data tensor with one such matrix per mode gives every candidate score at
once.  Work is chunked along mode 0 so memory stays bounded.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np

from hoclust.errors import BudgetError
from hoclust.models import combinations_array
from hoclust.tensor import mode_product

DEFAULT_BUDGET = 10**8
_CHUNK_ENTRIES = 2_000_000


def subset_matrix(n: int, k: int) -> np.ndarray:
    """0/1 indicator rows of all ``k``-subsets of ``range(n)``, lexicographic."""
    combos = combinations_array(n, k)
    M = np.zeros((combos.shape[0], n))
    M[np.arange(combos.shape[0])[:, None], combos] = 1.0
    return M


def sign_support_matrix(n: int, t: int) -> np.ndarray:
    """Rows of every vector in ``{-1, 0, 1}^n`` with exactly ``t`` nonzeros.

    Ordered by support (lexicographic), then sign pattern with -1 before +1.
    """
    combos = combinations_array(n, t)
    signs = np.array(list(product((-1.0, 1.0), repeat=t))).reshape(-1, t)
    rows = np.zeros((combos.shape[0] * signs.shape[0], n))
    r = np.repeat(np.arange(rows.shape[0]), t).reshape(-1, t)
    cols = np.repeat(combos, signs.shape[0], axis=0)
    rows[r, cols] = np.tile(signs, (combos.shape[0], 1))
    return rows


def count_subset_tuples(n, k) -> int:
    return math.prod(math.comb(int(a), int(b)) for a, b in zip(n, k))


def check_budget(total: int, budget: int) -> None:
    if total > budget:
        raise BudgetError(f"{total} candidate tuples exceed the budget {budget}", total, budget)


def block_argmax(Y, mats, budget: int = DEFAULT_BUDGET):
    """Maximize ``Y x_1 u_1 ... x_d u_d`` over rows ``u_i`` of ``mats[i]``.

    Returns ``(value, rows)`` where ``rows`` is the tuple of maximizing row
    indices; ties go to the lexicographically first tuple.
    """
    sizes = [m.shape[0] for m in mats]
    check_budget(math.prod(sizes), budget)
    rest = math.prod(sizes[1:])
    chunk = max(1, _CHUNK_ENTRIES // max(rest, 1))
    best_val, best_idx = -np.inf, None
    for start in range(0, sizes[0], chunk):
        T = mode_product(Y, mats[0][start : start + chunk], 0)
        for z in range(1, len(mats)):
            T = mode_product(T, mats[z], z)
        flat = int(np.argmax(T))
        val = float(T.flat[flat])
        if val > best_val:
            best_val = val
            idx = np.unravel_index(flat, T.shape)
            best_idx = (start + int(idx[0]),) + tuple(int(i) for i in idx[1:])
    return best_val, best_idx
