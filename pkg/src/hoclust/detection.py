"""Hypothesis tests for a planted cluster: sum, scan and max statistics and
their combinations for CHC and ROHC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from hoclust.errors import ParameterError
from hoclust.models import gaussian_split
from hoclust.recovery import default_t_max, power_iterate, rohc_search, rohc_search_vectors
from hoclust.rng import as_generator
from hoclust.search import DEFAULT_BUDGET, block_argmax, check_budget, count_subset_tuples, subset_matrix
from hoclust.tensor import as_tensor, contract_all

REGIMES = ("statistical", "polynomial")


@dataclass
class TestOutcome:
    name: str
    reject: bool
    statistic: float
    threshold: float
    components: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def to_json(self) -> dict:
        def num(x):
            return float(x) if math.isfinite(x) else None

        return {
            "name": self.name,
            "reject": bool(self.reject),
            "statistic": num(self.statistic),
            "threshold": num(self.threshold),
            "components": {k: v.to_json() for k, v in self.components.items()},
        }


def _atomic(name, stat, thr):
    return TestOutcome(name, bool(stat > thr), float(stat), float(thr))


def _combined(name, a: TestOutcome, b: TestOutcome) -> TestOutcome:
    # statistic/threshold of a combination are reported as the first component's
    return TestOutcome(name, a.reject or b.reject, a.statistic, a.threshold, {a.name: a, b.name: b})


def _regime(regime: str) -> str:
    aliases = {"stat": "statistical", "poly": "polynomial"}
    regime = aliases.get(regime, regime)
    if regime not in REGIMES:
        raise ParameterError(f"unknown regime {regime!r}")
    return regime


def sum_statistic(Y) -> float:
    Y = as_tensor(Y)
    return float(Y.sum() / math.sqrt(Y.size))


def sum_test(Y, W: float) -> TestOutcome:
    if not math.isfinite(W):
        raise ParameterError("W must be finite")
    return _atomic("sum", sum_statistic(Y), W)


def scan_threshold(n, k) -> float:
    return math.sqrt(2 * math.log(count_subset_tuples(n, k)))


def scan_statistic(Y, k, budget: int = DEFAULT_BUDGET) -> float:
    Y = as_tensor(Y, 2)
    check_budget(count_subset_tuples(Y.shape, k), budget)
    mats = [subset_matrix(n, ki) for n, ki in zip(Y.shape, k)]
    value, _ = block_argmax(Y, mats, budget)
    return value / math.sqrt(math.prod(k))


def scan_test(Y, k, budget: int = DEFAULT_BUDGET) -> TestOutcome:
    Y = as_tensor(Y, 2)
    k = tuple(int(v) for v in k)
    if len(k) != Y.ndim or any(not 1 <= ki <= ni for ki, ni in zip(k, Y.shape)):
        raise ParameterError(f"bad sparsity {k} for shape {Y.shape}")
    thr = scan_threshold(Y.shape, k)
    return _atomic("scan", scan_statistic(Y, k, budget), thr)


def max_threshold(shape) -> float:
    return math.sqrt(2 * sum(math.log(n) for n in shape))


def max_test(Y) -> TestOutcome:
    Y = as_tensor(Y)
    return _atomic("max", float(Y.max()), max_threshold(Y.shape))


def default_W(shape, k, lam: float, c: float = 0.5) -> float:
    return c * lam * math.prod(k) / math.sqrt(math.prod(shape))


def chc_detect(Y, k, lam: float, W: float | None = None, regime: str = "statistical",
               budget: int = DEFAULT_BUDGET) -> TestOutcome:
    """Sum test OR scan test (statistical) / sum test OR max test (polynomial)."""
    Y = as_tensor(Y, 2)
    regime = _regime(regime)
    if W is None:
        W = default_W(Y.shape, k, lam)
    s = sum_test(Y, W)
    if regime == "statistical":
        return _combined("chc_statistical", s, scan_test(Y, k, budget))
    return _combined("chc_polynomial", s, max_test(Y))


def rohc_detect(Y, k, mu: float, c_thresh: float = 1.0, regime: str = "statistical", rng=None,
                t_max: int | None = None) -> TestOutcome:
    """Split-sample ROHC tests.

    Statistical: vectors from the exhaustive ROHC search on ``A``, statistic
    ``B x_1 u_1/sqrt(k_1) ... x_d u_d/sqrt(k_d)``.  Polynomial: unit vectors
    from spectral initialization plus power iteration on ``A``, statistic
    ``B x_1 u_1 ... x_d u_d``, OR-ed with the max test on ``Y``.  Both
    reject when the statistic is at least ``c_thresh * sqrt(max k)``.
    """
    Y = as_tensor(Y, 2)
    regime = _regime(regime)
    k = tuple(int(v) for v in k)
    g = as_generator(rng)
    A, B = gaussian_split(Y, g)
    thr = c_thresh * math.sqrt(max(k))
    if regime == "statistical":
        res = rohc_search(A, k, mu, g)
        if not res.ok:
            stat = -math.inf
        else:
            us = rohc_search_vectors(res, Y.shape)
            stat = contract_all(B, [u / math.sqrt(ki) for u, ki in zip(us, k)])
        return TestOutcome("rohc_statistical", bool(stat >= thr), float(stat), thr)
    if t_max is None:
        t_max = default_t_max(Y.shape)
    us = power_iterate(A, t_max)
    stat = contract_all(B, us)
    sing = TestOutcome("sing", bool(stat >= thr), float(stat), thr)
    return _combined("rohc_polynomial", sing, max_test(Y))
