"""Average-case reductions from planted hypergraph problems to tensor models.

The building blocks are the rejection kernel (Bernoulli inputs to
approximately Gaussian outputs), tensor reflection cloning, and an orthogonal
mixing step that turns a symmetric tensor into one with independent entries.
They are combined into three hypergraph-to-tensor maps, plus two recovery
procedures on hypergraphs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, permutations

import numpy as np

from hoclust.errors import BudgetError, ContractError, ParameterError
from hoclust.models import Hypergraph, Support, adjacency_block, combinations_array, pad_to_even
from hoclust.recovery import RecoveryResult, aggregated_svd_recover, failure
from hoclust.rng import RngStream, as_generator
from hoclust.tensor import mode_product

RK_MAX_ITERATIONS = 10**6


@dataclass(frozen=True)
class RkParams:
    """Rejection kernel parameters: Bern(p) maps to N(xi, 1), Bern(q) to N(0, 1)."""

    p: float
    q: float
    xi: float
    iterations: int

    def __post_init__(self):
        if not (0 <= self.q < self.p <= 1):
            raise ParameterError("need 0 <= q < p <= 1")
        if not (self.xi > 0 and math.isfinite(self.xi)):
            raise ParameterError("xi must be positive and finite")
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise ParameterError("iterations must be a nonnegative integer")
        if self.iterations > RK_MAX_ITERATIONS:
            raise BudgetError("rejection kernel iteration count too large", int(self.iterations), RK_MAX_ITERATIONS)


def _accept_probability(z, x, prm: RkParams):
    """Acceptance probability of a proposal ``z`` drawn for input bit ``x``."""
    # log f(z)/g(z) with f = N(xi, 1) and g = N(0, 1)
    lr = prm.xi * z - 0.5 * prm.xi**2
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if np.ndim(x) == 0:
            x = np.full(np.shape(z), x)
        out = np.zeros(np.shape(z))
        z0 = x == 0
        # x = 0: accept w.p. 1 - q f / (p g) when p g >= q f
        if prm.p > 0:
            r0 = prm.q / prm.p * np.exp(lr[z0])
            out[z0] = np.where(r0 <= 1, 1 - r0, 0.0)
        # x = 1: accept w.p. 1 - (1-p) g / ((1-q) f) when (1-q) f >= (1-p) g
        r1 = (1 - prm.p) / (1 - prm.q) * np.exp(-lr[~z0])
        out[~z0] = np.where(r1 <= 1, 1 - r1, 0.0)
    return out


def rejection_kernel(x: int, params: RkParams, rng=None) -> float:
    """Single draw of the rejection kernel for input bit ``x``; 0.0 if nothing is accepted."""
    if x not in (0, 1):
        raise ParameterError("input must be 0 or 1")
    g = as_generator(rng)
    mean = params.xi if x == 1 else 0.0
    for _ in range(int(params.iterations)):
        z = mean + g.standard_normal()
        if g.random() < _accept_probability(np.array([z]), x, params)[0]:
            return float(z)
    return 0.0


def rejection_kernel_array(x, params: RkParams, rng=None) -> np.ndarray:
    """Entrywise rejection kernel over a 0/1 array, drawing only for pending entries.

    Consumes one generator sequentially, so the result depends only on the
    generator state and ``x``.
    """
    g = as_generator(rng)
    x = np.asarray(x)
    if x.size and not np.all((x == 0) | (x == 1)):
        raise ParameterError("inputs must be 0 or 1")
    xb = x.astype(np.int8).ravel()
    out = np.zeros(xb.shape)
    pending = np.arange(xb.size)
    for _ in range(int(params.iterations)):
        if pending.size == 0:
            break
        xp = xb[pending]
        z = g.standard_normal(pending.size) + params.xi * xp
        acc = g.random(pending.size) < _accept_probability(z, xp, params)
        out[pending[acc]] = z[acc]
        pending = pending[~acc]
    return out.reshape(x.shape)


# Indirection so tests can force the kernel output.
_rk_array = rejection_kernel_array


def _aux_normals(g, shape) -> np.ndarray:
    """Auxiliary N(0,1) draws used by the mixing step."""
    return g.standard_normal(shape)


# ---------------------------------------------------------------- cloning

def reflection_matrix(n: int, normalized: bool = True) -> np.ndarray:
    """``A + B`` (divided by sqrt 2 when ``normalized``), ``A = diag(I, -I)``, ``B`` the anti-diagonal."""
    if n < 2 or n % 2:
        raise ParameterError("reflection matrix needs an even n >= 2")
    h = n // 2
    M = np.diag(np.concatenate([np.ones(h), -np.ones(h)]))
    M[np.arange(n), n - 1 - np.arange(n)] += 1.0
    return M / math.sqrt(2) if normalized else M


def reflection_clone(W, ell: int, rng=None, return_perms: bool = False):
    """``ell`` rounds of: one uniform permutation applied to every mode, then
    every mode multiplied by the normalized reflection matrix.

    With ``return_perms`` the list of per-round permutations is returned too.
    """
    W = np.asarray(W, dtype=float)
    if ell < 0:
        raise ParameterError("ell must be nonnegative")
    n = W.shape[0] if W.ndim else 0
    if W.ndim == 0 or any(s != n for s in W.shape):
        raise ParameterError("reflection cloning needs all dims equal")
    if ell and n % 2:
        raise ParameterError("reflection cloning needs an even dimension; pad first")
    g = as_generator(rng)
    perms = []
    R = reflection_matrix(n) if ell else None
    for _ in range(ell):
        sigma = g.permutation(n)
        perms.append(sigma)
        W = W[np.ix_(*([sigma] * W.ndim))]
        for z in range(W.ndim):
            W = mode_product(W, R, z)
    return (W, perms) if return_perms else W


def clone_vector(u, perms) -> np.ndarray:
    """Track a vector through cloning rounds: ``u <- (A + B) u^sigma`` (unnormalized)."""
    u = np.asarray(u, dtype=float)
    for sigma in perms:
        u = reflection_matrix(u.shape[0], normalized=False) @ u[sigma]
    return u


# ---------------------------------------------------------------- mixing

def mixing_matrix(d: int) -> np.ndarray:
    """Householder reflection of size ``d!`` sending ``e_1`` to the constant unit vector."""
    m = math.factorial(d)
    c = np.full(m, 1 / math.sqrt(m))
    v = -c
    v[0] += 1.0
    nv = v @ v
    H = np.eye(m) if nv < 1e-300 else np.eye(m) - 2.0 * np.outer(v, v) / nv
    if not (np.allclose(H @ H.T, np.eye(m), atol=1e-12) and np.allclose(H[:, 0], c, atol=1e-12)):
        raise ContractError("mixing matrix construction failed")
    return H


def sorted_offdiagonal_indices(n: int, d: int) -> np.ndarray:
    """Nondecreasing index tuples in lex order, excluding all-equal tuples."""
    rows = combinations_array(n + d - 1, d) - np.arange(d)
    if d > 1:
        rows = rows[rows[:, 0] != rows[:, -1]]
    return rows


def _is_symmetric(W) -> bool:
    scale = max(float(np.abs(W).max(initial=0.0)), 1.0)
    return all(np.allclose(W, np.transpose(W, p), rtol=0, atol=1e-12 * scale)
               for p in permutations(range(W.ndim)))


def gaussianize_symmetric(W, xi: float | None = None, rng=None) -> np.ndarray:
    """Mix each class of symmetric copies with fresh auxiliary Gaussians.

    For every nondecreasing non-diagonal index ``i`` with ``D`` distinct
    permutations, the copies (lex order) receive the first ``D`` rows of
    :func:`mixing_matrix` applied to ``(W_i, B1_i, ..., B_{d!-1,i})``.
    All-equal entries become fresh N(0,1).  ``xi`` is accepted for interface
    symmetry and not used.
    """
    W = np.asarray(W, dtype=float)
    d = W.ndim
    if d < 1 or any(s != W.shape[0] for s in W.shape):
        raise ParameterError("need a cubical tensor")
    if not _is_symmetric(W):
        raise ContractError("input tensor is not symmetric")
    n = W.shape[0]
    g = as_generator(rng)
    H = mixing_matrix(d)
    m = H.shape[0]
    out = np.empty_like(W)
    diag = np.arange(n)
    out[(diag,) * d] = g.standard_normal(n)
    S = sorted_offdiagonal_indices(n, d)
    if S.shape[0] == 0:
        return out
    vec = np.empty((S.shape[0], m))
    vec[:, 0] = W[tuple(S.T)]
    vec[:, 1:] = _aux_normals(g, (S.shape[0], m - 1))
    mixed = vec @ H.T
    # flat keys of all permuted copies; sort per row and keep first occurrences
    strides = np.array([n ** (d - 1 - j) for j in range(d)], dtype=np.int64)
    keys = np.stack([S[:, list(p)] @ strides for p in permutations(range(d))], axis=1)
    keys.sort(axis=1)
    distinct = np.ones_like(keys, dtype=bool)
    distinct[:, 1:] = keys[:, 1:] != keys[:, :-1]
    rank = np.cumsum(distinct, axis=1) - 1
    rows, cols = np.nonzero(distinct)
    out.ravel()[keys[rows, cols]] = mixed[rows, rank[rows, cols]]
    return out


# ---------------------------------------------------------------- maps

@dataclass
class ReductionReport:
    """Output tensor plus effective and implied parameters and provenance."""

    tensor: np.ndarray
    params: dict
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"shape": list(self.tensor.shape), "params": self.params, "provenance": self.provenance}


def _lineage(rng):
    return {"rng": rng.lineage()} if isinstance(rng, RngStream) else {"rng": None}


def _kappa(G: Hypergraph):
    if G.planted and "K" in G.planted:
        return len(G.planted["K"])
    return None


def _symmetric_rk_tensor(G: Hypergraph, prm: RkParams, g) -> np.ndarray:
    """Symmetric tensor of rejection-kernel outputs on the edge indicators
    (tuples with repeated coordinates count as non-edges); diagonal left 0."""
    n, d = G.N, G.d
    S = sorted_offdiagonal_indices(n, d)
    x = G.has_edges(S).astype(np.int8)
    vals = _rk_array(x, prm, g)
    W = np.zeros((n,) * d)
    for p in permutations(range(d)):
        W[tuple(S[:, list(p)].T)] = vals
    return W


def _permute_trailing_modes(W, g):
    perms = [g.permutation(W.shape[z]) for z in range(1, W.ndim)]
    return W[np.ix_(np.arange(W.shape[0]), *perms)], perms


def hpc_xi(n: int, d: int) -> float:
    return math.log(2) / (2 * math.sqrt(2 * (d + 1) * math.log(n) + 2 * math.log(2)))


def hpc_to_rohc(G: Hypergraph, ell: int, rng=None) -> ReductionReport:
    """Map a planted-clique hypergraph to a rank-one tensor clustering instance."""
    n, d = G.N, G.d
    if n < 2 or d < 2:
        raise ParameterError("need N >= 2 and d >= 2")
    g = as_generator(rng)
    xi = hpc_xi(n, d)
    T = math.ceil(2 * (d + 1) * math.log2(n))
    prm = RkParams(1.0, 0.5, xi, T)
    W = _symmetric_rk_tensor(G, prm, g)
    W = gaussianize_symmetric(W, xi, g)
    W, perms = _permute_trailing_modes(W, g)
    padded = W.shape[0] % 2 == 1 and ell > 0
    if padded:
        W = pad_to_even(W, g)
    W, clone_perms = reflection_clone(W, ell, g, return_perms=True)
    params = {"map": "hpc-rohc", "xi": xi, "iterations": T, "ell": int(ell), "padded": padded}
    kappa = _kappa(G)
    if kappa is not None:
        params["mu"] = xi * kappa ** (d / 2) / math.sqrt(math.factorial(d))
        params["k"] = 2**ell * kappa
    return ReductionReport(W, params, {"graph": G.fingerprint(), **_lineage(rng)})


def hpc_to_chc_detection(G: Hypergraph, n_target: int, ell: int, rng=None) -> ReductionReport:
    """Map a planted-clique hypergraph on ``d * n_target * ell`` vertices to a
    constant tensor clustering detection instance of shape ``(n_target,)*d``."""
    d = G.d
    if n_target < 1 or ell < 1 or G.N != d * n_target * ell:
        raise ParameterError("need N = d * n_target * ell")
    g = as_generator(rng)
    nl = n_target * ell
    xi = hpc_xi(nl, d) if nl > 1 else math.log(2) / (2 * math.sqrt(2 * math.log(2)))
    T = math.ceil(2 * (d + 1) * math.log2(nl)) if nl > 1 else 0
    prm = RkParams(1.0, 0.5, xi, T)
    A0 = adjacency_block(G, [range(j * nl, (j + 1) * nl) for j in range(d)])
    B = _rk_array(A0, prm, g)
    # entry (j*n + i) of each mode is summed over j
    Y = B.reshape((ell, n_target) * d).sum(axis=tuple(range(0, 2 * d, 2))) / ell ** (d / 2)
    params = {"map": "hpc-chc", "xi": xi, "iterations": T, "ell": int(ell), "lam": xi / ell ** (d / 2)}
    kappa = _kappa(G)
    if kappa is not None:
        params["k"] = kappa / (4 * d)
    return ReductionReport(Y, params, {"graph": G.fingerprint(), **_lineage(rng)})


def hpds_to_chc(G: Hypergraph, rho: float, rng=None) -> ReductionReport:
    """Map a planted dense subgraph with densities ``1/2 + rho`` and ``1/2``
    to a constant tensor clustering recovery instance."""
    n, d = G.N, G.d
    if not 0 < rho <= 0.5:
        raise ParameterError("rho must be in (0, 1/2]")
    if n < 2 or d < 2:
        raise ParameterError("need N >= 2 and d >= 2")
    g = as_generator(rng)
    xi = math.log(1 + 2 * rho) / (2 * math.sqrt(2 * (d + 1) * math.log(n) + 2 * math.log(2)))
    T_real = 2 * (d + 1) * math.log(n) / math.log(1 + 2 * rho)
    if T_real > RK_MAX_ITERATIONS:
        raise BudgetError("rejection kernel iteration count too large", math.ceil(T_real), RK_MAX_ITERATIONS)
    T = math.ceil(T_real)
    prm = RkParams(0.5 + rho, 0.5, xi, T)
    W = _symmetric_rk_tensor(G, prm, g)
    W = gaussianize_symmetric(W, xi, g)
    W, perms = _permute_trailing_modes(W, g)
    params = {"map": "hpds-chc", "xi": xi, "iterations": T, "rho": float(rho),
              "lam": xi / math.sqrt(math.factorial(d))}
    kappa = _kappa(G)
    if kappa is not None:
        params["k"] = kappa
    return ReductionReport(W, params, {"graph": G.fingerprint(), **_lineage(rng)})


# ---------------------------------------------------------------- recovery on graphs

def hpds_blocks(N: int, d: int):
    """Vertex groups for the off-diagonal block: ``d`` runs of ``N // d``, the last one extended to ``N``."""
    m = N // d
    if m == 0:
        raise ParameterError("need N >= d")
    return [np.arange(j * m, (j + 1) * m if j < d - 1 else N) for j in range(d)]


def hpds_recover(A, q2: float, rng=None, d: int | None = None) -> RecoveryResult:
    """Estimate the planted dense vertex set from an adjacency tensor (or a
    :class:`Hypergraph`) by aggregated SVD on the standardized off-diagonal block.

    The result's support holds a single set of original vertex ids.
    """
    if not 0 < q2 < 1:
        raise ParameterError("q2 must be in (0, 1)")
    if isinstance(A, Hypergraph):
        blocks = hpds_blocks(A.N, A.d)
        Ab = adjacency_block(A, blocks)
    else:
        A = np.asarray(A, dtype=float)
        N = A.shape[0]
        blocks = hpds_blocks(N, A.ndim)
        Ab = A[np.ix_(*blocks)]
    Z = (Ab - q2) / math.sqrt(q2 * (1 - q2))
    res = aggregated_svd_recover(Z, rng)
    if not res.ok:
        return failure(res.diagnostics.get("reason", "aggregated_svd_failed"), **res.diagnostics)
    K = sorted(int(blocks[j][i]) for j, S in enumerate(res.support.sets) for i in S)
    return RecoveryResult(Support((tuple(K),)), True, {"per_mode": [sorted(s) for s in res.support.sets]})


def _detector_says_null(out) -> bool:
    if isinstance(out, str):
        if out not in ("null", "planted"):
            raise ParameterError(f"detector returned {out!r}")
        return out == "null"
    return not bool(out)


def hpc_recover_via_detection(G: Hypergraph, detector) -> set:
    """Recover a planted clique with a detector.

    For each ``(d-1)``-subset ``v``, drop ``v`` and its common completions
    ``X = {x : v + {x} is an edge}``; if the detector calls the remainder
    null, the vertices of ``v`` join the estimate.  ``detector`` maps a
    :class:`Hypergraph` to ``"null"``/``"planted"`` (or a bool meaning planted).
    Residual graphs carry ``labels`` with the original vertex ids.
    """
    d, N = G.d, G.N
    Q: set = set()
    others = np.arange(N)
    for v in combinations(range(N), d - 1):
        cand = np.setdiff1d(others, v)
        tuples = np.concatenate([np.tile(np.array(v, dtype=np.int64), (cand.size, 1)), cand[:, None]], axis=1)
        X = cand[G.has_edges(tuples)] if cand.size else cand
        Gx = G.remove_vertices(np.concatenate([np.array(v, dtype=np.int64), X]))
        if _detector_says_null(detector(Gx)):
            Q.update(int(u) for u in v)
    return Q


def max_clique_size(G: Hypergraph, cap: int | None = None) -> int:
    """Largest clique size by exhaustive growth; sets below ``d`` vertices count as cliques."""
    d, N = G.d, G.N
    best = min(N, d - 1)
    if N < d:
        return N
    cap = N if cap is None else cap
    edges = G.edges
    # extend cliques one vertex at a time, keeping them in increasing order
    level = [tuple(e) for e in edges.tolist()]
    size = d if level else best
    while level and size < cap:
        nxt = []
        for K in level:
            for x in range(K[-1] + 1, N):
                if all(G.has_edge(s + (x,)) for s in combinations(K, d - 1)):
                    nxt.append(K + (x,))
        if not nxt:
            break
        level = nxt
        size += 1
    return size


def clique_scan_detector(size: int):
    """Detector calling ``planted`` iff the graph has a clique on ``size`` vertices."""
    def detect(G: Hypergraph) -> str:
        return "planted" if max_clique_size(G, cap=size) >= size else "null"

    return detect


def oracle_detector(K):
    """Detector told the planted set: ``planted`` iff some vertex of ``K`` survives."""
    K = set(int(v) for v in K)

    def detect(G: Hypergraph) -> str:
        ids = G.original_ids(range(G.N))
        return "planted" if K.intersection(ids.tolist()) else "null"

    return detect
