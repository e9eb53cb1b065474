"""Samplers for planted-cluster tensors and random hypergraphs.

CHC (constant high-order clustering) plants ``lam * 1_{I_1} o ... o 1_{I_d}``
in iid N(0,1) noise; ROHC (rank-one high-order clustering) plants
``mu * v_1 o ... o v_d`` with sparse near-uniform unit vectors ``v_i``.
Index sets and vertex ids are 0-based.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from hoclust.errors import BudgetError, ParameterError
from hoclust.rng import as_generator
from hoclust.tensor import outer_product

ADJACENCY_BUDGET = 10**8


def _int_tuple(x, name):
    t = tuple(int(v) for v in np.atleast_1d(x))
    if not t:
        raise ParameterError(f"{name} must be nonempty")
    return t


@dataclass(frozen=True)
class ChcParams:
    n: tuple[int, ...]
    k: tuple[int, ...]
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "n", _int_tuple(self.n, "n"))
        object.__setattr__(self, "k", _int_tuple(self.k, "k"))
        _check_nk(self.n, self.k)
        if not math.isfinite(self.lam) or self.lam < 0:
            raise ParameterError("lam must be finite and non-negative")


@dataclass(frozen=True)
class RohcParams:
    n: tuple[int, ...]
    k: tuple[int, ...]
    mu: float
    magnitude_bound: float = 2.0
    style: str = "equal"

    def __post_init__(self):
        object.__setattr__(self, "n", _int_tuple(self.n, "n"))
        object.__setattr__(self, "k", _int_tuple(self.k, "k"))
        _check_nk(self.n, self.k)
        if not math.isfinite(self.mu) or self.mu < 0:
            raise ParameterError("mu must be finite and non-negative")
        if not self.magnitude_bound > 1:
            raise ParameterError("magnitude_bound must exceed 1")
        if self.style not in ("equal", "perturbed"):
            raise ParameterError(f"unknown style {self.style!r}")


def _check_nk(n, k):
    if len(n) != len(k):
        raise ParameterError("n and k must have the same length")
    if len(n) < 2:
        raise ParameterError("tensor order must be at least 2")
    for ni, ki in zip(n, k):
        if ni < 1 or not 1 <= ki <= ni:
            raise ParameterError(f"need 1 <= k_i <= n_i, got k={k}, n={n}")


@dataclass(frozen=True)
class Support:
    """Per-mode index sets, each stored as a sorted tuple."""

    sets: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(tuple(sorted(int(i) for i in s)) for s in self.sets))

    @property
    def d(self):
        return len(self.sets)

    def sizes(self):
        return tuple(len(s) for s in self.sets)

    def indicators(self, n) -> list[np.ndarray]:
        out = []
        for s, ni in zip(self.sets, n):
            v = np.zeros(ni)
            v[list(s)] = 1.0
            out.append(v)
        return out

    def to_json(self):
        return [list(s) for s in self.sets]

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(tuple(s) for s in obj))


def sample_sparse_unit_vector(n: int, k: int, style: str = "equal", rng=None, magnitude_bound: float = 2.0):
    """Unit vector with exactly ``k`` nonzeros on a uniformly random support.

    ``equal``: magnitudes ``k^{-1/2}`` with random signs.  ``perturbed``:
    magnitudes uniform on ``[1, 1.5] k^{-1/2}`` before normalization,
    resampled until the ratio of largest to smallest magnitude is at most
    ``magnitude_bound``.
    """
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= n, got k={k}, n={n}")
    g = as_generator(rng)
    support = np.sort(g.choice(n, size=k, replace=False))
    signs = g.choice(np.array([-1.0, 1.0]), size=k)
    if style == "equal":
        mags = np.full(k, 1.0 / math.sqrt(k))
    elif style == "perturbed":
        while True:
            mags = g.uniform(1.0, 1.5, size=k) / math.sqrt(k)
            mags /= np.linalg.norm(mags)
            if mags.max() <= magnitude_bound * mags.min():
                break
    else:
        raise ParameterError(f"unknown style {style!r}")
    v = np.zeros(n)
    v[support] = signs * mags
    return v


def _random_support(n, k, g) -> Support:
    return Support(tuple(tuple(np.sort(g.choice(ni, size=ki, replace=False))) for ni, ki in zip(n, k)))


def sample_chc(params: ChcParams, hypothesis: str = "planted", rng=None):
    """Draw ``(Y, support)``; ``support`` is None under the null.

    Noise is drawn before the support, so a planted draw minus its signal
    equals the null draw from the same stream.
    """
    g = as_generator(rng)
    Y = g.standard_normal(params.n)
    if hypothesis == "null":
        return Y, None
    if hypothesis != "planted":
        raise ParameterError(f"unknown hypothesis {hypothesis!r}")
    S = _random_support(params.n, params.k, g)
    Y[np.ix_(*[list(s) for s in S.sets])] += params.lam
    return Y, S


def sample_rohc(params: RohcParams, hypothesis: str = "planted", rng=None, return_vectors: bool = False):
    """Draw ``(Y, support)`` (plus the planted vectors if requested)."""
    g = as_generator(rng)
    Y = g.standard_normal(params.n)
    if hypothesis == "null":
        return (Y, None, None) if return_vectors else (Y, None)
    if hypothesis != "planted":
        raise ParameterError(f"unknown hypothesis {hypothesis!r}")
    vs = [
        sample_sparse_unit_vector(ni, ki, params.style, g, params.magnitude_bound)
        for ni, ki in zip(params.n, params.k)
    ]
    Y += params.mu * outer_product(*vs)
    S = Support(tuple(tuple(np.flatnonzero(v)) for v in vs))
    return (Y, S, vs) if return_vectors else (Y, S)


def gaussian_split(Y, rng=None):
    """Return ``A = (Y + Z)/sqrt 2`` and ``B = (Y - Z)/sqrt 2`` for fresh noise ``Z``."""
    g = as_generator(rng)
    Y = np.asarray(Y, dtype=float)
    Z = g.standard_normal(Y.shape)
    return (Y + Z) / math.sqrt(2), (Y - Z) / math.sqrt(2)


# ---------------------------------------------------------------- hypergraphs


def combinations_array(N: int, r: int, start: int = 0) -> np.ndarray:
    """All sorted ``r``-subsets of ``range(start, N)`` in lexicographic order."""
    if r == 0:
        return np.zeros((1, 0), dtype=np.int64)
    if N - start < r:
        return np.zeros((0, r), dtype=np.int64)
    # build column by column: rows ending in value l extend with l+1..N-1
    arr = np.arange(start, N, dtype=np.int64)[:, None]
    for _ in range(r - 1):
        last = arr[:, -1]
        counts = N - 1 - last
        rep = np.repeat(arr, counts, axis=0)
        offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        nxt = np.repeat(last, counts) + 1 + offsets
        arr = np.column_stack([rep, nxt])
    return arr


class Hypergraph:
    """Simple ``d``-uniform hypergraph on vertices ``0..N-1``.

    Edges are stored as sorted, unique base-``N`` integer keys of their
    sorted vertex tuples; ``edges`` decodes them to an ``(M, d)`` array in
    lexicographic order.  ``labels`` optionally maps vertex ids to ids in a
    parent graph (set when vertices are deleted).
    """

    def __init__(self, d: int, N: int, edges=None, planted: dict | None = None, *, keys=None, labels=None):
        if d < 1 or N < 0:
            raise ParameterError("need d >= 1 and N >= 0")
        if N ** d >= 2**63:
            raise ParameterError("graph too large for 64-bit edge keys")
        self.d = int(d)
        self.N = int(N)
        self.planted = planted
        self.labels = None if labels is None else np.asarray(labels, dtype=np.int64)
        self._set = None
        self._edges = None
        if keys is not None:
            self._keys = np.asarray(keys, dtype=np.int64)
            return
        e = np.asarray(edges if edges is not None else np.zeros((0, d)), dtype=np.int64).reshape(-1, self.d)
        if e.size and (e.min() < 0 or e.max() >= self.N):
            raise ParameterError("edge vertex out of range")
        e = np.sort(e, axis=1)
        if self.d > 1 and e.size and np.any(np.diff(e, axis=1) == 0):
            raise ParameterError("edges must have distinct vertices")
        self._keys = np.unique(self.encode(e))

    def encode(self, tuples) -> np.ndarray:
        """Base-N key of each (already sorted) row."""
        tuples = np.asarray(tuples, dtype=np.int64)
        key = np.zeros(tuples.shape[:-1], dtype=np.int64)
        for j in range(self.d):
            key = key * max(self.N, 1) + tuples[..., j]
        return key

    def decode(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        out = np.empty(keys.shape + (self.d,), dtype=np.int64)
        rem = keys.copy()
        for j in range(self.d - 1, -1, -1):
            out[..., j] = rem % max(self.N, 1)
            rem //= max(self.N, 1)
        return out

    @property
    def keys(self) -> np.ndarray:
        return self._keys

    @property
    def edges(self) -> np.ndarray:
        if self._edges is None:
            self._edges = self.decode(self._keys)
        return self._edges

    @property
    def n_edges(self) -> int:
        return int(self._keys.size)

    def has_edges(self, tuples) -> np.ndarray:
        """Vectorized membership for an ``(..., d)`` array of vertex tuples.

        Tuples need not be sorted; tuples with repeated vertices are never edges.
        """
        t = np.sort(np.asarray(tuples, dtype=np.int64), axis=-1)
        distinct = np.all(np.diff(t, axis=-1) != 0, axis=-1) if self.d > 1 else np.ones(t.shape[:-1], bool)
        keys = self.encode(t)
        if self._keys.size == 0:
            return np.zeros(keys.shape, dtype=bool)
        pos = np.minimum(np.searchsorted(self._keys, keys), self._keys.size - 1)
        return (self._keys[pos] == keys) & distinct

    def has_edge(self, e) -> bool:
        e = tuple(sorted(int(v) for v in e))
        if len(e) != self.d:
            return False
        return e in self.edge_set

    @property
    def edge_set(self) -> set:
        if self._set is None:
            self._set = set(map(tuple, self.edges.tolist()))
        return self._set

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.array([self.d, self.N], dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(self._keys, dtype="<i8").tobytes())
        return h.hexdigest()

    def to_json(self) -> dict:
        return {"d": self.d, "N": self.N, "edges": self.edges.tolist(), "planted": self.planted}

    @classmethod
    def from_json(cls, obj) -> "Hypergraph":
        d = int(obj["d"])
        return cls(d, int(obj["N"]), np.asarray(obj["edges"], dtype=np.int64).reshape(-1, d), obj.get("planted"))

    def remove_vertices(self, vertices) -> "Hypergraph":
        """Subgraph induced on the remaining vertices, relabeled ``0..N'-1``.

        ``labels`` of the result gives each new vertex's id in ``self``
        (composed with ``self.labels`` when present).
        """
        rm = np.zeros(self.N, dtype=bool)
        rm[np.asarray(list(vertices), dtype=np.int64)] = True
        keep = np.flatnonzero(~rm)
        new_id = np.full(self.N, -1, dtype=np.int64)
        new_id[keep] = np.arange(keep.size)
        e = self.edges
        e = e[~np.any(rm[e], axis=1)] if e.size else e
        labels = keep if self.labels is None else self.labels[keep]
        return Hypergraph(self.d, int(keep.size), new_id[e], None, labels=labels)

    def original_ids(self, vertices) -> np.ndarray:
        v = np.asarray(list(vertices), dtype=np.int64)
        return v if self.labels is None else self.labels[v]


def _bernoulli_keys(N, d, prob, g) -> np.ndarray:
    """Sorted keys of a random edge set: each d-subset independently w.p. ``prob``."""
    if prob <= 0 or N < d:
        return np.zeros(0, dtype=np.int64)
    if d == 1:
        idx = np.arange(N, dtype=np.int64)
        return idx[g.random(N) < prob] if prob < 1 else idx
    tails = combinations_array(N, d - 1)
    tail_keys = np.zeros(tails.shape[0], dtype=np.int64)
    for j in range(d - 1):
        tail_keys = tail_keys * N + tails[:, j]
    firsts = tails[:, 0]
    lead = N ** (d - 1)
    out = []
    for a in range(N - d + 1):
        # tails whose smallest vertex exceeds a form a suffix in lex order
        lo = int(np.searchsorted(firsts, a + 1))
        t = tail_keys[lo:]
        if prob < 1:
            t = t[g.random(t.shape[0]) < prob]
        out.append(a * lead + t)
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def _clique_keys(G_like_N, d, K) -> np.ndarray:
    K = np.asarray(K, dtype=np.int64)
    if K.size < d:
        return np.zeros(0, dtype=np.int64)
    combos = K[combinations_array(K.size, d)]
    key = np.zeros(combos.shape[0], dtype=np.int64)
    for j in range(d):
        key = key * G_like_N + combos[:, j]
    return key


def sample_hypergraph(kind: str, N: int, d: int, rng=None, *, q: float = 0.5, kappa: int | None = None,
                      q1: float | None = None, q2: float | None = None) -> Hypergraph:
    """Draw from ``er`` (each edge w.p. ``q``), ``hpc`` (ER(1/2) plus a
    clique on a random ``kappa``-set) or ``hpds`` (``q1`` inside the planted
    ``kappa``-set, ``q2`` elsewhere)."""
    if d < 1 or N < 0:
        raise ParameterError("need d >= 1 and N >= 0")
    g = as_generator(rng)
    if kind == "er":
        if not 0 <= q <= 1:
            raise ParameterError("q must be in [0, 1]")
        return Hypergraph(d, N, keys=_bernoulli_keys(N, d, q, g))
    if kappa is None or not 0 <= kappa <= N:
        raise ParameterError("need 0 <= kappa <= N")
    if kind == "hpc":
        base = _bernoulli_keys(N, d, 0.5, g)
        K = np.sort(g.choice(N, size=kappa, replace=False))
        planted = {"kind": "hpc", "K": K.tolist(), "q1": 1.0, "q2": 0.5}
        return Hypergraph(d, N, planted=planted, keys=np.union1d(base, _clique_keys(N, d, K)))
    if kind == "hpds":
        if q1 is None or q2 is None or not (0 <= q2 < q1 <= 1):
            raise ParameterError("hpds needs 0 <= q2 < q1 <= 1")
        base = _bernoulli_keys(N, d, q2, g)
        K = np.sort(g.choice(N, size=kappa, replace=False))
        inner = _clique_keys(N, d, K)
        base = np.setdiff1d(base, inner, assume_unique=True)
        inner = inner[g.random(inner.shape[0]) < q1]
        planted = {"kind": "hpds", "K": K.tolist(), "q1": float(q1), "q2": float(q2)}
        return Hypergraph(d, N, planted=planted, keys=np.union1d(base, inner))
    raise ParameterError(f"unknown hypergraph kind {kind!r}")


def adjacency_block(G: Hypergraph, index_lists) -> np.ndarray:
    """Subtensor ``A[I_1, ..., I_d]`` of the adjacency tensor, without
    materializing the full ``N^d`` array."""
    idx = [np.asarray(I, dtype=np.int64) for I in index_lists]
    if len(idx) != G.d:
        raise ParameterError("need one index list per mode")
    shape = tuple(len(I) for I in idx)
    if int(np.prod(shape, dtype=np.int64)) > ADJACENCY_BUDGET:
        raise BudgetError("adjacency block too large", int(np.prod(shape, dtype=np.int64)), ADJACENCY_BUDGET)
    grids = np.meshgrid(*idx, indexing="ij")
    tuples = np.stack(grids, axis=-1)
    return G.has_edges(tuples).astype(float)


def adjacency_tensor(G: Hypergraph) -> np.ndarray:
    """Symmetric 0/1 tensor of shape ``(N,)*d``; repeated-index entries are 0."""
    if G.N ** G.d > ADJACENCY_BUDGET:
        raise BudgetError("adjacency tensor too large", G.N ** G.d, ADJACENCY_BUDGET)
    A = np.zeros((G.N,) * G.d)
    if G.n_edges:
        from itertools import permutations

        for perm in permutations(range(G.d)):
            A[tuple(G.edges[:, p] for p in perm)] = 1.0
    return A


def pad_to_even(Y, rng=None) -> np.ndarray:
    """Append one slice of fresh N(0,1) entries along every odd-sized mode."""
    g = as_generator(rng)
    Y = np.asarray(Y, dtype=float)
    for z, nz in enumerate(Y.shape):
        if nz % 2:
            shape = list(Y.shape)
            shape[z] = 1
            Y = np.concatenate([Y, g.standard_normal(shape)], axis=z)
    return Y
