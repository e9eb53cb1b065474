from __future__ import annotations

import math
from itertools import combinations, permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _stats import ks_distance, moment_suite
from hoclust import reductions as red
from hoclust.errors import BudgetError, ContractError, ParameterError
from hoclust.models import Hypergraph, adjacency_tensor, sample_hypergraph
from hoclust.reductions import (
    RkParams,
    clique_scan_detector,
    clone_vector,
    gaussianize_symmetric,
    hpc_recover_via_detection,
    hpc_to_chc_detection,
    hpc_to_rohc,
    hpc_xi,
    hpds_blocks,
    hpds_recover,
    hpds_to_chc,
    max_clique_size,
    mixing_matrix,
    oracle_detector,
    reflection_clone,
    reflection_matrix,
    rejection_kernel,
    rejection_kernel_array,
)
from hoclust.rng import RngStream

SEED = RngStream(2024, (5,))


def standard_rk(n=50, d=3):
    return RkParams(1.0, 0.5, hpc_xi(n, d), math.ceil(2 * (d + 1) * math.log2(n)))


# ------------------------------------------------------------ rejection kernel

def test_rk_params_validation():
    with pytest.raises(ParameterError):
        RkParams(0.5, 0.5, 0.1, 3)
    with pytest.raises(ParameterError):
        RkParams(1.2, 0.5, 0.1, 3)
    with pytest.raises(ParameterError):
        RkParams(1.0, 0.5, 0.0, 3)
    with pytest.raises(ParameterError):
        RkParams(1.0, 0.5, 0.1, -1)
    with pytest.raises(BudgetError):
        RkParams(1.0, 0.5, 0.1, 10**6 + 1)


def test_rk_zero_iterations_returns_zero():
    prm = RkParams(1.0, 0.5, 0.3, 0)
    g = SEED.child(1).generator()
    assert all(rejection_kernel(x, prm, g) == 0.0 for x in (0, 1, 0, 1))
    assert np.array_equal(rejection_kernel_array(np.array([0, 1, 1]), prm, g), np.zeros(3))


def test_rk_rejects_non_bits():
    with pytest.raises(ParameterError):
        rejection_kernel(2, standard_rk())
    with pytest.raises(ParameterError):
        rejection_kernel_array(np.array([0, 2]), standard_rk())


def test_rk_p_one_input_one_is_exact_shifted_gaussian():
    prm = RkParams(1.0, 0.5, 0.7, 5)
    g = SEED.child(2).generator()
    draws = rejection_kernel_array(np.ones(10**4, dtype=int), prm, g)
    assert np.all(draws != 0.0)
    assert ks_distance(draws, mean=0.7) <= 0.02
    scalar = np.array([rejection_kernel(1, prm, g) for _ in range(2000)])
    assert ks_distance(scalar, mean=0.7) <= 0.04


def test_rk_input_zero_close_to_standard_normal():
    g = SEED.child(3).generator()
    draws = rejection_kernel_array(np.zeros(10**4, dtype=int), standard_rk(), g)
    assert ks_distance(draws) <= 0.03


def test_rk_bernoulli_half_mixture_close_to_standard_normal():
    g = SEED.child(4).generator()
    x = g.integers(0, 2, 10**4)
    assert ks_distance(rejection_kernel_array(x, standard_rk(), g)) <= 0.03


def test_rk_scalar_and_array_agree_in_law():
    prm = standard_rk()
    g = SEED.child(5).generator()
    a = rejection_kernel_array(np.ones(4000, dtype=int), prm, g)
    b = np.array([rejection_kernel(1, prm, g) for _ in range(4000)])
    # two-sample KS at roughly the 0.1% level
    both = np.sort(np.concatenate([a, b]))
    Fa = np.searchsorted(np.sort(a), both, side="right") / a.size
    Fb = np.searchsorted(np.sort(b), both, side="right") / b.size
    assert np.abs(Fa - Fb).max() <= 1.95 * math.sqrt(2 / 4000)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.0, 0.5), st.floats(0.01, 2.0), st.integers(0, 30), st.integers(0, 10**6))
def test_rk_output_finite_and_acceptance_in_unit_interval(p_gap, q, xi, T, seed):
    p = min(1.0, q + p_gap)
    prm = RkParams(p, q, xi, T)
    g = np.random.default_rng(seed)
    z = g.standard_normal(50) * 4
    for x in (0, 1):
        acc = red._accept_probability(z, x, prm)
        assert np.all((acc >= 0) & (acc <= 1))
    out = rejection_kernel_array(g.integers(0, 2, 40), prm, g)
    assert np.all(np.isfinite(out))


# ------------------------------------------------------------ reflection cloning

@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_reflection_matrix_orthogonality_exact(n):
    M = reflection_matrix(n, normalized=False)
    assert np.array_equal(M @ M.T, 2 * np.eye(n))
    h = n // 2
    A = np.diag(np.r_[np.ones(h), -np.ones(h)])
    B = np.fliplr(np.eye(n))
    assert np.array_equal(A @ B + B @ A, np.zeros((n, n)))
    assert np.array_equal(M, A + B)


def test_reflection_matrix_n2_action():
    R = reflection_matrix(2)
    assert np.allclose(R @ np.array([1.0, 0.0]), np.array([1.0, 1.0]) / math.sqrt(2))
    M = reflection_matrix(2, normalized=False)
    assert np.sum((M @ np.array([1.0, 0.0])) ** 2) == 2.0


def test_reflection_odd_rejected():
    with pytest.raises(ParameterError):
        reflection_matrix(5)
    with pytest.raises(ParameterError):
        reflection_clone(np.zeros((3, 3, 3)), 1)


def test_reflection_clone_zero_rounds_identity():
    W = SEED.child(6).generator().standard_normal((4, 4, 4))
    assert np.array_equal(reflection_clone(W, 0, SEED.child(7)), W)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([2, 4, 6, 8]), st.integers(0, 4), st.integers(0, 10**6))
def test_tracked_vector_norm_and_sparsity(n, ell, seed):
    g = np.random.default_rng(seed)
    u = g.integers(-3, 4, n).astype(float)
    perms = [g.permutation(n) for _ in range(ell)]
    v = clone_vector(u, perms)
    assert np.sum(v**2) == 2**ell * np.sum(u**2)
    assert np.count_nonzero(v) <= 2**ell * np.count_nonzero(u)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([2, 4, 6]), st.integers(0, 3), st.integers(0, 10**6))
def test_reflection_clone_tracks_rank_one_signal(n, ell, seed):
    g = np.random.default_rng(seed)
    u = g.standard_normal(n)
    W = np.einsum("i,j,k->ijk", u, u, u)
    out, perms = reflection_clone(W, ell, g, return_perms=True)
    v = clone_vector(u, perms) / 2 ** (ell / 2)
    assert np.allclose(out, np.einsum("i,j,k->ijk", v, v, v), atol=1e-10)
    assert np.isclose(np.linalg.norm(out), np.linalg.norm(W))


def test_reflection_clone_null_moments():
    s = SEED.child(8)
    outs = [reflection_clone(s.child(i).generator().standard_normal((8, 8, 8)), 2, s.child(i, 1)) for i in range(50)]
    assert moment_suite(outs)["ok"]


# ------------------------------------------------------------ mixing

@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_mixing_matrix_orthonormal_with_constant_first_column(d):
    H = mixing_matrix(d)
    m = math.factorial(d)
    assert np.allclose(H @ H.T, np.eye(m), atol=1e-13)
    assert np.allclose(np.linalg.norm(H, axis=1), 1.0)
    assert np.allclose(H[:, 0], 1 / math.sqrt(m))


def test_gaussianize_d2_written_out(monkeypatch):
    aux = np.array([[0.3], [-1.1], [2.0]])
    monkeypatch.setattr(red, "_aux_normals", lambda g, shape: aux[: shape[0]].reshape(shape))
    W = np.array([[0.0, 1.5, -2.0], [1.5, 0.0, 0.25], [-2.0, 0.25, 0.0]])
    out = gaussianize_symmetric(W, None, SEED.child(9))
    # classes (0,1), (0,2), (1,2) in lex order
    for (i, j), b in zip([(0, 1), (0, 2), (1, 2)], aux[:, 0]):
        assert np.isclose(out[i, j], (W[i, j] + b) / math.sqrt(2))
        assert np.isclose(out[j, i], (W[i, j] - b) / math.sqrt(2))


def test_gaussianize_suppressed_aux_scales_by_first_column(monkeypatch):
    monkeypatch.setattr(red, "_aux_normals", lambda g, shape: np.zeros(shape))
    g = SEED.child(10).generator()
    n, d = 5, 3
    base = g.standard_normal((n,) * d)
    W = sum(np.transpose(base, p) for p in permutations(range(d)))
    out = gaussianize_symmetric(W, None, g)
    H = mixing_matrix(d)
    for i in combinations(range(n), 3):
        copies = sorted(set(permutations(i)))
        vals = np.array([out[c] for c in copies])
        assert np.allclose(vals, H[: len(copies), 0] * W[i])
    # classes with a repeated coordinate use the first D rows only
    for i, j in combinations(range(n), 2):
        copies = sorted(set(permutations((i, i, j))))
        assert np.allclose([out[c] for c in copies], W[i, i, j] / math.sqrt(6))


def test_gaussianize_rejects_asymmetric():
    W = np.zeros((3, 3, 3))
    W[0, 1, 2] = 1.0
    with pytest.raises(ContractError):
        gaussianize_symmetric(W, None, SEED.child(11))


def test_gaussianize_decorrelates_and_keeps_signal():
    d, n, xi = 3, 12, 0.5
    s = SEED.child(12)
    classes = np.array(list(combinations(range(n), 3)))
    copy_idx = [tuple(classes[:, list(p)].T) for p in permutations(range(3))]
    pooled = []
    for t in range(30):
        g = s.child(t).generator()
        vals = xi + g.standard_normal(classes.shape[0])
        W = np.zeros((n,) * d)
        for idx in copy_idx:
            W[idx] = vals
        out = gaussianize_symmetric(W, xi, g)
        pooled.append(np.stack([out[idx] for idx in copy_idx], axis=1))
    X = np.concatenate(pooled)
    C = np.corrcoef(X, rowvar=False)
    assert np.abs(C[~np.eye(6, dtype=bool)]).max() <= 0.05
    # each copy carries xi / sqrt(d!) of the signal
    assert np.allclose(X.mean(axis=0), xi / math.sqrt(6), atol=4 / math.sqrt(X.shape[0]))
    assert np.allclose(X.var(axis=0), 1.0, atol=0.08)


# ------------------------------------------------------------ hpc -> rohc

def test_hpc_xi_value():
    assert hpc_xi(100, 3) == pytest.approx(math.log(2) / (2 * math.sqrt(8 * math.log(100) + 2 * math.log(2))))
    assert hpc_xi(100, 3) == pytest.approx(0.0561, abs=5e-5)


def test_hpc_to_rohc_null_moments():
    s = SEED.child(13)
    outs = [hpc_to_rohc(sample_hypergraph("er", 12, 3, s.child(i, 0)), 1, s.child(i, 1)).tensor for i in range(50)]
    assert moment_suite(outs)["ok"]


def test_hpc_to_rohc_complete_graph_positive_mean():
    N = 10
    G = Hypergraph(3, N, np.array(list(combinations(range(N), 3))), {"kind": "hpc", "K": list(range(N))})
    means = []
    for i in range(40):
        Y = hpc_to_rohc(G, 0, SEED.child(14, i)).tensor
        off = np.ones(Y.shape, dtype=bool)
        off[(np.arange(N),) * 3] = False
        means.append(Y[off].mean())
    xi = hpc_xi(N, 3)
    assert np.mean(means) > 0
    assert np.mean(means) == pytest.approx(xi / math.sqrt(6) * 720 / 990, abs=0.02)
    rep = hpc_to_rohc(G, 1, SEED.child(15))
    assert rep.params["k"] == 2 * N
    assert rep.params["mu"] == pytest.approx(xi * N**1.5 / math.sqrt(6))


def test_hpc_to_rohc_null_graph_off_support_mean_zero():
    s = SEED.child(16)
    m = [hpc_to_rohc(sample_hypergraph("er", 10, 3, s.child(i)), 0, s.child(i, 1)).tensor.mean() for i in range(40)]
    assert abs(np.mean(m)) <= 4 / math.sqrt(40 * 1000)


def test_hpc_to_rohc_pads_odd_vertex_count():
    G = sample_hypergraph("er", 7, 3, SEED.child(17))
    rep = hpc_to_rohc(G, 1, SEED.child(18))
    assert rep.tensor.shape == (8, 8, 8) and rep.params["padded"]
    assert hpc_to_rohc(G, 0, SEED.child(18)).tensor.shape == (7, 7, 7)


def test_reductions_deterministic():
    G = sample_hypergraph("hpc", 12, 3, SEED.child(19), kappa=4)
    a = hpc_to_rohc(G, 1, SEED.child(20))
    b = hpc_to_rohc(G, 1, SEED.child(20))
    assert np.array_equal(a.tensor, b.tensor) and a.to_json() == b.to_json()
    c = hpds_to_chc(G, 0.25, SEED.child(21)).tensor
    assert np.array_equal(c, hpds_to_chc(G, 0.25, SEED.child(21)).tensor)
    G2 = sample_hypergraph("er", 24, 3, SEED.child(22))
    e = hpc_to_chc_detection(G2, 4, 2, SEED.child(23)).tensor
    assert np.array_equal(e, hpc_to_chc_detection(G2, 4, 2, SEED.child(23)).tensor)
    assert a.provenance["graph"] == G.fingerprint()


# ------------------------------------------------------------ hpc -> chc detection

def test_hpc_to_chc_requires_matching_size():
    G = sample_hypergraph("er", 20, 3, SEED.child(24))
    with pytest.raises(ParameterError):
        hpc_to_chc_detection(G, 3, 2, SEED.child(25))


def test_hpc_to_chc_single_block_is_kernel_output(monkeypatch):
    monkeypatch.setattr(red, "_rk_array", lambda x, prm, g: np.asarray(x, dtype=float) * 3.0)
    G = sample_hypergraph("er", 12, 3, SEED.child(26))
    Y = hpc_to_chc_detection(G, 4, 1, SEED.child(27)).tensor
    A = adjacency_tensor(G)
    assert np.array_equal(Y, 3.0 * A[0:4, 4:8, 8:12])


def test_hpc_to_chc_averaging_arithmetic(monkeypatch):
    monkeypatch.setattr(red, "_rk_array", lambda x, prm, g: np.ones(np.shape(x)))
    G = sample_hypergraph("er", 12, 3, SEED.child(28))
    Y = hpc_to_chc_detection(G, 2, 2, SEED.child(29)).tensor
    assert Y.shape == (2, 2, 2)
    assert np.allclose(Y, 2 * math.sqrt(2))


def test_hpc_to_chc_averaging_index_map(monkeypatch):
    # kernel output = position code, so each output sums the positions j*n + i
    def code(x, prm, g):
        n = np.shape(x)[0]
        return np.einsum("i,j,k->ijk", np.arange(n), np.ones(n), np.ones(n))

    monkeypatch.setattr(red, "_rk_array", code)
    G = sample_hypergraph("er", 18, 3, SEED.child(30))
    Y = hpc_to_chc_detection(G, 2, 3, SEED.child(31)).tensor
    for i in range(2):
        expected = sum(j * 2 + i for j in range(3)) * 9 / 3**1.5
        assert np.allclose(Y[i], expected)


def test_hpc_to_chc_null_moments():
    s = SEED.child(32)
    outs = [hpc_to_chc_detection(sample_hypergraph("er", 24, 3, s.child(i, 0)), 8, 1, s.child(i, 1)).tensor
            for i in range(50)]
    assert moment_suite(outs)["ok"]


def test_hpc_to_chc_reports_implied_params():
    G = sample_hypergraph("hpc", 24, 3, SEED.child(33), kappa=12)
    rep = hpc_to_chc_detection(G, 4, 2, SEED.child(34))
    xi = hpc_xi(8, 3)
    assert rep.params["xi"] == pytest.approx(xi)
    assert rep.params["iterations"] == math.ceil(8 * 3)
    assert rep.params["lam"] == pytest.approx(xi / 2**1.5)
    assert rep.params["k"] == pytest.approx(1.0)


# ------------------------------------------------------------ hpds -> chc

def test_hpds_xi_value():
    G = sample_hypergraph("er", 100, 3, SEED.child(35), q=0.0)
    rep = hpds_to_chc(G, 0.1, SEED.child(36))
    expected = math.log(1.2) / (2 * math.sqrt(8 * math.log(100) + 2 * math.log(2)))
    assert rep.params["xi"] == pytest.approx(expected)
    assert rep.params["xi"] == pytest.approx(0.01474, abs=5e-6)
    assert rep.params["iterations"] == math.ceil(8 * math.log(100) / math.log(1.2))
    assert rep.params["lam"] == pytest.approx(expected / math.sqrt(6))


def test_hpds_tiny_rho_hits_budget():
    G = sample_hypergraph("er", 10, 3, SEED.child(37))
    with pytest.raises(BudgetError):
        hpds_to_chc(G, 1e-7, SEED.child(38))
    with pytest.raises(ParameterError):
        hpds_to_chc(G, 0.0, SEED.child(38))


def test_hpds_forced_accept_elevates_block_and_keeps_mode_one(monkeypatch):
    monkeypatch.setattr(red, "_rk_array", lambda x, prm, g: 5.0 * np.asarray(x, dtype=float))
    N = 12
    G = sample_hypergraph("hpds", N, 3, SEED.child(39), kappa=6, q1=1.0, q2=0.05)
    K = np.array(G.planted["K"])
    notK = np.setdiff1d(np.arange(N), K)
    Y = hpds_to_chc(G, 0.5, SEED.child(40)).tensor
    # mode 1 is not permuted: rows indexed by K carry the signal.  A K-row holds
    # 20 of 144 entries from the all-K block, each with mean 5/sqrt(6).
    assert Y[K].mean() > Y[notK].mean() + 0.1


def test_hpds_to_chc_null_moments():
    s = SEED.child(41)
    outs = [hpds_to_chc(sample_hypergraph("er", 12, 3, s.child(i, 0)), 0.25, s.child(i, 1)).tensor
            for i in range(50)]
    assert moment_suite(outs)["ok"]


# ------------------------------------------------------------ hpds recovery

def test_hpds_blocks_split():
    b = hpds_blocks(11, 3)
    assert [list(x) for x in b] == [[0, 1, 2], [3, 4, 5], [6, 7, 8, 9, 10]]
    with pytest.raises(ParameterError):
        hpds_blocks(2, 3)


def test_hpds_standardization_maps_bits_to_signs(monkeypatch):
    seen = {}

    def capture(Z, rng=None):
        seen["Z"] = Z
        return red.failure("captured")

    monkeypatch.setattr(red, "aggregated_svd_recover", capture)
    G = sample_hypergraph("er", 9, 3, SEED.child(42))
    hpds_recover(G, 0.5, SEED.child(43))
    assert set(np.unique(seen["Z"])) <= {-1.0, 1.0}


def test_hpds_recover_dense_and_graph_inputs_agree():
    G = sample_hypergraph("hpds", 15, 3, SEED.child(44), kappa=8, q1=1.0, q2=0.5)
    a = hpds_recover(G, 0.5, SEED.child(45))
    b = hpds_recover(adjacency_tensor(G), 0.5, SEED.child(45))
    assert a.support == b.support


def test_hpds_recover_rate():
    hits = 0
    for i in range(50):
        G = sample_hypergraph("hpds", 60, 3, SEED.child(46, i), kappa=30, q1=1.0, q2=0.5)
        res = hpds_recover(G, 0.5, SEED.child(47, i))
        hits += res.ok and list(res.support.sets[0]) == G.planted["K"]
    assert hits >= 45


# ------------------------------------------------------------ recovery via detection

def _clique_only_graph(N, d, K):
    return Hypergraph(d, N, np.array(list(combinations(sorted(K), d))), {"kind": "hpc", "K": sorted(K)})


def test_oracle_detector_recovers_clique_exactly():
    K = [1, 4, 5, 8, 9]
    G = _clique_only_graph(11, 3, K)
    assert hpc_recover_via_detection(G, oracle_detector(K)) == set(K)


def test_oracle_detector_never_misses_clique_vertices():
    for i in range(5):
        G = sample_hypergraph("hpc", 12, 3, SEED.child(48, i), kappa=6)
        K = set(G.planted["K"])
        assert K <= hpc_recover_via_detection(G, oracle_detector(K))


def test_always_planted_detector_gives_empty_set():
    G = sample_hypergraph("hpc", 10, 3, SEED.child(49), kappa=5)
    assert hpc_recover_via_detection(G, lambda H: "planted") == set()
    assert hpc_recover_via_detection(G, lambda H: True) == set()


def test_always_null_detector_gives_all_vertices():
    G = sample_hypergraph("er", 6, 3, SEED.child(50))
    assert hpc_recover_via_detection(G, lambda H: "null") == set(range(6))


def test_residual_graph_removes_common_completions():
    seen = []
    G = _clique_only_graph(6, 3, [0, 1, 2, 3])

    def spy(H):
        seen.append(tuple(H.original_ids(range(H.N)).tolist()))
        return "planted"

    hpc_recover_via_detection(G, spy)
    pairs = list(combinations(range(6), 2))
    assert seen[pairs.index((0, 1))] == (4, 5)
    assert seen[pairs.index((0, 4))] == (1, 2, 3, 5)


def test_max_clique_size_matches_enumeration():
    for i in range(10):
        G = sample_hypergraph("er", 8, 3, SEED.child(51, i))
        best = 2
        for r in range(3, 9):
            if any(all(G.has_edge(e) for e in combinations(S, 3)) for S in combinations(range(8), r)):
                best = r
        assert max_clique_size(G) == best


def test_scan_detector_recovery_rate():
    hits = 0
    for i in range(20):
        G = sample_hypergraph("hpc", 12, 3, SEED.child(52, i), kappa=6)
        hits += hpc_recover_via_detection(G, clique_scan_detector(4)) == set(G.planted["K"])
    assert hits >= 18
