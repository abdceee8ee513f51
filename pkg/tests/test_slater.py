import itertools
import math

import numpy as np
import pytest

from qubitbath.errors import InvalidParameterError, ResourceError
from qubitbath.slater import (
    FermionConfig,
    build_f_table,
    cofactor_det,
    dicke_initial_amplitudes,
    enumerate_configs,
    f_function,
    rank,
    slater,
    unrank,
)
from qubitbath.spinbath import grid_for_count, momentum_grid


def momentum_vector(N, nums):
    """Bath state |k_1..k_n> written out in the 2**N spin basis (site 1 = MSB)."""
    ks = np.pi * np.asarray(nums, float) / N
    vec = np.zeros(1 << N, dtype=complex)
    for js in itertools.combinations(range(1, N + 1), len(nums)):
        s = sum(1 << (N - j) for j in js)
        vec[s] = np.linalg.det(np.exp(1j * np.outer(ks, js))) / N ** (len(nums) / 2) if nums else 1.0
    return vec


def lowering(N, gs):
    """sum_j g_j sigma^-_j on the bath."""
    dim = 1 << N
    L = np.zeros((dim, dim))
    for s in range(dim):
        for j in range(1, N + 1):
            b = 1 << (N - j)
            if s & b:
                L[s ^ b, s] += gs[j - 1]
    return L


def test_slater_single():
    N, k, j = 6, np.pi / 3, 4
    assert abs(slater([k], [j], N) - np.exp(1j * k * j) / math.sqrt(N)) < 1e-15


def test_slater_row_swap():
    ks, js = [0.3, -1.1, 2.0], [1, 3, 4]
    assert abs(slater(ks, js, 5) + slater([ks[1], ks[0], ks[2]], js, 5)) < 1e-14


def test_slater_n4_hand_value():
    val = slater([-np.pi / 4, 3 * np.pi / 4], [1, 2], 4)
    ref = 0.25 * (np.exp(-1j * np.pi / 4) * np.exp(1.5j * np.pi) - np.exp(0.75j * np.pi) * np.exp(-0.5j * np.pi))
    assert abs(val - ref) < 1e-15


def test_slater_length_mismatch():
    with pytest.raises(InvalidParameterError):
        slater([0.1, 0.2], [1], 4)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_det_matches_cofactor_reference(m):
    rng = np.random.default_rng(m)
    for _ in range(5):
        A = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
        assert abs(np.linalg.det(A) - cofactor_det(A)) < 1e-12 * max(1, abs(cofactor_det(A)))


@pytest.mark.parametrize("N,n", [(2, 1), (2, 2), (4, 1), (4, 2), (4, 3), (6, 1), (6, 2), (6, 3)])
@pytest.mark.parametrize("parity", ["even", "odd"])
def test_orthonormality_sum_rule(N, n, parity):
    grid = momentum_grid(N, parity)
    cfgs = enumerate_configs(grid, n)
    sites = list(itertools.combinations(range(1, N + 1), n))
    S = np.array([[slater(c.ks, js, N) for js in sites] for c in cfgs])
    assert np.allclose(S.conj() @ S.T, np.eye(len(cfgs)), atol=1e-12)


def test_enumerate_count_and_first_rank():
    cfgs = enumerate_configs(momentum_grid(4, "even"), 2)
    assert len(cfgs) == 6
    assert rank(cfgs[0]) == 0
    assert cfgs[0].indices == (0, 1)


def test_rank_unrank_round_trip_n8():
    grid = momentum_grid(8, "even")
    for i, c in enumerate(enumerate_configs(grid, 4)):
        assert rank(c) == i
        assert unrank(grid, 4, rank(c)) == c


def test_unrank_out_of_range():
    with pytest.raises(InvalidParameterError):
        unrank(momentum_grid(4, "odd"), 2, 6)


def test_config_rejects_unsorted():
    with pytest.raises(InvalidParameterError):
        FermionConfig(momentum_grid(4, "odd"), (2, 1))


def test_f_m0_is_zero_momentum_peak():
    N = 10
    grid = momentum_grid(N, "odd")
    for c in enumerate_configs(grid, 1):
        val = f_function(c, (), N=N)
        ref = math.sqrt(N) if c.numerators == (0,) else 0.0
        assert abs(val - ref) < 1e-12


@pytest.mark.parametrize("N,m", [(4, 0), (4, 1), (4, 2), (6, 1), (6, 2)])
def test_f_equals_spin_matrix_element(N, m):
    # independent oracle: <P| sum_j g_j sigma^-_j |K> from dense spin-basis vectors
    rng = np.random.default_rng(N * 10 + m)
    gs = rng.normal(size=N)
    L = lowering(N, gs)
    upper = enumerate_configs(grid_for_count(N, m + 1), m + 1)
    lower = enumerate_configs(grid_for_count(N, m), m)
    table = build_f_table(N, m, gs, use_cache=False)
    for K in upper:
        vk = momentum_vector(N, K.numerators)
        for P in lower:
            ref = np.vdot(momentum_vector(N, P.numerators), L @ vk)
            assert abs(f_function(K, P, gs) - ref) < 1e-12
            assert abs(table.values[K.rank, P.rank] - ref) < 1e-12


def test_f_table_n4_m0_entrywise():
    t = build_f_table(4, 0, use_cache=False)
    grid = grid_for_count(4, 1)
    assert t.values.shape == (4, 1)
    for c in enumerate_configs(grid, 1):
        assert abs(t.values[c.rank, 0] - f_function(c, (), N=4)) < 1e-14


def test_f_table_n6_m2_random_pairs():
    N, m = 6, 2
    t = build_f_table(N, m, use_cache=False)
    rng = np.random.default_rng(7)
    up, lo = grid_for_count(N, m + 1), grid_for_count(N, m)
    for _ in range(20):
        r = int(rng.integers(math.comb(N, m + 1)))
        c = int(rng.integers(math.comb(N, m)))
        ref = f_function(unrank(up, m + 1, r), unrank(lo, m, c))
        assert abs(t.values[r, c] - ref) < 1e-12


def test_uniform_factorization():
    N, m, g = 6, 2, 0.37
    a = build_f_table(N, m, g, use_cache=False).values
    b = build_f_table(N, m, use_cache=False).values
    assert np.allclose(a, g * b, atol=1e-13)


def test_f_antisymmetry_in_k():
    N = 6
    up = grid_for_count(N, 3)
    lo = grid_for_count(N, 2)
    ks = [up.ks[0], up.ks[2], up.ks[5]]
    ps = [lo.ks[1], lo.ks[4]]
    a = f_function(ks, ps, N=N)
    assert abs(f_function([ks[1], ks[0], ks[2]], ps, N=N) + a) < 1e-13
    assert abs(f_function(ks, [ps[1], ps[0]], N=N) + a) < 1e-13


def test_lookup_sign_tracking():
    t = build_f_table(6, 2, use_cache=False)
    r, c = 7, 5
    ks = unrank(t.row_grid, 3, r).indices
    ps = unrank(t.col_grid, 2, c).indices
    v = t.values[r, c]
    assert t.lookup(ks, ps) == v
    assert t.lookup((ks[1], ks[0], ks[2]), ps) == -v
    assert t.lookup((ks[2], ks[0], ks[1]), (ps[1], ps[0])) == -v
    assert t.lookup((ks[0], ks[0], ks[1]), ps) == 0


def test_same_parity_rejected():
    g = momentum_grid(6, "even")
    with pytest.raises(InvalidParameterError):
        f_function(unrank(g, 2, 0), unrank(g, 1, 0))


@pytest.mark.parametrize("N", [4, 6])
def test_selection_rule_measured(N):
    # structural zeros are exactly the momentum-violating pairs
    for m in range(N):
        sr = build_f_table(N, m, use_cache=False).selection_rule()
        assert sr["violating"] == 0
        assert sr["zero_conserving"] == 0


def test_zero_fraction_n6():
    t = build_f_table(6, 2, use_cache=False)
    sr = t.selection_rule()
    assert t.zero_fraction == pytest.approx(1 - sr["conserving"] / t.values.size)
    assert 0.5 < t.zero_fraction < 1


def test_hermitian_pairing():
    # the lower-block equation uses conj(f): equal to <K| sum g sigma^+ |P>
    N, m = 4, 1
    gs = np.array([0.3, -0.7, 1.1, 0.2])
    R = lowering(N, gs).T
    t = build_f_table(N, m, gs, use_cache=False)
    for K in enumerate_configs(grid_for_count(N, m + 1), m + 1):
        for P in enumerate_configs(grid_for_count(N, m), m):
            ref = np.vdot(momentum_vector(N, K.numerators), R @ momentum_vector(N, P.numerators))
            assert abs(np.conj(t.values[K.rank, P.rank]) - ref) < 1e-12


def test_build_deterministic_bytes():
    a = build_f_table(8, 3, use_cache=False)
    b = build_f_table(8, 3, use_cache=False)
    assert a.content_hash() == b.content_hash()


def test_cache_round_trip(tmp_path, monkeypatch):
    monkeypatch.setenv("QUBITBATH_CACHE", str(tmp_path))
    fresh = build_f_table(8, 4, use_cache=True)
    assert any(tmp_path.iterdir())
    cached = build_f_table(8, 4, use_cache=True)
    assert cached.content_hash() == fresh.content_hash()
    assert cached.values.dtype == fresh.values.dtype


def test_cache_keyed_by_couplings(tmp_path, monkeypatch):
    monkeypatch.setenv("QUBITBATH_CACHE", str(tmp_path))
    a = build_f_table(4, 1, [1, 2, 3, 4])
    b = build_f_table(4, 1, [1, 2, 3, 5])
    assert a.content_hash() != b.content_hash()
    assert len(list(tmp_path.iterdir())) == 2


def test_memory_cap():
    with pytest.raises(ResourceError) as exc:
        build_f_table(12, 5, memory_cap=1000, use_cache=False)
    assert exc.value.estimate_bytes > 1000


def test_dicke_n0():
    assert np.allclose(dicke_initial_amplitudes(6, 0), [1.0])


@pytest.mark.parametrize("N", [2, 4, 10])
def test_dicke_n1_zero_mode(N):
    amp = dicke_initial_amplitudes(N, 1)
    grid = momentum_grid(N, "odd")
    ref = np.zeros(N)
    ref[grid.index_of(0)] = 1.0
    assert np.allclose(amp, ref, atol=1e-14)


def test_dicke_norm_n10():
    assert abs(np.linalg.norm(dicke_initial_amplitudes(10, 5)) - 1) < 1e-12


def test_dicke_matches_spin_vector():
    N, n = 6, 3
    amp = dicke_initial_amplitudes(N, n)
    vec = sum(a * momentum_vector(N, c.numerators) for a, c in zip(amp, enumerate_configs(grid_for_count(N, n), n)))
    dicke = np.array([1.0 if bin(s).count("1") == n else 0.0 for s in range(1 << N)]) / math.sqrt(math.comb(N, n))
    assert np.allclose(vec, dicke, atol=1e-13)
