import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vpqubo import mimo
from vpqubo.qubo import IsingProblem, QuboProblem, build_qubo, decode_bits, encode_perturbation, ising_to_qubo
from vpqubo.solvers import (
    SolverRequest,
    brute_force_argmin,
    full_enumeration_nodes,
    select_with_fallback,
    solve_brute_force,
    solve_fse,
    solve_sa,
    solve_sphere_encoder,
)
from vpqubo.solvers import anneal


def _instance(n_r, name="16QAM", seed=0, n_t=None):
    rng = np.random.default_rng(seed)
    cons = mimo.constellation(name)
    ch = mimo.generate_channel(n_t or n_r, n_r, rng)
    u, _ = cons.random_symbols(n_r, rng)
    return ch, cons, u


def _naive_min(Q):
    n = Q.shape[0]
    best, arg = np.inf, None
    for bits in itertools.product([0, 1], repeat=n):
        q = np.array(bits, dtype=float)
        e = q @ Q @ q
        if e < best:
            best, arg = e, bits
    return np.array(arg), best


def _triangle_qubo():
    J = np.zeros((3, 3))
    J[0, 1] = J[0, 2] = J[1, 2] = 1.0
    return ising_to_qubo(IsingProblem(np.zeros(3), J))


# --- brute force -----------------------------------------------------------


def test_brute_zero_problem_ties_to_all_zero():
    res = solve_brute_force(QuboProblem(np.zeros((5, 5))))
    assert res.best_energy == 0 and not res.best_bits.any()


def test_brute_triangle():
    assert solve_brute_force(_triangle_qubo()).best_energy == pytest.approx(-1.0)


@pytest.mark.parametrize("n", [1, 5, 12, 14, 16])
def test_brute_matches_naive(n):
    rng = np.random.default_rng(n)
    Q = np.triu(rng.normal(size=(n, n)))
    bits, e = _naive_min(Q)
    got = brute_force_argmin(QuboProblem(Q))
    assert np.array_equal(got, bits)
    assert float(got @ Q @ got) == pytest.approx(e)


def test_brute_tie_is_lexicographically_smallest():
    Q = np.array([[-1.0, 2.0], [0.0, -1.0]])  # 10 and 01 both reach -1
    assert brute_force_argmin(QuboProblem(Q)).tolist() == [0, 1]


def test_brute_size_limit():
    with pytest.raises(ValueError):
        brute_force_argmin(QuboProblem(np.zeros((25, 25))))


# --- simulated annealing ---------------------------------------------------


def test_anneal_time_table():
    assert [anneal.sweeps_for_anneal_time(us) for us in (1, 10, 100, 299)] == [10, 100, 1000, 3000]
    with pytest.raises(ValueError, match="299"):
        anneal.sweeps_for_anneal_time(50)


def test_sa_single_variable():
    res = solve_sa(QuboProblem(np.array([[-3.0]]), 1.0), SolverRequest(num_reads=1, anneal_sweeps=5))
    assert res.best_bits.tolist() == [1] and res.best_energy == -2.0


def test_sa_request_validation():
    with pytest.raises(ValueError):
        SolverRequest(num_reads=0)
    with pytest.raises(ValueError):
        SolverRequest(anneal_sweeps=0)


def test_sa_determinism_and_read_order():
    p = build_qubo(*_instance(2, seed=1))
    req = SolverRequest(num_reads=50, anneal_sweeps=20, seed=9)
    a, b = solve_sa(p, req), solve_sa(p, req)
    assert all(np.array_equal(x[0], y[0]) and x[1] == y[1] for x, y in zip(a.all_reads, b.all_reads))
    assert len(a.all_reads) == a.reads_used == 50


def test_sa_prefix_property():
    p = build_qubo(*_instance(3, seed=2))
    full = solve_sa(p, SolverRequest(num_reads=64, anneal_sweeps=10, seed=4))
    best = np.inf
    for n in (1, 2, 8, 32, 64):
        part = solve_sa(p, SolverRequest(num_reads=n, anneal_sweeps=10, seed=4))
        assert all(np.array_equal(x[0], y[0]) for x, y in zip(part.all_reads, full.all_reads[:n]))
        assert part.best_energy <= best
        best = part.best_energy


def test_sa_best_read_tie_goes_to_first_index():
    res = solve_sa(QuboProblem(np.zeros((3, 3))), SolverRequest(num_reads=10, anneal_sweeps=3, seed=1))
    first = res.all_reads[0][0]
    assert np.array_equal(res.best_bits, first)


def test_dense_and_sparse_kernels_agree():
    rng = np.random.default_rng(3)
    n = 20
    h = rng.normal(size=n)
    J = np.triu(rng.normal(size=(n, n)) * (rng.random((n, n)) < 0.4), 1)
    req = SolverRequest(num_reads=30, anneal_sweeps=15, seed=5)
    dense = anneal.anneal_spins(h, J, req)
    sparse = anneal.anneal_spins(h, J, req, h_rows=h[None, :])
    assert np.array_equal(dense, sparse)


def test_sa_ising_input_returns_spins():
    p = IsingProblem(np.array([1.0, -1.0]), np.zeros((2, 2)))
    res = solve_sa(p, SolverRequest(num_reads=5, anneal_sweeps=20))
    assert res.best_bits.tolist() == [-1, 1] and res.best_energy == -2.0


@pytest.mark.slow
def test_sa_matches_brute_on_12_var_qubos():
    rng = np.random.default_rng(12)
    hits = 0
    for k in range(100):
        Q = np.triu(rng.normal(size=(12, 12)))
        exact = float(QuboProblem(Q).energy(brute_force_argmin(QuboProblem(Q))))
        res = solve_sa(QuboProblem(Q), SolverRequest(num_reads=1000, anneal_sweeps=1000, seed=k))
        hits += res.best_energy <= exact + 1e-9
    assert hits >= 99


def test_more_sweeps_weakly_improve_mean_energy():
    problems = [build_qubo(*_instance(4, "64QAM", seed=s)) for s in range(20)]
    means = []
    for sweeps in (10, 100, 1000):
        req = SolverRequest(num_reads=20, anneal_sweeps=sweeps, seed=0)
        means.append(np.mean([solve_sa(p, req).best_energy for p in problems]))
    assert means[0] >= means[1] >= means[2]


def test_beta_schedule():
    b = anneal.beta_schedule(5, (0.1, 10.0))
    assert b[0] == pytest.approx(0.1) and b[-1] == pytest.approx(10.0)
    assert np.allclose(b[1:] / b[:-1], b[1] / b[0])
    assert anneal.beta_schedule(1).tolist() == [10.0]


def test_read_seeds_prefix_stable():
    assert np.array_equal(anneal.read_seeds(3, 100)[:10], anneal.read_seeds(3, 10))


# --- lattice solvers -------------------------------------------------------


def test_sphere_identity_channel_gives_zero():
    ch = mimo.channel_from_matrix(np.eye(3))
    cons = mimo.constellation("64QAM")
    res = solve_sphere_encoder(ch, cons, np.array([7 - 7j, 1 + 3j, -5 - 1j]))
    assert not res.best_v.any()


@pytest.mark.parametrize("n_r,t", [(2, 1), (3, 1), (4, 1), (2, 2)])
def test_sphere_equals_brute_qubo(n_r, t):
    for seed in range(10):
        ch, cons, u = _instance(n_r, "64QAM", seed=100 * n_r + seed)
        p = build_qubo(ch, cons, u, t)
        v_brute = decode_bits(brute_force_argmin(p), p.var_map)
        sph = solve_sphere_encoder(ch, cons, u, t)
        assert sph.best_objective == mimo.vpp_objective(ch, cons, u, v_brute)


def test_sphere_prunes_on_4x4():
    for seed in range(5):
        res = solve_sphere_encoder(*_instance(4, "16QAM", seed=seed))
        assert res.nodes_visited < full_enumeration_nodes(4, 1)


def test_sphere_within_box():
    for seed in range(10):
        v = solve_sphere_encoder(*_instance(3, "QPSK", seed=seed), t=1).best_v
        for part in (v.real, v.imag):
            assert np.all((part >= -2) & (part <= 1))


def test_fse_full_breadth_is_exact():
    for seed in range(10):
        ch, cons, u = _instance(2, "16QAM", seed=seed)
        fse = solve_fse(ch, cons, u, 1, breadth=4**4)
        assert fse.best_objective == pytest.approx(solve_sphere_encoder(ch, cons, u).best_objective, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 8), st.sampled_from(["QPSK", "16QAM", "64QAM"]), st.integers(0, 2**32 - 1))
def test_fse_sandwich(n_r, breadth, name, seed):
    ch, cons, u = _instance(n_r, name, seed=seed)
    fse = solve_fse(ch, cons, u, 1, breadth)
    opt = solve_sphere_encoder(ch, cons, u).best_objective
    zf = mimo.zf_power(ch, u)
    assert opt <= fse.best_objective * (1 + 1e-12)
    assert fse.best_objective <= zf


def test_fse_mean_between_zf_and_sphere_6x6():
    zf, fse, sph = [], [], []
    for seed in range(100):
        ch, cons, u = _instance(6, "64QAM", seed=seed)
        zf.append(mimo.zf_power(ch, u))
        fse.append(solve_fse(ch, cons, u).best_objective)
        sph.append(solve_sphere_encoder(ch, cons, u).best_objective)
    assert np.mean(sph) <= np.mean(fse) <= np.mean(zf)
    assert np.mean(sph) < np.mean(zf)


def test_fse_validation():
    with pytest.raises(ValueError):
        solve_fse(*_instance(2), breadth=0)


# --- selection and fallback ------------------------------------------------


def test_fallback_when_all_reads_worse():
    ch, cons, u = _instance(2, "16QAM", seed=3)
    reads = np.array([[3 + 3j, -4 - 4j], [3, 3]])
    res = select_with_fallback(reads, ch, cons, u)
    assert res.fallback_used and not res.best_v.any()
    assert res.best_objective == mimo.zf_power(ch, u)


def test_optimal_read_is_selected():
    ch, cons, u = _instance(2, "64QAM", seed=5)
    p = build_qubo(ch, cons, u)
    opt = brute_force_argmin(p)
    rng = np.random.default_rng(0)
    reads = rng.integers(0, 2, (30, p.n_vars))
    reads[17] = opt
    res = select_with_fallback(reads, ch, cons, u, p.var_map)
    best = mimo.vpp_objective(ch, cons, u, decode_bits(opt, p.var_map))
    if best < mimo.zf_power(ch, u):
        assert res.best_objective == best and not res.fallback_used
    else:
        assert res.fallback_used


def test_duplicate_objectives_first_read_wins():
    # u = 3+3j lies outside the QPSK cell, so v = -1 and v = -1j both beat ZF
    # with exactly equal power 10 < 18
    ch = mimo.channel_from_matrix(np.eye(1))
    cons = mimo.constellation("QPSK")
    u = np.array([3 + 3j])
    reads = np.array([[-1], [-1j], [-1]])
    res = select_with_fallback(reads, ch, cons, u)
    assert res.best_v.tolist() == [-1]
    res = select_with_fallback(reads[1:], ch, cons, u)
    assert res.best_v.tolist() == [-1j]


def test_selection_scores_original_objective():
    ch, cons, u = _instance(3, "16QAM", seed=8)
    p = build_qubo(ch, cons, u)
    reads = np.random.default_rng(1).integers(0, 2, (200, p.n_vars))
    res = select_with_fallback(reads, ch, cons, u, p.var_map)
    objs = [mimo.vpp_objective(ch, cons, u, decode_bits(r, p.var_map)) for r in reads]
    zf = mimo.zf_power(ch, u)
    assert res.best_objective == (min(objs) if min(objs) < zf else zf)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_fallback_guarantee(n_r, n_reads, seed):
    ch, cons, u = _instance(n_r, "64QAM", seed=seed)
    p = build_qubo(ch, cons, u)
    reads = np.random.default_rng(seed).integers(0, 2, (n_reads, p.n_vars))
    res = select_with_fallback(reads, ch, cons, u, p.var_map)
    assert res.best_objective <= mimo.zf_power(ch, u)
    assert res.best_objective == mimo.vpp_objective(ch, cons, u, res.best_v)


def test_select_requires_reads():
    ch, cons, u = _instance(1)
    with pytest.raises(ValueError):
        select_with_fallback(np.zeros((0, 1)), ch, cons, u)


def test_encode_of_sphere_solution_round_trips():
    ch, cons, u = _instance(3, "16QAM", seed=4)
    p = build_qubo(ch, cons, u)
    v = solve_sphere_encoder(ch, cons, u).best_v
    q = encode_perturbation(v, 1)
    assert p.energy(q) == pytest.approx(mimo.vpp_objective(ch, cons, u, v), rel=1e-10)
