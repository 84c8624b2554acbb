import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from vpqubo import mimo
from vpqubo.preprocess import (
    DegenerateReferenceError,
    PreprocessConfig,
    ppl,
    preprocess,
    scale_factor,
    zeroed_mask,
)
from vpqubo.qubo import QuboProblem, build_qubo

NO_ELIM = -math.inf


def _minimizers(Q):
    n = Q.shape[0]
    q = np.array(list(itertools.product([0, 1], repeat=n)), dtype=float)
    E = np.einsum("ij,ij->i", q @ Q, q)
    return {tuple(r) for r in q[np.isclose(E, E.min(), rtol=0, atol=1e-9 * np.abs(Q).sum())].astype(int)}


def _vpp_qubo(seed, n_r=2, name="16QAM", t=1):
    """VPP QUBO whose optimum is not v = 0 (PPL is undefined there)."""
    rng = np.random.default_rng(seed)
    cons = mimo.constellation(name)
    while True:
        ch = mimo.generate_channel(n_r, n_r, rng)
        u, _ = cons.random_symbols(n_r, rng)
        p = build_qubo(ch, cons, u, t)
        if _minimizers(p.Q) != {(0,) * p.n_vars}:
            return p


def test_zf_optimum_is_degenerate_reference():
    ch = mimo.channel_from_matrix(np.eye(1))
    p = build_qubo(ch, mimo.constellation("QPSK"), np.array([1 + 1j]), 1)
    with pytest.raises(DegenerateReferenceError):
        ppl(p, p)


def test_scale_factor_examples():
    assert scale_factor(3, 6) == 1
    assert scale_factor(12, 6) == 0.5
    assert scale_factor(6, 6) == 1


def test_config_invariants():
    with pytest.raises(ValueError):
        PreprocessConfig(t_high=0)
    with pytest.raises(ValueError):
        PreprocessConfig(t_high=6, t_low=1)  # 10 > 6
    assert PreprocessConfig(t_low=NO_ELIM).threshold == 0.0


def test_unchanged_when_already_conditioned():
    Q = np.array([[6.0, -0.1], [0.0, 0.5]])
    out, rep = preprocess(QuboProblem(Q, 2.0))
    assert np.array_equal(out.Q, Q) and out.offset == 2.0
    assert rep.zeroed_count == 0 and rep.scale_factor == 1.0


def test_diag_example():
    out, rep = preprocess(QuboProblem(np.diag([100.0, 1e-3]), 10.0), PreprocessConfig(6, -2))
    assert rep.scale_factor == pytest.approx(0.06)
    assert out.Q[0, 0] == pytest.approx(6.0) and out.Q[1, 1] == 0.0
    assert rep.zeroed_count == 1
    assert out.offset == pytest.approx(0.6)
    assert rep.q_max_before == 100.0 and rep.q_max_after == pytest.approx(6.0)


def test_magnitude_threshold_keeps_large_negatives():
    Q = np.array([[1.0, -3.0], [0.0, -0.005]])
    out, _ = preprocess(QuboProblem(Q), PreprocessConfig(6, -2))
    assert out.Q[0, 1] == -3.0 and out.Q[1, 1] == 0.0


def test_all_zero_flag():
    _, rep = preprocess(QuboProblem(np.diag([1e-4, -1e-4])), PreprocessConfig(6, -2))
    assert rep.all_zero and rep.zeroed_count == 2
    assert rep.to_dict()["all_zero"] is True


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 10), st.floats(0.5, 20), st.floats(-6, 0), st.integers(0, 2**32 - 1))
def test_bounds_and_counts(n, t_high, t_low, seed):
    assume(10**t_low < t_high)
    rng = np.random.default_rng(seed)
    Q = np.triu(rng.normal(scale=10 ** rng.uniform(-3, 3), size=(n, n)))
    out, rep = preprocess(QuboProblem(Q), PreprocessConfig(t_high, t_low))
    assert np.abs(out.Q).max() <= t_high * (1 + 1e-12)
    assert 0 < rep.scale_factor <= 1
    assert rep.zeroed_count <= np.count_nonzero(Q)
    survivors = out.Q[out.Q != 0]
    assert np.all(np.abs(survivors) >= 10**t_low)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 10), st.floats(0.1, 10), st.integers(0, 2**32 - 1))
def test_scaling_only_preserves_argmin_set(n, t_high, seed):
    rng = np.random.default_rng(seed)
    Q = np.triu(rng.integers(-20, 21, size=(n, n)).astype(float))
    out, _ = preprocess(QuboProblem(Q), PreprocessConfig(t_high, NO_ELIM))
    assert _minimizers(out.Q) == _minimizers(Q)


def test_zeroed_set_monotone_in_t_low():
    rng = np.random.default_rng(0)
    lows = np.linspace(-5, 0.5, 12)
    for _ in range(100):
        n = rng.integers(2, 12)
        Q = np.triu(rng.normal(scale=10 ** rng.uniform(-2, 2), size=(n, n)) * (rng.random((n, n)) < 0.8))
        masks = [zeroed_mask(Q, PreprocessConfig(6, lo)) for lo in lows]
        for a, b in zip(masks, masks[1:]):
            assert np.all(b[a])


def test_ppl_identity_and_scaling():
    p = _vpp_qubo(1)
    assert ppl(p, p) == 0.0
    pre, _ = preprocess(p, PreprocessConfig(6, NO_ELIM))
    assert ppl(p, pre) == 0.0


def test_ppl_positive_with_aggressive_t_low():
    # exhaustive oracle on 8-variable problems: a large t_low must cost something somewhere
    found = []
    for seed in range(40):
        p = _vpp_qubo(seed)
        pre, _ = preprocess(p, PreprocessConfig(6, 0))
        val = ppl(p, pre)
        Q = p.Q
        e_star = min(float(np.array(q) @ Q @ np.array(q)) for q in _minimizers(Q))
        pre_mins = _minimizers(pre.Q)
        if not (pre_mins & _minimizers(Q)):
            assert val > 0
            found.append(val)
        else:
            assert val == 0.0
        assert val >= 0 and np.isfinite(e_star)
    assert found, "no instance lost optimality at t_low = 0"


def test_ppl_hand_example():
    # original: minimum at (1, 0) with energy -2; conditioned problem prefers (0, 1)
    orig = QuboProblem(np.array([[-2.0, 3.0], [0.0, -1.5]]))
    pre = QuboProblem(np.array([[-1.0, 3.0], [0.0, -1.5]]))
    assert ppl(orig, pre) == pytest.approx(0.25)


def test_ppl_degenerate_reference():
    with pytest.raises(DegenerateReferenceError):
        ppl(QuboProblem(np.zeros((2, 2))), QuboProblem(np.zeros((2, 2))))


def test_ppl_grows_with_t_low_on_average():
    lows = (-3, -1, 0, 0.5)
    means = []
    problems = [_vpp_qubo(s, name="64QAM") for s in range(30)]
    for lo in lows:
        vals = [ppl(p, preprocess(p, PreprocessConfig(6, lo))[0]) for p in problems]
        means.append(np.mean(vals))
    assert means[0] == 0.0
    assert means[-1] >= means[0]
