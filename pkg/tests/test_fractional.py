import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from conftest import rand_herm, rand_psd
from hybrid_radar.fractional import RatioFamily, dinkelbach_maxmin, quadratic_transform_sum
from hybrid_radar.sdp import AffineForm, SolverConfig
from oracles import grid_ratio_diag, random_unit_vectors, rayleigh_quotient

# grid-search oracle for max tr(W diag(3,1)) / (tr(W diag(1,0.2)) + 0.5), tr W <= 1
FROZEN_GRID_RATIO = 2.0


def test_family_validation():
    f = AffineForm(0.0, np.eye(2))
    with pytest.raises(ValueError):
        RatioFamily((f,), (f, f), [0.0])
    with pytest.raises(ValueError):
        RatioFamily((), (), [])
    with pytest.raises(ValueError):
        dinkelbach_maxmin(RatioFamily((f,), (f,), [0.0]), 1.0, eps=0)


def test_family_ratios_and_folding():
    n = AffineForm(1.0, np.diag([2.0, 0.0]))
    d = AffineForm(2.0, np.diag([0.0, 1.0]))
    fam = RatioFamily((n,), (d,), [0.5])
    W = np.diag([0.5, 0.5])
    assert fam.ratios(W)[0] == pytest.approx(2.0 / 2.5 + 0.5)
    assert fam.folded()[0](W) == pytest.approx(2.0 + 0.5 * 2.5)


def test_dinkelbach_matches_grid_oracle():
    fam = RatioFamily((AffineForm(0.0, np.diag([3.0, 1.0])),),
                      (AffineForm(0.5, np.diag([1.0, 0.2])),), [0.0])
    res = dinkelbach_maxmin(fam, 1.0, eps=1e-8)
    assert res.lambda_ == pytest.approx(FROZEN_GRID_RATIO, abs=1e-5)
    assert grid_ratio_diag((3.0, 1.0), (1.0, 0.2), 0.5, step=1e-2) <= res.lambda_ + 1e-9
    assert np.trace(res.W).real <= 1 + 1e-9


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6))
def test_single_ratio_is_generalized_eigenvalue(seed, n):
    rng = np.random.default_rng(seed)
    A = rand_psd(rng, n, 2)
    B = rand_psd(rng, n) + 0.5 * np.eye(n)
    fam = RatioFamily((AffineForm(0.0, A),), (AffineForm(0.0, B),), [0.0])
    res = dinkelbach_maxmin(fam, 1.0, eps=1e-7)
    lmax = sla.eigh(A, B, eigvals_only=True)[-1]
    assert res.lambda_ == pytest.approx(lmax, rel=1e-4)
    # random search can only undershoot
    best = max(rayleigh_quotient(w, A, B) for w in random_unit_vectors(n, 300, seed % 1000))
    assert best <= res.lambda_ * (1 + 1e-6)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 5), m=st.integers(1, 4))
def test_dinkelbach_trace_monotone_and_consistent(seed, n, m):
    rng = np.random.default_rng(seed)
    nums = tuple(AffineForm(float(rng.uniform(0, 1)), rand_psd(rng, n)) for _ in range(m))
    dens = tuple(AffineForm(float(rng.uniform(0.5, 2)), rand_psd(rng, n)) for _ in range(m))
    fam = RatioFamily(nums, dens, rng.uniform(0, 1, m))
    res = dinkelbach_maxmin(fam, 1.0, eps=1e-4)
    assert np.all(np.diff(res.trace) >= -1e-12)
    assert res.converged and res.eps0 <= 1e-4
    assert res.lambda_ == pytest.approx(float(np.min(fam.ratios(res.W))), abs=1e-12)
    assert res.lambda_ >= float(np.min(fam.ratios(np.zeros((n, n))))) - 1e-9
    # no unit-trace rank-one point beats the solution by more than eps-scale
    for w in random_unit_vectors(n, 50, seed % 997):
        W = np.outer(w, w.conj())
        assert float(np.min(fam.ratios(W))) <= res.lambda_ + 1e-3


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6))
def test_quadratic_transform_single_ratio(seed, n):
    rng = np.random.default_rng(seed)
    S = rand_psd(rng, n, 1)
    B = rand_psd(rng, n) + np.eye(n)
    res = quadratic_transform_sum(S, [B], [1.0], 1.0, eps=1e-9, max_iters=500)
    lmax = sla.eigh(S, B, eigvals_only=True)[-1]
    assert res.lambda_ <= lmax * (1 + 1e-9)
    assert res.lambda_ == pytest.approx(lmax, rel=1e-3)
    assert np.all(np.diff(res.trace) >= 0)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 5), m=st.integers(1, 4))
def test_quadratic_transform_monotone_and_feasible(seed, n, m):
    rng = np.random.default_rng(seed)
    S = rand_psd(rng, n, 2)
    Bs = [rand_psd(rng, n) + 0.3 * np.eye(n) for _ in range(m)]
    a = rng.uniform(0, 2, m)
    res = quadratic_transform_sum(S, Bs, a, 2.0, eps=1e-6)
    assert np.all(np.diff(res.trace) >= 0)
    tr = np.trace(res.W).real
    assert tr <= 2.0 * (1 + 1e-8)
    assert np.linalg.eigvalsh(res.W)[0] >= -1e-9
    num = np.trace(res.W @ S).real
    ref = sum(ak * num / np.trace(res.W @ B).real for ak, B in zip(a, Bs))
    assert res.lambda_ == pytest.approx(ref, rel=1e-10)
    np.testing.assert_allclose(res.slacks, np.sqrt(a * num) / [np.trace(res.W @ B).real for B in Bs],
                               rtol=1e-10)


def test_quadratic_transform_zero_weights():
    res = quadratic_transform_sum(np.eye(3), [np.eye(3)], [0.0], 1.0)
    assert res.lambda_ == 0.0 and not res.W.any()


def test_quadratic_transform_agrees_with_dinkelbach_for_one_ratio():
    rng = np.random.default_rng(11)
    S, B = rand_psd(rng, 4, 1), rand_psd(rng, 4) + np.eye(4)
    qt = quadratic_transform_sum(S, [B], [1.0], 1.0, eps=1e-10, max_iters=500)
    dk = dinkelbach_maxmin(RatioFamily((AffineForm(0.0, S),), (AffineForm(0.0, B),), [0.0]), 1.0, eps=1e-9)
    assert qt.lambda_ == pytest.approx(dk.lambda_, rel=1e-4)


def test_dinkelbach_with_frank_wolfe_inner_solver():
    fam = RatioFamily((AffineForm(0.0, np.diag([3.0, 1.0])),),
                      (AffineForm(0.5, np.diag([1.0, 0.2])),), [0.0])
    res = dinkelbach_maxmin(fam, 1.0, eps=1e-4, cfg=SolverConfig(method="frank_wolfe", rel_tol=1e-4))
    assert res.lambda_ == pytest.approx(FROZEN_GRID_RATIO, abs=1e-3)
