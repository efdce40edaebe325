import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import crandn, rand_herm
from hybrid_radar import _kernels
from hybrid_radar._kernels import _fallback

try:
    from hybrid_radar._kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def test_backend_selected():
    assert _kernels.BACKEND in ("cython", "python")
    if _ckernels is not None:
        assert _kernels.BACKEND == "cython" or _kernels.os.environ.get("HYBRID_RADAR_PURE_PYTHON")


@given(seed=st.integers(0, 2**32 - 1), Q=st.integers(1, 30), N=st.integers(1, 12), m=st.integers(1, 5))
def test_fallback_quad_forms_definition(seed, Q, N, m):
    rng = np.random.default_rng(seed)
    X = crandn(rng, Q, N)
    A = np.stack([rand_herm(rng, N) for _ in range(m)])
    ref = np.array([[np.vdot(x, a @ x).real for a in A] for x in X])
    np.testing.assert_allclose(_fallback.quad_forms(X, A), ref, rtol=1e-10, atol=1e-10)


@given(seed=st.integers(0, 2**32 - 1), T=st.integers(1, 40), N=st.integers(1, 12), J=st.integers(1, 3))
def test_fallback_energy_definition(seed, T, N, J):
    rng = np.random.default_rng(seed)
    Y, F = crandn(rng, T, N), crandn(rng, J, N)
    ref = np.array([sum(abs(np.vdot(f, y)) ** 2 for f in F) for y in Y])
    np.testing.assert_allclose(_fallback.energy_statistic(Y, F), ref, rtol=1e-10)


@needs_ext
@given(seed=st.integers(0, 2**32 - 1), Q=st.integers(1, 30), N=st.integers(1, 20), m=st.integers(1, 7))
def test_backends_agree_quad_forms(seed, Q, N, m):
    rng = np.random.default_rng(seed)
    X = crandn(rng, Q, N)
    A = np.stack([rand_herm(rng, N) for _ in range(m)])
    np.testing.assert_allclose(_ckernels.quad_forms(X, A), _fallback.quad_forms(X, A), rtol=1e-11, atol=1e-11)


@needs_ext
@given(seed=st.integers(0, 2**32 - 1), T=st.integers(1, 50), N=st.integers(1, 20), J=st.integers(1, 3))
def test_backends_agree_energy(seed, T, N, J):
    rng = np.random.default_rng(seed)
    Y, F = crandn(rng, T, N), crandn(rng, J, N)
    np.testing.assert_allclose(_ckernels.energy_statistic(Y, F), _fallback.energy_statistic(Y, F), rtol=1e-12)


@needs_ext
def test_extension_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        _ckernels.quad_forms(np.ones((2, 3), complex), np.ones((1, 4, 4), complex))
    with pytest.raises(ValueError):
        _ckernels.energy_statistic(np.ones((2, 3), complex), np.ones((1, 4), complex))


def test_pure_python_switch(tmp_path):
    import subprocess
    import sys
    code = "import hybrid_radar; print(hybrid_radar.BACKEND)"
    env = dict(__import__("os").environ, HYBRID_RADAR_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
