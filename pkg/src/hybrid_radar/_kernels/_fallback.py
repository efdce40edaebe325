"""Pure numpy versions of the hot kernels."""

import numpy as np


def quad_forms(X, mats):
    """``out[q, k] = Re(x_q^H A_k x_q)`` for rows of ``X`` (Q, N) and ``mats`` (m, N, N)."""
    X = np.asarray(X, dtype=complex)
    mats = np.asarray(mats, dtype=complex)
    # (m, Q, N) @ ... ; conj(x)^T A x summed over the last axis
    left = X.conj()[None, :, :] @ mats
    return np.einsum("kqn,qn->qk", left, X).real


def energy_statistic(Y, F):
    """``out[t] = sum_j |f_j^H y_t|^2`` for rows ``y_t`` of ``Y`` and ``f_j`` of ``F``."""
    Y = np.asarray(Y, dtype=complex)
    F = np.asarray(F, dtype=complex)
    proj = Y @ F.conj().T
    return (proj.real ** 2 + proj.imag ** 2).sum(axis=1)
