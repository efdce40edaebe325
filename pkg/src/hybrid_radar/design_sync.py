"""Joint design without timing uncertainty, plus the reference configurations."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .design_common import (
    DesignConfig,
    DesignReport,
    DesignState,
    generalized_top_eigvec,
    initial_point,
    run_design,
    waveform_step,
)
from .design_mm import mm_design
from .design_ws import ws_design
from .signal_model import CommWaveformModel, Scenario, comm_covariance, sinr_k

__all__ = ["sync_filter_r", "sync_filter_c", "sync_design", "baseline_sinr", "hybrid_rx_design"]


def sync_filter_r(s_r, sc: Scenario, model: CommWaveformModel) -> np.ndarray:
    """``(gamma_c Sigma_0 + I)^{-1} s_r / (s_r^H (gamma_c Sigma_0 + I)^{-1} s_r)``."""
    s_r = np.asarray(s_r, dtype=complex)
    if not np.any(s_r):
        raise ValueError("s_r must be nonzero")
    B = sc.gamma_c * comm_covariance(model, 0, s_r.size) + np.eye(s_r.size)
    if not np.allclose(B, B.conj().T, atol=1e-12):
        raise ValueError("interference-plus-noise matrix is not Hermitian")
    x = sla.cho_solve(sla.cho_factor(B), s_r)
    return x / np.vdot(s_r, x).real


def sync_filter_c(s_r, sc: Scenario, model: CommWaveformModel) -> np.ndarray:
    """Leading generalized eigenvector of ``(gamma_c Sigma_0, gamma_r s_r s_r^H + I)``."""
    s_r = np.asarray(s_r, dtype=complex)
    N = s_r.size
    A = sc.gamma_c * comm_covariance(model, 0, N)
    B = sc.gamma_r * np.outer(s_r, s_r.conj()) + np.eye(N)
    return generalized_top_eigvec(A, B)[0]


def sync_design(sc: Scenario, model: CommWaveformModel, init: DesignState | None = None,
                cfg: DesignConfig | None = None) -> DesignReport:
    """Closed-form filters and the SCP waveform step, alternated at ``K = 0``."""
    if sc.K != 0:
        raise ValueError("sync_design needs K = 0")
    cfg = cfg or DesignConfig()
    sc.check(model)
    state = initial_point(sc, model, cfg.seed) if init is None else init.copy()
    sig = comm_covariance(model, 0, sc.N)[None]

    def filters(st, it):
        st = st.copy()
        st.iteration = it
        st.w_r = sync_filter_r(st.s_r, sc, model)
        st.w_r = st.w_r / np.linalg.norm(st.w_r)
        st.w_c = sync_filter_c(st.s_r, sc, model)
        return st

    def wave(st, it):
        return waveform_step(st, sc, sig, cfg, "sum", (it, 2))

    return run_design("SYNC", [filters, wave], lambda dp: sinr_k(sc, dp, model, 0),
                      state, sc, model, cfg)


def baseline_sinr(kind: str, sc: Scenario, model: CommWaveformModel, s_r=None) -> float:
    """Interference-free single-path SINR with the optimal (matched) filter.

    ``active-only``: ``gamma_r |s_r|^2`` (``P_r`` when ``s_r`` is omitted).
    ``passive-only``: ``gamma_c lambda_max(Sigma_0)``.
    """
    if kind == "active-only":
        power = sc.P_r if s_r is None else float(np.vdot(s_r, s_r).real)
        return float(sc.gamma_r * power)
    if kind == "passive-only":
        lam = np.linalg.eigvalsh(comm_covariance(model, 0, sc.N))[-1]
        return float(sc.gamma_c * lam)
    raise ValueError(f"unknown baseline {kind!r}")


def hybrid_rx_design(sc: Scenario, model: CommWaveformModel, s_r, cfg: DesignConfig | None = None,
                     mode: str = "MM") -> DesignReport:
    """Optimize only the receive filters for a fixed waveform ``s_r``."""
    cfg = cfg or DesignConfig()
    s_r = np.asarray(s_r, dtype=complex)
    if np.vdot(s_r, s_r).real > sc.P_r * (1 + 1e-9):
        raise ValueError("s_r violates the power budget")
    init = initial_point(sc, model, cfg.seed)
    init.s_r = s_r.copy()
    if mode == "MM":
        return mm_design(sc, model, init, cfg, optimize_waveform=False)
    if mode == "WS":
        return ws_design(sc, model, init, cfg, optimize_waveform=False)
    raise ValueError(f"mode must be 'MM' or 'WS', got {mode!r}")
