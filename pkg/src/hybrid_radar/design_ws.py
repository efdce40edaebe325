"""Sequential weighted-sum design of the radar waveform and both receive filters."""

from __future__ import annotations

import numpy as np

from .design_common import (
    DesignConfig,
    DesignReport,
    DesignState,
    WsState,
    generalized_top_eigvec,
    initial_point,
    radar_terms,
    run_design,
    unit,
    waveform_step,
)
from .fractional import quadratic_transform_sum
from .sdp import randomize_rank_one
from .signal_model import CommWaveformModel, Scenario, covariance_stack, weighted_sum_sinr

__all__ = ["WsState", "ws_filter_r_step", "ws_filter_c_step", "ws_waveform_step", "ws_design"]

_RADAR, _WAVE = 0, 2


def ws_filter_r_step(state: DesignState, sc: Scenario, model: CommWaveformModel,
                     cfg: DesignConfig, sig=None) -> DesignState:
    """Quadratic-transform update of the relaxed radar filter, then rounding
    with score ``sum_k u_k SINR_r,k``."""
    sig = covariance_stack(model, sc.ks, sc.N) if sig is None else sig
    eye = np.eye(sc.N)
    Bs = [sc.gamma_c * sig[k] + eye for k in range(sig.shape[0])]
    a = sc.weights * sc.gamma_r
    w0 = state.w_r if state.w_r is not None else unit(state.s_r)
    W0 = cfg.filter_budget * np.outer(unit(w0), unit(w0).conj())
    res = quadratic_transform_sum(state.S_r, Bs, a, cfg.filter_budget, cfg.eps, cfg.solver,
                                  W0=W0, max_iters=cfg.max_inner)

    def score(X):
        return radar_terms(sc, X, state.s_r, sig) @ sc.weights

    if np.trace(res.W).real > 0:
        w = randomize_rank_one(res.W, cfg.Q, score, cfg.rng_seed(state.iteration, _RADAR),
                               extra_candidates=[state.w_r], vectorized=True)
    else:
        w = w0
    new = state.copy()
    new.w_r = unit(w)
    new.slacks = res.slacks
    new.info.setdefault("qt_iterations", []).append(res.iterations)
    return new


def ws_filter_c_step(state: DesignState, sc: Scenario, model: CommWaveformModel,
                     sig=None) -> DesignState:
    """Closed-form comm filter: leading generalized eigenvector of
    ``(gamma_c sum_k u_k Sigma_k, gamma_r S_r + I)``."""
    sig = covariance_stack(model, sc.ks, sc.N) if sig is None else sig
    A = sc.gamma_c * np.tensordot(sc.weights, sig, 1)
    B = sc.gamma_r * state.S_r + np.eye(sc.N)
    w, _ = generalized_top_eigvec(A, B)
    new = state.copy()
    new.w_c = w
    return new


def ws_waveform_step(state: DesignState, sc: Scenario, model: CommWaveformModel,
                     cfg: DesignConfig, sig=None) -> DesignState:
    """SCP whose subproblems are single affine objectives (closed form), then rounding."""
    sig = covariance_stack(model, sc.ks, sc.N) if sig is None else sig
    return waveform_step(state, sc, sig, cfg, "sum", (state.iteration, _WAVE))


def ws_design(sc: Scenario, model: CommWaveformModel, init: DesignState | None = None,
              cfg: DesignConfig | None = None, optimize_waveform: bool = True) -> DesignReport:
    """Alternate the three block updates until the weighted-sum SINR
    improves by less than ``cfg.eps``."""
    cfg = cfg or DesignConfig()
    sc.check(model)
    state = initial_point(sc, model, cfg.seed) if init is None else init.copy()
    if state.s_r.size != sc.N:
        raise ValueError("initial point has the wrong length")
    if np.vdot(state.s_r, state.s_r).real > sc.P_r * (1 + 1e-9):
        raise ValueError("initial waveform violates the power budget")
    sig = covariance_stack(model, sc.ks, sc.N)

    def at(st, it):
        st.iteration = it
        return st

    steps = [
        lambda st, it: ws_filter_r_step(at(st, it), sc, model, cfg, sig),
        lambda st, it: ws_filter_c_step(st, sc, model, sig),
    ]
    if optimize_waveform:
        steps.append(lambda st, it: ws_waveform_step(st, sc, model, cfg, sig))
    mode = "WS" if optimize_waveform else "WS-Rx"
    return run_design(mode, steps, lambda dp: weighted_sum_sinr(sc, dp, model), state, sc, model, cfg)
