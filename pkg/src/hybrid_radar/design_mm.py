"""Sequential max-min design of the radar waveform and both receive filters."""

from __future__ import annotations

import numpy as np

from .design_common import (
    DesignConfig,
    DesignReport,
    DesignState,
    MmState,
    comm_terms,
    initial_point,
    radar_terms,
    run_design,
    unit,
    waveform_step,
)
from .fractional import RatioFamily, dinkelbach_maxmin
from .sdp import AffineForm, randomize_rank_one
from .signal_model import CommWaveformModel, Scenario, covariance_stack, worst_case_sinr

__all__ = ["MmState", "mm_filter_step", "mm_waveform_step", "mm_design"]

_RADAR, _COMM, _WAVE = 0, 1, 2


def mm_filter_step(state: DesignState, which: str, sc: Scenario, model: CommWaveformModel,
                   cfg: DesignConfig, sig=None) -> DesignState:
    """Update ``w_r`` (``which="radar"``) or ``w_c`` (``which="comm"``) by
    Dinkelbach on the relaxed max-min ratio problem plus randomization."""
    sig = covariance_stack(model, sc.ks, sc.N) if sig is None else sig
    eye = np.eye(sc.N)
    S_r = state.S_r
    m = sig.shape[0]
    if which == "radar":
        kappa = comm_terms(sc, state.w_c, state.s_r, sig)[0]
        num = [AffineForm(0.0, sc.gamma_r * S_r)] * m
        den = [AffineForm(0.0, sc.gamma_c * sig[k] + eye) for k in range(m)]
        incumbent = state.w_r

        def score(X):
            return (radar_terms(sc, X, state.s_r, sig) + kappa[None, :]).min(axis=1)
        key = _RADAR
    elif which == "comm":
        if state.w_r is None:
            raise ValueError("the comm-filter step needs a radar filter")
        kappa = radar_terms(sc, state.w_r, state.s_r, sig)[0]
        num = [AffineForm(0.0, sc.gamma_c * sig[k]) for k in range(m)]
        den = [AffineForm(0.0, sc.gamma_r * S_r + eye)] * m
        incumbent = state.w_c

        def score(X):
            return (comm_terms(sc, X, state.s_r, sig) + kappa[None, :]).min(axis=1)
        key = _COMM
    else:
        raise ValueError(f"which must be 'radar' or 'comm', got {which!r}")

    res = dinkelbach_maxmin(RatioFamily(num, den, kappa), cfg.filter_budget, cfg.eps,
                            cfg.solver, cfg.max_inner)
    w = randomize_rank_one(res.W, cfg.Q, score, cfg.rng_seed(state.iteration, key),
                           extra_candidates=[incumbent], vectorized=True)
    new = state.copy()
    if which == "radar":
        new.w_r = unit(w)
    else:
        new.w_c = unit(w)
    new.info.setdefault(f"dinkelbach_{which}_iterations", []).append(res.iterations)
    return new


def mm_waveform_step(state: DesignState, sc: Scenario, model: CommWaveformModel,
                     cfg: DesignConfig, sig=None) -> DesignState:
    """SCP with max-min affine subproblems under ``tr(S_r) <= P_r``, then rounding."""
    sig = covariance_stack(model, sc.ks, sc.N) if sig is None else sig
    return waveform_step(state, sc, sig, cfg, "min", (state.iteration, _WAVE))


def mm_design(sc: Scenario, model: CommWaveformModel, init: DesignState | None = None,
              cfg: DesignConfig | None = None, optimize_waveform: bool = True) -> DesignReport:
    """Alternate radar filter, comm filter and waveform updates until the
    worst-case SINR improves by less than ``cfg.eps``."""
    cfg = cfg or DesignConfig()
    sc.check(model)
    state = initial_point(sc, model, cfg.seed) if init is None else init.copy()
    if state.s_r.size != sc.N:
        raise ValueError("initial point has the wrong length")
    if np.vdot(state.s_r, state.s_r).real > sc.P_r * (1 + 1e-9):
        raise ValueError("initial waveform violates the power budget")
    sig = covariance_stack(model, sc.ks, sc.N)

    steps = [
        lambda st, it: mm_filter_step(_at(st, it), "radar", sc, model, cfg, sig),
        lambda st, it: mm_filter_step(_at(st, it), "comm", sc, model, cfg, sig),
    ]
    if optimize_waveform:
        steps.append(lambda st, it: mm_waveform_step(_at(st, it), sc, model, cfg, sig))
    mode = "MM" if optimize_waveform else "MM-Rx"
    return run_design(mode, steps, lambda dp: worst_case_sinr(sc, dp, model), state, sc, model, cfg)


def _at(state, it):
    state.iteration = it
    return state
