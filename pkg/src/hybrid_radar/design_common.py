"""Pieces shared by the sequential design loops: configuration, state,
reports, batched SINR scoring and the waveform SCP step."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from ._kernels import quad_forms
from .sdp import (
    AffineForm,
    PsdProgram,
    SolverConfig,
    SolverError,
    maximize_affine_trace,
    randomize_rank_one,
    solve_maxmin_affine,
)
from .signal_model import (
    CommWaveformModel,
    DesignPoint,
    Scenario,
    covariance_stack,
    sinr_profile,
)

__all__ = [
    "DesignConfig",
    "DesignState",
    "DesignReport",
    "ScpDivergenceError",
    "initial_waveform",
    "initial_comm_filter",
    "initial_point",
    "generalized_top_eigvec",
]


class ScpDivergenceError(SolverError):
    """The SCP objective decreased by more than the solver tolerance."""


@dataclass(frozen=True)
class DesignConfig:
    eps: float = 0.01
    Q: int = 200
    max_outer: int = 50
    max_inner: int = 100
    filter_budget: float = 1.0
    seed: int = 42
    solver: SolverConfig = field(default_factory=SolverConfig)
    convergence: str = "absolute"

    def __post_init__(self):
        if self.convergence not in ("absolute", "relative", "db"):
            raise ValueError(f"unknown convergence rule {self.convergence!r}")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.Q < 1 or self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("Q, max_outer and max_inner must be positive")
        if self.filter_budget <= 0:
            raise ValueError("filter_budget must be positive")

    def improvement(self, old: float, new: float) -> float:
        """Outer-loop progress measure compared against ``eps``."""
        if self.convergence == "absolute":
            return abs(new - old)
        if self.convergence == "relative":
            return abs(new - old) / max(abs(old), 1e-300)
        return abs(10.0 * math.log10(new / old))

    def rng_seed(self, *key) -> np.random.SeedSequence:
        """Seed for one randomization call, keyed by (outer iteration, step)."""
        return np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(int(k) for k in key))


@dataclass
class DesignState:
    """Current vectors plus bookkeeping; the matrices are their outer products.

    ``w_r`` is None before the first radar-filter update.
    """

    s_r: np.ndarray
    w_r: np.ndarray | None
    w_c: np.ndarray
    iteration: int = 0
    trace: list = field(default_factory=list)
    slacks: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def S_r(self):
        return np.outer(self.s_r, self.s_r.conj())

    @property
    def W_r(self):
        return None if self.w_r is None else np.outer(self.w_r, self.w_r.conj())

    @property
    def W_c(self):
        return np.outer(self.w_c, self.w_c.conj())

    def point(self, **meta) -> DesignPoint:
        return DesignPoint(self.s_r, self.w_r, self.w_c, meta)

    def copy(self) -> "DesignState":
        return replace(self, trace=list(self.trace), info=dict(self.info))


# the state types of the two formulations differ only by the slack field
MmState = DesignState
WsState = DesignState


@dataclass
class DesignReport:
    point: DesignPoint
    mode: str
    scenario: Scenario
    objective: float
    trace: list
    profile: np.ndarray
    converged: bool
    iterations: int
    info: dict = field(default_factory=dict)

    @property
    def worst_case(self) -> float:
        return float(np.min(self.profile))

    @property
    def mean(self) -> float:
        return float(np.mean(self.profile))

    @property
    def weighted_sum(self) -> float:
        return float(np.dot(self.scenario.weights, self.profile))


def unit(v):
    v = np.asarray(v, dtype=complex)
    return v / np.linalg.norm(v)


def initial_waveform(N: int, P_r: float, seed) -> np.ndarray:
    """Random binary sequence at full power ``P_r``."""
    rng = np.random.default_rng(seed)
    return rng.choice([-1.0, 1.0], size=N).astype(complex) * math.sqrt(P_r / N)


def initial_comm_filter(model: CommWaveformModel, N: int) -> np.ndarray:
    """Leading eigenvector of the nominal comm covariance."""
    w, V = np.linalg.eigh(covariance_stack(model, [0], N)[0])
    return V[:, -1].astype(complex)


def initial_point(sc: Scenario, model: CommWaveformModel, seed) -> DesignState:
    return DesignState(initial_waveform(sc.N, sc.P_r, seed), None, initial_comm_filter(model, sc.N))


def generalized_top_eigvec(A, B):
    """Leading eigenvector of the pencil ``(A, B)``, ``B`` positive definite,
    via the Cholesky factor ``B = C C^H``: ``w = C^{-H} q`` with ``q`` the
    top eigenvector of ``C^{-1} A C^{-H}``. Returned with unit norm.
    """
    C = np.linalg.cholesky(B)
    Ci = sla.solve_triangular(C, np.eye(B.shape[0]), lower=True)
    R = Ci @ A @ Ci.conj().T
    w, V = np.linalg.eigh(0.5 * (R + R.conj().T))
    v = sla.solve_triangular(C.conj().T, V[:, -1], lower=False)
    return unit(v), float(w[-1])


# ----------------------------------------------------------- batched SINR


def radar_terms(sc: Scenario, X, s_r, sig):
    """Radar SINR per candidate receive filter (rows of ``X``) and delay."""
    X = np.atleast_2d(X)
    q = quad_forms(X, sig)
    n2 = np.einsum("qn,qn->q", X.conj(), X).real
    g = np.abs(X.conj() @ s_r) ** 2
    return sc.gamma_r * g[:, None] / (sc.gamma_c * q + n2[:, None])


def comm_terms(sc: Scenario, X, s_r, sig):
    """Comm SINR per candidate comm filter (rows of ``X``) and delay."""
    X = np.atleast_2d(X)
    q = quad_forms(X, sig)
    n2 = np.einsum("qn,qn->q", X.conj(), X).real
    g = np.abs(X.conj() @ s_r) ** 2
    return sc.gamma_c * q / (sc.gamma_r * g + n2)[:, None]


def waveform_profiles(sc: Scenario, X, w_r, w_c, sig):
    """Per-delay SINR for candidate waveforms (rows of ``X``) at fixed filters."""
    X = np.atleast_2d(X)
    qr = quad_forms(w_r[None, :], sig)[0]
    qc = quad_forms(w_c[None, :], sig)[0]
    wr2 = np.vdot(w_r, w_r).real
    wc2 = np.vdot(w_c, w_c).real
    gr = np.abs(X @ w_r.conj()) ** 2
    gc = np.abs(X @ w_c.conj()) ** 2
    radar = sc.gamma_r * gr[:, None] / (sc.gamma_c * qr + wr2)[None, :]
    comm = sc.gamma_c * qc[None, :] / (sc.gamma_r * gc + wc2)[:, None]
    return radar + comm


def full_power(X, P_r):
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    n = np.linalg.norm(X, axis=1, keepdims=True)
    return X * (math.sqrt(P_r) / np.where(n > 0, n, 1.0))


def aggregate(profiles, sc: Scenario, criterion: str):
    if criterion == "min":
        return profiles.min(axis=-1)
    return profiles @ sc.weights


# ------------------------------------------------------------ waveform SCP


def _relaxed_objective(S, sc, W_r, W_c, sig, criterion):
    d = sc.gamma_c * np.einsum("ij,kji->k", W_r, sig).real + np.trace(W_r).real
    n = sc.gamma_c * np.einsum("ij,kji->k", W_c, sig).real
    fr = sc.gamma_r * np.vdot(W_r, S).real / d
    fc = n / (sc.gamma_r * np.vdot(W_c, S).real + np.trace(W_c).real)
    return float(aggregate(fr + fc, sc, criterion))


def _linearized_forms(S0, sc, W_r, W_c, sig):
    """Affine minorants ``F_r,k(S) + F~_c,k(S)`` of the per-delay SINR, tight at ``S0``."""
    d = sc.gamma_c * np.einsum("ij,kji->k", W_r, sig).real + np.trace(W_r).real
    n = sc.gamma_c * np.einsum("ij,kji->k", W_c, sig).real
    e0 = sc.gamma_r * np.vdot(W_c, S0).real + np.trace(W_c).real
    wcs0 = np.vdot(W_c, S0).real
    forms = []
    for k in range(sig.shape[0]):
        const = n[k] / e0 + n[k] * sc.gamma_r * wcs0 / e0 ** 2
        coeff = sc.gamma_r * W_r / d[k] - (n[k] * sc.gamma_r / e0 ** 2) * W_c
        forms.append(AffineForm(const, coeff))
    return forms


def waveform_step(state: DesignState, sc: Scenario, sig, cfg: DesignConfig,
                  criterion: str, step_key) -> DesignState:
    """SCP on the relaxed waveform matrix followed by randomized rounding.

    ``criterion`` is ``"min"`` (worst case, max-min subproblems) or
    ``"sum"`` (weighted sum, closed-form affine subproblems).
    """
    W_r, W_c = state.W_r, state.W_c
    S = state.S_r
    obj = _relaxed_objective(S, sc, W_r, W_c, sig, criterion)
    scp_trace = [obj]
    tol = 10.0 * cfg.solver.rel_tol * max(1.0, abs(obj))
    for _ in range(cfg.max_inner):
        forms = _linearized_forms(S, sc, W_r, W_c, sig)
        if criterion == "min":
            res = solve_maxmin_affine(PsdProgram.maxmin(forms, sc.P_r, warm_start=S), cfg.solver)
            S_new = res.W
        else:
            const = float(sc.weights @ [f.constant for f in forms])
            coeff = sum(u * f.coeff for u, f in zip(sc.weights, forms))
            S_new, _ = maximize_affine_trace(coeff, sc.P_r)
            # the affine model at S equals the objective; keep S on ties
            if const + np.vdot(coeff, S_new).real <= const + np.vdot(coeff, S).real:
                S_new = S
        obj_new = _relaxed_objective(S_new, sc, W_r, W_c, sig, criterion)
        if obj_new < obj - tol:
            raise ScpDivergenceError(
                f"SCP objective fell from {obj:.10g} to {obj_new:.10g}", partial=scp_trace)
        improvement = obj_new - obj
        if obj_new >= obj:
            S, obj = S_new, obj_new
        scp_trace.append(obj)
        if improvement < cfg.eps:
            break

    def score(X):
        return aggregate(waveform_profiles(sc, full_power(X, sc.P_r), state.w_r, state.w_c, sig),
                         sc, criterion)

    if np.trace(S).real > 0:
        s = randomize_rank_one(S, cfg.Q, score, cfg.rng_seed(*step_key),
                               extra_candidates=[state.s_r], vectorized=True)
    else:
        s = state.s_r
    new = state.copy()
    new.s_r = full_power(s, sc.P_r)[0]
    new.info.setdefault("scp_iterations", []).append(len(scp_trace) - 1)
    return new


# ------------------------------------------------------------------ loop


def run_design(mode: str, steps, objective, state: DesignState, sc: Scenario,
               model: CommWaveformModel, cfg: DesignConfig) -> DesignReport:
    """Repeat the block updates in ``steps`` until the outer objective
    improves by less than ``cfg.eps``; returns the best point seen."""
    t0 = time.perf_counter()
    converged = False
    best = None
    for it in range(1, cfg.max_outer + 1):
        for step in steps:
            state = step(state, it)
        state.iteration = it
        value = objective(state.point())
        state.trace.append(value)
        if best is None or value >= best[0]:
            best = (value, state.copy())
        if it > 1 and cfg.improvement(state.trace[-2], state.trace[-1]) < cfg.eps:
            converged = True
            break
    value, final = best
    dp = final.point(mode=mode, seed=cfg.seed)
    info = dict(final.info)
    info["elapsed_s"] = time.perf_counter() - t0
    return DesignReport(
        point=dp,
        mode=mode,
        scenario=sc,
        objective=value,
        trace=list(state.trace),
        profile=sinr_profile(sc, dp, model),
        converged=converged,
        iterations=len(state.trace),
        info=info,
    )
