"""Fractional programming over the trace-bounded PSD cone.

* ``dinkelbach_maxmin``: generalized Dinkelbach iteration for
  ``max_W min_k fbar_k(W)/g_k(W) + kappa_k``.
* ``quadratic_transform_sum``: quadratic-transform alternation for
  ``max_W sum_k a_k tr(W S) / tr(W B_k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .sdp import (
    AffineForm,
    PsdProgram,
    SolverConfig,
    SolverError,
    solve_concave_sqrt,
    solve_maxmin_affine,
    trace_inner,
)

__all__ = ["RatioFamily", "FractionalResult", "dinkelbach_maxmin", "quadratic_transform_sum"]


@dataclass(frozen=True)
class RatioFamily:
    """Ratios ``fbar_k(W) / g_k(W) + kappa_k`` for ``k = 0 .. m-1``."""

    numerators: tuple
    denominators: tuple
    offsets: np.ndarray

    def __post_init__(self):
        num, den = tuple(self.numerators), tuple(self.denominators)
        off = np.asarray(self.offsets, dtype=float).reshape(-1)
        if not (len(num) == len(den) == off.size) or not num:
            raise ValueError("numerators, denominators and offsets must have one common length")
        object.__setattr__(self, "numerators", num)
        object.__setattr__(self, "denominators", den)
        object.__setattr__(self, "offsets", off)

    def __len__(self):
        return len(self.numerators)

    def folded(self):
        """``f_k = fbar_k + kappa_k g_k``."""
        return [n + d.scaled(k) for n, d, k in zip(self.numerators, self.denominators, self.offsets)]

    def ratios(self, W) -> np.ndarray:
        f = np.array([n(W) for n in self.numerators])
        g = np.array([d(W) for d in self.denominators])
        return f / g + self.offsets


@dataclass
class FractionalResult:
    W: np.ndarray
    lambda_: float
    trace: list
    iterations: int
    converged: bool
    eps0: float = float("nan")
    slacks: np.ndarray | None = None
    info: dict = field(default_factory=dict)


def dinkelbach_maxmin(family: RatioFamily, tau: float, eps: float = 0.01,
                      cfg: SolverConfig | None = None, max_iters: int = 100) -> FractionalResult:
    """Generalized Dinkelbach iteration starting from ``lambda = 0``.

    Each step solves ``max_W min_k f_k(W) - lambda g_k(W)`` and sets
    ``lambda`` to the smallest ratio at the new point; stops once that
    inner optimum ``eps0`` is ``<= eps``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    cfg = cfg or SolverConfig()
    f = family.folded()
    g = family.denominators
    lam = 0.0
    W_prev = None
    trace = [lam]
    eps0 = math.inf
    it = 0
    for it in range(1, max_iters + 1):
        forms = [fk + gk.scaled(-lam) for fk, gk in zip(f, g)]
        res = solve_maxmin_affine(PsdProgram.maxmin(forms, tau), cfg)
        if not res.converged:
            raise SolverError(f"inner max-min solve did not converge at iteration {it}",
                              partial=FractionalResult(W_prev, lam, trace, it - 1, False))
        W = res.W
        if W_prev is not None:
            # keep the incumbent when the inexact solve lands below it
            if min(fk(W_prev) - lam * gk(W_prev) for fk, gk in zip(f, g)) >= \
                    min(fk(W) - lam * gk(W) for fk, gk in zip(f, g)):
                W = W_prev
        gW = np.array([gk(W) for gk in g])
        if np.any(gW <= 0):
            W = W_prev
            eps0 = 0.0
            break
        fW = np.array([fk(W) for fk in f])
        eps0 = float(np.min(fW - lam * gW))
        lam_new = float(np.min(fW / gW))
        W_prev = W
        if lam_new > lam:
            lam = lam_new
        trace.append(lam)
        if eps0 <= eps:
            break
    if W_prev is None:
        raise SolverError("Dinkelbach produced no feasible point")
    value = float(np.min(family.ratios(W_prev)))
    return FractionalResult(W_prev, value, trace, it, eps0 <= eps, eps0=eps0)


def quadratic_transform_sum(S, Bs: Sequence, a: Sequence, tau: float, eps: float = 0.01,
                            cfg: SolverConfig | None = None, W0=None,
                            max_iters: int = 100) -> FractionalResult:
    """Quadratic-transform alternation for ``max sum_k a_k tr(W S) / tr(W B_k)``.

    Alternates the concave ``W``-update with slacks fixed and the closed-form
    slack update ``lambda_k = sqrt(a_k tr(W S)) / tr(W B_k)`` until the
    sum-of-ratios objective improves by less than ``eps``.
    """
    cfg = cfg or SolverConfig()
    S = np.asarray(S, dtype=complex)
    Bs = [np.asarray(B, dtype=complex) for B in Bs]
    a = np.asarray(a, dtype=float)
    n = S.shape[0]
    if np.all(a == 0):
        return FractionalResult(np.zeros((n, n), complex), 0.0, [0.0], 0, True,
                                slacks=np.zeros(a.size))

    def ratio_sum(W):
        num = max(trace_inner(W, S), 0.0)
        den = np.array([trace_inner(W, B) for B in Bs])
        if num == 0.0:
            return 0.0
        return float(np.sum(a * num / den))

    def slacks(W):
        num = max(trace_inner(W, S), 0.0)
        den = np.array([trace_inner(W, B) for B in Bs])
        return np.sqrt(a * num) / den

    W = np.eye(n, dtype=complex) * (tau / n) if W0 is None else np.asarray(W0, complex)
    lam = slacks(W)
    obj = ratio_sum(W)
    trace = [obj]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        prog = PsdProgram.concave_sqrt(S, [l * l * B for l, B in zip(lam, Bs)],
                                       lam * np.sqrt(a), tau, warm_start=W)
        res = solve_concave_sqrt(prog, cfg)
        W_new = res.W
        obj_new = ratio_sum(W_new)
        if obj_new >= obj:
            W, improvement = W_new, obj_new - obj
            obj = obj_new
        else:
            improvement = 0.0
        lam = slacks(W)
        trace.append(obj)
        if improvement < eps:
            converged = True
            break
    return FractionalResult(W, obj, trace, it, converged, slacks=lam)
