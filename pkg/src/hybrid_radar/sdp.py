"""Small dense convex programs over the trace-bounded PSD cone.

Feasible set everywhere: ``{W Hermitian, W >= 0, tr(W) <= tau}``.

``solve_maxmin_affine`` has two interchangeable back ends: a log-barrier
interior-point method on the dual (default) and a smoothed conditional
gradient method whose linear oracle is one leading-eigenvector
computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

__all__ = [
    "AffineForm",
    "PsdProgram",
    "SolverConfig",
    "SolverResult",
    "SolverError",
    "hermitian",
    "trace_inner",
    "solve_maxmin_affine",
    "solve_concave_sqrt",
    "maximize_affine_trace",
    "randomize_rank_one",
]


class SolverError(RuntimeError):
    """An inner convex solve failed to reach its tolerance."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


def hermitian(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    return 0.5 * (A + A.conj().T)


def trace_inner(W, C) -> float:
    """``Re tr(W C)`` for Hermitian ``W`` and ``C``."""
    return float(np.vdot(C, W).real)


@dataclass(frozen=True)
class AffineForm:
    """``W -> constant + tr(W coeff)``."""

    constant: float
    coeff: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "coeff", hermitian(self.coeff))

    def __call__(self, W) -> float:
        return self.constant + trace_inner(W, self.coeff)

    def __add__(self, other: "AffineForm") -> "AffineForm":
        return AffineForm(self.constant + other.constant, self.coeff + other.coeff)

    def scaled(self, a: float) -> "AffineForm":
        return AffineForm(a * self.constant, a * self.coeff)


@dataclass(frozen=True)
class PsdProgram:
    """A max-min-affine, concave-sqrt or single-affine program.

    For ``kind == "concave_sqrt"`` the objective is
    ``sum_k 2 a_k sqrt(tr(W S)) + forms[k](W)`` where each form carries
    ``-B_k`` as its coefficient.
    """

    dimension: int
    trace_budget: float
    kind: str
    forms: tuple
    sqrt_weights: np.ndarray | None = None
    sqrt_matrix: np.ndarray | None = None
    warm_start: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("maxmin", "concave_sqrt", "affine"):
            raise ValueError(f"unknown program kind {self.kind!r}")
        if not self.forms:
            raise ValueError("program needs at least one form")
        if not (math.isfinite(self.trace_budget) and self.trace_budget > 0):
            raise ValueError("trace budget must be finite and positive")
        object.__setattr__(self, "forms", tuple(self.forms))

    @classmethod
    def maxmin(cls, forms: Sequence[AffineForm], tau: float, warm_start=None):
        if not forms:
            raise ValueError("program needs at least one form")
        return cls(forms[0].coeff.shape[0], float(tau), "maxmin", tuple(forms), warm_start=warm_start)

    @classmethod
    def affine(cls, form: AffineForm, tau: float):
        return cls(form.coeff.shape[0], float(tau), "affine", (form,))

    @classmethod
    def concave_sqrt(cls, S, Bs, a, tau: float, warm_start=None):
        forms = tuple(AffineForm(0.0, -np.asarray(B)) for B in Bs)
        return cls(np.asarray(S).shape[0], float(tau), "concave_sqrt", forms,
                   sqrt_weights=np.asarray(a, dtype=float), sqrt_matrix=hermitian(S),
                   warm_start=warm_start)

    def objective(self, W) -> float:
        vals = np.array([f(W) for f in self.forms])
        if self.kind == "maxmin":
            return float(vals.min())
        if self.kind == "affine":
            return float(vals[0])
        x = max(trace_inner(W, self.sqrt_matrix), 0.0)
        return float(2.0 * self.sqrt_weights.sum() * math.sqrt(x) + vals.sum())


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 5000
    rel_tol: float = 1e-5
    smoothing_temperature: float = 1.0
    seed: int = 0
    method: str = "barrier"

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.method not in ("barrier", "frank_wolfe"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class SolverResult:
    W: np.ndarray
    objective: float
    iterations: int
    converged: bool
    gap: float = float("nan")
    info: dict = field(default_factory=dict)


def _lmax(A):
    w, V = np.linalg.eigh(A)
    return w[-1], V[:, -1]


def _psd_clip(W, tau):
    """Project round-off out of a nearly-feasible ``W``."""
    W = hermitian(W)
    w, V = np.linalg.eigh(W)
    w = np.clip(w, 0.0, None)
    s = w.sum()
    if s > tau:
        w *= tau / s
    return (V * w) @ V.conj().T


# ---------------------------------------------------------------- max-min


def solve_maxmin_affine(prog: PsdProgram, cfg: SolverConfig | None = None) -> SolverResult:
    """Maximize ``min_k form_k(W)`` over the trace-``tau`` spectrahedron."""
    cfg = cfg or SolverConfig()
    if prog.kind not in ("maxmin", "affine"):
        raise ValueError("solve_maxmin_affine needs a max-min or affine program")
    c = np.array([f.constant for f in prog.forms])
    C = np.stack([f.coeff for f in prog.forms])
    tau = prog.trace_budget
    scale = max(float(np.abs(c).max()), tau * max(np.linalg.norm(Ck, 2) for Ck in C))
    if scale == 0.0:
        return SolverResult(np.zeros_like(C[0]), 0.0, 0, True, 0.0)
    # work with tr(W) <= 1 and data of unit size
    cn, Cn = c / scale, C * (tau / scale)
    if cfg.method == "barrier":
        Wn, lo, hi, iters = _maxmin_barrier(cn, Cn, cfg)
    else:
        Wn, lo, hi, iters = _maxmin_frank_wolfe(cn, Cn, cfg, prog.warm_start, tau)
    W = tau * Wn
    if prog.warm_start is not None:
        W0 = _psd_clip(prog.warm_start, tau)
        v0 = float(np.min(c + np.einsum("kij,ji->k", C, W0).real))
        if v0 > scale * lo:
            W, lo = W0, v0 / scale
    gap = max(hi - lo, 0.0)
    tol = cfg.rel_tol * max(1.0, abs(hi), abs(lo))
    return SolverResult(W, scale * lo, iters, gap <= tol, scale * gap)


def _maxmin_barrier(c, C, cfg, purify=True):
    """Log-barrier method on the dual

        min  c.p + nu   s.t.  nu I - sum_k p_k C_k >= 0,  p in simplex,  nu >= 0.

    The barrier is self-concordant, so centering uses damped Newton steps
    ``1/(1+decrement)`` and needs no function-value line search. Primal
    candidates: the central-path matrix ``Z^{-1}/t`` and its purification
    onto the leading eigenvectors (the optimal face is usually rank one).
    """
    m, N = C.shape[0], C.shape[1]
    eye = np.eye(N)
    F = np.concatenate([-C, eye[None]], axis=0)      # Z = sum_j x_j F_j
    cost = np.concatenate([c, [1.0]])
    x = np.concatenate([np.full(m, 1.0 / m), [0.0]])
    x[-1] = max(np.linalg.eigvalsh(np.tensordot(x[:m], C, 1))[-1], 0.0) + 1.0
    A = np.concatenate([np.ones(m), [0.0]])

    def chol(x):
        try:
            return np.linalg.cholesky(np.tensordot(x, F, 1))
        except np.linalg.LinAlgError:
            return None

    def primal_value(W):
        return float(np.min(c + np.einsum("kij,ji->k", C, W).real))

    t = 1.0
    best_W, best = np.zeros((N, N), complex), float(np.min(c))
    dual = np.inf
    steps = 0
    L = chol(x)
    while True:
        for _ in range(200):
            Linv = sla.solve_triangular(L, eye, lower=True)
            Y = Linv[None] @ F @ Linv.conj().T[None]
            Yf = Y.reshape(m + 1, -1)
            g = t * cost - np.trace(Y, axis1=1, axis2=2).real - 1.0 / x
            Hs = (Yf.conj() @ Yf.T).real + np.diag(1.0 / x ** 2)
            try:
                cf = sla.cho_factor(Hs)
            except np.linalg.LinAlgError:
                Hs[np.diag_indices_from(Hs)] += 1e-13 * np.max(np.diag(Hs))
                cf = sla.cho_factor(Hs)
            Hg, HA = sla.cho_solve(cf, g), sla.cho_solve(cf, A)
            dx = -(Hg - HA * (A @ Hg) / (A @ HA))
            dec = max(-g @ dx, 0.0)
            steps += 1
            if dec < 1e-12:
                break
            lam = math.sqrt(dec)
            s = 1.0 if lam < 0.25 else 1.0 / (1.0 + lam)
            while True:
                xn = x + s * dx
                Ln = chol(xn) if np.all(xn > 0) else None
                if Ln is not None or s < 1e-16:
                    break
                s *= 0.5
            if Ln is None:
                break
            x, L = xn, Ln
            if lam < 1e-7 or steps >= cfg.max_iters:
                break
        dual = min(dual, float(cost @ x))
        Linv = sla.solve_triangular(L, eye, lower=True)
        W = Linv.conj().T @ Linv / t
        tr = np.trace(W).real
        if tr > 1.0:
            W /= tr
        v = primal_value(W)
        if v > best:
            best_W, best = W, v
        tol = cfg.rel_tol * max(1.0, abs(dual))
        if dual - best > tol and (N + m + 1) / t < 10.0 * tol:
            cand = _complementary(best_W, x, c, C)
            if cand is not None and primal_value(cand) > best:
                best_W, best = cand, primal_value(cand)
        if purify and dual - best > tol and (N + m + 1) / t < 10.0 * tol:
            for cand in _purified(W, c, C):
                v = primal_value(cand)
                if v > best:
                    best_W, best = cand, v
                if dual - best <= tol:
                    break
        if dual - best <= cfg.rel_tol * max(1.0, abs(dual)) or steps >= cfg.max_iters:
            break
        if (N + m + 1) / t < 1e-3 * cfg.rel_tol:
            break
        t *= 20.0
    return best_W, best, dual, steps


def _complementary(W, x, c, C):
    """Correct ``W`` so the active forms are equal and the trace is tight.

    Near the optimum the primal lives on the near-null space of the dual
    slack ``Z``; the correction is the least-norm change of ``U^H W U`` that
    satisfies complementary slackness, clipped back to the feasible set.
    """
    m, N = C.shape[0], C.shape[1]
    p, nu = x[:m], x[m]
    Z = nu * np.eye(N) - np.tensordot(p, C, 1)
    z, V = np.linalg.eigh(Z)
    r = int(np.sum(z <= 1e-6 * max(1.0, abs(z).max())))
    active = np.flatnonzero(p > 1e-6 * p.max())
    if r == 0 or active.size == 0:
        return None
    U = V[:, :r]
    Cr = U.conj().T[None] @ C[active] @ U[None]
    X0 = U.conj().T @ W @ U
    # real coordinates of a Hermitian r x r matrix: diagonal, then re/im of the upper part
    iu = np.triu_indices(r, 1)
    basis = []
    for i in range(r):
        E = np.zeros((r, r), complex)
        E[i, i] = 1.0
        basis.append(E)
    for i, j in zip(*iu):
        E = np.zeros((r, r), complex)
        E[i, j] = E[j, i] = 1.0
        basis.append(E)
        E = np.zeros((r, r), complex)
        E[i, j], E[j, i] = 1j, -1j
        basis.append(E)
    basis = np.array(basis)
    G = np.einsum("kij,bji->kb", Cr, basis).real           # tr(C_k E_b)
    rows = [np.concatenate([G[i], [-1.0]]) for i in range(active.size)]
    rhs = [-c[active[i]] for i in range(active.size)]
    if nu > 1e-6:
        rows.append(np.concatenate([np.trace(basis, axis1=1, axis2=2).real, [0.0]]))
        rhs.append(1.0)
    Amat, b = np.array(rows), np.array(rhs)
    y0 = np.concatenate([np.einsum("bij,ji->b", basis.conj(), X0).real
                         / np.einsum("bij,bij->b", basis.conj(), basis).real,
                         [float(np.min(c[active] + np.einsum("kij,ji->k", Cr, X0).real))]])
    dy = np.linalg.lstsq(Amat, b - Amat @ y0, rcond=None)[0]
    X = np.tensordot(y0[:-1] + dy[:-1], basis, 1)
    w, Q = np.linalg.eigh((X + X.conj().T) / 2)
    X = (Q * np.clip(w, 0.0, None)) @ Q.conj().T
    tr = np.trace(X).real
    if tr <= 0:
        return None
    if tr > 1.0:
        X /= tr
    return U @ X @ U.conj().T


def _purified(W, c, C, max_rank=4):
    """Re-solve on the span of the leading eigenvectors of ``W`` (lazily)."""
    w, V = np.linalg.eigh(W)
    for r in range(1, min(max_rank, W.shape[0] - 1) + 1):
        U = V[:, -r:]
        Cr = U.conj().T[None] @ C @ U[None]
        if r == 1:
            t_best = _best_scalar_step(c, Cr[:, 0, 0].real)
            yield t_best * np.outer(U[:, 0], U[:, 0].conj())
        else:
            Zr, _, _, _ = _maxmin_barrier(c, Cr, SolverConfig(rel_tol=1e-10, max_iters=400),
                                          purify=False)
            yield U @ Zr @ U.conj().T


def _best_scalar_step(c, d):
    """argmax over t in [0, 1] of min_k c_k + t d_k (piecewise linear, concave)."""
    ts = [0.0, 1.0]
    for i in range(len(c)):
        for j in range(i + 1, len(c)):
            if d[i] != d[j]:
                tc = (c[j] - c[i]) / (d[i] - d[j])
                if 0.0 < tc < 1.0:
                    ts.append(tc)
    ts = np.array(ts)
    vals = np.min(c[None, :] + ts[:, None] * d[None, :], axis=1)
    return float(ts[int(np.argmax(vals))])


def _softmin(h, mu):
    z = -(h - h.min()) / mu
    e = np.exp(z)
    return h.min() - mu * np.log(e.sum()), e / e.sum()


def _maxmin_frank_wolfe(c, C, cfg, warm_start, tau):
    m, N = C.shape[0], C.shape[1]
    W = np.zeros((N, N), complex) if warm_start is None else _psd_clip(warm_start, tau) / tau
    h = c + np.einsum("kij,ji->k", C, W).real
    mu = cfg.smoothing_temperature
    mu_min = 0.25 * cfg.rel_tol / max(math.log(m), 1.0)
    best_W, best = W, h.min()
    dual = np.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        _, p = _softmin(h, mu)
        G = np.tensordot(p, C, 1)
        lam, q = _lmax(G)
        dual = min(dual, float(p @ c + max(lam, 0.0)))
        if dual - best <= cfg.rel_tol * max(1.0, abs(dual)):
            break
        V = np.outer(q, q.conj()) if lam > 0 else np.zeros_like(W)
        hv = c + np.einsum("kij,ji->k", C, V).real
        d = hv - h
        # exact line search on the smoothed objective (concave in the step)
        lo, hi = 0.0, 1.0
        if _softmin(h + d, mu)[1] @ d >= 0:
            lo = 1.0
        else:
            for _ in range(50):
                mid = 0.5 * (lo + hi)
                if _softmin(h + mid * d, mu)[1] @ d > 0:
                    lo = mid
                else:
                    hi = mid
        step = lo
        W = (1 - step) * W + step * V
        h = h + step * d
        if h.min() > best:
            best_W, best = W, h.min()
        if it % 50 == 0 and mu > mu_min:
            mu = max(mu * 0.5, mu_min)
    return best_W, best, dual, it


# ------------------------------------------------------------ affine / sqrt


def maximize_affine_trace(coeff, tau: float):
    """Closed form of ``max tr(W coeff)``: all budget on the leading eigenvector."""
    lam, q = _lmax(hermitian(coeff))
    if lam <= 0:
        n = coeff.shape[0]
        return np.zeros((n, n), complex), 0.0
    return tau * np.outer(q, q.conj()), float(tau * lam)


def solve_concave_sqrt(prog: PsdProgram, cfg: SolverConfig | None = None) -> SolverResult:
    """Maximize ``2 A sqrt(tr(W S)) - tr(W B) + const`` (``A = sum a_k``, ``B = sum B_k``).

    Uses the scalar dual ``min_y A y + tau max(lmax(A S / y - B), 0)``
    (from ``2 sqrt(x) = min_y x/y + y``); an optimal rank-one primal point
    is read off its leading eigenvector, then polished by conditional
    gradient steps if the certified gap is still open.
    """
    cfg = cfg or SolverConfig()
    if prog.kind != "concave_sqrt":
        raise ValueError("solve_concave_sqrt needs a concave_sqrt program")
    tau = prog.trace_budget
    S = prog.sqrt_matrix
    A = float(prog.sqrt_weights.sum())
    B = -sum(f.coeff for f in prog.forms)
    const = float(sum(f.constant for f in prog.forms))
    n = S.shape[0]

    def value(W):
        x = max(trace_inner(W, S), 0.0)
        return 2.0 * A * math.sqrt(x) - trace_inner(W, B) + const

    lam_s = np.linalg.eigvalsh(S)[-1]
    if A <= 0 or lam_s <= 0:
        W, v = maximize_affine_trace(-B, tau)
        return SolverResult(W, v + const, 1, True, 0.0)

    def dual(y):
        return A * y + tau * max(np.linalg.eigvalsh(A * S / y - B)[-1], 0.0)

    y_hi = math.sqrt(tau * lam_s)
    r = _golden(lambda u: dual(math.exp(u)), math.log(y_hi) - 40.0, math.log(y_hi) + 1e-12, 200)
    y_star = math.exp(r)
    upper = dual(y_star)

    def best_scale(q):
        qs, qb = trace_inner(np.outer(q, q.conj()), S), trace_inner(np.outer(q, q.conj()), B)
        if qs <= 0:
            return 0.0
        t = tau if qb <= 0 else min(tau, A * A * qs / qb ** 2)
        return t

    cands = []
    _, q = _lmax(A * S / y_star - B)
    cands.append(q)
    try:
        w, V = sla.eigh(S, B)
        cands.append(V[:, -1] / np.linalg.norm(V[:, -1]))
    except (np.linalg.LinAlgError, ValueError):
        pass
    cands.append(_lmax(S)[1])
    best_W, best = np.zeros((n, n), complex), const
    for q in cands:
        W = best_scale(q) * np.outer(q, q.conj())
        v = value(W)
        if v > best:
            best_W, best = W, v
    for W in _sqrt_face_points(A * S / y_star - B, S, y_star, tau):
        v = value(W)
        if v > best:
            best_W, best = W, v
    if prog.warm_start is not None:
        W0 = _psd_clip(prog.warm_start, tau)
        if value(W0) > best:
            best_W, best = W0, value(W0)

    scale = max(abs(upper), A * math.sqrt(tau * lam_s), 1e-300)
    iters = 0
    W = best_W
    while upper - best > cfg.rel_tol * scale and iters < cfg.max_iters:
        iters += 1
        x = trace_inner(W, S)
        if x <= 0:
            break
        G = A * S / math.sqrt(x) - B
        upper = min(upper, dual(math.sqrt(x)))
        lam, q = _lmax(G)
        V = tau * np.outer(q, q.conj()) if lam > 0 else np.zeros_like(W)
        D = V - W
        step = _golden(lambda s: -value(W + s * D), 0.0, 1.0, 60)
        Wn = W + step * D
        if value(Wn) <= value(W):
            break
        W = Wn
        if value(W) > best:
            best_W, best = W, value(W)
    gap = max(upper - best, 0.0)
    return SolverResult(best_W, best, iters, gap <= cfg.rel_tol * scale, gap)


def _sqrt_face_points(G, S, y, tau):
    """Points on the top eigenspace of ``G`` with ``tr(W S) = y^2``.

    At the dual optimum the primal maximizes ``tr(W G)`` and meets the
    ``sqrt`` tangency; when that face has dimension > 1 a mix of its two
    extreme ``S`` directions hits the tangency exactly.
    """
    g, V = np.linalg.eigh(G)
    if g[-1] <= 0:
        return
    for rel in (1e-10, 1e-8, 1e-6):
        U = V[:, g >= g[-1] - rel * max(1.0, abs(g).max())]
        if U.shape[1] < 2:
            continue
        s, E = np.linalg.eigh(U.conj().T @ S @ U)
        lo, hi = tau * s[0], tau * s[-1]
        if not lo < y * y < hi:
            continue
        th = (hi - y * y) / (hi - lo)
        X = tau * (th * np.outer(E[:, 0], E[:, 0].conj()) + (1 - th) * np.outer(E[:, -1], E[:, -1].conj()))
        yield U @ X @ U.conj().T


def _golden(f, a, b, iters):
    """Minimize a unimodal scalar function on ``[a, b]``."""
    g = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = b - g * (b - a), a + g * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - g * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (b - a)
            f2 = f(x2)
        if b - a < 1e-14 * max(1.0, abs(a)):
            break
    return x1 if f1 <= f2 else x2


# --------------------------------------------------------------- rounding


def randomize_rank_one(W, Q: int, score: Callable, seed, extra_candidates=(),
                       vectorized: bool = False) -> np.ndarray:
    """Gaussian randomization of a relaxed PSD solution.

    Draws ``Q`` circularly-symmetric complex vectors with covariance ``W``,
    appends the leading eigenvector of ``W`` and any ``extra_candidates``,
    and returns the first candidate with the highest ``score``.
    ``score`` maps one vector to a real, or a (Q, N) batch to (Q,) scores
    when ``vectorized`` is set.
    """
    if Q < 1:
        raise ValueError("Q must be >= 1")
    W = hermitian(W)
    w, V = np.linalg.eigh(W)
    if w[-1] <= 0:
        raise ValueError("cannot round a zero covariance")
    root = V * np.sqrt(np.clip(w, 0.0, None))
    rng = np.random.default_rng(seed)
    n = W.shape[0]
    z = (rng.standard_normal((Q, n)) + 1j * rng.standard_normal((Q, n))) / math.sqrt(2.0)
    cands = [z @ root.T, V[:, -1][None, :]]
    extras = [np.asarray(e, complex).reshape(1, n) for e in extra_candidates if e is not None]
    X = np.concatenate(cands + extras, axis=0)
    if vectorized:
        scores = np.asarray(score(X), dtype=float)
    else:
        scores = np.array([score(x) for x in X], dtype=float)
    scores = np.where(np.isnan(scores), -np.inf, scores)
    return X[int(np.argmax(scores))].copy()


def with_warm_start(prog: PsdProgram, W) -> PsdProgram:
    return replace(prog, warm_start=W)
