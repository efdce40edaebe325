"""Discrete signal model of the co-channel hybrid active-passive radar.

All durations are integer sample counts (sampling interval fixed to 1).
The communication waveform is a linearly modulated pulse train
``s = H b`` observed through an ``N``-sample window whose position is
shifted by the unknown integer delay ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from ._kernels import quad_forms

__all__ = [
    "PulseShape",
    "CommWaveformModel",
    "Scenario",
    "DesignPoint",
    "raised_cosine",
    "raised_cosine_taps",
    "build_waveform_matrix",
    "build_shift_matrix",
    "shift_offset",
    "comm_covariance",
    "covariance_stack",
    "sinr_k",
    "sinr_profile",
    "worst_case_sinr",
    "weighted_sum_sinr",
    "mean_sinr",
    "geometric_delay_offset",
    "db",
    "undb",
]

SPEED_OF_LIGHT = 299_792_458.0


def db(x):
    return 10.0 * np.log10(x)


def undb(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def raised_cosine(t, rolloff: float, period: float):
    """Raised-cosine pulse ``sinc(t/T) cos(pi b t/T) / (1 - (2 b t/T)^2)``.

    The removable singularity at ``|t| = T/(2b)`` takes its limit value
    ``(pi/4) sinc(1/(2b))``.
    """
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError(f"rolloff must lie in [0, 1], got {rolloff!r}")
    x = np.asarray(t, dtype=float) / period
    num = np.sinc(x) * np.cos(np.pi * rolloff * x)
    den = 1.0 - (2.0 * rolloff * x) ** 2
    singular = np.abs(den) < 1e-12
    if rolloff == 0.0 or not np.any(singular):
        return num / den
    limit = (np.pi / 4.0) * np.sinc(1.0 / (2.0 * rolloff))
    return np.where(singular, limit, num / np.where(singular, 1.0, den))


@dataclass(frozen=True)
class PulseShape:
    """Sampled symbol pulse: ``taps[i*P + p] = g(p + i*P)``, ``p < P``, ``i < I``."""

    rolloff: float
    P: int
    I: int
    taps: np.ndarray

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        if taps.shape != (self.I * self.P,):
            raise ValueError(f"expected {self.I * self.P} taps, got shape {taps.shape}")
        if not np.all(np.isfinite(taps)):
            raise ValueError("pulse taps must be finite")
        object.__setattr__(self, "taps", taps)

    def block(self, i: int) -> np.ndarray:
        return self.taps[i * self.P:(i + 1) * self.P]


def raised_cosine_taps(rolloff: float, P: int, I: int) -> PulseShape:
    """Raised-cosine taps over the causal support ``[0, I*P)`` centred at ``I*P/2``."""
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError(f"rolloff must lie in [0, 1], got {rolloff!r}")
    if P < 1 or I < 1:
        raise ValueError("P and I must be positive integers")
    t = np.arange(I * P, dtype=float) - I * P / 2.0
    return PulseShape(rolloff=float(rolloff), P=int(P), I=int(I), taps=raised_cosine(t, rolloff, P))


@dataclass(frozen=True)
class CommWaveformModel:
    """Waveform matrix ``H`` (M x L) mapping symbols to the sampled IO signal.

    ``energy_scale`` records the factor applied to the raw pulse taps
    (1.0 for the unnormalized model).
    """

    H: np.ndarray
    L: int
    P: int
    I: int
    energy_scale: float = 1.0

    def __post_init__(self):
        H = np.asarray(self.H)
        if H.shape != (self.M, self.L):
            raise ValueError(f"H must be {self.M}x{self.L}, got {H.shape}")
        object.__setattr__(self, "H", H.astype(complex))

    @property
    def M(self) -> int:
        return (self.L + self.I - 1) * self.P

    @cached_property
    def gram(self) -> np.ndarray:
        """``H H^H`` (M x M); every windowed covariance is a sub-block of it."""
        return self.H @ self.H.conj().T

    def unit_energy(self, N: int) -> "CommWaveformModel":
        """Rescale ``H`` so the nominal window has unit expected energy, ``tr(Sigma_0) = 1``."""
        energy = float(np.trace(comm_covariance(self, 0, N)).real)
        if energy <= 0.0:
            raise ValueError("nominal window carries no energy")
        c = 1.0 / math.sqrt(energy)
        return CommWaveformModel(self.H * c, self.L, self.P, self.I, self.energy_scale * c)


def build_waveform_matrix(shape: PulseShape, L: int) -> CommWaveformModel:
    """Block-Toeplitz ``H``: column ``j`` holds the taps at rows ``jP .. jP+IP-1``."""
    if L < 1:
        raise ValueError("L must be >= 1")
    P, I = shape.P, shape.I
    M = (L + I - 1) * P
    H = np.zeros((M, L))
    for j in range(L):
        H[j * P:j * P + I * P, j] = shape.taps
    return CommWaveformModel(H, L, P, I)


def shift_offset(k: int, N: int, M: int) -> int:
    """First sample of the observation window for delay ``k``: ``(M-N)/2 - k``."""
    if (M - N) % 2:
        raise ValueError(f"M - N must be even (M={M}, N={N})")
    if N > M:
        raise ValueError(f"window N={N} exceeds waveform length M={M}")
    bar_k = (M - N) // 2 - int(k)
    if bar_k < 0 or bar_k + N > M:
        raise IndexError(f"delay k={k} moves the window outside [0, {M})")
    return bar_k


def build_shift_matrix(k: int, N: int, M: int) -> np.ndarray:
    """N x M selector ``J_k`` extracting samples ``bar_k .. bar_k+N-1``."""
    bar_k = shift_offset(k, N, M)
    J = np.zeros((N, M))
    J[np.arange(N), bar_k + np.arange(N)] = 1.0
    return J


def comm_covariance(model: CommWaveformModel, k: int, N: int) -> np.ndarray:
    """``Sigma_k = J_k H H^H J_k^H`` for unit-covariance symbols."""
    b = shift_offset(k, N, model.M)
    return model.gram[b:b + N, b:b + N].copy()


def covariance_stack(model: CommWaveformModel, ks: Sequence[int], N: int) -> np.ndarray:
    return np.stack([comm_covariance(model, k, N) for k in ks])


@dataclass(frozen=True)
class Scenario:
    """Channel SNRs (linear), noise power, window length, delay bound and weights."""

    gamma_r: float
    gamma_c: float
    N: int = 16
    K: int = 0
    weights: np.ndarray | None = None
    P_r: float = 1.0
    sigma2: float = 1.0

    def __post_init__(self):
        if self.gamma_r < 0 or self.gamma_c < 0:
            raise ValueError("channel SNRs must be nonnegative")
        if self.sigma2 <= 0 or self.P_r <= 0:
            raise ValueError("sigma2 and P_r must be positive")
        if self.N < 1 or self.K < 0:
            raise ValueError("N must be positive and K nonnegative")
        w = np.ones(2 * self.K + 1) if self.weights is None else np.asarray(self.weights, float)
        if w.shape != (2 * self.K + 1,):
            raise ValueError(f"need {2 * self.K + 1} weights, got {w.shape}")
        if np.any(w < 0) or not np.any(w > 0):
            raise ValueError("weights must be nonnegative with at least one positive")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_db(cls, gamma_r_db: float, gamma_c_db: float, **kw) -> "Scenario":
        return cls(gamma_r=float(undb(gamma_r_db)), gamma_c=float(undb(gamma_c_db)), **kw)

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def check(self, model: CommWaveformModel) -> None:
        M = model.M
        if (M - self.N) % 2 or self.N > M:
            raise ValueError(f"M - N must be even and nonnegative (M={M}, N={self.N})")
        if self.K > (M - self.N) // 2:
            raise ValueError(f"K={self.K} exceeds (M-N)/2={(M - self.N) // 2}")

    def with_(self, **changes) -> "Scenario":
        fields = dict(gamma_r=self.gamma_r, gamma_c=self.gamma_c, N=self.N, K=self.K,
                      weights=self.weights, P_r=self.P_r, sigma2=self.sigma2)
        if "K" in changes and "weights" not in changes:
            fields["weights"] = None
        fields.update(changes)
        return Scenario(**fields)


@dataclass(frozen=True)
class DesignPoint:
    """Radar waveform ``s_r`` and the two receive filters ``w_r``, ``w_c``."""

    s_r: np.ndarray
    w_r: np.ndarray
    w_c: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        vecs = [np.asarray(v, dtype=complex).reshape(-1) for v in (self.s_r, self.w_r, self.w_c)]
        if len({v.size for v in vecs}) != 1:
            raise ValueError("s_r, w_r and w_c must share one length")
        if np.linalg.norm(vecs[1]) == 0 or np.linalg.norm(vecs[2]) == 0:
            raise ValueError("receive filters must be nonzero")
        for name, v in zip(("s_r", "w_r", "w_c"), vecs):
            object.__setattr__(self, name, v)

    @property
    def N(self) -> int:
        return self.s_r.size

    @property
    def power(self) -> float:
        return float(np.vdot(self.s_r, self.s_r).real)

    def feasible(self, sc: Scenario, rtol: float = 1e-9) -> bool:
        return self.power <= sc.P_r * (1.0 + rtol)


def _terms(sc: Scenario, s_r, w_r, w_c, sig):
    """Per-delay radar and comm SINR terms; ``sig`` is (m, N, N)."""
    wr2 = np.vdot(w_r, w_r).real
    wc2 = np.vdot(w_c, w_c).real
    qr = quad_forms(w_r[None, :], sig)[0]
    qc = quad_forms(w_c[None, :], sig)[0]
    radar = sc.gamma_r * abs(np.vdot(w_r, s_r)) ** 2 / (sc.gamma_c * qr + wr2)
    comm = sc.gamma_c * qc / (sc.gamma_r * abs(np.vdot(w_c, s_r)) ** 2 + wc2)
    return radar, comm


def sinr_profile(sc: Scenario, dp: DesignPoint, model: CommWaveformModel, ks=None) -> np.ndarray:
    """Output SINR at each delay in ``ks`` (defaults to ``-K..K``)."""
    ks = sc.ks if ks is None else np.atleast_1d(ks)
    sig = covariance_stack(model, ks, dp.N)
    radar, comm = _terms(sc, dp.s_r, dp.w_r, dp.w_c, sig)
    return radar + comm


def sinr_k(sc: Scenario, dp: DesignPoint, model: CommWaveformModel, k: int) -> float:
    return float(sinr_profile(sc, dp, model, [k])[0])


def worst_case_sinr(sc: Scenario, dp: DesignPoint, model: CommWaveformModel) -> float:
    return float(np.min(sinr_profile(sc, dp, model)))


def weighted_sum_sinr(sc: Scenario, dp: DesignPoint, model: CommWaveformModel) -> float:
    """``sum_k u_k SINR_k`` without the ``1/(2K+1)`` factor."""
    return float(np.dot(sc.weights, sinr_profile(sc, dp, model)))


def mean_sinr(sc: Scenario, dp: DesignPoint, model: CommWaveformModel) -> float:
    """Uniform average of ``SINR_k`` over ``-K..K``."""
    return float(np.mean(sinr_profile(sc, dp, model)))


def _distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def geometric_delay_offset(target_xy, radar_xy, io_xy, delta_xy, T_s: float,
                           c: float = SPEED_OF_LIGHT) -> int:
    """Integer delay offset caused by a target-location error ``delta_xy``.

    Positive when the location error moves the target toward the IO.
    """
    if T_s <= 0:
        raise ValueError("T_s must be positive")
    true_xy = (target_xy[0] + delta_xy[0], target_xy[1] + delta_xy[1])
    nominal = (_distance(target_xy, radar_xy) - _distance(target_xy, io_xy)) / c
    actual = (_distance(true_xy, radar_xy) - _distance(true_xy, io_xy)) / c
    return int(round((actual - nominal) / T_s))
