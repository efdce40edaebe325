"""Monte Carlo evaluation of the two-filter energy detector.

Randomness is drawn in fixed-size blocks; block ``b`` of stream ``s`` uses
``SeedSequence(seed, spawn_key=(s, b))``, so results do not depend on the
number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from ._kernels import energy_statistic
from .signal_model import CommWaveformModel, DesignPoint, comm_covariance, shift_offset

__all__ = [
    "DetectionConfig",
    "DetectionCurve",
    "Detector",
    "calibrate_threshold",
    "missing_probability",
    "detection_curve",
    "gamma_tail_threshold",
    "horizontal_shift_db",
    "log_slope",
]

_H0_STREAM = 0


@dataclass(frozen=True)
class DetectionConfig:
    P_f: float = 1e-4
    trials_h0: int = 1_000_000
    trials_h1: int = 100_000
    snr_grid_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    seed: int = 42
    sigma2: float = 1.0
    block_size: int = 50_000
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.P_f < 1.0:
            raise ValueError("P_f must lie in (0, 1)")
        if self.trials_h0 * self.P_f < 10:
            raise ValueError(f"need trials_h0 >= 10/P_f = {math.ceil(10 / self.P_f)}")
        if self.trials_h1 < 1 or self.block_size < 1 or self.workers < 1:
            raise ValueError("trials_h1, block_size and workers must be positive")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        object.__setattr__(self, "snr_grid_db", tuple(float(x) for x in self.snr_grid_db))


@dataclass
class DetectionCurve:
    name: str
    snr_db: np.ndarray
    pm: np.ndarray
    half_width: np.ndarray
    zeta: float
    trials_h1: int
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Detector:
    """Receive filters (rows of ``filters``) and the echo paths present under H1.

    Each filter is scaled to unit norm so every output has noise power ``sigma2``.
    """

    filters: np.ndarray
    s_r: np.ndarray | None
    active: bool
    passive: bool

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.filters, dtype=complex))
        norms = np.linalg.norm(F, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("filters must be nonzero")
        object.__setattr__(self, "filters", F / norms)
        if self.active:
            if self.s_r is None:
                raise ValueError("an active path needs s_r")
            object.__setattr__(self, "s_r", np.asarray(self.s_r, dtype=complex))

    @property
    def N(self) -> int:
        return self.filters.shape[1]

    @classmethod
    def hybrid(cls, dp: DesignPoint) -> "Detector":
        return cls(np.stack([dp.w_r, dp.w_c]), dp.s_r, True, True)

    @classmethod
    def active_only(cls, s_r) -> "Detector":
        return cls(np.asarray(s_r, complex)[None, :], s_r, True, False)

    @classmethod
    def passive_only(cls, model: CommWaveformModel, N: int) -> "Detector":
        w, V = np.linalg.eigh(comm_covariance(model, 0, N))
        return cls(V[:, -1][None, :], None, False, True)


def _as_detector(obj) -> Detector:
    if isinstance(obj, Detector):
        return obj
    if isinstance(obj, DesignPoint):
        return Detector.hybrid(obj)
    raise TypeError("expected a Detector or a DesignPoint")


def _cn(rng, shape, var):
    """Circular complex Gaussian samples with variance ``var``."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(var / 2.0)


def _blocks(trials, block_size):
    n = -(-trials // block_size)
    return [(b, min(block_size, trials - b * block_size)) for b in range(n)]


def _run_blocks(fn, trials, block_size, workers):
    blocks = _blocks(trials, block_size)
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda bt: fn(*bt), blocks))
    else:
        parts = [fn(b, t) for b, t in blocks]
    return parts


def _rng(seed, stream, block):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream, block)))


def h0_statistics(det, sigma2: float, trials: int, seed: int, block_size: int = 50_000,
                  workers: int = 1) -> np.ndarray:
    """Detector statistic under noise only."""
    det = _as_detector(det)

    def run(b, t):
        rng = _rng(seed, _H0_STREAM, b)
        return energy_statistic(_cn(rng, (t, det.N), sigma2), det.filters)

    return np.concatenate(_run_blocks(run, trials, block_size, workers))


def calibrate_threshold(dp, sigma2: float, P_f: float, trials: int, seed: int,
                        block_size: int = 50_000, workers: int = 1) -> float:
    """Empirical ``(1 - P_f)``-quantile of the H0 statistic."""
    if not 0.0 < P_f < 1.0:
        raise ValueError("P_f must lie in (0, 1)")
    if trials * P_f < 10:
        raise ValueError(f"insufficient trials: need trials * P_f >= 10, got {trials * P_f:g}")
    stats = h0_statistics(dp, sigma2, trials, seed, block_size, workers)
    return float(np.quantile(stats, 1.0 - P_f, method="higher"))


def _comm_window(model: CommWaveformModel, N: int) -> np.ndarray:
    b = shift_offset(0, N, model.M)
    return model.H[b:b + N, :]


def h1_statistics(det, model: CommWaveformModel, avg_snr_db: float, trials: int, seed: int,
                  sigma2: float = 1.0, stream: int = 1, block_size: int = 50_000,
                  workers: int = 1) -> np.ndarray:
    """Detector statistic under target presence with Rayleigh path amplitudes."""
    det = _as_detector(det)
    N = det.N
    var = sigma2 * 10.0 ** (avg_snr_db / 10.0)
    JH = _comm_window(model, N) if det.passive else None

    def run(b, t):
        rng = _rng(seed, stream, b)
        Y = _cn(rng, (t, N), sigma2)
        if det.active:
            Y += _cn(rng, (t, 1), var) * det.s_r[None, :]
        if det.passive:
            bits = rng.choice([-1.0, 1.0], size=(t, JH.shape[1]))
            S_c = bits @ JH.T
            S_c /= np.linalg.norm(S_c, axis=1, keepdims=True)
            Y += _cn(rng, (t, 1), var) * S_c
        return energy_statistic(Y, det.filters)

    return np.concatenate(_run_blocks(run, trials, block_size, workers))


def missing_probability(dp, model: CommWaveformModel, sc, zeta: float,
                        avg_snr_db: float, trials: int, seed: int, stream: int = 1,
                        block_size: int = 50_000, workers: int = 1) -> float:
    """Fraction of H1 trials whose statistic does not exceed ``zeta``.

    ``sc`` is a Scenario (its ``sigma2`` is used) or the noise power itself.
    """
    sigma2 = float(getattr(sc, "sigma2", sc))
    stats = h1_statistics(dp, model, avg_snr_db, trials, seed, sigma2, stream, block_size, workers)
    return float(np.mean(stats <= zeta))


def detection_curve(detectors: Mapping[str, object], model: CommWaveformModel,
                    cfg: DetectionConfig | None = None) -> dict:
    """Threshold calibration and miss-probability sweep for each detector."""
    cfg = cfg or DetectionConfig()
    out = {}
    for name, det in detectors.items():
        det = _as_detector(det)
        zeta = calibrate_threshold(det, cfg.sigma2, cfg.P_f, cfg.trials_h0, cfg.seed,
                                   cfg.block_size, cfg.workers)
        pm = np.array([
            missing_probability(det, model, cfg.sigma2, zeta, snr, cfg.trials_h1, cfg.seed,
                                stream=1 + i, block_size=cfg.block_size, workers=cfg.workers)
            for i, snr in enumerate(cfg.snr_grid_db)
        ])
        hw = 1.96 * np.sqrt(pm * (1.0 - pm) / cfg.trials_h1)
        out[name] = DetectionCurve(name, np.array(cfg.snr_grid_db), pm, hw, zeta, cfg.trials_h1)
    return out


def gamma_tail_threshold(P_f: float, sigma2: float = 1.0) -> float:
    """Root of ``(1 + z/sigma2) exp(-z/sigma2) = P_f``: the threshold for two
    orthonormal filters in white noise."""
    if not 0.0 < P_f < 1.0:
        raise ValueError("P_f must lie in (0, 1)")
    x = brentq(lambda x: math.log1p(x) - x - math.log(P_f), 0.0, 1e3, xtol=1e-14)
    return sigma2 * x


def log_slope(curve: DetectionCurve, lo_db: float, hi_db: float) -> float:
    """Slope of ``log10 Pm`` per dB between two grid points."""
    i, j = _grid_index(curve, lo_db), _grid_index(curve, hi_db)
    p = np.maximum(curve.pm[[i, j]], 1.0 / (2 * curve.trials_h1))
    return float((math.log10(p[1]) - math.log10(p[0])) / (hi_db - lo_db))


def _grid_index(curve, x):
    idx = np.flatnonzero(np.isclose(curve.snr_db, x))
    if idx.size == 0:
        raise ValueError(f"{x} dB is not on the SNR grid")
    return int(idx[0])


def horizontal_shift_db(a: DetectionCurve, b: DetectionCurve, levels: Sequence[float] | None = None,
                        floor: float | None = None) -> float:
    """Largest SNR offset between two miss curves at common ``Pm`` levels.

    Each curve is interpolated linearly in ``(SNR dB, log10 Pm)``; levels
    default to the ``Pm`` values both curves span above ``floor``
    (20 expected misses by default).
    """
    floor = floor if floor is not None else 20.0 / min(a.trials_h1, b.trials_h1)

    def snr_at(c, lp):
        keep = c.pm > floor
        x, y = c.snr_db[keep], np.log10(c.pm[keep])
        order = np.argsort(y)
        return float(np.interp(lp, y[order], x[order]))

    la = np.log10(a.pm[a.pm > floor])
    lb = np.log10(b.pm[b.pm > floor])
    if la.size < 2 or lb.size < 2:
        raise ValueError("curves need two points above the floor")
    lo, hi = max(la.min(), lb.min()), min(la.max(), lb.max())
    if levels is None:
        lps = np.linspace(lo, hi, 25)
    else:
        lps = np.log10(np.asarray(levels, dtype=float))
        lps = lps[(lps >= lo) & (lps <= hi)]
    if lps.size == 0:
        raise ValueError("curves share no Pm range")
    return float(max(abs(snr_at(a, lp) - snr_at(b, lp)) for lp in lps))
