"""Joint waveform and receive-filter design for a co-channel hybrid
active-passive radar under timing uncertainty."""

from ._kernels import BACKEND
from .design_common import DesignConfig, DesignReport, DesignState, ScpDivergenceError
from .design_mm import mm_design
from .design_sync import baseline_sinr, hybrid_rx_design, sync_design
from .design_ws import ws_design
from .sdp import SolverConfig, SolverError
from .signal_model import (
    CommWaveformModel,
    DesignPoint,
    Scenario,
    build_waveform_matrix,
    db,
    raised_cosine_taps,
    undb,
)

__version__ = "0.1.0"


def default_model(rolloff=0.22, P=8, I=2, L=10, N=16, energy="unit"):
    """Waveform model with the reference parameters; ``energy="unit"`` rescales to tr(Sigma_0)=1."""
    model = build_waveform_matrix(raised_cosine_taps(rolloff, P, I), L)
    if energy == "unit":
        return model.unit_energy(N)
    if energy == "raw":
        return model
    raise ValueError(f"energy must be 'unit' or 'raw', got {energy!r}")


__all__ = [
    "BACKEND",
    "CommWaveformModel",
    "DesignConfig",
    "DesignPoint",
    "DesignReport",
    "DesignState",
    "Scenario",
    "ScpDivergenceError",
    "SolverConfig",
    "SolverError",
    "baseline_sinr",
    "build_waveform_matrix",
    "db",
    "default_model",
    "hybrid_rx_design",
    "mm_design",
    "raised_cosine_taps",
    "sync_design",
    "undb",
    "ws_design",
]
