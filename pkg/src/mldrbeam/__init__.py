"""Robust MLDR beamforming with a complex generalized Gaussian speech prior."""

__version__ = "0.1.0"

from .beamformers import (  # noqa: E402
    BeamWeights,
    CggdConfig,
    EnhancedOutput,
    SteeringVector,
    apply_weights,
    cggd_mldr,
    mpdr_weights,
    oracle_mvdr_weights,
)
from .errors import MldrBeamError  # noqa: E402
from .stft import StftTensor, Waveform, analyze, synthesize  # noqa: E402

__all__ = [
    "BeamWeights", "CggdConfig", "EnhancedOutput", "MldrBeamError", "StftTensor", "SteeringVector",
    "Waveform", "__version__", "analyze", "apply_weights", "cggd_mldr", "mpdr_weights",
    "oracle_mvdr_weights", "synthesize",
]
