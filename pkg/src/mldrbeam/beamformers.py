"""Distortionless beamformers: MPDR, oracle MVDR and the iterative CGGD-MLDR.

Every beamformer works per frequency bin. Weights are stored as a (K, M)
array and applied as ``S_hat[k, l] = w[k]^H y[:, k, l]``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import cxlinalg
from .errors import ConfigurationError, DivergedError, DomainError
from .stft import StftTensor

log = logging.getLogger(__name__)


@dataclass
class SteeringVector:
    vectors: np.ndarray  # (K, M) complex
    reference_channel: int = 0
    normalization: str = "rtf"  # "rtf" or "unit"

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.complex128)
        if v.ndim == 1:
            v = v[None, :]
        if np.any(np.all(v == 0, axis=-1)):
            raise ConfigurationError("steering vector is all-zero at some bin")
        if self.normalization == "rtf":
            v = v / v[:, self.reference_channel : self.reference_channel + 1]
        elif self.normalization == "unit":
            v = v / np.linalg.norm(v, axis=-1, keepdims=True)
        else:
            raise ConfigurationError(f"unknown normalization {self.normalization!r}")
        self.vectors = v

    @property
    def channels(self):
        return self.vectors.shape[1]


@dataclass
class BeamWeights:
    weights: np.ndarray  # (K, M) complex

    def response(self, h):
        """``w(k)^H h(k)`` for every bin."""
        return np.einsum("km,km->k", np.conj(self.weights), _vectors(h))

    def distortion(self, h):
        return np.abs(self.response(h) - 1.0)


@dataclass
class CggdConfig:
    shape_p: float = 0.5
    floor_delta: object = None  # None -> relative default per bin
    max_iterations: int = 10
    loading: float = cxlinalg.DEFAULT_LOADING
    convergence_tol: object = 1e-4  # None disables early stopping

    def __post_init__(self):
        if not 0.0 <= self.shape_p <= 2.0:
            raise DomainError(f"shape_p={self.shape_p} outside [0, 2]")
        if int(self.max_iterations) < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        if self.loading < 0:
            raise ConfigurationError("loading must be non-negative")
        if self.floor_delta is not None and np.any(np.asarray(self.floor_delta) < 0):
            raise ConfigurationError("floor_delta must be non-negative")
        if self.convergence_tol is not None and self.convergence_tol < 0:
            raise ConfigurationError("convergence_tol must be non-negative")


@dataclass
class EnhancedOutput:
    estimates: StftTensor
    weights: BeamWeights
    iterations_run: int
    per_iteration_weight_delta: list = field(default_factory=list)
    # weight_history[i] holds w^i; index 0 is the MPDR initialization
    weight_history: list = field(default_factory=list)
    # objective at fixed lambda^{i+1}, before and after the w-update
    cost_trace: list = field(default_factory=list)


def _vectors(h):
    return h.vectors if isinstance(h, SteeringVector) else np.asarray(h, dtype=np.complex128)


def _bins(y):
    """Frames as (K, M, L)."""
    b = y.bins if isinstance(y, StftTensor) else np.asarray(y, dtype=np.complex128)
    return np.ascontiguousarray(b.transpose(1, 0, 2))


def apply_weights(w, y):
    """Single-channel StftTensor ``w(k)^H y(k, l)``."""
    ww = w.weights if isinstance(w, BeamWeights) else np.asarray(w)
    if ww.shape != (y.num_bins, y.channels):
        raise ConfigurationError(
            f"weights shape {ww.shape} does not match (bins, channels) = {(y.num_bins, y.channels)}")
    s = np.einsum("km,mkl->kl", np.conj(ww), y.bins)
    return y.with_bins(s[None])


def distortionless_weights(r, h, loading=cxlinalg.DEFAULT_LOADING):
    """``R^-1 h / (h^H R^-1 h)`` for batched R (K, M, M) and h (K, M)."""
    hv = _vectors(h)
    x = cxlinalg.solve_regularized(r, hv, loading)
    denom = np.einsum("km,km->k", np.conj(hv), x)
    w = x / denom[:, None]
    # one Newton step on the constraint removes residual rounding
    w = w / np.conj(np.einsum("km,km->k", np.conj(w), hv))[:, None]
    return BeamWeights(w)


def mpdr_weights(r, h, loading=cxlinalg.DEFAULT_LOADING):
    """MPDR weights from the noisy covariance (one matrix per bin)."""
    return distortionless_weights(r, h, loading)


def oracle_mvdr_weights(r_vv, h, loading=cxlinalg.DEFAULT_LOADING):
    """MVDR weights from the true interference-plus-noise covariance."""
    return distortionless_weights(r_vv, h, loading)


def lambda_update(s_hat, p):
    """Speech PSD update ``|S_hat|**(2 - p)``; equals 1 for p = 2 (even at 0)."""
    if not 0.0 <= p <= 2.0:
        raise DomainError(f"shape parameter p={p} outside [0, 2]")
    mag = np.abs(s_hat)
    if p == 2.0:
        return np.ones_like(mag)
    return mag ** (2.0 - p)


def weighted_cost(w, frames, weights):
    """Per-bin weighted output power ``sum_l |w^H y_l|^2 * weight_l``."""
    s = np.einsum("km,kml->kl", np.conj(w), frames)
    return np.sum(np.abs(s) ** 2 * weights, axis=-1)


def _relative_change(new, old):
    return np.linalg.norm(new - old, axis=-1) / np.linalg.norm(old, axis=-1)


def cggd_mldr(y, h, cfg=None, track_cost=False):
    """Iteratively reweighted CGGD-MLDR beamformer.

    Starts from the MPDR solution, then alternates the speech PSD estimate
    ``|S_hat|^2`` (floored by delta) with a distortionless solve on the
    covariance weighted by ``1 / lambda^(1 - p/2)``. Stops after
    ``max_iterations`` updates or once the largest per-bin relative weight
    change falls below ``convergence_tol``. ``p = 0`` is MLDR and ``p = 2``
    stays at MPDR.
    """
    cfg = cfg or CggdConfig()
    frames = _bins(y)  # (K, M, L)
    hv = _vectors(h)
    k_bins, m, n_frames = frames.shape
    if hv.shape != (k_bins, m):
        raise ConfigurationError(f"steering shape {hv.shape} does not match {(k_bins, m)}")
    if n_frames < m:
        log.warning("only %d frames for %d channels; covariance is rank deficient", n_frames, m)
    p = float(cfg.shape_p)
    delta = cxlinalg.default_floor(frames) if cfg.floor_delta is None else cfg.floor_delta
    delta = np.broadcast_to(np.asarray(delta, dtype=np.float64), (k_bins,))

    r = cxlinalg.sample_covariance(frames)
    w = mpdr_weights(r, hv, cfg.loading).weights
    history = [w]
    deltas, costs = [], []
    iterations = 0
    for i in range(int(cfg.max_iterations)):
        s = np.einsum("km,kml->kl", np.conj(w), frames)
        if not np.all(np.isfinite(s)):
            raise DivergedError("non-finite output estimate", iteration=i)
        lam = np.abs(s) ** 2
        # lambda_update's |S|^(2-p) written as (|S|^2)^(1-p/2) so the floor applies to |S|^2
        cov = cxlinalg.weighted_covariance(frames, lam, p, delta)
        w_new = distortionless_weights(cov.matrix, hv, cfg.loading).weights
        if not np.all(np.isfinite(w_new)):
            raise DivergedError("non-finite weights", iteration=i + 1)
        if track_cost:
            fw = cxlinalg.frame_weights(lam, p, delta)
            costs.append((weighted_cost(w, frames, fw), weighted_cost(w_new, frames, fw)))
        change = float(np.max(_relative_change(w_new, w)))
        deltas.append(change)
        w = w_new
        history.append(w)
        iterations = i + 1
        if cfg.convergence_tol is not None and change < cfg.convergence_tol:
            break
    log.debug("cggd_mldr p=%g: %d iterations, final change %.3g", p, iterations,
              deltas[-1] if deltas else 0.0)
    weights = BeamWeights(w)
    y_t = y if isinstance(y, StftTensor) else None
    est = apply_weights(weights, y_t) if y_t is not None else None
    return EnhancedOutput(est, weights, iterations, deltas, history, costs)
