"""Hermitian covariance accumulation and regularized solves.

Arrays carry an optional leading batch axis (frequency bins). Frames are
passed as ``(..., M, L)``: M-vectors stacked along the last axis.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, EmptyInputError, NumericGuardError, SingularMatrixError

DEFAULT_LOADING = 0.0
DEFAULT_FLOOR_SCALE = 1e-6


@dataclass
class WeightedCovariance:
    matrix: np.ndarray  # (..., M, M) Hermitian
    frame_count: int
    shape_p: float
    floor_delta: object  # scalar or per-bin array


def hermitize(a):
    """Return the Hermitian part of ``a``; the result is exactly Hermitian."""
    a = np.asarray(a, dtype=np.complex128)
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def _as_batch(frames):
    y = np.asarray(frames, dtype=np.complex128)
    if y.ndim < 2:
        raise DomainError("frames must be shaped (..., M, L)")
    if y.shape[-1] == 0:
        raise EmptyInputError("need at least one frame")
    lead = y.shape[:-2]
    return np.ascontiguousarray(y.reshape((-1,) + y.shape[-2:])), lead


def sample_covariance(frames):
    """Unnormalized sum of outer products ``sum_l y_l y_l^H``."""
    y, lead = _as_batch(frames)
    w = np.ones((y.shape[0], y.shape[2]))
    r = kernels.weighted_outer_sum(y, w)
    return r.reshape(lead + r.shape[1:])


def frame_weights(lambdas, p, delta):
    """Per-frame weights ``1 / max(lambda, delta)**(1 - p/2)``."""
    if not 0.0 <= p <= 2.0:
        raise DomainError(f"shape parameter p={p} outside [0, 2]")
    lam = np.asarray(lambdas, dtype=np.float64)
    if p == 2.0:
        return np.ones_like(lam)
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(delta < 0):
        raise DomainError("floor delta must be non-negative")
    if np.any(lam < 0):
        raise DomainError("lambdas must be non-negative")
    if delta.ndim and lam.ndim > delta.ndim:
        delta = delta.reshape(delta.shape + (1,) * (lam.ndim - delta.ndim))
    floored = np.maximum(lam, delta)
    if np.any(floored == 0):
        raise NumericGuardError("zero weighting denominator; use a positive floor delta")
    return floored ** -(1.0 - 0.5 * p)


def weighted_covariance(frames, lambdas, p, delta):
    """``sum_l y_l y_l^H / max(lambda_l, delta)**(1 - p/2)``.

    ``lambdas`` has the frames' shape without the channel axis. ``delta`` is
    a scalar or one value per leading batch entry. For ``p == 2`` this is
    :func:`sample_covariance` bit for bit.
    """
    y, lead = _as_batch(frames)
    lam = np.asarray(lambdas, dtype=np.float64)
    if lam.shape != lead + (y.shape[2],):
        raise DomainError(f"lambdas shape {lam.shape} does not match frames {lead + (y.shape[2],)}")
    w = frame_weights(lam, p, delta).reshape(y.shape[0], y.shape[2])
    r = kernels.weighted_outer_sum(y, np.ascontiguousarray(w))
    return WeightedCovariance(r.reshape(lead + r.shape[1:]), y.shape[2], p, delta)


def default_floor(frames, scale=DEFAULT_FLOOR_SCALE):
    """Relative floor: ``scale`` times mean noisy power per bin (over channels and frames)."""
    y = np.asarray(frames)
    return scale * np.mean(np.abs(y) ** 2, axis=(-2, -1))


def _cholesky_batch(a):
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        for k in range(a.shape[0]):
            try:
                np.linalg.cholesky(a[k])
            except np.linalg.LinAlgError:
                raise SingularMatrixError("Hermitian factorization failed", bin_index=k) from None
        raise


def solve_regularized(r, h, loading=DEFAULT_LOADING):
    """Solve ``(R + loading * tr(R)/M * I) x = h`` by Cholesky factorization.

    ``r`` is (..., M, M) and ``h`` is (..., M). Never forms an inverse.
    """
    if loading < 0:
        raise DomainError("diagonal loading must be non-negative")
    r = np.asarray(r, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    m = r.shape[-1]
    lead = r.shape[:-2]
    rb = r.reshape(-1, m, m)
    hb = np.broadcast_to(h, lead + (m,)).reshape(-1, m)
    if not (np.all(np.isfinite(rb)) and np.all(np.isfinite(hb))):
        bad = np.flatnonzero(~np.all(np.isfinite(rb.reshape(rb.shape[0], -1)), axis=1))
        raise SingularMatrixError("non-finite covariance", bin_index=int(bad[0]) if bad.size else None)
    load = loading * np.real(np.trace(rb, axis1=-2, axis2=-1)) / m
    a = rb + load[:, None, None] * np.eye(m)
    chol = _cholesky_batch(a)
    # forward then backward substitution, vectorized over the batch
    z = np.zeros_like(hb)
    for i in range(m):
        z[:, i] = (hb[:, i] - np.einsum("bj,bj->b", chol[:, i, :i], z[:, :i])) / chol[:, i, i]
    x = np.zeros_like(hb)
    lh = np.conj(np.swapaxes(chol, -1, -2))
    for i in range(m - 1, -1, -1):
        x[:, i] = (z[:, i] - np.einsum("bj,bj->b", lh[:, i, i + 1 :], x[:, i + 1 :])) / lh[:, i, i]
    return x.reshape(lead + (m,))
