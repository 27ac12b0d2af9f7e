"""Image-source room impulse responses for a shoebox room."""

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .. import kernels
from ..errors import GeometryError, InfeasibleRT60Error

SPEED_OF_SOUND = 343.0
HALF_WIDTH = 4  # fractional-delay taps on each side of an arrival
DYNAMIC_RANGE_DB = 80.0


def _room_terms(room_dims):
    lx, ly, lz = (float(v) for v in room_dims)
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    return volume, surface


def sabine_min_rt60(room_dims, c=SPEED_OF_SOUND):
    """Shortest RT60 the Sabine formula can produce (absorption = 1)."""
    volume, surface = _room_terms(room_dims)
    return 24.0 * math.log(10.0) * volume / (c * surface)


def check_rt60(room_dims, rt60, c=SPEED_OF_SOUND):
    if rt60 < 0:
        raise InfeasibleRT60Error(f"rt60 must be non-negative, got {rt60}")
    if 0 < rt60 < sabine_min_rt60(room_dims, c):
        raise InfeasibleRT60Error(
            f"rt60={rt60:.3f} s is below the Sabine bound "
            f"{sabine_min_rt60(room_dims, c):.3f} s for room {tuple(room_dims)}")


def _sphere_directions(n=4096):
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


_DIRECTIONS = _sphere_directions()


def model_decay_db(room_dims, beta, t, c=SPEED_OF_SOUND):
    """Energy decay (dB) of the image lattice late field at time ``t``.

    An image reached along unit direction u after travelling c*t has made
    about ``c*t*sum(|u_i|/L_i)`` wall reflections, so its energy carries
    ``beta**(2*c*t*g(u))``. Averaging the resulting exponentials over the
    sphere and backward-integrating gives the Schroeder curve.
    """
    g = np.abs(_DIRECTIONS) @ (1.0 / np.asarray(room_dims, dtype=np.float64))
    rate = -2.0 * c * g * math.log(beta)
    num = logsumexp(-rate * t - np.log(rate))
    den = logsumexp(-np.log(rate))
    return 10.0 / math.log(10.0) * (num - den)


def reflection_coefficient(room_dims, rt60, c=SPEED_OF_SOUND):
    """Uniform wall pressure reflection coefficient for a target RT60.

    Solves ``model_decay_db(beta, rt60) = -60`` so the simulated decay, not
    a diffuse-field formula, hits the target. Feasibility is still judged by
    the Sabine bound.
    """
    if rt60 == 0:
        return 0.0
    check_rt60(room_dims, rt60, c)
    log_beta = brentq(lambda lb: model_decay_db(room_dims, math.exp(lb), rt60, c) + 60.0,
                      -30.0, -1e-9, xtol=1e-12)
    return math.exp(log_beta)


def check_inside(room_dims, pos, what="position"):
    pos = np.asarray(pos, dtype=np.float64)
    room = np.asarray(room_dims, dtype=np.float64)
    if pos.shape != (3,) or not np.all((pos > 0) & (pos < room)):
        raise GeometryError(f"{what} {pos.tolist()} is not strictly inside room {room.tolist()}")


def rir_length(room_dims, src_pos, mic_pos, rt60, sample_rate, c=SPEED_OF_SOUND):
    """Samples needed to reach the dynamic-range floor after the direct path."""
    direct = np.linalg.norm(np.asarray(src_pos, float) - np.asarray(mic_pos, float)) / c
    tail = rt60 * DYNAMIC_RANGE_DB / 60.0
    return int(math.ceil((direct + tail) * sample_rate)) + HALF_WIDTH + 1


def image_method_rir(room_dims, src_pos, mic_pos, rt60, max_order=None, sample_rate=16000,
                     n_samples=None, c=SPEED_OF_SOUND, amp_floor=0.0):
    """Impulse response from ``src_pos`` to ``mic_pos``.

    Arrivals use Hann-windowed sinc fractional delays. The response is cut
    where the reverberant energy has decayed by 80 dB; ``max_order`` caps
    the total reflection count and ``amp_floor`` (relative to the direct
    path gain) drops individual weak images. ``rt60 = 0`` yields the direct
    path only.
    """
    check_inside(room_dims, src_pos, "source")
    check_inside(room_dims, mic_pos, "microphone")
    beta = reflection_coefficient(room_dims, rt60, c)
    if n_samples is None:
        n_samples = rir_length(room_dims, src_pos, mic_pos, rt60, sample_rate, c)
    direct = float(np.linalg.norm(np.asarray(src_pos, float) - np.asarray(mic_pos, float)))
    return kernels.image_source_rir(
        np.asarray(room_dims, dtype=np.float64),
        np.asarray(src_pos, dtype=np.float64),
        np.asarray(mic_pos, dtype=np.float64),
        np.full(6, beta, dtype=np.float64),
        float(sample_rate), float(c), int(n_samples),
        -1 if max_order is None else int(max_order),
        float(amp_floor) / (4.0 * math.pi * direct), HALF_WIDTH,
    )


def schroeder_decay_db(rir):
    """Backward-integrated energy decay curve in dB (0 dB at t = 0)."""
    energy = np.cumsum(np.asarray(rir, float)[::-1] ** 2)[::-1]
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(energy / energy[0])


def decay_time(rir, sample_rate, level_db=-60.0):
    """Seconds until the energy decay curve first falls to ``level_db``."""
    edc = schroeder_decay_db(rir)
    below = np.flatnonzero(edc <= level_db)
    if below.size == 0:
        return float("inf")
    return below[0] / sample_rate
