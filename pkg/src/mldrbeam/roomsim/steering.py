"""Steering vectors for the desired source of a scenario."""

import numpy as np

from ..beamformers import SteeringVector
from ..errors import ConfigurationError
from ..stft import DEFAULT_FRAME_LEN
from . import rir as rirmod

MODES = ("freefield", "direct_path_rtf", "full_rtf")
DIRECT_WINDOW_S = 0.008


def freefield_steering(mic_positions, direction, frequencies, c=rirmod.SPEED_OF_SOUND, ref=0):
    """Far-field plane-wave ATF for a unit ``direction`` pointing at the source."""
    u = np.asarray(direction, dtype=np.float64)
    u = u / np.linalg.norm(u)
    rel = np.asarray(mic_positions, dtype=np.float64) - mic_positions[ref]
    tau = -(rel @ u) / c  # arrival time relative to the reference mic
    return np.exp(-2j * np.pi * np.outer(frequencies, tau))


def _dft_at_bins(rirs, frame_len):
    """DFT of each RIR evaluated at the STFT bin frequencies k*fs/frame_len."""
    length = max(h.size for h in rirs)
    n = frame_len * int(np.ceil(length / frame_len))
    spec = np.stack([np.fft.rfft(h, n=n) for h in rirs], axis=1)  # (n/2+1, M)
    return spec[:: n // frame_len][: frame_len // 2 + 1]


def steering_from_scenario(scenario, mode="freefield", frame_len=DEFAULT_FRAME_LEN, rirs=None,
                           normalization="rtf"):
    """Steering vector h(k) of the desired source, one M-vector per STFT bin.

    ``freefield`` uses the plane-wave model toward the desired source;
    ``direct_path_rtf`` uses the desired RIRs truncated 8 ms after the
    earliest direct arrival; ``full_rtf`` uses the complete RIRs. RIR-based
    modes fall back to the freefield model at bins where the reference
    channel response vanishes.
    """
    if mode not in MODES:
        raise ConfigurationError(f"unknown steering mode {mode!r}; choose from {MODES}")
    scenario.validate()
    fs = scenario.sample_rate
    ref = scenario.reference_mic
    freqs = np.arange(frame_len // 2 + 1) * fs / frame_len
    src = scenario.desired.position
    free = freefield_steering(scenario.array, src - scenario.array_center, freqs, ref=ref)
    if mode == "freefield":
        return SteeringVector(free, ref, normalization)
    j = next(i for i, s in enumerate(scenario.sources) if s.role == "desired")
    if rirs is None and scenario.rir_dir is not None:
        from .render import compute_rirs

        rirs = compute_rirs(scenario)
    if rirs is None:
        desired_rirs = [rirmod.image_method_rir(scenario.room_dims, src, mic, scenario.rt60,
                                                sample_rate=fs) for mic in scenario.array]
    else:
        desired_rirs = rirs[j]
    if mode == "direct_path_rtf":
        first = np.min(np.linalg.norm(scenario.array - src, axis=1)) / rirmod.SPEED_OF_SOUND
        cut = int(np.ceil((first + DIRECT_WINDOW_S) * fs))
        desired_rirs = [h[:cut] for h in desired_rirs]
    atf = _dft_at_bins(desired_rirs, frame_len)
    mag_ref = np.abs(atf[:, ref])
    bad = mag_ref < 1e-8 * np.max(np.abs(atf), axis=1).clip(min=1e-300)
    atf[bad] = free[bad]
    return SteeringVector(atf, ref, normalization)
