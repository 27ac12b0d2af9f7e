"""Deterministic synthetic source signals (stand-ins for speech and babble corpora)."""

import numpy as np
from scipy import signal as sps

from ..errors import ConfigurationError
from ..stft import Waveform

KINDS = ("speech_like_modulated_noise", "tonal_chirp", "white")
RMS_LEVEL = 0.05


def _resonator(freq, bandwidth, fs):
    r = np.exp(-np.pi * bandwidth / fs)
    theta = 2 * np.pi * freq / fs
    return [1.0 - r], [1.0, -2 * r * np.cos(theta), r * r]


def _speech_like(n, fs, rng):
    """Syllable-like bursts separated by pauses.

    Voiced bursts are harmonic series with a gliding pitch shaped by two
    formant resonators; unvoiced bursts are high-passed noise. Each burst has
    a smooth envelope and a log-normal level, giving a sparse, heavy-tailed
    time-frequency distribution.
    """
    out = np.zeros(n)
    base_f0 = rng.uniform(95.0, 210.0)
    pos = int(rng.uniform(0.0, 0.3) * fs)
    hp_b, hp_a = sps.butter(2, [2000.0 / (fs / 2), min(6500.0, 0.45 * fs) / (fs / 2)], "bandpass")
    while pos < n:
        length = int(rng.uniform(0.08, 0.32) * fs)
        t = np.arange(length) / fs
        if rng.random() < 0.75:
            f0 = base_f0 * rng.uniform(0.85, 1.2) * (1.0 + rng.uniform(-0.15, 0.15) * t / t[-1])
            phase = 2 * np.pi * np.cumsum(f0) / fs + rng.uniform(0, 2 * np.pi)
            n_harm = int(min(4000.0, 0.45 * fs) // np.max(f0))
            h = np.arange(1, n_harm + 1)
            burst = np.sin(np.outer(phase, h)) @ (1.0 / h)
            for _ in range(2):
                b, a = _resonator(rng.uniform(300.0, 2800.0), rng.uniform(80.0, 200.0), fs)
                burst = burst + 2.0 * sps.lfilter(b, a, burst)
        else:
            burst = sps.lfilter(hp_b, hp_a, rng.standard_normal(length))
        env = np.sin(np.pi * np.arange(length) / length) ** 2
        burst = burst * env / (np.sqrt(np.mean((burst * env) ** 2)) + 1e-12)
        burst *= np.exp(rng.normal(0.0, 0.5))
        end = min(n, pos + length)
        out[pos:end] += burst[: end - pos]
        pos = end + int(rng.uniform(0.04, 0.35) * fs)
    b, a = sps.butter(2, 80.0 / (fs / 2), "highpass")
    return sps.lfilter(b, a, out)


def synth_test_signals(kind, duration, seed, sample_rate=16000):
    """Single-channel synthetic signal, normalized to a fixed RMS level."""
    n = int(round(duration * sample_rate))
    if n <= 0:
        raise ConfigurationError(f"duration {duration} s gives no samples")
    rng = np.random.default_rng(seed)
    if kind == "white":
        x = rng.standard_normal(n)
    elif kind == "tonal_chirp":
        t = np.arange(n) / sample_rate
        f1 = min(4000.0, 0.45 * sample_rate)
        x = sps.chirp(t, 100.0, t[-1] if n > 1 else 1.0, f1, phi=rng.uniform(0, 360))
    elif kind == "speech_like_modulated_noise":
        x = _speech_like(n, sample_rate, rng)
    else:
        raise ConfigurationError(f"unknown signal kind {kind!r}; choose from {KINDS}")
    x = x * (RMS_LEVEL / np.sqrt(np.mean(x**2)))
    return Waveform(x[None, :], float(sample_rate))


def excess_kurtosis(x):
    x = np.asarray(x, dtype=np.float64).ravel()
    x = x - x.mean()
    return float(np.mean(x**4) / np.mean(x**2) ** 2 - 3.0)
