"""Multichannel STFT analysis/synthesis and WAV file I/O.

Spectra are one-sided and laid out as ``bins[m, k, l]`` (channel, frequency,
frame). The signal is zero-padded by one frame on each side before framing so
that overlap-add reconstruction is exact over the whole original signal.
"""

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .errors import ConfigurationError, EmptyInputError

DEFAULT_FRAME_LEN = 512
DEFAULT_HOP = 256
DEFAULT_WINDOW = "sqrt_hann"

WINDOWS = ("sqrt_hann", "hann", "rect")


@dataclass
class Waveform:
    samples: np.ndarray  # (M, N) float
    sample_rate: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == 1:
            s = s[None, :]
        if s.ndim != 2:
            raise ConfigurationError(f"waveform must be (channels, samples), got shape {s.shape}")
        if s.shape[0] < 1:
            raise ConfigurationError("waveform needs at least one channel")
        if not self.sample_rate > 0:
            raise ConfigurationError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(s)):
            raise ConfigurationError("waveform contains non-finite samples")
        self.samples = s

    @property
    def channels(self):
        return self.samples.shape[0]

    @property
    def length(self):
        return self.samples.shape[1]

    def channel(self, m):
        return Waveform(self.samples[m : m + 1], self.sample_rate)


@dataclass
class StftTensor:
    bins: np.ndarray  # (M, K, L) complex
    frame_len: int
    hop: int
    window: str
    sample_rate: float
    length: int  # samples of the original signal, used to trim on synthesis

    def __post_init__(self):
        b = np.asarray(self.bins)
        if b.ndim == 2:
            b = b[None]
        self.bins = b.astype(np.complex128, copy=False)
        if self.bins.shape[1] != self.frame_len // 2 + 1:
            raise ConfigurationError(
                f"expected {self.frame_len // 2 + 1} frequency bins, got {self.bins.shape[1]}")
        if self.hop > self.frame_len:
            raise ConfigurationError("hop must not exceed frame_len")
        if self.bins.shape[2] < 1:
            raise ConfigurationError("need at least one frame")

    @property
    def channels(self):
        return self.bins.shape[0]

    @property
    def num_bins(self):
        return self.bins.shape[1]

    @property
    def num_frames(self):
        return self.bins.shape[2]

    @property
    def frequencies(self):
        return np.arange(self.num_bins) * self.sample_rate / self.frame_len

    def with_bins(self, bins):
        return StftTensor(bins, self.frame_len, self.hop, self.window, self.sample_rate, self.length)


def window_pair(name, frame_len):
    """Return (analysis, synthesis) windows for a window descriptor.

    All windows are periodic. ``sqrt_hann`` uses the same window on both
    sides; ``hann`` analyses with Hann and synthesizes with a rectangle.
    """
    n = np.arange(frame_len)
    hann = 0.5 - 0.5 * np.cos(2 * np.pi * n / frame_len)
    if name == "sqrt_hann":
        w = np.sqrt(hann)
        return w, w
    if name == "hann":
        return hann, np.ones(frame_len)
    if name == "rect":
        return np.ones(frame_len), np.ones(frame_len)
    raise ConfigurationError(f"unknown window {name!r}; choose from {WINDOWS}")


def cola_gain(frame_len, hop, window):
    """Overlap-added analysis*synthesis gain, or raise if not constant."""
    if hop < 1 or hop > frame_len or frame_len % hop:
        raise ConfigurationError(f"hop {hop} must divide frame_len {frame_len}")
    wa, ws = window_pair(window, frame_len)
    prod = (wa * ws).reshape(-1, hop).sum(axis=0)
    gain = prod.mean()
    if gain <= 0 or np.max(np.abs(prod - gain)) > 1e-10 * gain:
        raise ConfigurationError(
            f"window {window!r} with frame_len={frame_len}, hop={hop} is not COLA")
    return gain


def _padded_length(n, frame_len, hop):
    total = n + 2 * frame_len
    extra = (-(total - frame_len)) % hop
    return total + extra


def analyze(w, frame_len=DEFAULT_FRAME_LEN, hop=DEFAULT_HOP, window=DEFAULT_WINDOW):
    """STFT of every channel of ``w``; returns a one-sided StftTensor."""
    if w.length == 0:
        raise EmptyInputError("cannot analyze an empty signal")
    cola_gain(frame_len, hop, window)
    wa, _ = window_pair(window, frame_len)
    total = _padded_length(w.length, frame_len, hop)
    x = np.zeros((w.channels, total))
    x[:, frame_len : frame_len + w.length] = w.samples
    n_frames = 1 + (total - frame_len) // hop
    frames = np.lib.stride_tricks.sliding_window_view(x, frame_len, axis=1)[:, ::hop]
    assert frames.shape[1] == n_frames
    spec = np.fft.rfft(frames * wa, axis=-1)  # (M, L, K)
    return StftTensor(np.ascontiguousarray(spec.transpose(0, 2, 1)), frame_len, hop,
                      window, w.sample_rate, w.length)


def synthesize(t):
    """Weighted overlap-add inverse of :func:`analyze`."""
    gain = cola_gain(t.frame_len, t.hop, t.window)
    total = _padded_length(t.length, t.frame_len, t.hop)
    if 1 + (total - t.frame_len) // t.hop != t.num_frames:
        raise ConfigurationError(
            f"tensor has {t.num_frames} frames, inconsistent with length {t.length}")
    _, ws = window_pair(t.window, t.frame_len)
    frames = np.fft.irfft(t.bins.transpose(0, 2, 1), n=t.frame_len, axis=-1) * ws
    out = np.zeros((t.channels, total))
    per_shift = t.frame_len // t.hop
    # frames sharing a residue class never overlap, so each slice add is disjoint
    for r in range(per_shift):
        sub = frames[:, r::per_shift]
        if sub.shape[1] == 0:
            continue
        start = r * t.hop
        span = sub.shape[1] * t.frame_len
        out[:, start : start + span] += sub.reshape(t.channels, -1)
    out /= gain
    return Waveform(out[:, t.frame_len : t.frame_len + t.length], t.sample_rate)


def read_wav(path):
    """Read a RIFF/WAVE file (PCM or float) as a Waveform in [-1, 1]."""
    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        data = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        data = (data.astype(np.float64) - 128.0) / 128.0
    else:
        data = data.astype(np.float64)
    if data.ndim == 1:
        data = data[:, None]
    return Waveform(data.T, float(rate))


def write_wav(path, w, fmt="float32"):
    """Write ``w`` as 16-bit PCM (``fmt="pcm16"``) or 32-bit float."""
    rate = int(round(w.sample_rate))
    data = w.samples.T
    if fmt == "pcm16":
        data = np.clip(np.round(data * 32768.0), -32768, 32767).astype(np.int16)
    elif fmt == "float32":
        data = data.astype(np.float32)
    else:
        raise ConfigurationError(f"unsupported wav format {fmt!r}")
    wavfile.write(path, rate, np.ascontiguousarray(data))
