"""Scene rendering: convolve sources with RIRs and calibrate the input SINR."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import oaconvolve

from ..errors import ConfigurationError, MldrBeamError
from ..stft import Waveform, read_wav, write_wav
from . import rir as rirmod
from .signals import synth_test_signals


class SignalFileError(MldrBeamError, OSError):
    pass


@dataclass
class SceneAudio:
    mixture: Waveform
    desired_image: Waveform
    interference_plus_noise_image: Waveform
    rirs: list  # rirs[j][m] -> 1-D array for source j, mic m

    def input_sinr_db(self, ref=0):
        x = self.desired_image.samples[ref]
        v = self.interference_plus_noise_image.samples[ref]
        return 10.0 * np.log10(np.sum(x**2) / np.sum(v**2))


def source_signal(scenario, src):
    n = int(round(scenario.duration * scenario.sample_rate))
    sig = src.signal
    if "file" in sig:
        path = Path(sig["file"])
        if not path.is_absolute() and scenario.base_dir is not None:
            path = Path(scenario.base_dir) / path
        if not path.exists():
            raise SignalFileError(f"signal file not found: {path}")
        w = read_wav(path)
        if abs(w.sample_rate - scenario.sample_rate) > 1e-9:
            raise ConfigurationError(
                f"{path}: sample rate {w.sample_rate} differs from scenario {scenario.sample_rate}")
        x = w.samples[int(sig.get("channel", 0))]
        reps = int(np.ceil(n / x.size))
        return np.tile(x, reps)[:n]
    return synth_test_signals(sig["kind"], scenario.duration, int(sig["seed"]),
                              scenario.sample_rate).samples[0]


def rir_filename(j, m):
    return f"src{j}_mic{m}.wav"


def write_rirs(rirs, directory, sample_rate):
    """One single-channel float WAV per (source, mic)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for j, row in enumerate(rirs):
        for m, h in enumerate(row):
            write_wav(d / rir_filename(j, m), Waveform(np.asarray(h)[None, :], sample_rate), "float32")


def read_rirs(directory, n_sources, n_mics, sample_rate):
    d = Path(directory)
    out = []
    for j in range(n_sources):
        row = []
        for m in range(n_mics):
            f = d / rir_filename(j, m)
            if not f.exists():
                raise SignalFileError(f"RIR file not found: {f}")
            w = read_wav(f)
            if abs(w.sample_rate - sample_rate) > 1e-9:
                raise ConfigurationError(f"{f}: sample rate {w.sample_rate} differs from {sample_rate}")
            row.append(w.samples[0])
        out.append(row)
    return out


def compute_rirs(scenario, max_order=None):
    """RIRs for every (source, mic) pair; rirs[j][m].

    With ``scenario.rir_dir`` set they are read from WAV files instead.
    """
    if scenario.rir_dir is not None:
        d = Path(scenario.rir_dir)
        if not d.is_absolute() and scenario.base_dir is not None:
            d = Path(scenario.base_dir) / d
        return read_rirs(d, len(scenario.sources), scenario.num_mics, scenario.sample_rate)
    out = []
    for src in scenario.sources:
        out.append([
            rirmod.image_method_rir(scenario.room_dims, src.position, mic, scenario.rt60,
                                    max_order=max_order, sample_rate=scenario.sample_rate)
            for mic in scenario.array
        ])
    return out


def _image(signal, rirs, n):
    return np.stack([oaconvolve(signal, h)[:n] for h in rirs])


def render_scenario(scenario, rirs=None):
    """Render mixture and ground-truth images for ``scenario``.

    The interference-plus-noise image (interferers plus a white sensor floor
    at ``sensor_noise_snr_db`` below the interference power) is scaled so the
    reference-mic power ratio equals ``input_sinr_db``.
    """
    scenario.validate()
    n = int(round(scenario.duration * scenario.sample_rate))
    ref = scenario.reference_mic
    if rirs is None:
        rirs = compute_rirs(scenario)
    x = np.zeros((scenario.num_mics, n))
    v = np.zeros((scenario.num_mics, n))
    # fixed source order keeps the sums deterministic
    for j, src in enumerate(scenario.sources):
        img = _image(source_signal(scenario, src), rirs[j], n)
        if src.role == "desired":
            x += img
        else:
            v += img
    if scenario.sensor_noise_snr_db is not None:
        basis = v if np.any(v[ref]) else x
        p_basis = np.mean(basis[ref] ** 2)
        rng = np.random.default_rng([int(scenario.seed), 7919])
        noise = rng.standard_normal(v.shape)
        v += noise * np.sqrt(p_basis * 10.0 ** (-scenario.sensor_noise_snr_db / 10.0))
    p_x = np.mean(x[ref] ** 2)
    p_v = np.mean(v[ref] ** 2)
    if p_v > 0:
        if p_x == 0:
            raise ConfigurationError("desired source is silent at the reference mic")
        v *= np.sqrt(p_x / (p_v * 10.0 ** (scenario.input_sinr_db / 10.0)))
    fs = scenario.sample_rate
    return SceneAudio(Waveform(x + v, fs), Waveform(x, fs), Waveform(v, fs), rirs)
