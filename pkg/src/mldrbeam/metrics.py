"""Evaluation metrics and the analytic robustness-ratio model.

``robustness_ratio`` evaluates, for an idealized stationary scene, the ratio
of the interference and speech coefficients in the weighted covariance

    r_p = (L1 * rho + L2 * lambda_s**(p/2) / eps) / (L2 * lambda_s**(p/2))

with ``rho = lambda_v / delta**(1 - p/2)`` and ``eps = lambda_s / lambda_v``.
Larger values mean less speech leaks into the effective noise statistics.
"""

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, MetricError, UndefinedRatioError
from .stft import DEFAULT_FRAME_LEN, DEFAULT_HOP, DEFAULT_WINDOW, Waveform, analyze

SI_SDR_CAP_DB = 80.0
VAD_THRESHOLD_DB = -40.0


@dataclass
class RobustnessScenario:
    frames_noise_only: int
    frames_with_speech: int
    speech_psd: float
    noise_psd: float
    floor_delta: float
    shape_p: float

    def __post_init__(self):
        if self.frames_noise_only < 0 or self.frames_with_speech < 0:
            raise ConfigurationError("frame counts must be non-negative")
        if self.frames_noise_only + self.frames_with_speech < 1:
            raise ConfigurationError("need at least one frame")
        if not self.noise_psd > 0 or not self.floor_delta > 0 or self.speech_psd < 0:
            raise ConfigurationError("need noise_psd > 0, floor_delta > 0, speech_psd >= 0")
        if not 0.0 <= self.shape_p <= 2.0:
            raise ConfigurationError(f"shape_p={self.shape_p} outside [0, 2]")


def robustness_ratio(rs):
    if rs.frames_with_speech == 0 or rs.speech_psd == 0:
        raise UndefinedRatioError("ratio undefined without speech frames or speech power")
    l1, l2 = rs.frames_noise_only, rs.frames_with_speech
    lam_s, lam_v, p = rs.speech_psd, rs.noise_psd, rs.shape_p
    rho = lam_v / rs.floor_delta ** (1.0 - p / 2.0)
    eps = lam_s / lam_v
    speech_coef = l2 * lam_s ** (p / 2.0)
    return (l1 * rho + speech_coef / eps) / speech_coef


def ratio_dominance_check(base, speech_psds, shapes):
    """Table ``[i, j] = r_p >= r_2`` for speech_psds[i] and shapes[j].

    ``base`` supplies frame counts, noise PSD and floor; its speech_psd and
    shape_p are overridden per grid point.
    """
    table = np.zeros((len(speech_psds), len(shapes)), dtype=bool)
    for i, lam in enumerate(speech_psds):
        r2 = robustness_ratio(_with(base, speech_psd=lam, shape_p=2.0))
        for j, p in enumerate(shapes):
            table[i, j] = robustness_ratio(_with(base, speech_psd=lam, shape_p=p)) >= r2
    return table


def _with(rs, **kw):
    d = asdict(rs)
    d.update(kw)
    return RobustnessScenario(**d)


def _mono(w):
    x = w.samples if isinstance(w, Waveform) else np.asarray(w, dtype=np.float64)
    x = np.atleast_2d(x)
    if x.shape[0] != 1:
        raise MetricError("si_sdr expects single-channel signals")
    return x[0]


def si_sdr(reference, estimate, cap_db=SI_SDR_CAP_DB):
    """Scale-invariant SDR in dB (zero-mean signals), capped at ``cap_db``."""
    s = _mono(reference)
    e = _mono(estimate)
    if s.size != e.size:
        raise MetricError(f"length mismatch: {s.size} vs {e.size}")
    s = s - s.mean()
    e = e - e.mean()
    ss = np.dot(s, s)
    if ss == 0:
        raise MetricError("reference signal is zero")
    target = (np.dot(e, s) / ss) * s
    noise = e - target
    tt, nn = np.dot(target, target), np.dot(noise, noise)
    if nn <= tt * 10.0 ** (-cap_db / 10.0):
        return cap_db
    return float(10.0 * np.log10(tt / nn))


def speech_active_frames(ref_bins, threshold_db=VAD_THRESHOLD_DB):
    """Frames whose reference-channel energy is within ``threshold_db`` of the loudest."""
    energy = np.sum(np.abs(ref_bins) ** 2, axis=0)
    if energy.max() <= 0:
        return np.zeros(energy.shape, dtype=bool)
    return energy >= energy.max() * 10.0 ** (threshold_db / 10.0)


def output_sinr_improvement(scene, w, frame_len=DEFAULT_FRAME_LEN, hop=DEFAULT_HOP,
                            window=DEFAULT_WINDOW, ref=0, threshold_db=VAD_THRESHOLD_DB):
    """Output minus input SINR (dB) over speech-active frames.

    Both SINRs are measured in the STFT domain on the same frames; the input
    one at the reference microphone.
    """
    if scene is None or scene.desired_image is None or scene.interference_plus_noise_image is None:
        raise MetricError("ground-truth images are required")
    xs = analyze(scene.desired_image, frame_len, hop, window).bins
    vs = analyze(scene.interference_plus_noise_image, frame_len, hop, window).bins
    return sinr_improvement_from_bins(xs, vs, w, ref, threshold_db)


def sinr_improvement_from_bins(xs, vs, w, ref=0, threshold_db=VAD_THRESHOLD_DB):
    """As :func:`output_sinr_improvement`, from (M, K, L) image spectra."""
    weights = w.weights if hasattr(w, "weights") else np.asarray(w)
    active = speech_active_frames(xs[ref], threshold_db)
    if not active.any():
        raise MetricError("no speech-active frames")
    ox = np.einsum("km,mkl->kl", np.conj(weights), xs[:, :, active])
    ov = np.einsum("km,mkl->kl", np.conj(weights), vs[:, :, active])
    p_ox, p_ov = np.sum(np.abs(ox) ** 2), np.sum(np.abs(ov) ** 2)
    p_ix, p_iv = np.sum(np.abs(xs[ref][:, active]) ** 2), np.sum(np.abs(vs[ref][:, active]) ** 2)
    if p_ov == 0 or p_iv == 0:
        raise MetricError("zero interference-plus-noise power; SINR undefined")
    return float(10.0 * np.log10(p_ox / p_ov) - 10.0 * np.log10(p_ix / p_iv))


# ---------------------------------------------------------------------------
# evaluation reports

REPORT_COLUMNS = (
    "condition", "beamformer", "p", "input_sinr_db", "rt60", "iteration",
    "si_sdr_improvement_db", "output_sinr_improvement_db", "weight_delta",
    "seed", "config_hash", "version", "status",
)


@dataclass
class EvalRecord:
    condition: str
    beamformer: str
    p: object
    input_sinr_db: float
    rt60: float
    iteration: int
    si_sdr_improvement_db: object
    output_sinr_improvement_db: object
    weight_delta: object
    seed: int = 0
    config_hash: str = ""
    version: str = ""
    status: str = "ok"

    @property
    def key(self):
        return (self.condition, self.beamformer, self.iteration)


@dataclass
class EvalReport:
    records: list = field(default_factory=list)

    def add(self, record):
        if any(r.key == record.key for r in self.records):
            raise ConfigurationError(f"duplicate report key {record.key}")
        self.records.append(record)

    def sorted(self):
        return sorted(self.records, key=lambda r: (r.condition, r.beamformer, r.iteration))

    def select(self, **kw):
        return [r for r in self.sorted() if all(getattr(r, k) == v for k, v in kw.items())]

    def value(self, metric="si_sdr_improvement_db", **kw):
        rows = self.select(**kw)
        if len(rows) != 1:
            raise KeyError(f"{len(rows)} rows match {kw}")
        return getattr(rows[0], metric)

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(REPORT_COLUMNS)
        for r in self.sorted():
            d = asdict(r)
            wr.writerow(["" if d[c] is None else _fmt(d[c]) for c in REPORT_COLUMNS])
        return buf.getvalue()

    def to_json(self):
        return json.dumps({"columns": list(REPORT_COLUMNS),
                           "records": [asdict(r) for r in self.sorted()]}, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls([EvalRecord(**r) for r in data["records"]])

    def write(self, directory):
        from pathlib import Path

        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.csv").write_text(self.to_csv())
        (d / "report.json").write_text(self.to_json())


def _fmt(v):
    if isinstance(v, float):
        return repr(round(v, 10))
    return str(v)
