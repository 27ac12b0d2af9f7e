import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mldrbeam.beamformers import mpdr_weights, oracle_mvdr_weights
from mldrbeam.cxlinalg import sample_covariance
from mldrbeam.errors import ConfigurationError, MetricError, UndefinedRatioError
from mldrbeam.metrics import (REPORT_COLUMNS, SI_SDR_CAP_DB, EvalRecord, EvalReport,
                              RobustnessScenario, output_sinr_improvement, ratio_dominance_check,
                              robustness_ratio, si_sdr)
from mldrbeam.roomsim import render_scenario, scenario_from_dict, steering_from_scenario
from mldrbeam.roomsim.render import SceneAudio
from mldrbeam.stft import Waveform, analyze


def _rs(**kw):
    base = dict(frames_noise_only=50, frames_with_speech=50, speech_psd=1.0, noise_psd=1.0,
                floor_delta=0.01, shape_p=2.0)
    base.update(kw)
    return RobustnessScenario(**base)


# --- robustness ratio ----------------------------------------------------------------------------

def test_r2_example():
    assert robustness_ratio(_rs()) == pytest.approx(2.0, abs=1e-15)


def test_r0_closed_form():
    rs = _rs(shape_p=0.0, speech_psd=3.0, noise_psd=2.0, floor_delta=0.5)
    rho = 2.0 / 0.5
    eps = 3.0 / 2.0
    assert robustness_ratio(rs) == pytest.approx((50 * rho + 50 / eps) / 50, rel=1e-14)


@pytest.mark.parametrize("p", [0.0, 0.3, 1.0, 1.7, 2.0])
def test_equal_at_floor(p):
    rs = _rs(speech_psd=0.01, floor_delta=0.01, shape_p=p)
    assert robustness_ratio(rs) == pytest.approx(robustness_ratio(_rs(speech_psd=0.01, shape_p=2.0)),
                                                 rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(l1=st.integers(0, 500), l2=st.integers(1, 500), lam_v=st.floats(1e-3, 1e3),
       eps=st.floats(1e-3, 1e3))
def test_r2_identity(l1, l2, lam_v, eps):
    rs = _rs(frames_noise_only=l1, frames_with_speech=l2, noise_psd=lam_v, speech_psd=eps * lam_v)
    assert robustness_ratio(rs) == pytest.approx((l1 + l2) / (l2 * eps), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(ratio=st.floats(1e-2, 1e2), p=st.floats(0, 1.999), delta=st.floats(1e-4, 1e2),
       l1=st.integers(1, 400), l2=st.integers(1, 400), lam_v=st.floats(1e-3, 1e3))
def test_sign_matches_floor_comparison(ratio, p, delta, l1, l2, lam_v):
    lam_s = ratio * delta
    rp = robustness_ratio(_rs(frames_noise_only=l1, frames_with_speech=l2, noise_psd=lam_v,
                              speech_psd=lam_s, floor_delta=delta, shape_p=p))
    r2 = robustness_ratio(_rs(frames_noise_only=l1, frames_with_speech=l2, noise_psd=lam_v,
                              speech_psd=lam_s, floor_delta=delta, shape_p=2.0))
    # closed form of the difference: (L1 lam_v / L2) (1/(delta^(1-p/2) lam_s^(p/2)) - 1/lam_s)
    diff = l1 * lam_v / l2 * (1 / (delta ** (1 - p / 2) * lam_s ** (p / 2)) - 1 / lam_s)
    assert rp - r2 == pytest.approx(diff, rel=1e-6, abs=1e-12 * max(rp, r2))
    if abs(np.log(ratio)) > 1e-9 and (1 - p / 2) * abs(np.log(ratio)) > 1e-9:
        assert np.sign(rp - r2) == np.sign(lam_s - delta)


def test_dominance_examples():
    base = _rs(floor_delta=0.1)
    t = ratio_dominance_check(base, [10 * 0.1, 0.1 * 0.1], [0.5])
    assert t[0, 0] and not t[1, 0]
    # p = 2 is the reference itself: dominance holds with equality on both sides of the floor
    lams = np.logspace(-4, 2, 13)
    assert ratio_dominance_check(base, lams, [2.0]).all()
    below = ratio_dominance_check(base, lams[lams < 0.1], [0.0, 0.5, 1.5])
    assert not below.any()


def test_ratio_errors():
    with pytest.raises(UndefinedRatioError):
        robustness_ratio(_rs(speech_psd=0.0))
    with pytest.raises(UndefinedRatioError):
        robustness_ratio(_rs(frames_with_speech=0))
    with pytest.raises(ConfigurationError):
        _rs(shape_p=2.5)
    with pytest.raises(ConfigurationError):
        _rs(floor_delta=0.0)


# --- SI-SDR --------------------------------------------------------------------------------------

def test_si_sdr_cap_and_scale(rng):
    s = rng.standard_normal(8000)
    assert si_sdr(s, s) == SI_SDR_CAP_DB
    assert si_sdr(s, 2 * s) == SI_SDR_CAP_DB


def test_si_sdr_orthogonal_noise_zero_db(rng):
    s = rng.standard_normal(16000)
    s -= s.mean()
    n = rng.standard_normal(16000)
    n -= n.mean()
    n -= np.dot(n, s) / np.dot(s, s) * s  # project out the reference
    n *= np.linalg.norm(s) / np.linalg.norm(n)
    assert si_sdr(s, s + n) == pytest.approx(0.0, abs=0.1)


@settings(max_examples=30, deadline=None)
@given(scale=st.floats(1e-3, 1e3), seed=st.integers(0, 2**32 - 1))
def test_si_sdr_positive_scale_invariant(scale, seed):
    r = np.random.default_rng(seed)
    s = r.standard_normal(2000)
    e = s + 0.3 * r.standard_normal(2000)
    assert si_sdr(s, scale * e) == pytest.approx(si_sdr(s, e), abs=1e-9)


def test_si_sdr_errors(rng):
    with pytest.raises(MetricError):
        si_sdr(np.zeros(100), rng.standard_normal(100))
    with pytest.raises(MetricError):
        si_sdr(rng.standard_normal(100), rng.standard_normal(99))
    with pytest.raises(MetricError):
        si_sdr(Waveform(rng.standard_normal((2, 100)), 16000), rng.standard_normal(100))


# --- output SINR ---------------------------------------------------------------------------------

def _two_mic_anechoic(noise=True):
    cfg = {
        "room_dims": [5.0, 4.0, 3.0], "rt60": 0.0, "input_sinr_db": 0.0, "seed": 9, "duration": 2.0,
        "sensor_noise_snr_db": 40.0 if noise else None,
        "array": {"ula": {"center": [2.5, 2.0, 1.5], "num_mics": 2, "spacing": 0.04}},
        "sources": [
            {"role": "desired", "doa_deg": 0, "distance": 1.5,
             "signal": {"kind": "speech_like_modulated_noise"}},
            {"role": "interference", "doa_deg": 60, "distance": 1.5, "signal": {"kind": "white"}},
        ],
    }
    return scenario_from_dict(cfg)


def test_selector_is_zero_improvement():
    s = _two_mic_anechoic()
    scene = render_scenario(s)
    k = 257
    w = np.zeros((k, 2), complex)
    w[:, 0] = 1
    assert output_sinr_improvement(scene, w) == pytest.approx(0.0, abs=1e-9)


def test_oracle_mvdr_two_mic_anechoic_over_20_db():
    s = _two_mic_anechoic()
    scene = render_scenario(s)
    h = steering_from_scenario(s, "full_rtf", rirs=scene.rirs)
    vs = analyze(scene.interference_plus_noise_image).bins
    w = oracle_mvdr_weights(sample_covariance(vs.transpose(1, 0, 2)), h)
    assert output_sinr_improvement(scene, w) > 20.0


def test_noiseless_scene_errors():
    s = _two_mic_anechoic(noise=False)
    cfg_scene = render_scenario(s)
    silent = SceneAudio(cfg_scene.desired_image, cfg_scene.desired_image,
                        Waveform(np.zeros_like(cfg_scene.desired_image.samples), 16000), cfg_scene.rirs)
    w = np.tile([0.5, 0.5], (257, 1)).astype(complex)
    with pytest.raises(MetricError):
        output_sinr_improvement(silent, w)
    with pytest.raises(MetricError):
        output_sinr_improvement(None, w)


def test_oracle_beats_mpdr_on_standard_preset(standard):
    r_yy = sample_covariance(standard.frames)
    r_vv = sample_covariance(np.ascontiguousarray(standard.vs.transpose(1, 0, 2)))
    g_mpdr = output_sinr_improvement(standard.scene, mpdr_weights(r_yy, standard.h))
    g_oracle = output_sinr_improvement(standard.scene, oracle_mvdr_weights(r_vv, standard.h))
    assert g_oracle >= g_mpdr + 0.5


# --- reports -------------------------------------------------------------------------------------

def _rec(cond, bf, it, val=1.0):
    return EvalRecord(cond, bf, 0.5, 0.0, 0.16, it, val, val + 1, None, 1, "abc", "v", "ok")


def test_report_round_trip_and_order(tmp_path):
    rep = EvalReport()
    rep.add(_rec("b", "mpdr", 0))
    rep.add(_rec("a", "cggd_p0.5", 1, 2.5))
    rep.add(_rec("a", "cggd_p0.5", 0))
    with pytest.raises(ConfigurationError):
        rep.add(_rec("a", "cggd_p0.5", 0))
    assert [r.key for r in rep.sorted()] == [("a", "cggd_p0.5", 0), ("a", "cggd_p0.5", 1),
                                             ("b", "mpdr", 0)]
    back = EvalReport.from_json(rep.to_json())
    assert back.to_csv() == rep.to_csv()
    assert rep.value(condition="a", beamformer="cggd_p0.5", iteration=1) == 2.5
    rep.write(tmp_path)
    header = (tmp_path / "report.csv").read_text().splitlines()[0]
    assert header.split(",") == list(REPORT_COLUMNS)
    assert json.loads((tmp_path / "report.json").read_text())["columns"] == list(REPORT_COLUMNS)
