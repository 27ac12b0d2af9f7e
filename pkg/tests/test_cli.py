import json

import numpy as np
import pytest
import yaml

from mldrbeam.cli import main
from mldrbeam.experiment import RirCache, load_run_spec, run_sweep, validate_config
from mldrbeam.metrics import REPORT_COLUMNS
from mldrbeam.roomsim import scenario_from_dict
from mldrbeam.stft import read_wav

SCENE = {
    "name": "small",
    "sample_rate": 16000,
    "room_dims": [5.0, 4.0, 3.0],
    "rt60": 0.2,
    "input_sinr_db": 0.0,
    "seed": 4,
    "duration": 1.5,
    "array": {"ula": {"center": [2.5, 2.0, 1.5], "num_mics": 3, "spacing": 0.04}},
    "sources": [
        {"role": "desired", "doa_deg": 0, "distance": 1.2,
         "signal": {"kind": "speech_like_modulated_noise"}},
        {"role": "interference", "doa_deg": 50, "distance": 1.2,
         "signal": {"kind": "speech_like_modulated_noise"}},
    ],
}


def _write(path, data):
    path.write_text(yaml.safe_dump(data, sort_keys=False))
    return path


@pytest.fixture
def spec_file(tmp_path):
    _write(tmp_path / "scene.yaml", SCENE)
    return _write(tmp_path / "run.yaml", {
        "scenario": "scene.yaml", "beamformers": ["mpdr", "mldr", "cggd", "oracle_mvdr"],
        "p_grid": [0.5, 1.0], "sinr_grid_db": [0.0, 5.0], "rt60_grid_s": [0.2],
        "iterations": 2, "steering": "full_rtf", "seed": 4,
    })


# --- validate ------------------------------------------------------------------------------------

@pytest.mark.parametrize("preset", ["standard_ula6", "trend_iterations", "trend_sinr", "trend_rt60"])
def test_presets_valid(preset, capsys):
    assert validate_config(f"preset:{preset}") == []
    assert main(["validate", "--config", f"preset:{preset}"]) == 0


def test_mic_outside_room(tmp_path, capsys):
    cfg = dict(SCENE)
    cfg["array"] = {"positions": [[1.0, 1.0, 1.0], [5.5, 1.0, 1.0]]}
    path = _write(tmp_path / "bad.yaml", cfg)
    diags = validate_config(path)
    assert len(diags) == 1
    assert "geometry violation" in diags[0].message and "microphone 1" in diags[0].message
    assert diags[0].key == "array.positions[1]"
    lines = path.read_text().splitlines()
    assert "positions" in lines[diags[0].line - 1] or "5.5" in lines[diags[0].line - 1]
    assert main(["validate", "--config", str(path)]) == 1
    assert "bad.yaml" in capsys.readouterr().out


def test_infeasible_rt60(tmp_path):
    cfg = dict(SCENE, rt60=0.01)
    path = _write(tmp_path / "fast.yaml", cfg)
    diags = validate_config(path)
    assert [d.key for d in diags] == ["rt60"]
    assert "infeasible" in diags[0].message
    assert path.read_text().splitlines()[diags[0].line - 1].startswith("rt60")


def test_unknown_key_and_missing_file(tmp_path):
    cfg = dict(SCENE, colour="blue")
    cfg["sources"] = [dict(SCENE["sources"][0], signal={"file": "missing.wav"})] + SCENE["sources"][1:]
    diags = validate_config(_write(tmp_path / "odd.yaml", cfg))
    assert {d.key for d in diags} == {"colour"}
    del cfg["colour"]
    diags = validate_config(_write(tmp_path / "odd.yaml", cfg))
    assert [d.key for d in diags] == ["sources[0].signal.file"]


def test_run_spec_validation(tmp_path, spec_file):
    assert validate_config(spec_file) == []
    data = yaml.safe_load(spec_file.read_text())
    data["sinr_grid_db"] = []
    data["scenario"] = "nowhere.yaml"
    diags = validate_config(_write(tmp_path / "run2.yaml", data))
    keys = {d.key for d in diags}
    assert {"sinr_grid_db", "scenario"} <= keys


# --- sweep ---------------------------------------------------------------------------------------

def test_sweep_report_and_determinism(tmp_path, spec_file):
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["sweep", "--config", str(spec_file), "--out", str(out1)]) == 0
    assert main(["sweep", "--config", str(spec_file), "--out", str(out2), "--deterministic"]) == 0
    for name in ("report.csv", "report.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    wav1 = (out1 / "audio" / "sinr+5_rt0.2" / "cggd_p0.5.wav").read_bytes()
    assert wav1 == (out2 / "audio" / "sinr+5_rt0.2" / "cggd_p0.5.wav").read_bytes()

    data = json.loads((out1 / "report.json").read_text())
    assert data["columns"] == list(REPORT_COLUMNS)
    rows = data["records"]
    # 2 conditions x (mpdr 1 + oracle 1 + mldr 3 + two cggd 3 each)
    assert len(rows) == 2 * (1 + 1 + 3 + 3 + 3)
    for r in rows:
        assert r["status"] == "ok"
        assert r["seed"] == 4 and len(r["config_hash"]) == 16 and r["version"]
        assert np.isfinite(r["si_sdr_improvement_db"]) and np.isfinite(r["output_sinr_improvement_db"])
    keys = [(r["condition"], r["beamformer"], r["iteration"]) for r in rows]
    assert keys == sorted(keys) and len(set(keys)) == len(keys)
    it0 = [r for r in rows if r["iteration"] == 0 and r["condition"] == "sinr+0_rt0.2"]
    mpdr = next(r for r in it0 if r["beamformer"] == "mpdr")
    for r in it0:
        if r["beamformer"].startswith(("cggd", "mldr")):
            assert r["si_sdr_improvement_db"] == pytest.approx(mpdr["si_sdr_improvement_db"], abs=1e-9)


def test_failed_condition_recorded_and_run_continues(tmp_path, spec_file, capsys):
    data = yaml.safe_load(spec_file.read_text())
    data["rt60_grid_s"] = [0.01, 0.2]
    data["sinr_grid_db"] = [0.0]
    path = _write(tmp_path / "run_bad.yaml", data)
    out = tmp_path / "ob"
    assert main(["sweep", "--config", str(path), "--out", str(out)]) == 1
    rows = json.loads((out / "report.json").read_text())["records"]
    bad = [r for r in rows if r["condition"] == "sinr+0_rt0.01"]
    assert len(bad) == 1 and bad[0]["status"].startswith("error: InfeasibleRT60Error")
    assert any(r["condition"] == "sinr+0_rt0.2" and r["status"] == "ok" for r in rows)


def test_cli_overrides(tmp_path, spec_file):
    out = tmp_path / "ov"
    assert main(["sweep", "--config", str(spec_file), "--out", str(out), "--beamformer", "cggd",
                 "--p", "1.5", "--iterations", "1", "--seed", "11"]) == 0
    rows = json.loads((out / "report.json").read_text())["records"]
    assert {r["beamformer"] for r in rows} == {"cggd_p1.5"}
    assert {r["iteration"] for r in rows} == {0, 1}
    assert {r["seed"] for r in rows} == {11}


def test_seed_changes_signals(spec_file):
    a = load_run_spec(spec_file).conditions()[0][1]
    b = load_run_spec(spec_file, seed=99).conditions()[0][1]
    sa, sb = scenario_from_dict(a), scenario_from_dict(b)
    assert sa.sources[0].signal["seed"] != sb.sources[0].signal["seed"]


def test_rir_disk_cache(tmp_path, monkeypatch, spec_file):
    monkeypatch.setenv("MLDRBEAM_CACHE_DIR", str(tmp_path / "cache"))
    spec = load_run_spec(spec_file)
    s = scenario_from_dict(spec.conditions()[0][1], base_dir=spec.scenario_dir)
    first = RirCache().get(s)
    files = list((tmp_path / "cache").glob("rir_*.npz"))
    assert len(files) == 1
    again = RirCache().get(s)  # fresh memory, served from disk
    for a, b in zip(first, again):
        for x, y in zip(a, b):
            assert np.array_equal(x, y)


def test_run_sweep_api(spec_file):
    spec = load_run_spec(spec_file, beamformers=["mpdr", "oracle_mvdr"], sinr_grid_db=[0.0])
    report, failures = run_sweep(spec)
    assert failures == []
    assert report.value(condition="sinr+0_rt0.2", beamformer="oracle_mvdr", iteration=0) > \
        report.value(condition="sinr+0_rt0.2", beamformer="mpdr", iteration=0)


# --- staged commands -----------------------------------------------------------------------------

def test_simulate_enhance_evaluate(tmp_path, spec_file, capsys):
    scene_yaml = str(tmp_path / "scene.yaml")
    out = tmp_path / "stage"
    assert main(["simulate", "--config", scene_yaml, "--out", str(out)]) == 0
    mix = read_wav(out / "mixture.wav")
    assert mix.channels == 3 and mix.sample_rate == 16000
    assert (out / "rirs" / "src1_mic2.wav").exists()
    assert main(["enhance", "--config", scene_yaml, "--out", str(out), "--input",
                 str(out / "mixture.wav"), "--beamformer", "cggd", "--p", "0.5",
                 "--iterations", "2"]) == 0
    assert read_wav(out / "enhanced.wav").channels == 1
    capsys.readouterr()
    assert main(["evaluate", "--config", scene_yaml, "--out", str(out)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["si_sdr_improvement_db"] > 0 and res["output_sinr_improvement_db"] > 0


def test_errors_exit_code(tmp_path, capsys):
    assert main(["sweep", "--config", str(tmp_path / "none.yaml"), "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err
