"""Run specs (sweep configs) and the sweep harness behind the ``mldrbeam`` CLI.

A run spec is a YAML file::

    scenario: standard_ula6.yaml    # path relative to this file, or preset:NAME
    beamformers: [mpdr, mldr, cggd, oracle_mvdr]
    p_grid: [0.25, 0.5, 1.0, 1.5]   # one cggd entry per value
    sinr_grid_db: [0.0]
    rt60_grid_s: [0.16]
    iterations: 3
    steering: full_rtf              # freefield | direct_path_rtf | full_rtf
    seed: 1

Every (sinr, rt60) pair is one condition. Iterative beamformers report one
row per iteration 0..I; MPDR and oracle MVDR report iteration 0 only.
"""

import copy
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__, kernels
from .beamformers import CggdConfig, apply_weights, cggd_mldr, mpdr_weights, oracle_mvdr_weights
from .cxlinalg import DEFAULT_LOADING, default_floor, sample_covariance
from .errors import ConfigurationError, MldrBeamError
from .metrics import EvalRecord, EvalReport, si_sdr, sinr_improvement_from_bins
from .roomsim import rir as rirmod
from .roomsim.render import compute_rirs, render_scenario
from .roomsim.scenario import scenario_from_dict
from .roomsim.steering import MODES, steering_from_scenario
from .stft import DEFAULT_FRAME_LEN, DEFAULT_HOP, DEFAULT_WINDOW, Waveform, analyze, synthesize, write_wav

log = logging.getLogger(__name__)

BEAMFORMERS = ("mpdr", "mldr", "cggd", "oracle_mvdr")
CACHE_ENV = "MLDRBEAM_CACHE_DIR"
_SPEC_KEYS = {"scenario", "beamformers", "p_grid", "sinr_grid_db", "rt60_grid_s", "iterations",
              "steering", "seed", "floor_scale", "loading", "write_audio"}


def version_string():
    return f"{__version__}+{kernels.BACKEND}"


def resolve_config(ref, base_dir=None):
    """Path for ``ref``: ``preset:NAME`` or a file path (relative to ``base_dir``)."""
    ref = str(ref)
    if ref.startswith("preset:"):
        name = ref.split(":", 1)[1]
        if not name.endswith(".yaml"):
            name += ".yaml"
        path = resources.files("mldrbeam") / "presets" / name
        if not path.is_file():
            raise ConfigurationError(f"no preset named {name!r}")
        return Path(str(path))
    p = Path(ref)
    if not p.is_absolute() and base_dir is not None:
        p = Path(base_dir) / p
    if not p.exists():
        raise ConfigurationError(f"config file not found: {p}")
    return p


def load_yaml(path):
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a mapping at top level")
    return data


@dataclass
class RunSpec:
    scenario: dict
    scenario_dir: Path
    beamformers: list = field(default_factory=lambda: list(BEAMFORMERS))
    p_grid: list = field(default_factory=lambda: [0.5])
    sinr_grid_db: list = field(default_factory=list)
    rt60_grid_s: list = field(default_factory=list)
    iterations: int = 3
    steering: str = "full_rtf"
    seed: int = 1
    floor_scale: float = 1e-6
    loading: float = DEFAULT_LOADING
    write_audio: bool = True

    def __post_init__(self):
        unknown = [b for b in self.beamformers if b not in BEAMFORMERS]
        if unknown:
            raise ConfigurationError(f"unknown beamformer(s) {unknown}; choose from {BEAMFORMERS}")
        if self.steering not in MODES:
            raise ConfigurationError(f"unknown steering {self.steering!r}; choose from {MODES}")
        if int(self.iterations) < 0:
            raise ConfigurationError("iterations must be >= 0")
        for p in self.p_grid:
            if not 0.0 <= float(p) <= 2.0:
                raise ConfigurationError(f"p={p} outside [0, 2]")
        if not self.sinr_grid_db:
            self.sinr_grid_db = [float(self.scenario.get("input_sinr_db", 0.0))]
        if not self.rt60_grid_s:
            self.rt60_grid_s = [float(self.scenario.get("rt60", 0.0))]
        self.iterations = int(self.iterations)

    def conditions(self):
        """(name, scenario-dict) for every grid point, in a fixed order."""
        out = []
        for rt60 in self.rt60_grid_s:
            for sinr in self.sinr_grid_db:
                cfg = copy.deepcopy(self.scenario)
                cfg.update(rt60=float(rt60), input_sinr_db=float(sinr), seed=int(self.seed))
                out.append((f"sinr{float(sinr):+g}_rt{float(rt60):g}", cfg))
        return out

    def beamformer_ids(self):
        ids = []
        for b in self.beamformers:
            if b == "cggd":
                ids += [(f"cggd_p{float(p):g}", float(p)) for p in self.p_grid]
            elif b == "mldr":
                ids.append(("mldr", 0.0))
            else:
                ids.append((b, None))
        return ids


def load_run_spec(path, **overrides):
    """Load a run spec; a bare scenario file is accepted as a one-condition run."""
    path = resolve_config(path)
    data = load_yaml(path)
    if "room_dims" in data:
        data = {"scenario": data, "seed": data.get("seed", 1)}
        scen, scen_dir = data["scenario"], path.parent
    else:
        unknown = set(data) - _SPEC_KEYS
        if unknown:
            raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")
        if "scenario" not in data:
            raise ConfigurationError(f"{path}: missing 'scenario'")
        if isinstance(data["scenario"], dict):
            scen, scen_dir = data["scenario"], path.parent
        else:
            spath = resolve_config(data["scenario"], path.parent)
            scen, scen_dir = load_yaml(spath), spath.parent
    kw = {k: v for k, v in data.items() if k != "scenario"}
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return RunSpec(scenario=scen, scenario_dir=scen_dir, **kw)


# ---------------------------------------------------------------------------
# RIR cache


class RirCache:
    """RIRs keyed by geometry, RT60 and sample rate; optionally persisted as .npz."""

    def __init__(self, directory=None):
        directory = directory if directory is not None else os.environ.get(CACHE_ENV)
        self.directory = Path(directory) if directory else None
        self._mem = {}

    @staticmethod
    def key(scenario):
        blob = json.dumps({
            "room": [round(v, 9) for v in scenario.room_dims],
            "rt60": round(scenario.rt60, 9),
            "fs": scenario.sample_rate,
            "mics": np.round(scenario.array, 9).tolist(),
            "srcs": [np.round(s.position, 9).tolist() for s in scenario.sources],
            "c": rirmod.SPEED_OF_SOUND,
        }, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:20]

    def get(self, scenario):
        if scenario.rir_dir is not None:
            return compute_rirs(scenario)
        k = self.key(scenario)
        if k in self._mem:
            return self._mem[k]
        rirs = None
        f = self.directory / f"rir_{k}.npz" if self.directory else None
        if f is not None and f.exists():
            with np.load(f) as z:
                n_src, n_mic = int(z["shape"][0]), int(z["shape"][1])
                rirs = [[z[f"h{j}_{m}"] for m in range(n_mic)] for j in range(n_src)]
        if rirs is None:
            rirs = compute_rirs(scenario)
            if f is not None:
                self.directory.mkdir(parents=True, exist_ok=True)
                arrays = {f"h{j}_{m}": h for j, row in enumerate(rirs) for m, h in enumerate(row)}
                np.savez(f, shape=np.array([len(rirs), len(rirs[0])]), **arrays)
        self._mem[k] = rirs
        return rirs


# ---------------------------------------------------------------------------
# one condition


@dataclass
class ConditionResult:
    records: list
    outputs: dict  # beamformer id -> final-iteration Waveform
    scene: object


def _ref_waveform(w, ref):
    return Waveform(w.samples[ref : ref + 1], w.sample_rate)


def evaluate_condition(spec, name, scen_cfg, cache=None):
    """Render one grid point and evaluate every requested beamformer on it."""
    scenario = scenario_from_dict(scen_cfg, base_dir=spec.scenario_dir)
    scenario.validate()
    cache = cache or RirCache()
    rirs = cache.get(scenario)
    scene = render_scenario(scenario, rirs)
    ref = scenario.reference_mic
    h = steering_from_scenario(scenario, spec.steering, DEFAULT_FRAME_LEN, rirs)
    y = analyze(scene.mixture, DEFAULT_FRAME_LEN, DEFAULT_HOP, DEFAULT_WINDOW)
    xs = analyze(scene.desired_image).bins
    vs = analyze(scene.interference_plus_noise_image).bins
    clean = _ref_waveform(scene.desired_image, ref)
    sdr_in = si_sdr(clean, _ref_waveform(scene.mixture, ref))
    frames = np.transpose(y.bins, (1, 0, 2))
    chash = scenario.config_hash()
    ver = version_string()

    def record(bf_id, p, it, weights, delta):
        est = synthesize(apply_weights(weights, y))
        return EvalRecord(
            condition=name, beamformer=bf_id, p=p, input_sinr_db=scenario.input_sinr_db,
            rt60=scenario.rt60, iteration=it,
            si_sdr_improvement_db=si_sdr(clean, est) - sdr_in,
            output_sinr_improvement_db=sinr_improvement_from_bins(xs, vs, weights, ref),
            weight_delta=delta, seed=scenario.seed, config_hash=chash, version=ver,
        ), est

    records, outputs = [], {}
    for bf_id, p in spec.beamformer_ids():
        if bf_id == "mpdr":
            w = mpdr_weights(sample_covariance(frames), h, spec.loading)
            rec, est = record(bf_id, 2.0, 0, w, None)
            records.append(rec)
            outputs[bf_id] = est
        elif bf_id == "oracle_mvdr":
            r_vv = sample_covariance(np.transpose(vs, (1, 0, 2)))
            w = oracle_mvdr_weights(r_vv, h, spec.loading)
            rec, est = record(bf_id, None, 0, w, None)
            records.append(rec)
            outputs[bf_id] = est
        else:
            cfg = CggdConfig(shape_p=p, floor_delta=default_floor(frames, spec.floor_scale),
                             max_iterations=max(spec.iterations, 1), loading=spec.loading,
                             convergence_tol=None)
            out = cggd_mldr(y, h, cfg)
            for it, wv in enumerate(out.weight_history[: spec.iterations + 1]):
                delta = None if it == 0 else out.per_iteration_weight_delta[it - 1]
                rec, est = record(bf_id, p, it, wv, delta)
                records.append(rec)
            outputs[bf_id] = est
    return ConditionResult(records, outputs, scene)


# ---------------------------------------------------------------------------
# sweeps


def run_sweep(spec, out_dir=None, cache=None):
    """Evaluate every condition; returns (report, failures).

    A failing condition is logged and recorded with ``status`` set to the
    error, and the sweep continues. The report is rewritten after each
    condition so partial results survive interruption.
    """
    cache = cache or RirCache()
    report = EvalReport()
    failures = []
    out = Path(out_dir) if out_dir is not None else None
    for name, cfg in spec.conditions():
        try:
            res = evaluate_condition(spec, name, cfg, cache)
        except MldrBeamError as exc:
            log.error("condition %s failed: %s", name, exc)
            failures.append((name, exc))
            report.add(EvalRecord(
                condition=name, beamformer="-", p=None, input_sinr_db=cfg["input_sinr_db"],
                rt60=cfg["rt60"], iteration=0, si_sdr_improvement_db=None,
                output_sinr_improvement_db=None, weight_delta=None, seed=spec.seed,
                config_hash="", version=version_string(),
                status=f"error: {type(exc).__name__}: {exc}"))
        else:
            for rec in res.records:
                report.add(rec)
            if out is not None and spec.write_audio:
                adir = out / "audio" / name
                adir.mkdir(parents=True, exist_ok=True)
                for bf_id, wav in res.outputs.items():
                    write_wav(adir / f"{bf_id}.wav", wav)
        if out is not None:
            report.write(out)
    return report, failures


def validate_config(path):
    """Diagnostics for a scenario file or a run spec (plus its scenario)."""
    from .roomsim.scenario import Diagnostic, _line_index, validate_file

    try:
        path = resolve_config(path)
        text = Path(path).read_text()
        data = yaml.safe_load(text)
    except (ConfigurationError, OSError, yaml.YAMLError) as exc:
        return [Diagnostic(str(path), 0, "", str(exc))]
    if not isinstance(data, dict) or "room_dims" in data or "scenario" not in data:
        return validate_file(path)
    lines = _line_index(yaml.compose(text))
    diags = [Diagnostic(str(path), lines.get(k, 1), k, "unknown key")
             for k in sorted(set(data) - _SPEC_KEYS)]
    for k in ("sinr_grid_db", "rt60_grid_s", "p_grid", "beamformers"):
        if k in data and not data[k]:
            diags.append(Diagnostic(str(path), lines.get(k, 1), k, "grid must be non-empty"))
    try:
        kw = {k: v for k, v in data.items() if k in _SPEC_KEYS and k != "scenario"}
        RunSpec(scenario={}, scenario_dir=Path(path).parent, **kw)
    except (ConfigurationError, TypeError, ValueError) as exc:
        diags.append(Diagnostic(str(path), 1, "", str(exc)))
    if isinstance(data["scenario"], dict):
        diags.append(Diagnostic(str(path), lines.get("scenario", 1), "scenario",
                                "inline scenarios are not validated; reference a file"))
        return diags
    try:
        spath = resolve_config(data["scenario"], Path(path).parent)
    except ConfigurationError as exc:
        return diags + [Diagnostic(str(path), lines.get("scenario", 1), "scenario", str(exc))]
    return diags + validate_file(spath)
