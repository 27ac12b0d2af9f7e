"""Scenario description, YAML loading and validation.

Schema (SI units, angles in degrees)::

    sample_rate: 16000
    room_dims: [6.0, 10.0, 4.0]
    rt60: 0.16
    input_sinr_db: 0.0
    seed: 1
    duration: 8.0                   # seconds of source signal
    sensor_noise_snr_db: 40.0       # null disables the white sensor floor
    reference_mic: 0
    array:
      ula: {center: [3, 5, 2], num_mics: 6, spacing: 0.04, axis: [1, 0, 0]}
      # or: positions: [[x, y, z], ...]
    sources:
      - role: desired               # or interference
        doa_deg: 0                  # azimuth from broadside, with distance
        distance: 2.0
        # or: position: [x, y, z]
        signal: {kind: speech_like_modulated_noise, seed: 11}
        # or: signal: {file: talker.wav}
    rir_dir: rirs/                  # optional: read src{j}_mic{m}.wav instead of simulating

Paths in ``signal.file`` and ``rir_dir`` are relative to the config file.
"""

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..errors import ConfigurationError, GeometryError, InfeasibleRT60Error
from . import rir as rirmod
from .signals import KINDS

ROLES = ("desired", "interference")
_TOP_KEYS = {"name", "sample_rate", "room_dims", "rt60", "input_sinr_db", "seed", "duration",
             "sensor_noise_snr_db", "reference_mic", "array", "sources", "rir_dir"}


@dataclass
class Source:
    position: np.ndarray
    role: str
    signal: dict


@dataclass
class Scenario:
    room_dims: tuple
    rt60: float
    array: np.ndarray  # (M, 3) microphone positions
    sources: list
    sample_rate: float = 16000.0
    input_sinr_db: float = 0.0
    seed: int = 0
    duration: float = 8.0
    sensor_noise_snr_db: object = 40.0
    reference_mic: int = 0
    name: str = "scenario"
    rir_dir: object = None  # precomputed RIR WAVs instead of simulation
    base_dir: object = field(default=None, repr=False, compare=False)
    broadside: object = field(default=None, repr=False, compare=False)

    @property
    def num_mics(self):
        return self.array.shape[0]

    @property
    def array_center(self):
        return self.array.mean(axis=0)

    @property
    def desired(self):
        return next(s for s in self.sources if s.role == "desired")

    @property
    def interferers(self):
        return [s for s in self.sources if s.role == "interference"]

    def replace(self, **changes):
        new = copy.copy(self)
        for k, v in changes.items():
            setattr(new, k, v)
        return new

    def to_dict(self):
        d = {
            "name": self.name,
            "sample_rate": float(self.sample_rate),
            "room_dims": [float(v) for v in self.room_dims],
            "rt60": float(self.rt60),
            "input_sinr_db": float(self.input_sinr_db),
            "seed": int(self.seed),
            "duration": float(self.duration),
            "sensor_noise_snr_db": None if self.sensor_noise_snr_db is None
            else float(self.sensor_noise_snr_db),
            "reference_mic": int(self.reference_mic),
            "array": {"positions": self.array.tolist()},
            "sources": [{"role": s.role, "position": np.asarray(s.position).tolist(),
                         "signal": dict(s.signal)} for s in self.sources],
        }
        if self.rir_dir is not None:
            d["rir_dir"] = str(self.rir_dir)
        return d

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def validate(self):
        """Raise the first geometry/physics violation, if any."""
        if self.num_mics < 2:
            raise ConfigurationError("need at least two microphones")
        roles = [s.role for s in self.sources]
        if roles.count("desired") != 1:
            raise ConfigurationError(f"need exactly one desired source, got {roles.count('desired')}")
        for m, pos in enumerate(self.array):
            rirmod.check_inside(self.room_dims, pos, f"microphone {m}")
        for j, s in enumerate(self.sources):
            rirmod.check_inside(self.room_dims, s.position, f"source {j}")
        rirmod.check_rt60(self.room_dims, self.rt60)
        if not 0 <= self.reference_mic < self.num_mics:
            raise ConfigurationError(f"reference_mic {self.reference_mic} out of range")


def _ula(spec):
    center = np.asarray(spec["center"], dtype=np.float64)
    axis = np.asarray(spec.get("axis", [1.0, 0.0, 0.0]), dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    n = int(spec["num_mics"])
    offsets = (np.arange(n) - (n - 1) / 2.0) * float(spec["spacing"])
    up = np.array([0.0, 0.0, 1.0])
    broadside = np.cross(up, axis)
    if np.linalg.norm(broadside) < 1e-9:
        raise ConfigurationError("ULA axis must not be vertical")
    return center + offsets[:, None] * axis, broadside / np.linalg.norm(broadside), axis


def _place(center, broadside, axis, doa_deg, distance):
    th = math.radians(doa_deg)
    return center + distance * (math.cos(th) * broadside + math.sin(th) * axis)


def scenario_from_dict(cfg, base_dir=None):
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
    arr = cfg["array"]
    broadside, axis = None, None
    if "ula" in arr:
        mics, broadside, axis = _ula(arr["ula"])
    else:
        mics = np.asarray(arr["positions"], dtype=np.float64)
        if mics.ndim != 2 or mics.shape[1] != 3:
            raise ConfigurationError("array.positions must be a list of [x, y, z]")
        if mics.shape[0] >= 2:
            axis = mics[-1] - mics[0]
            axis = axis / (np.linalg.norm(axis) or 1.0)
            b = np.cross([0.0, 0.0, 1.0], axis)
            broadside = b / (np.linalg.norm(b) or 1.0)
    center = mics.mean(axis=0)
    sources = []
    for j, s in enumerate(cfg["sources"]):
        role = s.get("role")
        if role not in ROLES:
            raise ConfigurationError(f"sources[{j}].role must be one of {ROLES}")
        if "position" in s:
            pos = np.asarray(s["position"], dtype=np.float64)
        elif "doa_deg" in s:
            if broadside is None:
                raise ConfigurationError("doa_deg placement needs an array axis")
            pos = _place(center, broadside, axis, float(s["doa_deg"]), float(s.get("distance", 2.0)))
        else:
            raise ConfigurationError(f"sources[{j}] needs position or doa_deg")
        sig = dict(s.get("signal", {"kind": "speech_like_modulated_noise"}))
        if "file" not in sig:
            sig.setdefault("kind", "speech_like_modulated_noise")
            sig.setdefault("seed", int(cfg.get("seed", 0)) * 1000 + j)
        sources.append(Source(pos, role, sig))
    noise = cfg.get("sensor_noise_snr_db", 40.0)
    return Scenario(
        room_dims=tuple(float(v) for v in cfg["room_dims"]),
        rt60=float(cfg.get("rt60", 0.0)),
        array=mics,
        sources=sources,
        sample_rate=float(cfg.get("sample_rate", 16000)),
        input_sinr_db=float(cfg.get("input_sinr_db", 0.0)),
        seed=int(cfg.get("seed", 0)),
        duration=float(cfg.get("duration", 8.0)),
        sensor_noise_snr_db=None if noise is None else float(noise),
        reference_mic=int(cfg.get("reference_mic", 0)),
        name=str(cfg.get("name", "scenario")),
        rir_dir=cfg.get("rir_dir"),
        base_dir=base_dir,
        broadside=broadside,
    )


def load_scenario(path):
    path = Path(path)
    with open(path) as fh:
        cfg = yaml.safe_load(fh)
    s = scenario_from_dict(cfg, base_dir=path.parent)
    s.validate()
    return s


def save_scenario(scenario, path):
    with open(path, "w") as fh:
        yaml.safe_dump(scenario.to_dict(), fh, sort_keys=False)


# ---------------------------------------------------------------------------
# validation with source locations


@dataclass
class Diagnostic:
    path: str
    line: int
    key: str
    message: str

    def __str__(self):
        return f"{self.path}:{self.line}: {self.key}: {self.message}"


def _line_index(node, prefix="", out=None):
    """Map dotted key paths to 1-based line numbers from a YAML node tree."""
    out = {} if out is None else out
    out.setdefault(prefix, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[key] = k.start_mark.line + 1
            _line_index(v, key, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            key = f"{prefix}[{i}]"
            out[key] = v.start_mark.line + 1
            _line_index(v, key, out)
    return out


def validate_file(path):
    """Schema and physics checks without rendering; returns a list of Diagnostics."""
    path = Path(path)
    diags = []
    try:
        text = path.read_text()
    except OSError as exc:
        return [Diagnostic(str(path), 0, "", f"cannot read config: {exc}")]
    try:
        node = yaml.compose(text)
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        return [Diagnostic(str(path), (mark.line + 1) if mark else 0, "", f"YAML error: {exc}")]
    if not isinstance(cfg, dict) or node is None:
        return [Diagnostic(str(path), 1, "", "config must be a mapping")]
    lines = _line_index(node)

    def add(key, msg):
        k = key
        while k and k not in lines:
            k = k.rsplit(".", 1)[0] if "." in k else ""
        diags.append(Diagnostic(str(path), lines.get(k, 1), key, msg))

    for k in sorted(set(cfg) - _TOP_KEYS):
        add(k, "unknown key")
    for k in ("room_dims", "array", "sources"):
        if k not in cfg:
            add(k, "missing required key")
    if diags:
        return diags
    try:
        s = scenario_from_dict(cfg, base_dir=path.parent)
    except (ConfigurationError, KeyError, TypeError, ValueError) as exc:
        add("", f"invalid scenario: {exc}")
        return diags

    room = np.asarray(s.room_dims)
    if room.shape != (3,) or np.any(room <= 0):
        add("room_dims", "room dimensions must be three positive lengths")
        return diags
    if s.sample_rate <= 0:
        add("sample_rate", "must be positive")
    if s.num_mics < 2:
        add("array", "need at least two microphones")
    arr_key = "array.ula" if "ula" in cfg["array"] else "array.positions"
    for m, pos in enumerate(s.array):
        try:
            rirmod.check_inside(s.room_dims, pos, f"microphone {m}")
        except GeometryError as exc:
            add(f"{arr_key}[{m}]" if arr_key.endswith("positions") else arr_key, f"geometry violation: {exc}")
    n_desired = sum(src.role == "desired" for src in s.sources)
    if n_desired != 1:
        add("sources", f"need exactly one desired source, found {n_desired}")
    for j, src in enumerate(s.sources):
        try:
            rirmod.check_inside(s.room_dims, src.position, f"source {j}")
        except GeometryError as exc:
            add(f"sources[{j}]", f"geometry violation: {exc}")
        sig = src.signal
        if "file" in sig:
            f = Path(sig["file"])
            if not f.is_absolute():
                f = path.parent / f
            if not f.exists():
                add(f"sources[{j}].signal.file", f"signal file not found: {f}")
        elif sig.get("kind") not in KINDS:
            add(f"sources[{j}].signal.kind", f"unknown signal kind {sig.get('kind')!r}")
    if s.rir_dir is not None:
        d = Path(s.rir_dir)
        d = d if d.is_absolute() else path.parent / d
        for j in range(len(s.sources)):
            for m in range(s.num_mics):
                if not (d / f"src{j}_mic{m}.wav").exists():
                    add("rir_dir", f"missing RIR file {d / f'src{j}_mic{m}.wav'}")
    try:
        rirmod.check_rt60(s.room_dims, s.rt60)
    except InfeasibleRT60Error as exc:
        add("rt60", f"infeasible rt60: {exc}")
    if not 0 <= s.reference_mic < max(s.num_mics, 1):
        add("reference_mic", "out of range")
    if s.duration <= 0:
        add("duration", "must be positive")
    return diags
