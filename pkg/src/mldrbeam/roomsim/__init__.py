"""Desk-scale room acoustics: image-method RIRs, scenes and steering vectors."""

from .render import SceneAudio, compute_rirs, render_scenario
from .rir import image_method_rir, reflection_coefficient, schroeder_decay_db
from .scenario import Scenario, Source, load_scenario, save_scenario, scenario_from_dict, validate_file
from .signals import synth_test_signals
from .steering import steering_from_scenario

__all__ = [
    "SceneAudio", "Scenario", "Source", "compute_rirs", "image_method_rir", "load_scenario",
    "reflection_coefficient", "render_scenario", "save_scenario", "scenario_from_dict",
    "schroeder_decay_db", "steering_from_scenario", "synth_test_signals", "validate_file",
]
