import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mldrbeam.experiment import load_run_spec  # noqa: E402
from mldrbeam.roomsim import render_scenario, scenario_from_dict, steering_from_scenario  # noqa: E402
from mldrbeam.roomsim.render import compute_rirs  # noqa: E402
from mldrbeam.stft import analyze  # noqa: E402


class StandardScene:
    """The standard preset at 0 dB / 160 ms, rendered once per session."""

    def __init__(self):
        spec = load_run_spec("preset:standard_ula6")
        cfg = dict(spec.scenario)
        self.scenario = scenario_from_dict(cfg, base_dir=spec.scenario_dir)
        self.rirs = compute_rirs(self.scenario)
        self.scene = render_scenario(self.scenario, self.rirs)
        self.h = steering_from_scenario(self.scenario, "full_rtf", rirs=self.rirs)
        self.y = analyze(self.scene.mixture)
        self.frames = np.ascontiguousarray(self.y.bins.transpose(1, 0, 2))
        self.vs = analyze(self.scene.interference_plus_noise_image).bins
        self.xs = analyze(self.scene.desired_image).bins


@pytest.fixture(scope="session")
def standard():
    return StandardScene()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
