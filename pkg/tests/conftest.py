import numpy as np
import pytest

from harmonic_enf.model import FrameConfig, HarmonicModelSpec, synth_multitone

# one line per acceptance criterion, printed in the terminal summary
CRITERIA: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str):
    CRITERIA[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k])


FS = 800.0
RES = 1.0 / 4000.0


@pytest.fixture(scope="session")
def cfg():
    return FrameConfig.default(FS)


@pytest.fixture(scope="session")
def small_cfg():
    # 2 s frames, 1 s hop, 1/100 Hz grid: cheap but same code paths
    return FrameConfig(1600, 800, 1.0 / 100.0)


def constant_mixture(f0=50.05, seconds=40.0, harmonics=(2, 3, 4, 5, 6, 7), seed=3, fs=FS):
    n = int(seconds * fs)
    spec = HarmonicModelSpec.from_fundamental(np.full(n, f0), harmonics, seed=seed)
    return synth_multitone(spec, fs)


@pytest.fixture(scope="session")
def noiseless_mix():
    return constant_mixture()
