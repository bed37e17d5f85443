import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from solarcast.dataio import ALL_FRAMES, build_frame, parse_pv, parse_weather
from solarcast.synthetic import write_dataset

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def synthetic_paths(tmp_path_factory):
    return write_dataset(tmp_path_factory.mktemp("synthetic"), days=90, seed=3)


@pytest.fixture(scope="session")
def synthetic_frames(synthetic_paths):
    pv, weather = synthetic_paths
    pv_recs, w_recs = parse_pv(pv).records, parse_weather(weather).records
    return {f: build_frame(pv_recs, w_recs, f) for f in ALL_FRAMES}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = mod.report_lines() if mod is not None else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
