import time
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from frackpp.config import parse_config
from frackpp.evolve import run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []
RUN_SECONDS: dict[str, float] = {}


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def compact_half_exp():
    return parse_config(CONFIGS / "compact_half.toml")


def _timed(tag, cfg):
    start = time.perf_counter()
    traj = run(cfg)
    RUN_SECONDS[tag] = time.perf_counter() - start
    return traj


@pytest.fixture(scope="session")
def compact_half_run(compact_half_exp):
    return _timed("compact_half", compact_half_exp.simulation)


@pytest.fixture(scope="session")
def gaussian_linear_exp():
    return parse_config(CONFIGS / "gaussian_linear.toml")


@pytest.fixture(scope="session")
def gaussian_linear_run(gaussian_linear_exp):
    return _timed("gaussian_linear", gaussian_linear_exp.simulation)


@pytest.fixture(scope="session")
def monotone_exp():
    return parse_config(CONFIGS / "monotone.toml")


@pytest.fixture(scope="session")
def monotone_run(monotone_exp):
    return _timed("monotone", monotone_exp.simulation)
