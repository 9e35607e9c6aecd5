import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def toy_project(tmp_path_factory) -> Path:
    """A generated fixture project (corpus, manifest, config), not yet run."""
    from versekit.toy import write_toy_project

    return write_toy_project(tmp_path_factory.mktemp("toy"))


PIPELINE = ("fetch", "extract", "clean", "stats", "pairs", "split", "align", "score")


def run_pipeline(config: Path, *extra: str) -> None:
    from versekit.cli import main

    for step in PIPELINE:
        code = main([step, "--config", str(config), "-q", *extra])
        if code:
            raise AssertionError(f"{step} exited with {code}")


@pytest.fixture(scope="session")
def toy_run(toy_project) -> Path:
    """The fixture project after one full pipeline run; returns the config path."""
    run_pipeline(toy_project)
    return toy_project
