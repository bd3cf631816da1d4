import time

import pytest

from gpfl.config import ExperimentConfig
from gpfl.harness import run_experiment


@pytest.fixture(scope="session")
def experiment(tmp_path_factory):
    """Default-config sweep, run once and shared by the acceptance tests."""
    out = tmp_path_factory.mktemp("experiment")
    config = ExperimentConfig(out_dir=str(out))
    start = time.perf_counter()
    summary = run_experiment(config)
    elapsed = time.perf_counter() - start
    return config, summary, out, elapsed
