import time

import hypothesis
import numpy as np
import pytest

from mvcreg import reference_study_config, run_study

hypothesis.settings.register_profile(
    "ci", derandomize=True, deadline=None, max_examples=40
)
hypothesis.settings.load_profile("ci")

_REF_CACHE = {}


@pytest.fixture(scope="session")
def ref_config():
    config, options = reference_study_config()
    return config


@pytest.fixture(scope="session")
def ref_options():
    config, options = reference_study_config()
    return options


@pytest.fixture(scope="session")
def ref_report(ref_config):
    # shared across the distribution checks; the expensive fixture of the suite
    if "report" not in _REF_CACHE:
        start = time.perf_counter()
        _REF_CACHE["report"] = run_study(
            ref_config,
            rep_count=2000,
            n_grid=(500, 1000, 2000, 5000),
            keep_estimates=True,
        )
        _REF_CACHE["elapsed"] = time.perf_counter() - start
    return _REF_CACHE["report"]


@pytest.fixture(scope="session")
def ref_report_elapsed(ref_report):
    """Wall-clock seconds the shared full-grid study took to run."""
    return _REF_CACHE["elapsed"]


def random_stochastic_rows(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    """Row-stochastic matrix with rows mixing sparse and diffuse profiles."""
    alpha = rng.choice([0.15, 0.5, 2.0])
    return rng.dirichlet(np.full(m, alpha), size=n)


@pytest.fixture
def stochastic_rows():
    return random_stochastic_rows
