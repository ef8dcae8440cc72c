"""
Shared fixtures for the PyPinnKF test suite.

- `src/` goes on sys.path so the suite runs without an install
- the Burgers reference table is cached in a temporary directory for the session
- tests marked `slow` run only with PYPINNKF_RUN_SLOW=1
"""

import os
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

# Add src to path
pypinnkf_src = Path(__file__).resolve().parents[1] / "src"
if not (pypinnkf_src / "pypinnkf").is_dir():
    raise RuntimeError(f"Cannot find pypinnkf package at: {pypinnkf_src}")
sys.path.insert(0, str(pypinnkf_src))

# Must be set before pypinnkf.core.constants is imported
_ORACLE_DIR = tempfile.mkdtemp(prefix="pypinnkf-oracle-")
os.environ.setdefault("PYPINNKF_ORACLE_CACHE", str(Path(_ORACLE_DIR) / "burgers_oracle.csv"))
os.environ.setdefault("PYPINNKF_WORKERS", "2")

from pypinnkf.core.enums import E_Mode, E_Problem
from pypinnkf.core.structures import NetworkArchitecture
from pypinnkf.problems import make_problem_spec
from pypinnkf.training.observations import make_observations, sample_collocation


def pytest_collection_modifyitems(config, items):
    if os.getenv("PYPINNKF_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="desk-scale run; set PYPINNKF_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_arch():
    """A narrow network so training tests stay fast."""
    return NetworkArchitecture(layer_widths=(2, 6, 6, 1))


@pytest.fixture
def burgers_forward():
    return make_problem_spec(E_Problem.BURGERS, E_Mode.FORWARD, misspecified=False)


@pytest.fixture
def burgers_inverse():
    return make_problem_spec(E_Problem.BURGERS, E_Mode.INVERSE)


@pytest.fixture
def tfmdwe_forward():
    return make_problem_spec(E_Problem.TFMDWE, E_Mode.FORWARD, misspecified=False)


@pytest.fixture
def burgers_sets(burgers_forward):
    """(collocation, observations) with a small residual set."""
    coll = sample_collocation(burgers_forward, seed=0, n_ic=10, n_bc=10, n_res=40)
    obs = make_observations(burgers_forward, 0.2, (4, 3), seed=0)
    return coll, obs
