"""Pytest configuration: write solver output to a temporary MCBDQM_OUT and share small grids."""

import os
import shutil
import tempfile

import numpy as np
import pytest

# MCBDQM_OUT must be set before mcbdqm is imported; the module reads it once
_MCBDQM_TEST_OUT = tempfile.mkdtemp(prefix="mcbdqm_test_")
os.environ["MCBDQM_OUT"] = _MCBDQM_TEST_OUT

import mcbdqm  # noqa: E402


@pytest.fixture(scope="session", autouse=True)
def _cleanup_mcbdqm_out():
    """Remove the test output directory and env var after all tests."""
    yield
    os.environ.pop("MCBDQM_OUT", None)
    shutil.rmtree(_MCBDQM_TEST_OUT, ignore_errors=True)


@pytest.fixture
def unit_grid():
    """Eleven nodes on [0, 1], h = 0.1."""
    return mcbdqm.UniformGrid(0.0, 1.0, 11)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
