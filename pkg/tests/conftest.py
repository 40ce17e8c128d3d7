"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from nvlab.io import default_config


@pytest.fixture
def lab():
    """A default virtual lab with a fixed seed."""
    return default_config(seed=12345).build_lab()


@pytest.fixture
def quiet_lab():
    """A lab with detuning noise disabled (deterministic physics)."""
    lab = default_config(seed=12345).build_lab()
    lab.noise = lab.noise.disabled()
    return lab


@pytest.fixture
def rng():
    return np.random.default_rng(7)
