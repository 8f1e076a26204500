from __future__ import annotations

import numpy as np
import pytest

from convlab.core.models import ConvShape
from convlab.core.tensor import random_operands
from convlab.sim.machine import MachineConfig


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_shape() -> ConvShape:
    return ConvShape(4, 8, 9, 9)


@pytest.fixture
def operands(small_shape, rng):
    return random_operands(small_shape, rng)


@pytest.fixture
def one_cu() -> MachineConfig:
    """One compute unit with bandwidth to spare: timing is latency and issue only."""
    return MachineConfig(name="one_cu", num_cus=1, global_bytes_per_cycle=1e6)


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    monkeypatch.setenv("CONVLAB_CONFIG_DIR", str(tmp_path / "config"))
