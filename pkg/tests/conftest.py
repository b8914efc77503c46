import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eogcycle.synth import GenSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture
def quiet_spec():
    """Noiseless, driftless spec for contract checks on clean morphology."""
    return GenSpec(trials_per_class=2, noise_std_v=0.0, drift_amplitude_v=0.0,
                   seed=101)


@pytest.fixture
def default_spec():
    return GenSpec(trials_per_class=2, seed=101)
