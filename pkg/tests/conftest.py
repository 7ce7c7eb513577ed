import json
from pathlib import Path

import numpy as np
import pytest

from loocv.datagen import EnsembleSpec, sample_instance
from loocv.model import ProblemInstance

DATA = Path(__file__).resolve().parent / "data"


@pytest.fixture(scope="session")
def oracles():
    return json.loads((DATA / "oracles.json").read_text())


@pytest.fixture
def small_instance():
    inst, truth = sample_instance(EnsembleSpec(40, 0.5, 0.2, 1.0, 0.01, seed=0))
    return inst, truth


def random_instance(M, N, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((M, N)) / np.sqrt(N)
    y = rng.standard_normal(M)
    return ProblemInstance(A, y)
