from __future__ import annotations

import numpy as np
import pytest

from gtlab.geometry import conformal_torus, cosine_factor, flat_torus, round_sphere


@pytest.fixture(scope="session")
def flat():
    return flat_torus(32)


@pytest.fixture(scope="session")
def conformal():
    return conformal_torus(cosine_factor(0.1), 32)


@pytest.fixture(scope="session")
def sphere():
    return round_sphere(16)


@pytest.fixture(scope="session")
def small_sphere():
    return round_sphere(8)


@pytest.fixture(params=["flat", "conformal", "sphere"])
def backend(request):
    return request.getfixturevalue(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
