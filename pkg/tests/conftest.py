from __future__ import annotations

import numpy as np
import pytest
from scipy.stats import unitary_group


def rand_complex(rng, n, m=None):
    m = n if m is None else m
    return rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))


def rand_unitary(rng, n):
    return unitary_group.rvs(n, random_state=rng) if n > 1 else np.array([[np.exp(2j * np.pi * rng.random())]])


def rand_contraction(rng, n, norm):
    G = rand_complex(rng, n)
    return G * (norm / np.linalg.norm(G, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
