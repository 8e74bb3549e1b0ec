"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from compnull.model import ModelSpec, make_params

from _oracles import random_valid_params


def draw_spec_and_params(rng, k=None, variant="base", rho=None):
    """Random (ModelSpec, ModelParams) pair satisfying every constraint."""
    if k is None:
        k = int(rng.integers(2, 4))
    m_counts = [1] + [int(rng.integers(1, 3)) for _ in range(2 ** k - 1)]
    if variant == "correlated":
        m_counts = [1] * (2 ** k)
    if variant == "replication":
        m_counts[-1] = 1
    mu, pi = random_valid_params(rng, k, m_counts)
    spec = ModelSpec(k=k, variant=variant, m_counts=tuple(m_counts), rho=rho)
    return spec, make_params(mu, pi)


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)
