"""Pytest configuration and fixtures for Wiener Heat Lab tests."""

import numpy as np
import pytest

from config.settings import settings
from lab.core.gaussian import gaussian_sample
from lab.models.gaussian import GaussianMeasureSpec
from lab.models.hilbert import EpsilonSequence, OrthonormalFrame, TraceClassOperator
from lab.symbols.stock import (
    constant_symbol,
    exp_i_symbol,
    gaussian_bell_symbol,
    poly_scalar_symbol,
    product_symbol,
    trig_symbol,
)

DIM = 8


@pytest.fixture
def dim() -> int:
    """Ambient truncation dimension used by unit tests."""
    return DIM


@pytest.fixture
def frame() -> OrthonormalFrame:
    """Canonical frame of R^8."""
    return OrthonormalFrame.canonical(DIM)


@pytest.fixture
def eps() -> EpsilonSequence:
    """Geometric weights 2^{-j}."""
    return EpsilonSequence.geometric(DIM, 0.5)


@pytest.fixture
def operator() -> TraceClassOperator:
    """Geometric trace-class operator lambda_j = 2^{-j}."""
    return TraceClassOperator.geometric(DIM, 0.5)


@pytest.fixture
def geometric_direction() -> np.ndarray:
    """a_j = 0.5 * 2^{-j}, dominated by the geometric weights."""
    return 0.5 * 0.5 ** np.arange(DIM, dtype=float)


@pytest.fixture
def gaussian_batch():
    """20000 draws of N(0, I_8) under seed 7."""
    return gaussian_sample(GaussianMeasureSpec(dim=DIM, variance=1.0), seed=7, count=20_000)


@pytest.fixture
def trig(geometric_direction, eps):
    """cos(<a, x> + 0.3) with an S_3 claim."""
    return trig_symbol(geometric_direction, phase=0.3, eps=eps, depth=3, label="trig")


@pytest.fixture
def exp_i(eps):
    """e^{i <a, x>} along a basis direction."""
    a = np.zeros(DIM)
    a[1] = 0.4
    return exp_i_symbol(a, eps=eps, depth=3, label="exp_i")


@pytest.fixture
def bell():
    """exp(-Q_C(x)/2) with C of rank 2."""
    return gaussian_bell_symbol(TraceClassOperator.diagonal([0.8, 0.4] + [0.0] * (DIM - 2)), label="bell")


@pytest.fixture
def constant(eps):
    """The constant 1.5 in every class."""
    return constant_symbol(1.5, DIM, eps=eps, depth=3)


@pytest.fixture
def quadratic(geometric_direction):
    """<a, x>^2, unbounded."""
    return poly_scalar_symbol([geometric_direction], [2], label="quadratic")


@pytest.fixture
def trig_product(trig, exp_i):
    """cos(<a, x> + 0.3) e^{i <b, x>}."""
    return product_symbol(trig, exp_i, label="trig_product")


@pytest.fixture
def settings_override(monkeypatch):
    """Patch global settings for the duration of a test."""

    def apply(**values):
        for key, value in values.items():
            monkeypatch.setattr(settings, key, value)
        return settings

    return apply


@pytest.fixture
def within_sigma():
    """Looser 5 sigma gate for Monte Carlo rows in unit tests."""

    def gate(row, sigma: float = 5.0) -> bool:
        if row.bound is None:
            return row.measured == row.measured
        return row.measured <= row.bound + sigma * row.stderr + row.tolerance

    return gate
