import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from hybrid_radar import build_waveform_matrix, default_model, raised_cosine_taps  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture(scope="session")
def raw_model():
    return default_model(energy="raw")


@pytest.fixture(scope="session")
def toy_model():
    """P=2, I=2, L=3: M=8, used with N=4."""
    return build_waveform_matrix(raised_cosine_taps(0.22, 2, 2), 3).unit_energy(4)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def rand_herm(rng, n):
    A = crandn(rng, n, n)
    return (A + A.conj().T) / 2


def rand_psd(rng, n, rank=None):
    A = crandn(rng, n, rank or n)
    return A @ A.conj().T


ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail)`` records one acceptance line."""
    def record(n, ok, detail):
        ACCEPTANCE_LINES[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE_LINES[n])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
