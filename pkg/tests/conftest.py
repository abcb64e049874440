import math

import numpy as np
import pytest

from nlms.config import make_initial_data, random_solenoidal
from nlms.physics import PhysParams, State
from nlms.spectral import Grid

TWO_PI = 2 * math.pi

# Gaussian u (amplitude 0.5, width L/8) plus one transverse mode in A.
STANDARD_INIT = {
    "u": {"kind": "gaussian", "amplitude": 0.5},
    "A": {"kind": "mode", "k": [1, 0, 0], "polarization": [0, 1, 0], "amplitude": 0.5},
}

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def standard_state(N=32, L=TWO_PI) -> State:
    return make_initial_data(STANDARD_INIT, Grid(N, L))


def random_state(grid: Grid, seed: int, amp_u=0.3, amp_A=0.5) -> State:
    rng = np.random.default_rng(seed)
    uh = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) \
        * (1 + grid.k2) ** -2.0
    u = grid.ifft(uh * grid.dealias_mask)
    u *= amp_u / np.abs(u).max()
    A = random_solenoidal(grid, seed + 1, 2.0, amp_A)
    At = random_solenoidal(grid, seed + 2, 2.0, amp_A)
    return State(grid, 0.0, u, A, At)


def plane_wave(grid: Grid, m):
    X, Y, Z = grid.coords()
    k = 2 * np.pi * np.asarray(m, float) / grid.L
    return np.exp(1j * (k[0] * X + k[1] * Y + k[2] * Z)), k


@pytest.fixture
def g8():
    return Grid(8, TWO_PI)


@pytest.fixture
def g16():
    return Grid(16, TWO_PI)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def rk4_study():
    """RK4 drift and E2-identity study on the standard data, N=32, T=1.

    Identity probes stop at t=0.4: later on, the N=32 spatial error of the
    identity (about 2e-5 at t=0.6, shrinking with N) hides the dt^2 term.
    """
    from nlms.studies import conservation_study

    s0 = standard_state()
    return conservation_study(s0, PhysParams(2.5), [4e-3, 2e-3, 1e-3], 1.0,
                              sample_every=0.04, probe_times=[0.2, 0.4])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
