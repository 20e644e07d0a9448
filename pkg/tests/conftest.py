import math

import numpy as np
import pytest

from gpestab.model import CosineLattice, EllipticSnSquared, Grid, Zero, sample_potential
from gpestab.stationary import StationaryState, exact_sn_state, solve_newton, thomas_fermi_state

# box on which the attractive uniform state has exactly one unstable
# Fourier pair, at q^2 = 2 + sqrt(2), with growth rate sqrt(1/2)
ATTRACTIVE_BOX = 2.0 * math.pi / math.sqrt(2.0 + math.sqrt(2.0))


def uniform_state(g1=1.0, n_points=64, length=2.0 * math.pi, backend="fd", amplitude=1.0):
    grid = Grid(n_points, length)
    R = np.full(n_points, amplitude)
    return StationaryState(R, g1 * amplitude ** 2, g1, grid, Zero(), backend=backend)


def attractive_lattice_state(V0=0.5, mu=-2.0, n_points=48):
    """Nodeless state of g1 = -1 in V0 cos(x) on one period."""
    pot = CosineLattice(V0, 1.0)
    grid = Grid.for_potential(pot, n_points)
    guess = np.sqrt(np.maximum(sample_potential(pot, grid) - mu, 0.01))
    return solve_newton(pot, mu, -1.0, guess, grid, tol=1e-11, backend="fd")


def staggered_state(V0=-5.0, k=0.9, mu=3.0, n_points=128):
    """Two-well sn-lattice state with opposite signs in neighbouring wells."""
    pot = EllipticSnSquared(V0, k)
    grid = Grid.for_potential(pot, n_points, n_periods=2)
    tf = thomas_fermi_state(pot, mu, 1.0, grid).R_tf
    x, L = grid.points, grid.period_length
    guess = tf * np.where((x < L / 4) | (x >= 3 * L / 4), 1.0, -1.0)
    return solve_newton(pot, mu, 1.0, guess, grid, tol=1e-11, backend="fd")


def state_zoo():
    """Converged, nontrivial states with moderate spectral radius."""
    states = [
        uniform_state(1.0, 32),
        uniform_state(-1.0, 32),
        uniform_state(2.0, 48, amplitude=0.5),
        uniform_state(-1.0, 32, length=ATTRACTIVE_BOX),
        exact_sn_state(-1.0, 0.5, 1.0, n_points=48, backend="fd"),
        exact_sn_state(-0.5, 0.5, 1.0, n_points=48, backend="fd"),
        exact_sn_state(-2.0, 0.8, 1.0, n_points=48, backend="fd"),
        attractive_lattice_state(0.5, -2.0),
        attractive_lattice_state(0.3, -1.0),
        staggered_state(n_points=64),
        staggered_state(-3.0, 0.7, 2.0, n_points=64),
    ]
    # re-solve exact data on the fd grid so every state is a discrete solution
    out = []
    for s in states:
        if isinstance(s.potential, EllipticSnSquared) and s.iterations == 0:
            s = solve_newton(s.potential, s.mu, s.g1, s.R, s.grid, tol=1e-11, backend=s.backend)
        out.append(s)
    return out


@pytest.fixture
def repulsive_uniform():
    return uniform_state(1.0, 32)


@pytest.fixture
def attractive_uniform():
    return uniform_state(-1.0, 32, length=ATTRACTIVE_BOX)


@pytest.fixture(scope="session")
def zoo():
    return state_zoo()


# -- acceptance reporting ---------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
