import json
import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpestab.elliptic import complete_K
from gpestab.model import ConfigurationError, CosineLattice, EllipticSnSquared, Grid, Zero, sample_potential
from gpestab.stationary import (
    DomainError,
    NonConvergenceError,
    StationaryState,
    exact_sn_mu_s,
    exact_sn_state,
    linear_ground_state,
    load_state,
    mean_potential,
    mean_sn_squared_potential,
    mu_TF,
    residual,
    save_state,
    solve_fixed_N,
    solve_newton,
    thomas_fermi_state,
)


def test_exact_state_worked_example():
    s = exact_sn_state(-1.0, 0.2, 1.0)
    assert s.mu == pytest.approx(24.02, abs=1e-10)
    assert exact_sn_mu_s(-1.0, 0.2) == pytest.approx(24.0, abs=1e-10)
    assert residual(s) < 1e-8
    assert np.all(s.R > 0)


@settings(max_examples=25, deadline=None)
@given(k=st.floats(0.05, 0.95), excess=st.floats(0.01, 5.0), g1=st.floats(0.2, 3.0))
def test_exact_state_solves_equation(k, excess, g1):
    V0 = -(k * k) * (1.0 + excess)
    s = exact_sn_state(V0, k, g1, n_points=256)
    assert residual(s) < 1e-8 * max(1.0, abs(s.mu))
    # U = V + g1 R^2 is minimal at the potential minimum, where it equals mu_s
    U = s.V + g1 * s.R ** 2
    assert U.min() == pytest.approx(exact_sn_mu_s(V0, k), abs=1e-9 * max(1, abs(s.mu)))


def test_exact_state_vacuum_limit():
    with pytest.warns(UserWarning, match="vacuum"):
        s = exact_sn_state(-0.25, 0.5, 1.0, n_points=64)
    assert s.trivial
    assert np.all(s.R == 0)
    assert s.mu == pytest.approx(0.125)


@pytest.mark.parametrize("V0, k, g1", [(-0.1, 0.5, 1.0), (-1.0, 0.0, 1.0), (-1.0, 1.0, 1.0),
                                       (-1.0, 0.5, 0.0), (-1.0, 0.5, -1.0)])
def test_exact_state_domain(V0, k, g1):
    with pytest.raises(DomainError):
        exact_sn_state(V0, k, g1, n_points=64)


def test_newton_uniform_cases():
    g = Grid(32, 2 * math.pi)
    s = solve_newton(Zero(), 1.0, 1.0, np.full(32, 0.7), g)
    np.testing.assert_allclose(s.R, 1.0, atol=1e-12)
    s = solve_newton(Zero(), -1.0, -1.0, np.full(32, 0.7), g)
    np.testing.assert_allclose(s.R, 1.0, atol=1e-12)
    assert residual(s) < 1e-12


def test_newton_from_exact_state_is_immediate():
    s = exact_sn_state(-1.0, 0.5, 1.0, n_points=128)
    t = solve_newton(s.potential, s.mu, 1.0, s.R, s.grid, tol=1e-10, backend="spectral")
    assert t.iterations <= 2
    np.testing.assert_allclose(t.R, s.R, atol=1e-10)


def test_newton_flags_trivial_solution():
    g = Grid(32, 2 * math.pi)
    with pytest.warns(UserWarning, match="trivial"):
        s = solve_newton(Zero(), -1.0, 1.0, np.full(32, 0.1), g)
    assert s.trivial


def test_newton_nonconvergence_reports_residual():
    pot = CosineLattice(0.5, 1.0)
    g = Grid.for_potential(pot, 32)
    with pytest.raises(NonConvergenceError) as info:
        solve_newton(pot, 2.0, 1.0, np.full(32, 5.0), g, max_iter=1)
    assert info.value.last_residual > 0
    with pytest.raises(ValueError):
        solve_newton(pot, 2.0, 1.0, np.zeros(32), g)


def test_residual_detects_perturbation():
    s = exact_sn_state(-1.0, 0.5, 1.0, n_points=128)
    bumped = StationaryState(s.R + 0.1 * np.cos(s.grid.points), s.mu, 1.0, s.grid, s.potential, backend="spectral")
    assert residual(bumped) > 1e-2


# -- fixed atom number --------------------------------------------------------

def test_fixed_N_uniform_box():
    g = Grid(32, math.pi)
    s = solve_fixed_N(Zero(), 2 * math.pi, 2, 1.0, g)
    # N atoms spread over n cells of length pi: R^2 = N / (n pi) = 1
    assert s.mu == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(s.R, 1.0, atol=1e-8)


def test_fixed_N_hits_target_and_is_monotone():
    pot = EllipticSnSquared(-1.0, 0.5)
    g = Grid.for_potential(pot, 64)
    mus = []
    for N in (0.01, 0.3, 3.0, 30.0):
        s = solve_fixed_N(pot, N, 1, 1.0, g)
        assert s.atom_number(1) == pytest.approx(N, rel=1e-9)
        assert residual(s) < 1e-8
        mus.append(s.mu)
    assert np.all(np.diff(mus) > 0)


def test_fixed_N_linear_limit():
    pot = EllipticSnSquared(-1.0, 0.5)
    g = Grid.for_potential(pot, 64)
    E0, phi = linear_ground_state(pot, g)
    s = solve_fixed_N(pot, 1e-6, 1, 1.0, g)
    assert s.mu == pytest.approx(E0, abs=1e-5)
    overlap = abs(g.integrate(s.R * phi)) / (g.norm(s.R) * g.norm(phi))
    assert overlap > 1 - 1e-9


def test_fixed_N_rejects_attractive():
    with pytest.raises(DomainError):
        solve_fixed_N(Zero(), 1.0, 1, -1.0, Grid(32, 1.0))


def test_fixed_N_multi_period_counts_per_cell():
    pot = EllipticSnSquared(-1.0, 0.5)
    one = solve_fixed_N(pot, 3.0, 4, 1.0, Grid.for_potential(pot, 48))
    two = solve_fixed_N(pot, 3.0, 4, 1.0, Grid.for_potential(pot, 96, n_periods=2))
    assert one.mu == pytest.approx(two.mu, abs=1e-8)


# -- Thomas-Fermi -------------------------------------------------------------

def test_mean_sn_potential_against_quadrature():
    for V0, k in [(-1.0, 0.2), (-2.0, 0.7), (-0.5, 0.95)]:
        mpmath.mp.dps = 20
        K = complete_K(k)
        oracle = float(mpmath.quad(lambda x: -V0 * mpmath.ellipfun("sn", x, m=k * k) ** 2, [0, 2 * K])) / (2 * K)
        assert mean_sn_squared_potential(V0, k) == pytest.approx(oracle, rel=1e-12)
        assert mean_potential(EllipticSnSquared(V0, k)) == pytest.approx(oracle, rel=1e-12)


def test_mu_TF_formula():
    assert mu_TF(3.0, 2, 1.5, Zero(), period=math.pi) == pytest.approx(3.0 * 1.5 / (2 * math.pi))
    pot = CosineLattice(0.8, 2.0)
    # cosine averages to zero over its period
    assert mu_TF(4.0, 1, 1.0, pot) == pytest.approx(4.0 / math.pi, abs=1e-12)
    with pytest.raises(DomainError):
        mu_TF(1.0, 1, -1.0, pot)
    with pytest.raises(ConfigurationError):
        mu_TF(1.0, 1, 1.0, Zero())


@settings(max_examples=20, deadline=None)
@given(N=st.floats(0.1, 1e3), n=st.integers(1, 5))
def test_mu_TF_linear_in_N(N, n):
    pot = EllipticSnSquared(-1.0, 0.5)
    slope = 1.0 / (n * 2 * complete_K(0.5))
    assert mu_TF(2 * N, n, 1.0, pot) - mu_TF(N, n, 1.0, pot) == pytest.approx(N * slope, rel=1e-12)


def test_thomas_fermi_state_profile():
    pot = EllipticSnSquared(-1.0, 0.5)
    g = Grid.for_potential(pot, 64)
    V = sample_potential(pot, g)
    tf = thomas_fermi_state(pot, 0.5, 2.0, g)
    support = tf.R_tf > 0
    assert 0 < support.sum() < 64
    np.testing.assert_allclose((V + 2.0 * tf.R_tf ** 2)[support], 0.5, atol=1e-14)
    assert np.all(V[~support] >= 0.5)
    with pytest.warns(UserWarning, match="empty"):
        thomas_fermi_state(pot, -1.0, 1.0, g)


def test_state_roundtrip(tmp_path):
    s = exact_sn_state(-1.0, 0.2, 1.0, n_points=64)
    path = tmp_path / "s.json"
    save_state(s, path)
    t = load_state(path)
    np.testing.assert_array_equal(t.R, s.R)
    assert (t.mu, t.g1, t.grid, t.potential, t.backend) == (s.mu, s.g1, s.grid, s.potential, s.backend)
    assert residual(t) == residual(s)


def test_corrupt_state_rejected(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_state(bad)
    bad.write_text(json.dumps({"format": "something-else"}))
    with pytest.raises(ConfigurationError):
        load_state(bad)
    s = exact_sn_state(-1.0, 0.2, 1.0, n_points=64)
    save_state(s, bad)
    d = json.loads(bad.read_text())
    d["R"] = d["R"][:-3]
    bad.write_text(json.dumps(d))
    with pytest.raises(ConfigurationError):
        load_state(bad)
