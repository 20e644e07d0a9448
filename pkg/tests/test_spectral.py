import csv
import io
import json
import math

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from conftest import ATTRACTIVE_BOX, staggered_state, uniform_state
from gpestab.model import EllipticSnSquared, Grid, Zero
from gpestab.spectral import (
    VERDICT_FIELDS,
    Classification,
    ContractError,
    OperatorMatrix,
    build_Ln,
    classify,
    default_eps,
    ground_eigenvalue,
    mu_instability_band,
    mu_stability,
    product_modes,
    product_spectrum,
    verdict_to_json,
    verdicts_to_csv,
)
from gpestab.stationary import StationaryState, exact_sn_state, solve_newton, thomas_fermi_state


def bogoliubov_products(n, L, g1, R=1.0):
    """Product eigenvalues s (s + 2 g1 R^2), s = q^2 / 2, of a uniform state
    with the spectral Laplacian (Nyquist mode included once)."""
    q = 2 * math.pi * np.fft.fftfreq(n, d=L / n)
    q[n // 2] = math.pi * n / L
    s = 0.5 * q ** 2
    return np.sort(s * (s + 2 * g1 * R * R))


def multiset_gap(a, b):
    cost = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def test_L3_minus_L1_is_twice_the_density():
    s = exact_sn_state(-1.0, 0.5, 1.5, n_points=64)
    d = build_Ln(s, 3).entries - build_Ln(s, 1).entries
    np.testing.assert_allclose(d, np.diag(2 * 1.5 * s.R ** 2), atol=1e-12)


def test_uniform_ground_eigenvalues():
    rep = uniform_state(1.0, 32)
    assert ground_eigenvalue(build_Ln(rep, 1)) == pytest.approx(0.0, abs=1e-12)
    assert ground_eigenvalue(build_Ln(rep, 3)) == pytest.approx(2.0, abs=1e-12)
    att = uniform_state(-1.0, 32)
    assert ground_eigenvalue(build_Ln(att, 3)) == pytest.approx(-2.0, abs=1e-12)


@pytest.mark.parametrize("g1", [1.0, -1.0, 2.5])
def test_product_spectrum_matches_bogoliubov(g1):
    L = 2 * math.pi
    s = uniform_state(g1, 32, length=L, backend="spectral")
    nu = product_spectrum(build_Ln(s, 1), build_Ln(s, 3))
    assert np.max(np.abs(nu.imag)) < 1e-8
    np.testing.assert_allclose(np.sort(nu.real), bogoliubov_products(32, L, g1), atol=1e-8)


def test_growth_rate_formula_on_q_squared_two_box():
    # (q^2/2)(q^2/2 - 2) at q^2 = 2 equals -1, so the growth rate there is 1
    s = uniform_state(-1.0, 32, length=2 * math.pi / math.sqrt(2), backend="spectral")
    v = classify(s)
    assert v.classification is Classification.UNSTABLE
    assert v.lambda_growth == pytest.approx(1.0, abs=1e-9)


def test_attractive_box_has_single_unstable_pair():
    s = uniform_state(-1.0, 32, length=ATTRACTIVE_BOX, backend="spectral")
    nu = product_spectrum(build_Ln(s, 1), build_Ln(s, 3)).real
    assert np.count_nonzero(nu < -1e-9) == 2
    assert nu[0] == pytest.approx(-0.5, abs=1e-10)


def test_commuted_product_same_multiset(zoo):
    for s in zoo:
        L1, L3 = build_Ln(s, 1).entries, build_Ln(s, 3).entries
        assert multiset_gap(np.linalg.eigvals(L1 @ L3), np.linalg.eigvals(L3 @ L1)) < 1e-8


def test_route_a_repulsive_ground_states():
    for s in (uniform_state(1.0, 32), exact_sn_state(-1.0, 0.2, 1.0, n_points=64)):
        v = classify(s)
        assert v.classification is Classification.STABLE
        assert v.route.startswith("a:")
        assert v.lambda_growth == 0.0


def test_route_b_staggered_lattice_state():
    s = staggered_state(n_points=64)
    v = classify(s)
    assert v.route.startswith("b:")
    assert v.classification is Classification.UNSTABLE
    assert v.alpha_g < -v.eps and v.beta_g > v.eps
    # the product spectrum independently agrees
    assert v.min_product_eigenvalue_real_part < -v.eps
    assert v.lambda_growth > 0


def test_route_c_attractive():
    v = classify(uniform_state(-1.0, 32, length=ATTRACTIVE_BOX, backend="spectral"))
    assert v.route.startswith("c:")
    assert v.lambda_growth == pytest.approx(math.sqrt(0.5), abs=1e-9)


def test_route_d_nodal_state():
    # one-node state of the free repulsive gas: alpha_g and beta_g both
    # negative, so only the product spectrum can decide
    g = Grid(48, 2 * math.pi)
    s = solve_newton(Zero(), 1.0, 1.0, np.sin(g.points), g, backend="spectral")
    assert np.any(s.R > 0) and np.any(s.R < 0)
    v = classify(s)
    assert v.alpha_g < 0 and v.beta_g < 0
    assert v.route.startswith("d:")
    assert v.classification is Classification.STABLE


def test_undetermined_when_too_many_zero_modes():
    # empty state at mu = 1/2: L1 = L3 vanish on the q = +-1 pair, giving
    # two zero product eigenvalues and nothing negative
    g = Grid(16, 2 * math.pi)
    s = StationaryState(np.zeros(16), 0.5, 1.0, g, Zero(), backend="spectral")
    assert classify(s).classification is not Classification.UNSTABLE
    assert classify(s, max_goldstone=1).classification is Classification.UNDETERMINED


def test_invariants_on_zoo(zoo):
    for s in zoo:
        v = classify(s)
        assert v.alpha_g <= v.eps
        if s.g1 > 0:
            assert v.beta_g >= v.alpha_g
        else:
            assert v.beta_g <= v.alpha_g
        if v.classification is Classification.STABLE:
            assert v.lambda_growth == 0.0
        if v.classification is Classification.UNSTABLE:
            assert v.lambda_growth > 0 or v.route[0] in "bc"
        # the state itself spans the L1 null space
        w, vec = np.linalg.eigh(build_Ln(s, 1).entries)
        i = np.argmin(np.abs(w))
        assert abs(w[i]) <= 1e-6 * np.max(np.abs(w))
        assert abs(vec[:, i] @ s.R) / np.linalg.norm(s.R) > 0.999


def test_stability_locus_and_band():
    s = exact_sn_state(-1.0, 0.2, 1.0)
    assert mu_stability(s) == pytest.approx(24.0, abs=1e-9)
    lo, hi = mu_instability_band(s)
    assert lo == pytest.approx(24.0, abs=1e-9)
    assert hi > s.mu > lo
    rep = uniform_state(2.0, 32, amplitude=0.5)
    assert mu_instability_band(rep) == pytest.approx((0.5, 1.5))
    att = uniform_state(-1.0, 32)
    assert mu_instability_band(att) == (-1.0, -1.0)


def test_thomas_fermi_locus_equals_mu():
    pot = EllipticSnSquared(-2.0, 0.7)
    g = Grid.for_potential(pot, 64)
    tf = thomas_fermi_state(pot, 0.8, 1.0, g)
    s = StationaryState(tf.R_tf, tf.mu_tf, 1.0, g, pot)
    assert mu_stability(s) == pytest.approx(0.8, abs=1e-14)


def test_non_symmetric_operator_rejected():
    a = np.arange(16.0).reshape(4, 4)
    with pytest.raises(ContractError):
        ground_eigenvalue(OperatorMatrix(a, "L1"))


def test_eps_scales_with_radius():
    s = uniform_state(1.0, 32)
    eps = default_eps(build_Ln(s, 1), build_Ln(s, 3))
    rho = np.max(np.abs(np.linalg.eigvalsh(build_Ln(s, 3).entries)))
    assert eps == pytest.approx(1e-6 * rho)


def test_product_modes_reconstruct_eigenpairs(zoo):
    for s in zoo[:4]:
        L1, L3 = build_Ln(s, 1).entries, build_Ln(s, 3).entries
        for m in product_modes(s):
            if m is None:
                continue
            h = s.grid.spacing
            assert math.sqrt(h * m.phi1 @ m.phi1) == pytest.approx(1.0)
            np.testing.assert_allclose(L3 @ m.phi1, m.lambda2 * m.phi2, atol=1e-9)
            np.testing.assert_allclose(L1 @ m.phi2, m.lambda1 * m.phi1, atol=1e-7 * max(1, abs(m.nu)))


def test_csv_and_json_serialisation():
    v = classify(uniform_state(1.0, 32))
    text = verdicts_to_csv([v.as_record()])
    rows = list(csv.DictReader(io.StringIO(text)))
    assert tuple(rows[0]) == VERDICT_FIELDS
    assert rows[0]["classification"] == "Stable"
    assert rows[0]["has_complex_product_eigenvalue"] == "false"
    d = json.loads(verdict_to_json(v))
    assert d["route"] == v.route
    assert d["mu_minus_mu_s"] == pytest.approx(0.0)
