import itertools
import math

import numpy as np
import pytest

from nonconv.exceptions import StateSpaceTooLarge, UnsupportedModel, ZeroMassState
from nonconv.mixing import (
    alpha_bounds,
    alpha_coeff,
    beta_coeff,
    check_assumption,
    decay_rate,
    mixing_profile,
    moments,
    phi_coeff,
    psi_coeff,
    rho_coeff,
    search_assumption,
)
from nonconv.models import ClauseStatus
from nonconv.process import bernoulli, dyadic_map, finite_markov, second_eigenvalue
from nonconv.schemas.experiment import AssumptionParameters

TWO_STATE = np.array([[0.7, 0.3], [0.3, 0.7]])
HALF = np.array([0.5, 0.5])
THREE_STATE = np.array([[0.1, 0.6, 0.3], [0.4, 0.4, 0.2], [0.5, 0.25, 0.25]])


def clause(report, name):
    return next(c for c in report.clauses if c.name == name)


# ----------------------------------------------------------------------
# coefficients
# ----------------------------------------------------------------------

@pytest.mark.parametrize("n", range(1, 31))
def test_two_state_closed_forms(n):
    assert psi_coeff(TWO_STATE, HALF, n) == pytest.approx(0.4**n, abs=1e-12)
    assert rho_coeff(TWO_STATE, HALF, n) == pytest.approx(0.4**n, abs=1e-12)
    assert phi_coeff(TWO_STATE, HALF, n) == pytest.approx(0.5 * 0.4**n, abs=1e-12)
    assert alpha_coeff(TWO_STATE, HALF, n) == pytest.approx(0.25 * 0.4**n, abs=1e-12)


def test_lag_zero_psi_is_one():
    assert psi_coeff(TWO_STATE, HALF, 0) == pytest.approx(1.0, abs=1e-15)


def test_iid_chain_has_zero_coefficients():
    w = np.array([0.2, 0.5, 0.3])
    P = np.tile(w, (3, 1))
    for n in range(1, 6):
        assert psi_coeff(P, w, n) == 0.0
        assert phi_coeff(P, w, n) == 0.0
        assert rho_coeff(P, w, n) == 0.0
        assert alpha_coeff(P, w, n) == 0.0


def test_alpha_matches_brute_force_over_pairs_of_sets():
    model = finite_markov(THREE_STATE)
    pi = model.stationary
    for n in (1, 2, 3):
        delta = np.linalg.matrix_power(THREE_STATE, n) - pi[None, :]
        weighted = pi[:, None] * delta
        best = 0.0
        subsets = [s for r in range(4) for s in itertools.combinations(range(3), r)]
        for A in subsets:
            for B in subsets:
                best = max(best, abs(weighted[np.ix_(list(A), list(B))].sum()) if A and B else 0.0)
        assert alpha_coeff(THREE_STATE, pi, n) == pytest.approx(best, abs=1e-14)


def test_coefficient_ordering():
    model = finite_markov(THREE_STATE)
    profile = mixing_profile(model, depth=30)
    tol = 1e-14
    assert np.all(profile.rho <= profile.psi + tol)
    assert np.all(4.0 * profile.alpha <= profile.psi + tol)
    assert np.all(profile.phi <= profile.psi / 2.0 + tol)
    assert np.all(profile.alpha <= 0.25 + tol)


def test_geometric_decay_follows_second_eigenvalue():
    model = finite_markov(THREE_STATE)
    lam = second_eigenvalue(model)
    profile = mixing_profile(model, depth=40)
    ratios = profile.psi[1:] / lam ** np.arange(1, 41)
    assert ratios.max() <= 10.0 * ratios[-1]


def test_zero_mass_state_is_rejected():
    with pytest.raises(ZeroMassState):
        psi_coeff(TWO_STATE, [1.0, 0.0], 1)


def test_alpha_enumeration_limit():
    s = 21
    P = np.full((s, s), 1.0 / s)
    with pytest.raises(StateSpaceTooLarge):
        alpha_coeff(P, np.full(s, 1.0 / s), 1)


def test_alpha_bounds_bracket_exact_value():
    model = finite_markov(THREE_STATE)
    for n in (1, 2, 5):
        low, high = alpha_bounds(THREE_STATE, model.stationary, n)
        exact = alpha_coeff(THREE_STATE, model.stationary, n)
        assert low - 1e-14 <= exact <= high + 1e-14


def test_large_chain_profile_uses_bounds():
    s = 22
    rng = np.random.default_rng(0)
    P = rng.random((s, s)) + 0.1
    P /= P.sum(axis=1, keepdims=True)
    profile = mixing_profile(finite_markov(P), depth=5)
    assert not profile.alpha_exact
    assert np.all(profile.alpha <= profile.alpha_upper + 1e-15)


def test_beta_is_identically_zero():
    assert beta_coeff(bernoulli(0.5), 2.0, 7) == 0.0


def test_moments_of_bounded_observable():
    model = finite_markov(TWO_STATE, [-2.0, 1.0])
    values = moments(model, (2.0, math.inf))
    assert values["2.0"] == pytest.approx(math.sqrt(2.5))
    assert values["inf"] == 2.0


def test_decay_rate_of_geometric_sequence():
    assert decay_rate(np.array([1.0, 0.5, 0.25, 0.125])) == pytest.approx(0.5)
    assert decay_rate(np.array([1.0, 0.0, 0.0])) == 0.0


def test_profile_needs_transition_matrix():
    with pytest.raises(UnsupportedModel):
        mixing_profile(dyadic_map())


def test_profile_csv_columns(tmp_path):
    profile = mixing_profile(finite_markov(TWO_STATE), depth=3)
    path = profile.to_csv(str(tmp_path / "mixing.csv"))
    lines = open(path, encoding="utf-8").read().splitlines()
    assert lines[0] == "n,psi,phi,rho,alpha"
    assert len(lines) == 5


# ----------------------------------------------------------------------
# summability assumption
# ----------------------------------------------------------------------

def test_two_state_satisfies_assumption():
    profile = mixing_profile(finite_markov(TWO_STATE), depth=50)
    report = check_assumption(profile, AssumptionParameters(), iota=0.0, kappa=1.0, d=1)
    assert report.status is ClauseStatus.PASS
    assert clause(report, "varpi_series").status is ClauseStatus.PASS


def test_delta_bound_violation_fails():
    profile = mixing_profile(finite_markov(TWO_STATE), depth=50)
    params = AssumptionParameters(p=2.0, q=math.inf, delta=0.5, m=math.inf)
    report = check_assumption(profile, params, iota=0.0, kappa=1.0, d=1)
    assert clause(report, "delta_bound").status is ClauseStatus.FAIL
    assert report.status is ClauseStatus.FAIL


def test_exponent_violation_fails():
    profile = mixing_profile(finite_markov(TWO_STATE), depth=50)
    params = AssumptionParameters(p=2.0, q=2.0, delta=0.1, m=2.0)
    report = check_assumption(profile, params, iota=0.0, kappa=1.0, d=0)
    assert clause(report, "exponent").status is ClauseStatus.FAIL


def test_slow_chain_is_inconclusive():
    a = 0.0005
    profile = mixing_profile(finite_markov([[1 - a, a], [a, 1 - a]]), depth=50)
    report = check_assumption(profile, AssumptionParameters(), iota=0.0, kappa=1.0, d=1)
    assert clause(report, "varpi_series").status is ClauseStatus.INCONCLUSIVE
    assert report.status is ClauseStatus.INCONCLUSIVE


def test_shallow_profile_is_inconclusive():
    profile = mixing_profile(finite_markov(TWO_STATE), depth=10)
    report = check_assumption(profile, AssumptionParameters(), iota=0.0, kappa=1.0, d=1)
    assert clause(report, "varpi_series").status is ClauseStatus.INCONCLUSIVE


def test_iid_series_vanishes():
    profile = mixing_profile(bernoulli(0.3), depth=50)
    report = check_assumption(profile, AssumptionParameters(), iota=0.0, kappa=1.0, d=1)
    assert report.status is ClauseStatus.PASS


def test_search_finds_first_passing_tuple():
    profile = mixing_profile(finite_markov(TWO_STATE), depth=50)
    report = search_assumption(profile, iota=0.0, kappa=1.0, d=1)
    assert report is not None
    assert report.parameters["p"] == math.inf
    assert report.parameters["delta"] == 0.5


def test_alpha_corner_cannot_meet_delta_bound():
    profile = mixing_profile(finite_markov(TWO_STATE), depth=50)
    params = AssumptionParameters(p=1.0, q=math.inf, delta=0.05, m=math.inf)
    report = check_assumption(profile, params, iota=0.0, kappa=1.0, d=1)
    assert clause(report, "delta_bound").status is ClauseStatus.FAIL
    assert clause(report, "varpi_series").status is ClauseStatus.PASS
