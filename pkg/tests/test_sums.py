import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from nonconv.exceptions import BadGrid, DegenerateVariance, InsufficientPath, TrajectoryTooShort
from nonconv.functional import decompose, dense_table, polynomial, product
from nonconv.models import PathKind
from nonconv.process import bernoulli, iid, sample_trajectory, trajectory_from_values
from nonconv.sums import (
    PathSample,
    interpolate_Qn,
    lil_path,
    lil_sequence,
    occupation_fraction,
    occupation_measure,
    occupation_sequence,
    psi_at,
    psi_paths,
    xi_path,
)


def make_xi(values):
    values = np.asarray(values, dtype=float)
    return PathSample(times=np.arange(values.size, dtype=float), values=values, kind=PathKind.XI)


def coin_product():
    model = bernoulli(0.5)
    return model, decompose(product(2), model.marginal)


# ----------------------------------------------------------------------
# Xi
# ----------------------------------------------------------------------

def test_xi_hand_example():
    model, D = coin_product()
    traj = trajectory_from_values(model, [1, 0, 1, 1, 0, 1])
    xi = xi_path(D, traj, 3, center=0.0)
    assert xi.values.tolist() == [0.0, 0.0, 0.0, 1.0]
    assert xi.kind is PathKind.XI


def test_xi_empty_sum():
    model, D = coin_product()
    traj = trajectory_from_values(model, [1, 0])
    xi = xi_path(D, traj, 0)
    assert xi.values.tolist() == [0.0]


def test_xi_of_constant_function_vanishes():
    model = bernoulli(1.0)
    traj = sample_trajectory(model, 200, seed=1)
    xi = xi_path(product(2), traj, 100, law=model.marginal)
    assert np.all(xi.values == 0.0)


def test_xi_needs_long_enough_trajectory():
    model, D = coin_product()
    traj = trajectory_from_values(model, [1, 0, 1, 1, 0])
    with pytest.raises(TrajectoryTooShort):
        xi_path(D, traj, 3)


def test_function_spec_needs_law():
    model, _ = coin_product()
    traj = trajectory_from_values(model, [1, 0, 1, 1])
    with pytest.raises(InsufficientPath):
        xi_path(product(2), traj, 2)


def test_path_grid_must_increase():
    with pytest.raises(BadGrid):
        PathSample(times=np.array([0.0, 1.0, 1.0]), values=np.zeros(3), kind=PathKind.XI)


# ----------------------------------------------------------------------
# Psi and the splitting identity
# ----------------------------------------------------------------------

@given(
    table=st.lists(st.integers(-4, 4), min_size=8, max_size=8),
    seed=st.integers(0, 10_000),
)
@hsettings(max_examples=30, deadline=None)
def test_xi_splits_into_psi(table, seed):
    model = iid([0.25, 0.75], [0.0, 1.0])
    D = decompose(dense_table(3, [0.0, 1.0], table), model.marginal)
    N = 300
    traj = sample_trajectory(model, 3 * N, seed=seed)
    xi = xi_path(D, traj, N)
    psi = psi_paths(D, traj, 3 * N)
    t = np.arange(N + 1)
    total = sum(path.values[i * t] for i, path in enumerate(psi, start=1))
    assert np.max(np.abs(xi.values - total)) <= 1e-10


def test_psi_vanishes_when_only_first_argument_matters():
    model = iid([0.2, 0.3, 0.5], [0.0, 1.0, 2.0])
    D = decompose(polynomial(3, [(1.0, [[1], [0], [0]])]), model.marginal)
    traj = sample_trajectory(model, 600, seed=4)
    psi = psi_paths(D, traj, 600)
    assert psi[0].component == 1
    assert np.max(np.abs(psi[1].values)) < 1e-12
    assert np.max(np.abs(psi[2].values)) < 1e-12


def test_psi_at_matches_paths():
    model, D = coin_product()
    traj = sample_trajectory(model, 1000, seed=8)
    psi = psi_paths(D, traj, 1000)
    at = psi_at(D, traj, 777)
    assert np.allclose(at, [psi[0].values[777], psi[1].values[777]], atol=1e-12)


def test_psi_one_variance_bernoulli():
    model, D = coin_product()
    t, replicas = 10_000, 400
    scaled = np.empty(replicas)
    for r in range(replicas):
        traj = sample_trajectory(model, t, seed=21, replica=r)
        scaled[r] = psi_at(D, traj, t)[0] ** 2 / t
    se = scaled.std(ddof=1) / math.sqrt(replicas)
    assert abs(scaled.mean() - 1 / 16) <= 3 * se


# ----------------------------------------------------------------------
# Q_n
# ----------------------------------------------------------------------

def test_qn_hand_example():
    Q = interpolate_Qn(make_xi([0, 1, -1, 2]), 2)
    assert Q(0.75) == pytest.approx(0.0, abs=1e-15)


def test_qn_matches_knots():
    rng = np.random.default_rng(2)
    xi = make_xi(np.concatenate(([0.0], np.cumsum(rng.normal(size=50)))))
    Q = interpolate_Qn(xi, 50)
    k = np.arange(51)
    assert np.max(np.abs(Q(k / 50) - xi.values[:51] / math.sqrt(50))) == 0.0


def test_qn_of_zero_path():
    Q = interpolate_Qn(make_xi(np.zeros(11)), 10)
    assert np.all(Q(np.linspace(0.0, 1.0, 37)) == 0.0)


def test_qn_domain_and_coverage():
    Q = interpolate_Qn(make_xi([0, 1, 2]), 2)
    with pytest.raises(BadGrid):
        Q(1.5)
    with pytest.raises(InsufficientPath):
        interpolate_Qn(make_xi([0, 1, 2]), 3)


def test_occupation_measure_interpolates_crossings():
    # Q_2 goes 0 -> 1/sqrt2 -> -1/sqrt2: positive on (0, 0.75)
    Q = interpolate_Qn(make_xi([0, 1, -1]), 2)
    assert occupation_measure(Q) == pytest.approx(0.75)


# ----------------------------------------------------------------------
# LIL normalisation
# ----------------------------------------------------------------------

def test_lil_hand_example():
    expected = 1.0 / math.sqrt(6.0 * math.log(math.log(3.0)))
    assert lil_path(make_xi([0, 0, 0, 1]), 1.0, 3) == pytest.approx(expected, rel=1e-12)


def test_lil_of_zero_path():
    assert lil_path(make_xi(np.zeros(10)), 0.25, 9) == 0.0


def test_lil_rejects_degenerate_variance():
    with pytest.raises(DegenerateVariance):
        lil_path(make_xi([0, 0, 0, 1]), 0.0, 3)
    with pytest.raises(InsufficientPath):
        lil_path(make_xi([0, 1, 2]), 1.0, 2)


def test_lil_sequence_agrees_with_pointwise():
    rng = np.random.default_rng(3)
    xi = make_xi(np.concatenate(([0.0], np.cumsum(rng.normal(size=100)))))
    seq = lil_sequence(xi, 0.5)
    assert seq.times[0] == 3.0
    assert seq.values[40] == pytest.approx(lil_path(xi, 0.5, 43), rel=1e-14)


# ----------------------------------------------------------------------
# occupation fraction
# ----------------------------------------------------------------------

def test_occupation_fraction_examples():
    assert occupation_fraction(make_xi([0, 1, -1, 0, 2]), 4) == 0.5
    assert occupation_fraction(make_xi(np.arange(6)), 5) == 1.0
    assert occupation_fraction(make_xi(np.zeros(6)), 5) == 0.0


def test_occupation_sequence_matches_fraction():
    rng = np.random.default_rng(5)
    xi = make_xi(np.concatenate(([0.0], np.cumsum(rng.choice([-1.0, 0.0, 1.0], size=200)))))
    seq = occupation_sequence(xi)
    for n in (1, 17, 100, 200):
        assert seq[n - 1] == pytest.approx(occupation_fraction(xi, n), abs=1e-15)
