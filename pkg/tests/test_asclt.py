import dataclasses
import math

import numpy as np
import pytest
from scipy import stats

from nonconv.asclt import (
    accumulate,
    accumulate_log_time,
    asclt_arcsine_suite,
    asclt_functional_suite,
    asclt_scalar_suite,
    calibrate,
    evaluation_grid,
    gaussian_path,
    ks_distance,
    lil_band,
    lil_suite,
    pool,
    raw_weight_ratio,
    scalar_values,
)
from nonconv.covariance import CovarianceModel, limiting_D
from nonconv.exceptions import TooFewSamples
from nonconv.functional import decompose, product
from nonconv.gaussian import ReferenceCDF, empirical_reference, q1_reference_cdf
from nonconv.models import NormalizationMode, Provenance, Verdict
from nonconv.process import bernoulli, sample_trajectory
from nonconv.sums import occupation_sequence, xi_path

STANDARD_NORMAL = ReferenceCDF(cdf=stats.norm.cdf)


def coin_setup():
    model = bernoulli(0.5)
    D = decompose(product(2), model.marginal)
    return model, D, limiting_D(D, model, U=20)


# ----------------------------------------------------------------------
# accumulator
# ----------------------------------------------------------------------

def test_constant_values_give_unit_step():
    E = accumulate(np.full(50, 2.0))
    assert E.cdf(1.999).item() == 0.0
    assert E.cdf(2.0).item() == pytest.approx(1.0, abs=1e-12)


def test_raw_total_weight_ratio():
    E = accumulate(np.zeros(1000), mode=NormalizationMode.RAW)
    assert E.total / E.raw_normalizer == pytest.approx(1.0836, abs=1e-4)


def test_self_normalised_weights_sum_to_one():
    E = accumulate(np.random.default_rng(0).normal(size=5000))
    assert E.cdf(np.inf).item() == pytest.approx(1.0, abs=1e-12)
    H = math.fsum(1.0 / k for k in range(1, 5001))
    assert E.total == pytest.approx(H, rel=1e-14)


def test_alternating_signs_split_evenly():
    n = 10**5
    E = accumulate(np.where(np.arange(1, n + 1) % 2 == 0, 1.0, -1.0))
    assert abs(E.mass(lambda v: v > 0) - 0.5) < 1.0 / math.log(n)


def test_accumulate_needs_three_terms():
    with pytest.raises(TooFewSamples):
        accumulate([1.0, 2.0])


def test_merge_of_disjoint_ranges():
    values = np.random.default_rng(4).normal(size=200)
    whole = accumulate(values)
    merged = accumulate(values[:80]).merge(accumulate(values[80:], start=81))
    x = np.linspace(-2, 2, 9)
    assert np.allclose(merged.cdf(x), whole.cdf(x), atol=1e-12)


def test_log_time_accumulator_weights():
    E = accumulate_log_time([1.0, math.e, math.e**3], [0.0, 1.0], mode=NormalizationMode.RAW)
    assert E.raw_normalizer == pytest.approx(3.0)
    assert E.cdf(0.0).item() == pytest.approx(1.0 / 3.0)


# ----------------------------------------------------------------------
# KS distance
# ----------------------------------------------------------------------

def test_step_at_median_is_half_away():
    assert ks_distance(accumulate(np.zeros(100)), STANDARD_NORMAL) == pytest.approx(0.5, abs=1e-12)


def test_distance_to_own_cdf_is_zero():
    values = np.array([0.3, -1.0, 2.0, 0.3, 5.0])
    E = accumulate(values)
    ref = ReferenceCDF(cdf=E.cdf, atoms=np.unique(values), left=E.left_limit)
    assert ks_distance(E, ref) == 0.0


def test_prefix_changes_are_bounded():
    n, K = 10**6, 100
    values = np.random.default_rng(6).normal(size=n)
    altered = values.copy()
    altered[:K] = 10.0
    change = abs(ks_distance(accumulate(values), STANDARD_NORMAL) - ks_distance(accumulate(altered), STANDARD_NORMAL))
    H = lambda m: math.fsum(1.0 / k for k in range(1, m + 1))
    assert change <= 2.0 * H(K) / H(n)


def test_discrete_reference_uses_atoms():
    E = accumulate([0.0, 0.0, 1.0, 1.0])
    ref = empirical_reference([0.0, 1.0])
    # E puts weight (1 + 1/2)/H_4 on 0, the reference 1/2
    assert ks_distance(E, ref) == pytest.approx(1.5 / (25 / 12) - 0.5, abs=1e-12)


# ----------------------------------------------------------------------
# pooling
# ----------------------------------------------------------------------

def test_pool_of_one_path_is_its_own_measure():
    values = np.random.default_rng(8).normal(size=3000)
    grid = np.linspace(-3.0, 3.0, 61)
    pooled = pool(lambda r: values, 1, grid, [1000, 3000])
    assert np.array_equal(pooled.right[1], accumulate(values).cdf(grid))
    assert np.array_equal(pooled.left[0], accumulate(values[:1000]).left_limit(grid))


def test_pool_is_thread_independent():
    grid = np.linspace(-3.0, 3.0, 101)
    values_of = lambda r: np.random.default_rng(r).normal(size=2000)
    one = pool(values_of, 6, grid, [1000, 2000], start=10, threads=1)
    three = pool(values_of, 6, grid, [1000, 2000], start=10, threads=3)
    assert np.array_equal(one.right, three.right)
    assert one.ks(STANDARD_NORMAL) == three.ks(STANDARD_NORMAL)


def test_evaluation_grid_keeps_reference_atoms():
    ref = empirical_reference([0.123, 0.5])
    grid = evaluation_grid(ref, 0.0, 1.0, points=11)
    assert 0.123 in grid
    assert np.all(np.diff(grid) > 0.0)


def test_occupation_transform_reads_the_path():
    model, D, _ = coin_setup()
    xi = xi_path(D, sample_trajectory(model, 2000, seed=1), 1000)
    values = occupation_sequence(xi)
    assert values.size == 1000
    assert values[-1] == np.count_nonzero(xi.values[1:] > 0.0) / 1000
    q = gaussian_path(np.array([1.0, -2.0, 4.0]))
    assert scalar_values(q).tolist() == pytest.approx([1.0, -2.0 / math.sqrt(2.0), 4.0 / math.sqrt(3.0)])


def test_raw_weight_ratio():
    assert raw_weight_ratio(1000) == pytest.approx(math.fsum(1.0 / k for k in range(1, 1001)) / math.log(1000))


# ----------------------------------------------------------------------
# calibration and suites
# ----------------------------------------------------------------------

def test_calibration_reports_pooled_lanes():
    _, _, C = coin_setup()
    ref = q1_reference_cdf(C)
    grid = evaluation_grid(ref, -4.0, 4.0)
    cal = calibrate(C, scalar_values, ref, grid, 2000, seed=5, limit=0.1, sanity_limit=0.08, lanes=8)
    assert cal.checkpoints == [1000, 2000]
    assert cal.thresholds == [0.1, 0.1]
    assert cal.lanes == 8
    assert all(0.0 <= k <= 1.0 for k in cal.sanity_ks)


def test_short_run_is_inconclusive():
    model, D, C = coin_setup()
    result = asclt_scalar_suite(model, D, C, n_max=1000, seed=3, lanes=5, paths=5)
    assert result.verdict is Verdict.INCONCLUSIVE
    assert result.warning
    assert result.extra["R11"] == pytest.approx(0.25)
    assert result.extra["paths"] == 5
    assert [p.n for p in result.points] == [1000]


def test_degenerate_variance_fails():
    model = bernoulli(1.0)
    D = decompose(product(2), model.marginal)
    C = CovarianceModel(matrix=np.zeros((2, 2)), provenance=Provenance.EXACT_SERIES)
    assert asclt_scalar_suite(model, D, C, n_max=1000, seed=1).verdict is Verdict.FAIL
    assert asclt_arcsine_suite(model, D, C, n_max=1000, seed=1).verdict is Verdict.FAIL


def test_wrong_limit_variance_is_rejected():
    model, D, C = coin_setup()
    inflated = CovarianceModel(matrix=100.0 * C.matrix, provenance=Provenance.EXACT_SERIES)
    result = asclt_scalar_suite(model, D, inflated, n_max=10**5, seed=1, lanes=40, paths=40)
    assert result.verdict is Verdict.FAIL
    assert result.points[-1].ks > 0.25


def test_uncentred_sums_are_rejected():
    model, D, C = coin_setup()
    shifted = dataclasses.replace(D, f_bar=D.f_bar - 0.25)
    scalar = asclt_scalar_suite(model, shifted, C, n_max=10**5, seed=2, lanes=40, paths=40)
    arcsine = asclt_arcsine_suite(model, shifted, C, n_max=10**5, seed=2, lanes=40, paths=40)
    assert scalar.verdict is Verdict.FAIL
    assert arcsine.verdict is Verdict.FAIL
    assert arcsine.points[-1].ks > 0.3


def test_functional_suite_reproduces_scalar_suite():
    model, D, C = coin_setup()
    general = asclt_functional_suite(model, D, C, scalar_values, q1_reference_cdf(C), (-4.0, 4.0),
                                     n_max=2000, seed=3, lanes=5, paths=5)
    scalar = asclt_scalar_suite(model, D, C, n_max=2000, seed=3, lanes=5, paths=5)
    assert [p.n for p in general.points] == [p.n for p in scalar.points]
    assert general.extra["sanity_ks"] == pytest.approx(scalar.extra["sanity_ks"], abs=1e-12)
    assert general.extra["single_path_ks"] == pytest.approx(scalar.extra["single_path_ks"], abs=1e-12)


def test_functional_suite_rejects_drifting_sums():
    model, D, C = coin_setup()
    shifted = dataclasses.replace(D, f_bar=D.f_bar - 0.25)
    # phi(x) = |x(1)| has the half-normal law under Q
    half_normal = ReferenceCDF(cdf=stats.halfnorm(scale=math.sqrt(0.25)).cdf)
    result = asclt_functional_suite(model, shifted, C, lambda path: np.abs(scalar_values(path)), half_normal,
                                    (0.0, 4.0), n_max=10**5, seed=5, lanes=40, paths=40, label="abs")
    assert result.verdict is Verdict.FAIL
    assert result.points[-1].ks > 0.5


def test_lil_band_is_ordered():
    _, _, C = coin_setup()
    low, high = lil_band(C, 2000, seed=2, lanes=10)
    assert 0.0 <= low < high


def test_lil_suite_counts_maxima():
    model, D, C = coin_setup()
    result = lil_suite(model, D, C, n_max=2000, seeds=10, seed=4, band=[0.0, 100.0])
    assert result.verdict is Verdict.PASS
    assert result.extra["inside"] == 10
    assert len(result.extra["maxima"]) == 10


@pytest.mark.slow
def test_bernoulli_asclt_at_scale():
    model, D, C = coin_setup()
    result = asclt_scalar_suite(model, D, C, n_max=10**6, seed=1)
    assert result.extra["sanity_ks"][-1] < 0.08
    assert result.points[-1].ks < 0.1
    assert result.verdict is Verdict.PASS


@pytest.mark.slow
def test_classical_arcsine_at_scale():
    model = bernoulli(0.5)
    D = decompose(product(1), model.marginal)
    C = limiting_D(D, model, U=5)
    result = asclt_arcsine_suite(model, D, C, n_max=10**6, seed=2)
    assert result.extra["reference"] == "closed-form arcsine"
    assert result.points[-1].ks < 0.15


@pytest.mark.slow
def test_lil_maxima_stay_bounded_at_scale():
    model, D, C = coin_setup()
    result = lil_suite(model, D, C, n_max=10**6, seeds=20, seed=6, start=100)
    assert result.verdict is Verdict.PASS
    assert result.extra["inside"] >= 18
    assert max(result.extra["maxima"]) < 5.0
