"""
Logarithmically averaged empirical measures and the almost sure suites.

A trajectory is followed along k = 1..n; the value v_k enters with weight
1/k.  Comparisons are made with the self-normalised measure (weights divided
by H_n); the raw 1/ln n total is kept for reporting.

The suites pool the measures of many independent paths and compare the
pooled CDF with the limit law at fixed KS thresholds.  Gaussian lanes, paths
of the limit process Q fed through the same transform and pooled the same
way, show whether the horizon is long enough for that comparison to mean
anything.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from nonconv.config import settings
from nonconv.covariance import CovarianceModel, kernel_R
from nonconv.exceptions import DegenerateVariance, TooFewSamples
from nonconv.functional import DecomposedFunction
from nonconv.gaussian import (
    ReferenceCDF,
    arcsine_cdf,
    arcsine_reference,
    empirical_reference,
    factor,
    q1_reference_cdf,
    sample_Q_integer_times,
)
from nonconv.models import NormalizationMode, PathKind, Verdict
from nonconv.process import ProcessModel, sample_trajectory
from nonconv.schemas.reports import KSPoint
from nonconv.sums import PathSample, lil_sequence, occupation_sequence, xi_path
from nonconv.utils.logger import setup_logger
from nonconv.utils.parallel import map_replicas
from nonconv.utils.rng import derive_seed

logger = setup_logger("nonconv.asclt")

CHECKPOINTS = (10**3, 10**4, 10**5, 10**6)


# ============================================================
# ACCUMULATOR
# ============================================================

@dataclass(frozen=True, eq=False)
class LogAveragedEmpirical:
    """
    Weighted sample (v, w) sorted by value.

    ``raw_normalizer`` is ln n for the discrete measure (ln(T/t_0) for the
    continuous-time one); ``total`` is the plain sum of weights.
    """
    values: np.ndarray
    weights: np.ndarray
    raw_normalizer: float
    mode: NormalizationMode = NormalizationMode.SELF
    indices: Optional[np.ndarray] = None
    _cumulative: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        order = np.argsort(self.values, kind="stable")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float)[order])
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float)[order])
        if self.indices is not None:
            object.__setattr__(self, "indices", np.asarray(self.indices)[order])
        object.__setattr__(self, "_cumulative", np.concatenate(([0.0], np.cumsum(self.weights))))

    @property
    def total(self) -> float:
        return math.fsum(self.weights)

    @property
    def normalizer(self) -> float:
        return self.total if self.mode is NormalizationMode.SELF else self.raw_normalizer

    def normalized(self, mode: NormalizationMode) -> "LogAveragedEmpirical":
        return LogAveragedEmpirical(self.values, self.weights, self.raw_normalizer, mode, self.indices)

    def cdf(self, x) -> np.ndarray:
        """Right-continuous CDF of the normalised measure."""
        pos = np.searchsorted(self.values, x, side="right")
        return self._cumulative[pos] / self.normalizer

    def left_limit(self, x) -> np.ndarray:
        pos = np.searchsorted(self.values, x, side="left")
        return self._cumulative[pos] / self.normalizer

    def mass(self, predicate: Callable[[np.ndarray], np.ndarray]) -> float:
        return math.fsum(self.weights[predicate(self.values)]) / self.normalizer

    def merge(self, other: "LogAveragedEmpirical") -> "LogAveragedEmpirical":
        """Union of two accumulators over disjoint index ranges."""
        if self.indices is None or other.indices is None:
            raise TooFewSamples("only index-tagged accumulators can be merged")
        indices = np.concatenate([self.indices, other.indices])
        n = int(indices.max())
        return LogAveragedEmpirical(
            values=np.concatenate([self.values, other.values]),
            weights=np.concatenate([self.weights, other.weights]),
            raw_normalizer=math.log(n), mode=self.mode, indices=indices,
        )


def accumulate(values: Sequence[float], start: int = 1,
               mode: NormalizationMode = NormalizationMode.SELF) -> LogAveragedEmpirical:
    """v_k for k = start..n with weights 1/k."""
    values = np.asarray(values, dtype=float)
    n = start + values.size - 1
    if n < 3 or values.size == 0:
        raise TooFewSamples(f"log averaging needs n >= 3, got n = {n}")
    k = np.arange(start, n + 1)
    return LogAveragedEmpirical(values=values, weights=1.0 / k, raw_normalizer=math.log(n), mode=mode, indices=k)


def accumulate_log_time(times: Sequence[float], values: Sequence[float],
                        mode: NormalizationMode = NormalizationMode.SELF) -> LogAveragedEmpirical:
    """
    Continuous-time average (1/ln(T/t_0)) int s^-1 delta_{v(s)} ds with v
    constant on each grid cell [s_k, s_{k+1}).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 2 or times[0] <= 0.0 or np.any(np.diff(times) <= 0.0):
        raise TooFewSamples("log-time grid must be positive and strictly increasing")
    if values.size != times.size - 1:
        raise TooFewSamples("one value per grid cell is required")
    weights = np.log(times[1:] / times[:-1])
    return LogAveragedEmpirical(values=values, weights=weights, raw_normalizer=math.log(times[-1] / times[0]),
                                mode=mode)


def ks_distance(E: LogAveragedEmpirical, ref: ReferenceCDF) -> float:
    """
    Sup distance between the self-normalised CDF of E and ``ref``, checked
    on both one-sided limits at every atom of either distribution.
    """
    if E.mode is not NormalizationMode.SELF:
        E = E.normalized(NormalizationMode.SELF)
    points = E.values if ref.atoms is None else np.concatenate([E.values, ref.atoms])
    points = np.unique(points)
    right = np.abs(E.cdf(points) - ref(points))
    left = np.abs(E.left_limit(points) - ref.left_limit(points))
    return float(max(right.max(), left.max()))



# ============================================================
# POOLED MEASURES
# ============================================================

def _checkpoints(n_max: int) -> List[int]:
    points = [n for n in CHECKPOINTS if n <= n_max]
    if not points or points[-1] != n_max:
        points.append(n_max)
    return points


def first_index(n_max: int) -> int:
    """First k entering the suites' log averages; skipped only when n_max leaves room for it."""
    return settings.ASCLT_START if n_max > 10 * settings.ASCLT_START else 1


def scalar_values(path: PathSample) -> np.ndarray:
    """v_k = x(k) / sqrt(k) for k = 1..n of a path given from time 0."""
    return path.values[1:] / np.sqrt(np.arange(1, len(path)))


def gaussian_path(q: np.ndarray) -> PathSample:
    """Q(1..n) with the origin prepended, in the same layout as Xi."""
    return PathSample(times=np.arange(q.size + 1, dtype=float), values=np.concatenate(([0.0], q)), kind=PathKind.Q)


def evaluation_grid(ref: ReferenceCDF, low: float, high: float, points: Optional[int] = None) -> np.ndarray:
    grid = np.linspace(low, high, points or settings.ASCLT_GRID_POINTS)
    return grid if ref.atoms is None else np.union1d(grid, ref.atoms)


@dataclass(frozen=True, eq=False)
class PooledCDF:
    """
    Mean of the self-normalised log-averaged CDFs of independent paths, both
    one-sided limits, on a fixed grid and at every checkpoint.
    """
    grid: np.ndarray
    checkpoints: List[int]
    right: np.ndarray          # (checkpoints, grid)
    left: np.ndarray
    paths: int

    def ks(self, ref: ReferenceCDF) -> List[float]:
        right = np.abs(self.right - ref(self.grid)[None, :]).max(axis=1)
        left = np.abs(self.left - ref.left_limit(self.grid)[None, :]).max(axis=1)
        return np.maximum(right, left).tolist()


def _cdf_trajectory(values: np.ndarray, grid: np.ndarray, checkpoints: Sequence[int], start: int):
    right, left = [], []
    for n in checkpoints:
        E = accumulate(values[start - 1:n], start=start)
        right.append(E.cdf(grid))
        left.append(E.left_limit(grid))
    return np.stack(right), np.stack(left)


def pool(values_of: Callable[[int], np.ndarray], count: int, grid: np.ndarray, checkpoints: Sequence[int],
         start: int = 1, threads: int = 1) -> PooledCDF:
    """Pools ``values_of(r)`` for r = 0..count-1; the result does not depend on ``threads``."""
    if count < 1:
        raise TooFewSamples("pooling needs at least one path")
    parts = map_replicas(lambda r: _cdf_trajectory(values_of(r), grid, checkpoints, start), count, threads)
    right = np.mean(np.stack([p[0] for p in parts]), axis=0)
    left = np.mean(np.stack([p[1] for p in parts]), axis=0)
    return PooledCDF(grid=grid, checkpoints=list(checkpoints), right=right, left=left, paths=count)


# ============================================================
# CALIBRATION
# ============================================================

@dataclass(frozen=True)
class Calibration:
    """
    Pooled KS of Gaussian lanes (paths of Q itself fed through the same
    transform) per checkpoint, next to the pass threshold and the level the
    lanes must reach for the horizon to count as resolved.
    """
    checkpoints: List[int]
    sanity_ks: List[float]
    thresholds: List[float]
    sanity_limit: float
    lanes: int

    @property
    def resolved(self) -> bool:
        return self.sanity_ks[-1] <= self.sanity_limit


def calibrate(C: CovarianceModel, transform: Callable[[PathSample], np.ndarray], ref: ReferenceCDF,
              grid: np.ndarray, n_max: int, seed: int, limit: float, sanity_limit: float,
              lanes: Optional[int] = None, start: int = 1, threads: int = 1) -> Calibration:
    lanes = lanes or settings.CALIBRATION_LANES
    root = factor(C)
    points = _checkpoints(n_max)
    lane_seed = derive_seed(seed, "gaussian-lanes")

    def lane(r: int) -> np.ndarray:
        return transform(gaussian_path(sample_Q_integer_times(root, n_max, lane_seed, replica=r)))

    sanity = pool(lane, lanes, grid, points, start, threads).ks(ref)
    return Calibration(checkpoints=points, sanity_ks=sanity, thresholds=[limit] * len(points),
                       sanity_limit=sanity_limit, lanes=lanes)


# ============================================================
# SUITES
# ============================================================

@dataclass
class SuiteResult:
    verdict: Verdict
    points: List[KSPoint] = field(default_factory=list)
    warning: bool = False
    messages: List[str] = field(default_factory=list)
    extra: Dict = field(default_factory=dict)

    def payload(self) -> dict:
        out = {"points": [p.model_dump(by_alias=True) for p in self.points]}
        out.update(self.extra)
        return out


def _judge(ks: Sequence[float], calibration: Calibration, n_max: int) -> SuiteResult:
    """
    PASS when the pooled KS at n_max is within the threshold.  Above it the
    suite FAILS if the Gaussian lanes resolve the horizon or the excess beats
    their own KS; otherwise the horizon is too short to tell.
    """
    points = [
        KSPoint(n=n, ks=float(k), threshold=float(t), passed=bool(k <= t))
        for n, k, t in zip(calibration.checkpoints, ks, calibration.thresholds)
    ]
    if n_max < settings.ASCLT_MIN_N:
        return SuiteResult(
            verdict=Verdict.INCONCLUSIVE, points=points, warning=True,
            messages=[f"n_max={n_max} is below {settings.ASCLT_MIN_N}; log averages have not settled"],
        )
    last, sanity = points[-1], calibration.sanity_ks[-1]
    if last.passed:
        return SuiteResult(verdict=Verdict.PASS, points=points)
    if calibration.resolved or last.ks > last.threshold + sanity:
        return SuiteResult(verdict=Verdict.FAIL, points=points,
                           messages=[f"pooled KS {last.ks:.4f} exceeds {last.threshold:.4f} "
                                     f"(Gaussian lanes {sanity:.4f})"])
    return SuiteResult(
        verdict=Verdict.INCONCLUSIVE, points=points, warning=True,
        messages=[f"Gaussian lanes reach KS {sanity:.4f} > {calibration.sanity_limit:.4f}; "
                  f"raise n_max or the number of paths"],
    )


def _xi_along(model: ProcessModel, D_F: DecomposedFunction, n_max: int, seed: int, replica: int) -> PathSample:
    traj = sample_trajectory(model, D_F.arity * n_max, seed, replica=replica)
    return xi_path(D_F, traj, n_max)


def _degenerate(C: CovarianceModel, label: str) -> Optional[SuiteResult]:
    r11 = kernel_R(C, 1.0, 1.0)
    if r11 > 0.0:
        return None
    return SuiteResult(verdict=Verdict.FAIL, messages=[f"{label}: limit variance R(1,1) = {r11} is degenerate"],
                       extra={"R11": r11})


def _run(model: ProcessModel, D_F: DecomposedFunction, C: CovarianceModel, transform: Callable[[PathSample], np.ndarray],
         ref: ReferenceCDF, grid: np.ndarray, limit: float, sanity_limit: float, n_max: int, seed: int,
         lanes: Optional[int], paths: Optional[int], threads: int) -> SuiteResult:
    paths = paths or settings.ASCLT_PATHS
    start = first_index(n_max)
    calibration = calibrate(C, transform, ref, grid, n_max, seed, limit, sanity_limit, lanes, start, threads)
    pooled = pool(lambda r: transform(_xi_along(model, D_F, n_max, seed, r)), paths, grid,
                  calibration.checkpoints, start, threads)
    result = _judge(pooled.ks(ref), calibration, n_max)
    single = transform(_xi_along(model, D_F, n_max, seed, 0))[start - 1:]
    result.extra.update({
        "paths": paths, "lanes": calibration.lanes, "first_index": start,
        "sanity_ks": calibration.sanity_ks,
        "single_path_ks": ks_distance(accumulate(single, start=start), ref),
    })
    return result


def asclt_functional_suite(model: ProcessModel, D_F: DecomposedFunction, C: CovarianceModel,
                           functional: Callable[[PathSample], np.ndarray], ref: ReferenceCDF,
                           support: Tuple[float, float], n_max: int, seed: int,
                           limit: Optional[float] = None, sanity_limit: Optional[float] = None,
                           lanes: Optional[int] = None, threads: int = 1, paths: Optional[int] = None,
                           label: str = "functional") -> SuiteResult:
    """
    Log-averaged law of phi(Q_k) against phi(eta_Q) for a caller supplied
    functional.

    ``functional`` maps a path given from time 0 (Xi or a Gaussian lane) to
    the values v_k = phi(Q_k), k = 1..n; ``ref`` is the law of phi(Q) and
    ``support`` the interval the KS distance is evaluated on.
    """
    failed = _degenerate(C, label)
    if failed is not None:
        return failed
    grid = evaluation_grid(ref, *support)
    result = _run(model, D_F, C, functional, ref, grid,
                  settings.ASCLT_KS_LIMIT if limit is None else limit,
                  settings.SANITY_KS_LIMIT if sanity_limit is None else sanity_limit,
                  n_max, seed, lanes, paths, threads)
    logger.info(f"{label}: n={n_max} ks={result.points[-1].ks:.4f} verdict={result.verdict.value}")
    return result


def asclt_scalar_suite(model: ProcessModel, D_F: DecomposedFunction, C: CovarianceModel, n_max: int,
                       seed: int, lanes: Optional[int] = None, threads: int = 1,
                       paths: Optional[int] = None) -> SuiteResult:
    """Log-averaged law of Xi(k)/sqrt(k) against N(0, R(1,1))."""
    failed = _degenerate(C, "asclt")
    if failed is not None:
        return failed
    r11 = kernel_R(C, 1.0, 1.0)
    result = asclt_functional_suite(model, D_F, C, scalar_values, q1_reference_cdf(C),
                                    (-8.0 * math.sqrt(r11), 8.0 * math.sqrt(r11)), n_max, seed,
                                    lanes=lanes, threads=threads, paths=paths, label="asclt")
    result.extra.update({"R11": r11, "raw_weight_ratio": raw_weight_ratio(n_max)})
    return result


def raw_weight_ratio(n: int) -> float:
    """sum_{k<=n} 1/k over ln n, the total mass of the raw measure."""
    return math.fsum(1.0 / np.arange(n, 0, -1)) / math.log(n)


def _arcsine_target(C: CovarianceModel, seed: int) -> ReferenceCDF:
    if C.size == 1:
        return arcsine_cdf()
    sample = arcsine_reference(C, settings.GRID_STEP, 10**4, derive_seed(seed, "arcsine-reference"))
    return empirical_reference(sample)


def asclt_arcsine_suite(model: ProcessModel, D_F: DecomposedFunction, C: CovarianceModel, n_max: int,
                        seed: int, lanes: Optional[int] = None, threads: int = 1,
                        paths: Optional[int] = None) -> SuiteResult:
    """Log-averaged law of L_k against the law of phi(Q)."""
    failed = _degenerate(C, "arcsine")
    if failed is not None:
        return failed
    ref = _arcsine_target(C, seed)
    result = asclt_functional_suite(model, D_F, C, occupation_sequence, ref, (0.0, 1.0), n_max, seed,
                                    limit=settings.ARCSINE_KS_LIMIT, sanity_limit=settings.ARCSINE_SANITY_KS_LIMIT,
                                    lanes=lanes, threads=threads, paths=paths, label="arcsine")
    result.extra["reference"] = "closed-form arcsine" if C.size == 1 else "simulated phi(Q)"
    return result


def _lil_maximum(path: PathSample, R11: float, start: int) -> float:
    return float(np.max(np.abs(lil_sequence(path, R11, start).values)))


def lil_band(C: CovarianceModel, n_max: int, seed: int, start: Optional[int] = None,
             lanes: Optional[int] = None, threads: int = 1) -> List[float]:
    """[lower, upper] for max |f_n(1)| from Gaussian lanes, widened by the threshold margin."""
    start = start or settings.LIL_N_START
    lanes = lanes or settings.CALIBRATION_LANES
    root = factor(C)
    R11 = kernel_R(C, 1.0, 1.0)
    lane_seed = derive_seed(seed, "lil-lanes")
    maxima = np.asarray(map_replicas(
        lambda r: _lil_maximum(gaussian_path(sample_Q_integer_times(root, n_max, lane_seed, replica=r)), R11, start),
        lanes, threads,
    ))
    q = settings.CALIBRATION_QUANTILE
    margin = settings.THRESHOLD_MARGIN
    return [float(np.quantile(maxima, 1.0 - q)) * (1.0 - margin), float(np.quantile(maxima, q)) * (1.0 + margin)]


def lil_suite(model: ProcessModel, D_F: DecomposedFunction, C: CovarianceModel, n_max: int, seeds: int,
              seed: int, start: Optional[int] = None, band: Optional[Sequence[float]] = None,
              lanes: Optional[int] = None, threads: int = 1) -> SuiteResult:
    """
    max_{start <= n <= n_max} |f_n(1)| for ``seeds`` independent paths; the
    suite passes when at least LIL_PASS_FRACTION of them fall inside the band.
    """
    start = start or settings.LIL_N_START
    R11 = kernel_R(C, 1.0, 1.0)
    if not R11 > 0.0:
        raise DegenerateVariance(f"R(1,1) = {R11} is not positive")
    if band is None:
        band = lil_band(C, n_max, seed, start, lanes, threads)

    maxima = map_replicas(lambda r: _lil_maximum(_xi_along(model, D_F, n_max, seed, r), R11, start), seeds, threads)
    inside = sum(band[0] <= m <= band[1] for m in maxima)
    needed = math.ceil(settings.LIL_PASS_FRACTION * seeds)
    verdict = Verdict.PASS if inside >= needed else Verdict.FAIL
    logger.info(f"lil: {inside}/{seeds} maxima in [{band[0]:.3f}, {band[1]:.3f}] verdict={verdict.value}")
    return SuiteResult(verdict=verdict, extra={
        "maxima": maxima, "band": list(band), "inside": inside, "required": needed, "n_start": start, "R11": R11,
    })
