"""
Nonconventional partial sums and the paths derived from them.

All paths start at time 0 with value 0 (the sums start at n = 1).  Partial
sums go through ``compensated_cumsum`` so that long paths keep full
precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np

from nonconv.exceptions import BadGrid, DegenerateVariance, InsufficientPath, TrajectoryTooShort
from nonconv.functional import DecomposedFunction, FunctionSpec, decompose
from nonconv.models import PathKind
from nonconv.process import MarginalLaw, Trajectory
from nonconv.utils.numerics import compensated_cumsum
from nonconv.utils.serialization import write_csv

CHUNK = 1 << 16


# ============================================================
# PATH SAMPLE
# ============================================================

@dataclass(frozen=True, eq=False)
class PathSample:
    """Values on a strictly increasing time grid, tagged with what they are."""
    times: np.ndarray
    values: np.ndarray
    kind: PathKind
    component: Optional[int] = None
    provenance: Dict[str, Union[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.times.shape != self.values.shape:
            raise BadGrid("times and values must have the same length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise BadGrid("path grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise BadGrid("path values must be finite")

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def last_time(self) -> float:
        return float(self.times[-1])

    def to_csv(self, path: str) -> str:
        return write_csv(path, ["t", "value"], zip(self.times.tolist(), self.values.tolist()))


def _provenance(traj: Trajectory, D: DecomposedFunction) -> Dict[str, Union[str, int]]:
    return {"model": traj.model, "function": D.spec.kind.value, "seed": traj.seed}


# ============================================================
# SUMMANDS
# ============================================================

def _progression(traj: Trajectory, n: np.ndarray, i: int, symbols: bool):
    """(X(n), X(2n), ..., X(in)) for each n; indices are 1-based times."""
    idx = np.outer(n, np.arange(1, i + 1)) - 1
    if symbols:
        return traj.symbols[idx]
    return traj.values[idx]


def _use_symbols(D: DecomposedFunction, traj: Trajectory) -> bool:
    return D.is_exact and traj.symbols is not None


def summands(D: DecomposedFunction, traj: Trajectory, N: int, center: Optional[float] = None) -> np.ndarray:
    """F(X(n), ..., X(ln)) - F_bar for n = 1..N."""
    ell = D.arity
    if traj.length < ell * N:
        raise TrajectoryTooShort(f"need {ell * N} observations, trajectory has {traj.length}")
    shift = D.f_bar if center is None else center
    out = np.empty(N)
    symbols = _use_symbols(D, traj)
    for start in range(0, N, CHUNK):
        n = np.arange(start + 1, min(N, start + CHUNK) + 1)
        args = _progression(traj, n, ell, symbols)
        out[start:start + n.size] = (D.evaluate_symbols(args) if symbols else D.evaluate(args)) - shift
    return out


def component_terms(D: DecomposedFunction, traj: Trajectory, i: int, count: int) -> np.ndarray:
    """Y_i(in) = F_i(X(n), ..., X(in)) for n = 1..count."""
    if traj.length < i * count:
        raise TrajectoryTooShort(f"need {i * count} observations, trajectory has {traj.length}")
    out = np.empty(count)
    symbols = _use_symbols(D, traj)
    for start in range(0, count, CHUNK):
        n = np.arange(start + 1, min(count, start + CHUNK) + 1)
        args = _progression(traj, n, i, symbols)
        out[start:start + n.size] = D.component_on_symbols(i, args) if symbols else D.component_on_values(i, args)
    return out


def _with_origin(values: np.ndarray) -> np.ndarray:
    return np.concatenate(([0.0], compensated_cumsum(values)))


# ============================================================
# OPERATIONS
# ============================================================

def xi_path(D: Union[DecomposedFunction, FunctionSpec], traj: Trajectory, N: int,
            law: Optional[MarginalLaw] = None, center: Optional[float] = None) -> PathSample:
    """
    Xi(0..N) with Xi(0) = 0.

    ``D`` may be a FunctionSpec together with ``law``; ``center`` overrides
    F_bar (the summand is F(...) - center).
    """
    if isinstance(D, FunctionSpec):
        if law is None:
            raise InsufficientPath("a FunctionSpec needs the marginal law to be centred")
        D = decompose(D, law)
    values = _with_origin(summands(D, traj, N, center)) if N > 0 else np.zeros(1)
    return PathSample(times=np.arange(N + 1, dtype=float), values=values, kind=PathKind.XI,
                      provenance=_provenance(traj, D))


def psi_paths(D: DecomposedFunction, traj: Trajectory, t_max: int) -> List[PathSample]:
    """Psi_i(t) = sum_{n <= t/i} F_i(X(n), ..., X(in)) for t = 0..t_max, one path per i."""
    if traj.length < t_max:
        raise TrajectoryTooShort(f"need {t_max} observations, trajectory has {traj.length}")
    times = np.arange(t_max + 1)
    paths = []
    for i in range(1, D.arity + 1):
        count = t_max // i
        partial = _with_origin(component_terms(D, traj, i, count)) if count else np.zeros(1)
        paths.append(PathSample(times=times.astype(float), values=partial[times // i], kind=PathKind.PSI,
                                component=i, provenance=_provenance(traj, D)))
    return paths


def psi_at(D: DecomposedFunction, traj: Trajectory, t: int) -> np.ndarray:
    """Vector (Psi_1(t), ..., Psi_l(t)) at a single time."""
    return np.array([
        math.fsum(component_terms(D, traj, i, t // i)) if t // i else 0.0
        for i in range(1, D.arity + 1)
    ])


@dataclass(frozen=True, eq=False)
class InterpolatedPath:
    """Piecewise-linear Q_n on [0, 1] with knots (k/n, n^{-1/2} Xi(k))."""
    n: int
    knots: np.ndarray
    values: np.ndarray

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any((t < 0.0) | (t > 1.0)):
            raise BadGrid("Q_n is defined on [0, 1]")
        nt = self.n * t
        k = np.minimum(np.floor(nt).astype(np.int64), self.n)
        frac = nt - k
        upper = np.minimum(k + 1, self.n)
        return self.values[k] * (1.0 - frac) + self.values[upper] * frac

    def as_path(self) -> PathSample:
        return PathSample(times=self.knots, values=self.values, kind=PathKind.QN, provenance={"n": self.n})


def interpolate_Qn(xi: PathSample, n: int) -> InterpolatedPath:
    if n < 1:
        raise InsufficientPath("Q_n needs n >= 1")
    if len(xi) < n + 1:
        raise InsufficientPath(f"Xi covers times 0..{len(xi) - 1}, Q_n needs 0..{n}")
    knots = np.arange(n + 1) / n
    return InterpolatedPath(n=n, knots=knots, values=xi.values[:n + 1] / math.sqrt(n))


def positive_time(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """
    Lebesgue measure of {u : x(u) > 0} for the linear interpolation of
    ``values`` (last axis) on ``times``.  Leading axes are batch axes.
    """
    a, b = values[..., :-1], values[..., 1:]
    width = np.diff(times)
    share = np.where((a > 0) & (b > 0), 1.0, 0.0)
    down = (a > 0) & (b <= 0)
    up = (a <= 0) & (b > 0)
    share = np.where(down, a / np.where(down, a - b, 1.0), share)
    share = np.where(up, b / np.where(up, b - a, 1.0), share)
    return np.sum(width * share, axis=-1)


def occupation_measure(path: InterpolatedPath) -> float:
    """Exact Lebesgue measure of {u in [0, 1] : Q_n(u) > 0}."""
    return float(positive_time(path.knots, path.values))


def _lil_scale(R11: float, n) -> np.ndarray:
    if not R11 > 0.0:
        raise DegenerateVariance(f"R(1,1) must be positive, got {R11}")
    n = np.asarray(n, dtype=float)
    return np.sqrt(2.0 * n * R11 * np.log(np.log(n)))


def lil_path(xi: PathSample, R11: float, n: int) -> float:
    """f_n(1) = Xi(n) / sqrt(2 n R11 ln ln n), using R(n, n) = n R(1, 1)."""
    if n < 3:
        raise InsufficientPath("ln ln n requires n >= 3")
    if len(xi) < n + 1:
        raise InsufficientPath(f"Xi covers times 0..{len(xi) - 1}, need {n}")
    return float(xi.values[n] / _lil_scale(R11, n))


def lil_sequence(xi: PathSample, R11: float, start: int = 3) -> PathSample:
    """f_k(1) for every k = start..N."""
    if start < 3:
        raise InsufficientPath("ln ln n requires n >= 3")
    k = np.arange(start, len(xi))
    if k.size == 0:
        raise InsufficientPath(f"Xi must extend beyond time {start}")
    return PathSample(times=k.astype(float), values=xi.values[k] / _lil_scale(R11, k), kind=PathKind.LIL,
                      provenance=dict(xi.provenance))


def occupation_fraction(xi: PathSample, n: int) -> float:
    """L_n = #{k <= n : Xi(k) > 0} / n, ties counted as non-positive."""
    if n < 1 or len(xi) < n + 1:
        raise InsufficientPath(f"Xi must cover times 1..{n}")
    return float(np.count_nonzero(xi.values[1:n + 1] > 0.0)) / n


def occupation_sequence(xi: PathSample) -> np.ndarray:
    """L_k for k = 1..N in one pass."""
    positive = (xi.values[1:] > 0.0).astype(np.int64)
    return np.cumsum(positive) / np.arange(1, positive.size + 1)
