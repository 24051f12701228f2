"""
Gaussian limit objects: G with increment covariance D and Q(t) = sum_j G_j(jt).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from nonconv.config import settings
from nonconv.covariance import PSD_TOLERANCE, CovarianceModel, kernel_R
from nonconv.exceptions import BadGrid, DegenerateVariance, NotPositiveSemidefinite, TooFewSamples
from nonconv.sums import positive_time
from nonconv.utils.rng import generator

REPLICA_BATCH = 256


# ============================================================
# TYPES
# ============================================================

@dataclass(frozen=True, eq=False)
class CovarianceRoot:
    """L with L L^T = D; columns ordered by descending eigenvalue."""
    matrix: np.ndarray
    rank: int

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])


@dataclass(frozen=True, eq=False)
class GaussianPath:
    """
    Batch of paths on ``times``: ``G`` has shape (replicas, M+1, l) and ``Q``
    (replicas, M+1) when the dilated sum was requested.
    """
    times: np.ndarray
    G: np.ndarray
    seed: int
    Q: Optional[np.ndarray] = None

    @property
    def replicas(self) -> int:
        return int(self.G.shape[0])


@dataclass(frozen=True, eq=False)
class ReferenceCDF:
    """
    CDF used as a comparison target.  ``atoms`` lists the jump points of a
    discrete reference; continuous references have none.
    """
    cdf: Callable
    atoms: Optional[np.ndarray] = None
    left: Optional[Callable] = None

    def __call__(self, x):
        return self.cdf(x)

    def left_limit(self, x):
        return self.left(x) if self.left is not None else self.cdf(x)


def empirical_reference(samples: Sequence[float]) -> ReferenceCDF:
    """Right-continuous step CDF of a sample."""
    data = np.sort(np.asarray(samples, dtype=float))
    n = data.size
    return ReferenceCDF(
        cdf=lambda x: np.searchsorted(data, x, side="right") / n,
        atoms=np.unique(data),
        left=lambda x: np.searchsorted(data, x, side="left") / n,
    )


# ============================================================
# OPERATIONS
# ============================================================

def factor(D) -> CovarianceRoot:
    """
    Eigen-root of D: eigenvalues in descending order, each eigenvector signed
    so that its first nonzero entry is positive.
    """
    matrix = D.matrix if isinstance(D, CovarianceModel) else np.asarray(D, dtype=float)
    matrix = 0.5 * (matrix + matrix.T)
    eigvals, eigvecs = np.linalg.eigh(matrix)
    if eigvals.size and eigvals.min() < -PSD_TOLERANCE:
        raise NotPositiveSemidefinite(f"smallest eigenvalue {eigvals.min():.3e} below -{PSD_TOLERANCE}")
    order = np.argsort(-eigvals, kind="stable")
    eigvals, eigvecs = np.clip(eigvals[order], 0.0, None), eigvecs[:, order]
    for col in range(eigvecs.shape[1]):
        nonzero = np.flatnonzero(np.abs(eigvecs[:, col]) > 1e-12)
        if nonzero.size and eigvecs[nonzero[0], col] < 0:
            eigvecs[:, col] = -eigvecs[:, col]
    scale = eigvals.max() if eigvals.size else 0.0
    rank = int(np.count_nonzero(eigvals > 1e-12 * max(scale, 1.0)))
    return CovarianceRoot(matrix=eigvecs * np.sqrt(eigvals), rank=rank)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0.0):
        raise BadGrid("grid must start at 0 and be strictly increasing")
    return grid


def _brownian(root: CovarianceRoot, grid: np.ndarray, rng: np.random.Generator, replicas: int) -> np.ndarray:
    ell = root.size
    steps = np.sqrt(np.diff(grid))
    z = rng.standard_normal((replicas, grid.size - 1, ell))
    increments = (z @ root.matrix.T) * steps[None, :, None]
    out = np.zeros((replicas, grid.size, ell))
    out[:, 1:, :] = np.cumsum(increments, axis=1)
    return out


def sample_G(root: CovarianceRoot, grid, seed: int, replicas: int = 1) -> GaussianPath:
    """G on ``grid`` with increments sqrt(dt) L Z; E G_i(s) G_j(t) = D_ij (s min t)."""
    grid = _check_grid(grid)
    G = _brownian(root, grid, generator(seed), replicas)
    return GaussianPath(times=grid, G=G, seed=seed)


def sample_Q(root: CovarianceRoot, grid, seed: int, replicas: int = 1) -> GaussianPath:
    """
    Q(t_k) = sum_j G_j(j t_k).  G is simulated on the union of the dilated
    grids j*grid, which extends the horizon to l*T.
    """
    grid = _check_grid(grid)
    ell = root.size
    dilated = np.concatenate([j * grid for j in range(1, ell + 1)])
    extended, inverse = np.unique(dilated, return_inverse=True)
    inverse = inverse.reshape(ell, grid.size)
    G_ext = _brownian(root, extended, generator(seed), replicas)
    Q = np.zeros((replicas, grid.size))
    for j in range(ell):
        Q += G_ext[:, inverse[j], j]
    return GaussianPath(times=grid, G=G_ext[:, inverse[0], :], seed=seed, Q=Q)


def sample_Q_integer_times(root: CovarianceRoot, n: int, seed: int, replica: Optional[int] = None) -> np.ndarray:
    """Q(1..n) of one path, from G on the unit grid 0..l*n."""
    ell = root.size
    rng = generator(seed) if replica is None else generator(seed, replica)
    z = rng.standard_normal((ell * n, ell))
    G = np.vstack([np.zeros((1, ell)), np.cumsum(z @ root.matrix.T, axis=0)])
    k = np.arange(1, n + 1)
    return sum(G[j * k, j - 1] for j in range(1, ell + 1))


def q1_reference_cdf(C: CovarianceModel) -> ReferenceCDF:
    """N(0, R(1, 1))."""
    r11 = kernel_R(C, 1.0, 1.0)
    if not r11 > 0.0:
        raise DegenerateVariance(f"R(1,1) = {r11} is not positive")
    law = stats.norm(loc=0.0, scale=math.sqrt(r11))
    return ReferenceCDF(cdf=law.cdf)


def arcsine_cdf() -> ReferenceCDF:
    """Classical arcsine law (2/pi) arcsin(sqrt(x))."""
    return ReferenceCDF(cdf=stats.arcsine.cdf)


def occupation_of_grid(times, values) -> np.ndarray:
    """Share of [0, T] on which the linearly interpolated path is positive."""
    times = np.asarray(times, dtype=float)
    return positive_time(times, np.asarray(values, dtype=float)) / (times[-1] - times[0])


def arcsine_reference(C: CovarianceModel, grid_step: Optional[float] = None, replicas: int = 10**4,
                      seed: int = 0) -> np.ndarray:
    """
    Sorted sample of phi(Q) = |{u in [0, 1] : Q(u) > 0}| from simulated
    paths on a uniform grid.
    """
    if replicas < 10**3:
        raise TooFewSamples(f"arcsine reference needs at least 1000 replicas, got {replicas}")
    if not kernel_R(C, 1.0, 1.0) > 0.0:
        raise DegenerateVariance("Q is degenerate, R(1,1) = 0")
    step = grid_step or settings.GRID_STEP
    grid = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    root = factor(C)
    out = []
    for batch, start in enumerate(range(0, replicas, REPLICA_BATCH)):
        count = min(REPLICA_BATCH, replicas - start)
        path = sample_Q(root, grid, seed=int(generator(seed, batch).integers(2**63)), replicas=count)
        out.append(occupation_of_grid(grid, path.Q))
    return np.sort(np.concatenate(out))

