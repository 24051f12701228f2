"""
Limiting covariance of the component sums Psi_i.

D_ij = (v / (ij)) * sum_u a_ij(u, 2u, ..., vu) with v = gcd(i, j).  Each
a_ij couples the arguments x_{eta i'} of F_i with y_{eta j'} of F_j through
the pair law at lag eta*u and integrates every other argument against the
marginal law.  The series is truncated at |u| <= U with a geometric tail
estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from nonconv.config import settings
from nonconv.exceptions import (
    NotPositiveSemidefinite,
    TailNotConverged,
    TooFewSamples,
    UnsupportedModel,
)
from nonconv.functional import DecomposedFunction
from nonconv.models import Provenance
from nonconv.process import PairLaw, ProcessModel, pair_law_provider, sample_trajectory
from nonconv.schemas.reports import CovarianceSummary
from nonconv.sums import psi_at, psi_paths
from nonconv.utils.logger import setup_logger
from nonconv.utils.numerics import geometric_tail, ordered_sum
from nonconv.utils.parallel import map_replicas

logger = setup_logger("nonconv.covariance")

PSD_TOLERANCE = 1e-8
TAIL_WINDOW = 10


# ============================================================
# COVARIANCE MODEL
# ============================================================

@dataclass(frozen=True, eq=False)
class CovarianceModel:
    matrix: np.ndarray
    provenance: Provenance
    U: Optional[int] = None
    tail_estimate: Optional[float] = None
    standard_errors: Optional[np.ndarray] = None
    note: str = ""

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    def R(self, s: float, t: float) -> float:
        return kernel_R(self, s, t)

    def summary(self) -> CovarianceSummary:
        return CovarianceSummary(
            matrix=self.matrix.tolist(),
            provenance=self.provenance,
            U=self.U,
            tail_estimate=self.tail_estimate,
            standard_errors=None if self.standard_errors is None else self.standard_errors.tolist(),
            note=self.note,
        )

    def to_dict(self) -> dict:
        return self.summary().model_dump(mode="json")


def psd_gate(matrix: np.ndarray) -> np.ndarray:
    """Clip eigenvalues in [-1e-8, 0) to zero; anything more negative is an error."""
    matrix = 0.5 * (matrix + matrix.T)
    if not matrix.size:
        return matrix
    eigvals, eigvecs = np.linalg.eigh(matrix)
    if eigvals.min() < -PSD_TOLERANCE:
        raise NotPositiveSemidefinite(f"smallest eigenvalue {eigvals.min():.3e} below -{PSD_TOLERANCE}")
    if eigvals.min() < 0.0:
        repaired = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
        matrix = 0.5 * (repaired + repaired.T)
    return matrix


# ============================================================
# SERIES
# ============================================================

def _reduce(table: np.ndarray, step: int, probabilities: np.ndarray) -> np.ndarray:
    """Integrate out every argument whose 1-based position is not a multiple of ``step``."""
    for axis in range(table.ndim - 1, -1, -1):
        if (axis + 1) % step:
            table = np.tensordot(table, probabilities, axes=([axis], [0]))
    return table


def a_term(D_F: DecomposedFunction, i: int, j: int, u: int,
           pair_laws: Callable[[int], PairLaw]) -> float:
    """
    a_ij(u, 2u, ..., vu) as an exact finite sum.

    x_{eta i'} sits eta*u time steps after y_{eta j'}, so its joint law with
    y is the pair law at lag -eta*u (negative lags are transposes).  The
    last coupled pair is replaced by its excess over the product law, which
    leaves the value unchanged because F_j is centred in its last argument.
    """
    if not D_F.is_exact:
        raise UnsupportedModel("exact covariance terms need a finite alphabet")
    v = math.gcd(i, j)
    ip, jp = i // v, j // v
    p = D_F.law.probabilities
    left = _reduce(D_F.components[i - 1], ip, p)
    right = _reduce(D_F.components[j - 1], jp, p)
    operands: List = [left, list(range(v)), right, list(range(v, 2 * v))]
    for eta in range(1, v + 1):
        law = pair_laws(-eta * u)
        coupling = law.excess if eta == v else law.table
        operands.extend([coupling, [eta - 1, v + eta - 1]])
    operands.append([])
    return float(np.einsum(*operands, optimize=True))


def _shells(D_F: DecomposedFunction, i: int, j: int, U: int, pair_laws, threads: int) -> List[float]:
    """S_0 = a(0), S_u = a(u) + a(-u) for u = 1..U."""
    def shell(u: int) -> float:
        if u == 0:
            return a_term(D_F, i, j, 0, pair_laws)
        return ordered_sum([a_term(D_F, i, j, u, pair_laws), a_term(D_F, i, j, -u, pair_laws)])

    return map_replicas(shell, U + 1, threads)


def limiting_D(D_F: DecomposedFunction, model: ProcessModel, U: int = 200,
               tail_tol: Optional[float] = None, threads: int = 1) -> CovarianceModel:
    """Truncated series for D with a geometric tail estimate over the last ten shells."""
    if not model.has_exact_pair_laws:
        raise UnsupportedModel(f"{model.kind.value} has no exact pair laws; use empirical_D")
    if U < 1:
        raise TailNotConverged("truncation radius U must be at least 1")
    tol = settings.TAIL_TOLERANCE if tail_tol is None else tail_tol
    ell = D_F.arity
    provider = pair_law_provider(model, ell * U)
    matrix = np.zeros((ell, ell))
    tail = 0.0
    for i in range(1, ell + 1):
        for j in range(i, ell + 1):
            v = math.gcd(i, j)
            shells = _shells(D_F, i, j, U, provider, threads)
            factor = v / (i * j)
            matrix[i - 1, j - 1] = factor * ordered_sum(shells)
            matrix[j - 1, i - 1] = matrix[i - 1, j - 1]
            tail = max(tail, factor * geometric_tail(shells[1:], TAIL_WINDOW))
    if tail > tol:
        raise TailNotConverged(f"tail estimate {tail:.3e} exceeds tolerance {tol:.1e} at U={U}")
    matrix = psd_gate(matrix)
    logger.debug(f"series covariance with U={U}, tail estimate {tail:.2e}")
    return CovarianceModel(
        matrix=matrix, provenance=Provenance.EXACT_SERIES, U=U, tail_estimate=tail,
        note="u-series truncated at |u| <= U; tail extrapolated geometrically from the last 10 shells",
    )


def kernel_R(C: CovarianceModel, s: float, t: float) -> float:
    """R(s, t) = sum_ij D_ij ((i s) min (j t))."""
    idx = np.arange(1, C.size + 1, dtype=float)
    return float(np.sum(C.matrix * np.minimum.outer(idx * s, idx * t)))


def zero_covariance(ell: int) -> CovarianceModel:
    return CovarianceModel(matrix=np.zeros((ell, ell)), provenance=Provenance.EXACT_SERIES, U=0, tail_estimate=0.0)


# ============================================================
# MONTE CARLO
# ============================================================

def jackknife(samples: np.ndarray):
    """Mean and delete-one jackknife standard error along axis 0."""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    leave_one_out = (n * mean - samples) / (n - 1)
    spread = ((leave_one_out - leave_one_out.mean(axis=0)) ** 2).sum(axis=0)
    return mean, np.sqrt((n - 1) / n * spread)


def empirical_D(model: ProcessModel, D_F: DecomposedFunction, t: int, replicas: int, seed: int,
                threads: int = 1) -> CovarianceModel:
    """Replica average of Psi_i(t) Psi_j(t) / t with jackknife standard errors."""
    if t < 10**3 or replicas < 50:
        raise TooFewSamples(f"empirical_D needs t >= 1000 and replicas >= 50 (got t={t}, replicas={replicas})")

    def replica(r: int) -> np.ndarray:
        traj = sample_trajectory(model, t, seed, replica=r)
        psi = psi_at(D_F, traj, t)
        return np.outer(psi, psi) / t

    products = np.stack(map_replicas(replica, replicas, threads))
    mean, se = jackknife(products)
    mean = 0.5 * (mean + mean.T)
    return CovarianceModel(matrix=mean, provenance=Provenance.EMPIRICAL, standard_errors=se,
                           note=f"replica estimator at t={t} over {replicas} replicas")


def covariance_drift(model: ProcessModel, D_F: DecomposedFunction, C: CovarianceModel,
                     t_grid: Sequence[int], replicas: int, seed: int, threads: int = 1) -> Dict:
    """
    E Psi_i(t) Psi_j(t) - D_ij t on a time grid.

    Each replica contributes its own least-squares slope of Psi_i Psi_j(t)
    against t and its normalised products Psi_i Psi_j(t) / t; both are
    jackknifed over replicas.  An entry is ``bounded`` when the slope and the
    normalised gap at the last time both sit within max(SE_MULTIPLIER * SE,
    RELATIVE_TOLERANCE * |D_ij|) of D_ij.
    """
    grid = np.asarray(sorted({int(t) for t in t_grid}))
    if grid.size < 2:
        raise TooFewSamples("covariance drift needs at least two grid times")
    if replicas < 2:
        raise TooFewSamples(f"covariance drift needs at least two replicas, got {replicas}")
    ell = D_F.arity
    centred = grid - grid.mean()
    weights = centred / np.dot(centred, centred)

    def replica(r: int) -> np.ndarray:
        traj = sample_trajectory(model, int(grid[-1]), seed, replica=r)
        paths = psi_paths(D_F, traj, int(grid[-1]))
        psi = np.stack([p.values[grid] for p in paths], axis=1)     # (len(grid), ell)
        return psi[:, :, None] * psi[:, None, :]

    products = np.stack(map_replicas(replica, replicas, threads))   # (replicas, len(grid), ell, ell)
    slope, slope_se = jackknife(np.einsum("k,rkij->rij", weights, products))
    normalised, normalised_se = jackknife(products / grid[None, :, None, None])
    entries = []
    for i in range(ell):
        for j in range(i, ell):
            target = float(C.matrix[i, j])
            floor = settings.RELATIVE_TOLERANCE * abs(target)
            gap = normalised[:, i, j] - target
            slope_ok = abs(slope[i, j] - target) <= max(settings.SE_MULTIPLIER * slope_se[i, j], floor)
            last_ok = abs(gap[-1]) <= max(settings.SE_MULTIPLIER * normalised_se[-1, i, j], floor)
            entries.append({
                "i": i + 1, "j": j + 1, "D": target,
                "gap": (gap * grid).tolist(),
                "normalised_gap": gap.tolist(),
                "se": normalised_se[:, i, j].tolist(),
                "slope": float(slope[i, j]), "slope_se": float(slope_se[i, j]),
                "bounded": bool(slope_ok and last_ok),
            })
    return {"t_grid": grid.tolist(), "replicas": replicas, "entries": entries,
            "bounded": all(e["bounded"] for e in entries)}
