"""
Dependence coefficients of finite stationary Markov chains.

For a chain the past/future coefficients reduce to the pair (X_0, X_n), so
everything is read off Delta_n = P^n - Pi = (P - Pi)^n (n >= 1) and
Delta_0 = I - Pi.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from nonconv.config import settings
from nonconv.exceptions import StateSpaceTooLarge, UnsupportedModel, ZeroMassState
from nonconv.models import ClauseStatus, ModelKind
from nonconv.process import ProcessModel
from nonconv.schemas.experiment import AssumptionParameters
from nonconv.schemas.reports import AssumptionReport, ClauseReport
from nonconv.utils.logger import setup_logger
from nonconv.utils.serialization import write_csv

logger = setup_logger("nonconv.mixing")

SUBSET_CHUNK = 1 << 14


# ============================================================
# COEFFICIENTS
# ============================================================

def _check_mass(pi: np.ndarray) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if np.any(pi <= 0.0):
        raise ZeroMassState("stationary vector has states of zero mass")
    return pi


def deviation_power(P, pi, n: int) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    Pi = np.tile(np.asarray(pi, dtype=float), (P.shape[0], 1))
    if n == 0:
        return np.eye(P.shape[0]) - Pi
    return np.linalg.matrix_power(P - Pi, n)


def _psi(delta: np.ndarray, pi: np.ndarray) -> float:
    return float(np.max(np.abs(delta / pi[None, :])))


def _phi(delta: np.ndarray) -> float:
    return float(0.5 * np.max(np.abs(delta).sum(axis=1)))


def _rho(delta: np.ndarray, pi: np.ndarray) -> float:
    root = np.sqrt(pi)
    M = root[:, None] * delta / root[None, :]
    return float(np.linalg.norm(M, ord=2))


def _alpha(delta: np.ndarray, pi: np.ndarray) -> float:
    """max over A of sum_y (sum_{x in A} pi(x) Delta(x, y))^+, complements give the same value."""
    s = pi.size
    weighted = pi[:, None] * delta
    if s == 1:
        return 0.0
    best = 0.0
    count = 1 << (s - 1)
    bits = np.arange(s - 1)
    for start in range(0, count, SUBSET_CHUNK):
        codes = np.arange(start, min(count, start + SUBSET_CHUNK))
        members = ((codes[:, None] >> bits[None, :]) & 1).astype(float)
        c = members @ weighted[:-1]
        best = max(best, float(np.clip(c, 0.0, None).sum(axis=1).max()))
    return best


def _alpha_bounds(delta: np.ndarray, pi: np.ndarray) -> Tuple[float, float]:
    weighted = pi[:, None] * delta
    upper = min(0.25, float(np.clip(weighted, 0.0, None).sum()))
    members = np.zeros(pi.size, dtype=bool)
    value = 0.0
    improved = True
    while improved:
        improved = False
        for x in range(pi.size):
            members[x] = ~members[x]
            trial = float(np.clip(weighted[members].sum(axis=0), 0.0, None).sum())
            if trial > value + 1e-15:
                value, improved = trial, True
            else:
                members[x] = ~members[x]
    return value, max(value, upper)


def psi_coeff(P, pi, n: int) -> float:
    """max_{x,y} |P^n(x,y) / pi(y) - 1|."""
    pi = _check_mass(pi)
    return _psi(deviation_power(P, pi, n), pi)


def phi_coeff(P, pi, n: int) -> float:
    """max_x of the total variation between P^n(x, .) and pi."""
    pi = _check_mass(pi)
    return _phi(deviation_power(P, pi, n))


def rho_coeff(P, pi, n: int) -> float:
    """Largest singular value of pi^{1/2} (P^n - Pi) pi^{-1/2}."""
    pi = _check_mass(pi)
    return _rho(deviation_power(P, pi, n), pi)


def alpha_coeff(P, pi, n: int) -> float:
    """max_{A,B} |sum_{x in A, y in B} pi(x) (P^n(x,y) - pi(y))| by subset enumeration."""
    pi = _check_mass(pi)
    if pi.size > settings.ALPHA_MAX_STATES:
        raise StateSpaceTooLarge(f"alpha enumeration is limited to {settings.ALPHA_MAX_STATES} states, got {pi.size}")
    return _alpha(deviation_power(P, pi, n), pi)


def alpha_bounds(P, pi, n: int) -> Tuple[float, float]:
    """[lower, upper] for alpha(n): local search over A and the positive part of pi(x) Delta(x, y)."""
    pi = _check_mass(pi)
    return _alpha_bounds(deviation_power(P, pi, n), pi)


def beta_coeff(model: ProcessModel, p: float, n: int) -> float:
    """Every implemented X(m) is measurable with respect to its own coordinate, so the rate is 0."""
    return 0.0


# ============================================================
# PROFILE
# ============================================================

@dataclass(frozen=True, eq=False)
class MixingProfile:
    n: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    rho: np.ndarray
    alpha: np.ndarray
    alpha_upper: np.ndarray
    beta: np.ndarray
    moments: Dict[str, float] = field(default_factory=dict)
    decay_rate: float = 0.0
    alpha_exact: bool = True

    @property
    def depth(self) -> int:
        return int(self.n[-1])

    def varpi(self, q: float, p: float) -> Tuple[np.ndarray, str]:
        """
        Smallest available upper bound for varpi_{q,p}: the coefficient is
        nonincreasing in q and nondecreasing in p, and four points are known
        exactly (psi, rho, 2 phi, 4 alpha).
        """
        candidates = [(self.psi, "psi")]
        if q >= 2 and p <= 2:
            candidates.append((self.rho, "rho"))
        if math.isinf(q):
            candidates.append((2.0 * self.phi, "2 phi"))
            if p <= 1 and self.alpha_exact:
                candidates.append((4.0 * self.alpha, "4 alpha"))
        values = np.stack([c[0] for c in candidates])
        best = int(np.argmin(values[:, 1:].sum(axis=1))) if values.shape[1] > 1 else 0
        return candidates[best]

    def to_csv(self, path: str) -> str:
        rows = zip(self.n.tolist(), self.psi.tolist(), self.phi.tolist(), self.rho.tolist(), self.alpha.tolist())
        return write_csv(path, ["n", "psi", "phi", "rho", "alpha"], rows)

    def to_dict(self) -> dict:
        return {
            "n": self.n.tolist(), "psi": self.psi.tolist(), "phi": self.phi.tolist(),
            "rho": self.rho.tolist(), "alpha": self.alpha.tolist(), "alpha_upper": self.alpha_upper.tolist(),
            "alpha_exact": self.alpha_exact, "beta": self.beta.tolist(),
            "moments": self.moments, "decay_rate": self.decay_rate,
        }


def decay_rate(values: np.ndarray) -> float:
    """Largest consecutive ratio values[n+1] / values[n] over n >= 1 with values[n] > 0."""
    tail = np.asarray(values[1:], dtype=float)
    if tail.size < 2:
        return 0.0
    prev, nxt = tail[:-1], tail[1:]
    mask = prev > 0.0
    if not mask.any():
        return 0.0
    return float(np.max(nxt[mask] / prev[mask]))


def moments(model: ProcessModel, thetas: Sequence[float]) -> Dict[str, float]:
    """gamma_theta = (E |X|^theta)^(1/theta); theta = inf gives the sup norm."""
    law = model.marginal
    if not law.is_finite:
        bound = 1.0 if model.kind is ModelKind.DYADIC_MAP else math.inf
        return {str(t): bound for t in thetas}
    norms = np.linalg.norm(law.values, axis=1)
    out = {}
    for theta in thetas:
        if math.isinf(theta):
            out[str(theta)] = float(norms.max())
        else:
            out[str(theta)] = float((law.probabilities @ norms ** theta) ** (1.0 / theta))
    return out


def mixing_profile(model: ProcessModel, depth: int = 50, thetas: Sequence[float] = (2.0, 4.0, math.inf)) -> MixingProfile:
    """Coefficients for n = 0..depth from eagerly accumulated powers of P - Pi."""
    if model.transition is None:
        raise UnsupportedModel(f"{model.kind.value} has no finite transition matrix")
    pi = _check_mass(model.stationary)
    P = model.transition
    exact_alpha = pi.size <= settings.ALPHA_MAX_STATES
    base = P - pi[None, :]
    powers: List[np.ndarray] = [np.eye(pi.size) - pi[None, :]]
    current = np.eye(pi.size)
    for _ in range(depth):
        current = current @ base
        powers.append(current)

    psi = np.array([_psi(d, pi) for d in powers])
    phi = np.array([_phi(d) for d in powers])
    rho = np.array([_rho(d, pi) for d in powers])
    if exact_alpha:
        alpha = np.array([_alpha(d, pi) for d in powers])
        alpha_upper = alpha.copy()
    else:
        bounds = np.array([_alpha_bounds(d, pi) for d in powers])
        alpha, alpha_upper = bounds[:, 0], bounds[:, 1]
    profile = MixingProfile(
        n=np.arange(depth + 1), psi=psi, phi=phi, rho=rho, alpha=alpha, alpha_upper=alpha_upper,
        beta=np.zeros(depth + 1), moments=moments(model, thetas), decay_rate=decay_rate(psi),
        alpha_exact=exact_alpha,
    )
    logger.debug(f"mixing profile to depth {depth}, decay rate {profile.decay_rate:.4f}")
    return profile


# ============================================================
# SUMMABILITY CHECK
# ============================================================

def _inv(x: float) -> float:
    return 0.0 if math.isinf(x) else 1.0 / x


def _status(clauses: List[ClauseReport]) -> ClauseStatus:
    states = {c.status for c in clauses}
    if ClauseStatus.FAIL in states:
        return ClauseStatus.FAIL
    if ClauseStatus.INCONCLUSIVE in states:
        return ClauseStatus.INCONCLUSIVE
    return ClauseStatus.PASS


def _series_clause(profile: MixingProfile, q: float, p: float) -> ClauseReport:
    values, label = profile.varpi(q, p)
    n = profile.n.astype(float)
    partial = math.fsum(n * values)
    if profile.depth < 50:
        return ClauseReport(name="varpi_series", status=ClauseStatus.INCONCLUSIVE, value=partial,
                            detail=f"profile depth {profile.depth} is below 50")
    last = float(values[-1])
    if last == 0.0:
        return ClauseReport(name="varpi_series", status=ClauseStatus.PASS, value=partial,
                            detail=f"bound {label} vanishes at depth {profile.depth}")
    r = decay_rate(values)
    if r >= 1.0:
        return ClauseReport(name="varpi_series", status=ClauseStatus.FAIL, value=math.inf,
                            detail=f"bound {label} does not decay (ratio {r:.4f})")
    N = profile.depth
    tail = last * (N * r / (1.0 - r) + r / (1.0 - r) ** 2)
    settled = tail <= settings.RELATIVE_TOLERANCE * max(partial, settings.TAIL_TOLERANCE) or tail <= settings.TAIL_TOLERANCE
    status = ClauseStatus.PASS if settled else ClauseStatus.INCONCLUSIVE
    return ClauseReport(name="varpi_series", status=status, value=partial + tail,
                        detail=f"sum n*{label}(n): partial {partial:.6g}, geometric tail {tail:.3g} (ratio {r:.4f})")


def check_assumption(profile: MixingProfile, params: AssumptionParameters, iota: float, kappa: float,
                     d: int) -> AssumptionReport:
    p, q, delta, m = params.p, params.q, params.delta, params.m
    clauses: List[ClauseReport] = []

    gap = kappa - d * _inv(p)
    clauses.append(ClauseReport(
        name="delta_bound", status=ClauseStatus.PASS if delta < gap else ClauseStatus.FAIL,
        value=gap - delta, detail=f"delta={delta} against kappa - d/p = {gap:.6g}",
    ))
    clauses.append(_series_clause(profile, q, p))
    clauses.append(ClauseReport(
        name="beta_series", status=ClauseStatus.PASS, value=float(profile.beta.sum()),
        detail="approximation rates vanish identically",
    ))
    finite = all(math.isfinite(v) for v in profile.moments.values())
    clauses.append(ClauseReport(
        name="moments", status=ClauseStatus.PASS if finite else ClauseStatus.INCONCLUSIVE,
        detail="bounded observable: every moment is finite" if finite else "unbounded observable",
    ))
    lhs = 1.0 / (2.0 + delta)
    rhs = _inv(p) + (iota + 2.0) * _inv(m) + delta * _inv(q)
    clauses.append(ClauseReport(
        name="exponent", status=ClauseStatus.PASS if lhs >= rhs else ClauseStatus.FAIL,
        value=lhs - rhs, detail=f"1/(2+delta) = {lhs:.6g} against {rhs:.6g}",
    ))
    return AssumptionReport(
        parameters={"p": p, "q": q, "delta": delta, "m": m, "iota": iota, "kappa": kappa, "d": float(d)},
        clauses=clauses, status=_status(clauses),
    )


SEARCH_GRID = {
    "p": (math.inf, 16.0, 8.0, 4.0, 2.0),
    "q": (math.inf, 16.0, 8.0, 4.0, 2.0),
    "delta": (0.5, 0.25, 0.1, 0.05),
    "m": (math.inf, 64.0, 16.0, 8.0),
}


def search_assumption(profile: MixingProfile, iota: float, kappa: float, d: int) -> Optional[AssumptionReport]:
    """First tuple of the search grid for which every clause passes."""
    for p, q, delta, m in itertools.product(*SEARCH_GRID.values()):
        report = check_assumption(profile, AssumptionParameters(p=p, q=q, delta=delta, m=m), iota, kappa, d)
        if report.status is ClauseStatus.PASS:
            return report
    return None
