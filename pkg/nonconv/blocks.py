"""
Big/small block schedule and the block sums of the component paths.

Blocks tile the index axis: big block j is (a(j), b(j)], the following gap
is (b(j), a(j+1)].  Only the exactly measurable case is covered, so block
sums are sums of the raw component terms Y_i(il) = F_i(X(l), ..., X(il)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from nonconv.config import settings
from nonconv.exceptions import ParameterGateViolated, ScheduleTooShort, TooFewSamples
from nonconv.functional import DecomposedFunction
from nonconv.process import ProcessModel, sample_trajectory
from nonconv.schemas.reports import NegligibilityReport
from nonconv.sums import component_terms
from nonconv.utils.logger import setup_logger
from nonconv.utils.parallel import map_replicas
from nonconv.utils.serialization import write_csv

logger = setup_logger("nonconv.blocks")

FLOOR_EPS = 1e-12


def _floor_power(j: np.ndarray, exponent: float) -> np.ndarray:
    return np.floor(j.astype(float) ** exponent + FLOOR_EPS).astype(np.int64)


# ============================================================
# SCHEDULE
# ============================================================

@dataclass(frozen=True, eq=False)
class BlockSchedule:
    eta: float
    theta: float
    tau: float
    a: np.ndarray
    b: np.ndarray
    r: np.ndarray
    delta: Optional[float] = None

    @property
    def length(self) -> int:
        return int(self.a.size)

    @property
    def ends(self) -> np.ndarray:
        """a(j+1) = b(j) + floor(j^theta) for j = 1..J."""
        return self.b + _floor_power(np.arange(1, self.length + 1), self.theta)

    @property
    def delta_flag(self) -> bool:
        """True when a supplied delta is violated by tau >= delta/4."""
        return self.delta is not None and not self.tau < self.delta / 4.0

    def to_csv(self, path: str) -> str:
        j = np.arange(1, self.length + 1)
        return write_csv(path, ["j", "a", "b", "r"], zip(j.tolist(), self.a.tolist(), self.b.tolist(), self.r.tolist()))

    def to_dict(self) -> dict:
        return {"eta": self.eta, "theta": self.theta, "tau": self.tau, "delta": self.delta, "J": self.length}


def check_gate(eta: float, theta: float, tau: float) -> None:
    if not (4.0 * eta < 2.0 * theta < tau):
        raise ParameterGateViolated(f"need 4*eta < 2*theta < tau, got eta={eta}, theta={theta}, tau={tau}")


def build_schedule(eta: float, theta: float, tau: float, j_max: int, delta: Optional[float] = None,
                   strict: bool = True) -> BlockSchedule:
    """
    a(1) = 0, b(1) = 1, a(j) = b(j-1) + floor((j-1)^theta), b(j) = a(j) + floor(j^tau),
    r(j) = floor(j^eta) for j = 1..j_max.

    With ``strict`` a supplied delta must satisfy tau < delta/4; otherwise the
    violation is only recorded on the schedule.
    """
    check_gate(eta, theta, tau)
    if strict and delta is not None and not tau < delta / 4.0:
        raise ParameterGateViolated(f"need tau < delta/4, got tau={tau}, delta={delta}")
    if j_max < 1:
        raise ParameterGateViolated("schedule needs at least one block")
    j = np.arange(1, j_max + 1)
    big = _floor_power(j, tau)
    gap = _floor_power(j, theta)
    a = np.zeros(j_max, dtype=np.int64)
    a[1:] = np.cumsum(big + gap)[:-1]
    return BlockSchedule(eta=eta, theta=theta, tau=tau, a=a, b=a + big, r=_floor_power(j, eta), delta=delta)


def schedule_covering(eta: float, theta: float, tau: float, t: int, delta: Optional[float] = None) -> BlockSchedule:
    """Shortest power-of-two length schedule whose last gap ends beyond t."""
    j_max = 16
    while True:
        schedule = build_schedule(eta, theta, tau, j_max, delta, strict=False)
        if schedule.ends[-1] > t:
            return schedule
        j_max *= 2


def nu(schedule: BlockSchedule, t: int) -> int:
    """max{j : b(j) + floor(j^theta) <= t}, 0 when no block fits."""
    ends = schedule.ends
    if not ends[-1] > t:
        raise ScheduleTooShort(f"schedule of {schedule.length} blocks ends at {int(ends[-1])} <= t={t}")
    return int(np.searchsorted(ends, t, side="right"))


# ============================================================
# BLOCK SUMS
# ============================================================

def block_sums(D_F: DecomposedFunction, traj, schedule: BlockSchedule, i: int,
               j_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    V_i(j) = sum over a(j) < il <= b(j) and W_i(j) = sum over b(j) < il <= a(j+1)
    of Y_i(il), for j = 1..j_max.
    """
    if j_max > schedule.length:
        raise ScheduleTooShort(f"requested {j_max} blocks, schedule has {schedule.length}")
    if j_max < 1:
        return np.zeros(0), np.zeros(0)
    bounds = np.empty(2 * j_max + 1, dtype=np.int64)
    bounds[0:-1:2] = schedule.a[:j_max] // i
    bounds[1::2] = schedule.b[:j_max] // i
    bounds[-1] = schedule.ends[j_max - 1] // i
    count = int(bounds[-1])
    terms = np.append(component_terms(D_F, traj, i, count) if count else np.zeros(0), 0.0)
    sums = np.add.reduceat(terms, bounds[:-1])
    sums[np.diff(bounds) == 0] = 0.0
    return sums[0::2], sums[1::2]


# ============================================================
# NEGLIGIBILITY
# ============================================================

def _log_slope(t: np.ndarray, rms: np.ndarray) -> float:
    keep = rms > 0.0
    if np.count_nonzero(keep) < 2:
        return 0.0
    return float(stats.linregress(np.log(t[keep]), np.log(rms[keep])).slope)


def negligibility_diagnostic(D_F: DecomposedFunction, model: ProcessModel, schedule: BlockSchedule,
                             t_grid: Sequence[int], replicas: int, seed: int, i: Optional[int] = None,
                             threads: int = 1) -> List[NegligibilityReport]:
    """
    Replica RMS of t^{-1/2} |sum_{j <= nu(t)} W_i(j)| on ``t_grid`` and its
    log-log slope, with a delete-one-replica jackknife standard error.
    """
    if replicas < 50:
        raise TooFewSamples(f"negligibility diagnostic needs at least 50 replicas, got {replicas}")
    grid = np.asarray(sorted(int(t) for t in t_grid))
    t_max = int(grid[-1])
    counts = np.array([nu(schedule, int(t)) for t in grid])
    j_top = int(counts[-1])
    components = [i] if i is not None else list(range(1, D_F.arity + 1))

    def replica(rep: int) -> np.ndarray:
        traj = sample_trajectory(model, t_max, seed, replica=rep)
        out = np.zeros((len(components), grid.size))
        for row, comp in enumerate(components):
            if j_top == 0:
                continue
            _, W = block_sums(D_F, traj, schedule, comp, j_top)
            running = np.concatenate(([0.0], np.cumsum(W)))
            out[row] = running[counts] / np.sqrt(grid)
        return out

    scaled = np.stack(map_replicas(replica, replicas, threads))      # (replicas, components, grid)
    squares = scaled ** 2
    total = squares.sum(axis=0)
    reports = []
    for row, comp in enumerate(components):
        rms = np.sqrt(total[row] / replicas)
        if not np.any(rms > 0.0):
            reports.append(NegligibilityReport(
                component=comp, t_grid=grid.tolist(), rms=rms.tolist(), slope=0.0, slope_se=0.0, passed=True,
                note="small-block mass vanishes identically",
            ))
            continue
        slope = _log_slope(grid, rms)
        leave_one_out = np.array([
            _log_slope(grid, np.sqrt((total[row] - squares[r, row]) / (replicas - 1))) for r in range(replicas)
        ])
        se = float(math.sqrt((replicas - 1) / replicas * np.sum((leave_one_out - leave_one_out.mean()) ** 2)))
        passed = slope + settings.SE_MULTIPLIER * se < 0.0
        note = "tau >= delta/4 for the supplied delta" if schedule.delta_flag else ""
        reports.append(NegligibilityReport(
            component=comp, t_grid=grid.tolist(), rms=rms.tolist(), slope=slope, slope_se=se,
            passed=bool(passed), note=note,
        ))
        logger.debug(f"component {comp}: small-block slope {slope:.4f} +- {se:.4f}")
    return reports
