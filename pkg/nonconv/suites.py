"""
Acceptance suites and the experiment runner behind ``nonconv run``.

Each suite returns a SuiteReport and writes ``<suite>.json`` (plus CSV tables)
into the output directory.  The limit covariance, whenever a suite needs it,
is written once to ``covariance.json``; the covariance suite itself reports
into ``covariance_check.json``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, List, Optional

import numpy as np

from nonconv import __version__
from nonconv.asclt import SuiteResult, asclt_arcsine_suite, asclt_scalar_suite, lil_suite
from nonconv.blocks import negligibility_diagnostic, schedule_covering
from nonconv.catalog import resolve_function, resolve_model
from nonconv.config import settings
from nonconv.covariance import (
    CovarianceModel,
    covariance_drift,
    empirical_D,
    jackknife,
    kernel_R,
    limiting_D,
)
from nonconv.exceptions import EXIT_OK, EXIT_SUITE_FAILED, UnsupportedModel
from nonconv.functional import DecomposedFunction, FunctionSpec, check_growth, decompose
from nonconv.mixing import check_assumption, mixing_profile, search_assumption
from nonconv.models import ClauseStatus, Suite, Verdict
from nonconv.process import ProcessModel, sample_trajectory
from nonconv.schemas.experiment import ExperimentConfig
from nonconv.schemas.reports import SuiteReport
from nonconv.sums import xi_path
from nonconv.utils.logger import setup_logger
from nonconv.utils.parallel import map_replicas
from nonconv.utils.rng import derive_seed
from nonconv.utils.serialization import config_hash, write_csv, write_json

logger = setup_logger("nonconv.suites")

DEFAULT_BLOCK_GRID = [2**k for k in range(10, 21, 2)]
MIXING_DEPTH = 50


# ----------------------------------------------------------------------
# EXPERIMENT CONTEXT
# ----------------------------------------------------------------------

@dataclass
class Experiment:
    """Resolved config shared by the suites of one run; nothing in here is mutated by a suite."""
    config: ExperimentConfig
    out_dir: str
    threads: int = 1

    @property
    def seed(self) -> int:
        return self.config.seed

    @cached_property
    def model(self) -> ProcessModel:
        return resolve_model(self.config.model)

    @cached_property
    def function(self) -> FunctionSpec:
        return resolve_function(self.config.function)

    @cached_property
    def decomposed(self) -> DecomposedFunction:
        return decompose(self.function, self.model.marginal)

    @cached_property
    def config_hash(self) -> str:
        return config_hash(self.config.model_dump())

    @cached_property
    def covariance(self) -> CovarianceModel:
        h = self.config.horizon
        if self.model.has_exact_pair_laws:
            C = limiting_D(self.decomposed, self.model, U=h.U, threads=self.threads)
        else:
            C = empirical_D(self.model, self.decomposed, h.t, h.replicas, derive_seed(self.seed, "empirical-D"),
                            self.threads)
        self.write_covariance(C)
        return C

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def envelope(self, suite: Suite, verdict: Verdict, payload: dict, warning: bool = False,
                 messages: Optional[List[str]] = None, provenance: Optional[Dict[str, str]] = None) -> SuiteReport:
        return SuiteReport(
            suite=suite, verdict=verdict, warning=warning, messages=messages or [],
            config_hash=self.config_hash, code_version=__version__,
            provenance={"seed": str(self.seed), **(provenance or {})}, payload=payload,
        )

    def write_covariance(self, C: CovarianceModel) -> None:
        document = C.to_dict()
        document.update({
            "R11": kernel_R(C, 1.0, 1.0),
            "config_hash": self.config_hash,
            "code_version": __version__,
            "provenance": {"matrix": C.provenance.value, "seed": str(self.seed)},
        })
        write_json(self.path("covariance.json"), document)


def _write(exp: Experiment, name: str, report: SuiteReport) -> SuiteReport:
    write_json(exp.path(name), report)
    return report


def _covariance_provenance(C: CovarianceModel) -> Dict[str, str]:
    return {"covariance": C.provenance.value}


def _ks_csv(exp: Experiment, name: str, result: SuiteResult) -> None:
    rows = [(p.n, p.ks, p.threshold, int(p.passed)) for p in result.points]
    write_csv(exp.path(name), ["n", "ks", "threshold", "pass"], rows)


# ----------------------------------------------------------------------
# SUITES
# ----------------------------------------------------------------------

def variance_suite(exp: Experiment) -> SuiteReport:
    """Var(Xi(N)/sqrt(N)) over replicas against R(1,1)."""
    h = exp.config.horizon
    C = exp.covariance
    D_F = exp.decomposed
    N = h.N
    seed = derive_seed(exp.seed, "variance")

    def replica(r: int) -> float:
        traj = sample_trajectory(exp.model, D_F.arity * N, seed, replica=r)
        return float(xi_path(D_F, traj, N).values[-1] / math.sqrt(N))

    finals = np.asarray(map_replicas(replica, h.replicas, exp.threads))
    second, se = jackknife(finals ** 2)
    r11 = kernel_R(C, 1.0, 1.0)
    allowed = max(settings.SE_MULTIPLIER * float(se), settings.RELATIVE_TOLERANCE * abs(r11))
    verdict = Verdict.PASS if abs(float(second) - r11) <= allowed else Verdict.FAIL
    growth = check_growth(exp.function, exp.model.marginal, derive_seed(exp.seed, "growth"))
    messages = [] if growth.passed else [f"growth bound violated on {growth.violations} sampled tuples"]
    logger.info(f"variance: Var={float(second):.5f} +- {float(se):.5f}, R(1,1)={r11:.5f}, verdict={verdict.value}")
    write_csv(exp.path("variance_finals.csv"), ["replica", "value"], enumerate(finals.tolist()))
    payload = {
        "N": N, "replicas": h.replicas, "variance": float(second), "standard_error": float(se),
        "R11": r11, "allowed": allowed, "matrix": C.matrix.tolist(),
        "growth_check": {"checked": growth.checked, "violations": growth.violations, "max_ratio": growth.max_ratio},
    }
    return _write(exp, "variance.json", exp.envelope(Suite.VARIANCE, verdict, payload, messages=messages,
                                                     provenance=_covariance_provenance(C)))


def covariance_suite(exp: Experiment) -> SuiteReport:
    """Series D against the replica estimator, and the drift of E Psi_i Psi_j(t) - D_ij t."""
    h = exp.config.horizon
    C = exp.covariance
    D_F = exp.decomposed
    messages = []
    entries = []
    agree = True
    if C.standard_errors is None:
        emp = empirical_D(exp.model, D_F, h.t, h.replicas, derive_seed(exp.seed, "empirical-D"), exp.threads)
        for i in range(C.size):
            for j in range(i, C.size):
                gap = abs(emp.matrix[i, j] - C.matrix[i, j])
                allowed = max(settings.SE_MULTIPLIER * emp.standard_errors[i, j],
                              settings.RELATIVE_TOLERANCE * abs(C.matrix[i, j]))
                entries.append({"i": i + 1, "j": j + 1, "series": C.matrix[i, j], "empirical": emp.matrix[i, j],
                                "se": emp.standard_errors[i, j], "allowed": allowed, "agree": bool(gap <= allowed)})
                agree = agree and gap <= allowed
    else:
        messages.append("no exact pair laws: drift check only")
    t_grid = [max(1, h.t // 8), max(1, h.t // 4), max(1, h.t // 2), h.t]
    drift = covariance_drift(exp.model, D_F, C, t_grid, h.replicas, derive_seed(exp.seed, "drift"), exp.threads)
    verdict = Verdict.PASS if agree and drift["bounded"] else Verdict.FAIL
    logger.info(f"covariance: series/replica agreement={agree}, drift bounded={drift['bounded']}, "
                f"verdict={verdict.value}")
    payload = {"covariance": C.to_dict(), "comparison": entries, "drift": drift}
    return _write(exp, "covariance_check.json", exp.envelope(Suite.COVARIANCE, verdict, payload, messages=messages,
                                                             provenance=_covariance_provenance(C)))


def _asclt_like(exp: Experiment, suite: Suite, runner: Callable[..., SuiteResult]) -> SuiteReport:
    h = exp.config.horizon
    C = exp.covariance
    result = runner(exp.model, exp.decomposed, C, h.n_max, derive_seed(exp.seed, suite.value),
                    lanes=h.calibration_lanes, threads=exp.threads, paths=h.asclt_paths)
    if result.points:
        _ks_csv(exp, f"{suite.value}_ks.csv", result)
    provenance = {**_covariance_provenance(C), "thresholds": "fixed", "resolution": "pooled-gaussian-lanes"}
    return _write(exp, f"{suite.value}.json", exp.envelope(suite, result.verdict, result.payload(),
                                                          warning=result.warning, messages=result.messages,
                                                          provenance=provenance))


def asclt_suite(exp: Experiment) -> SuiteReport:
    return _asclt_like(exp, Suite.ASCLT, asclt_scalar_suite)


def arcsine_suite(exp: Experiment) -> SuiteReport:
    return _asclt_like(exp, Suite.ARCSINE, asclt_arcsine_suite)


def lil_run(exp: Experiment) -> SuiteReport:
    h = exp.config.horizon
    C = exp.covariance
    if not kernel_R(C, 1.0, 1.0) > 0.0:
        return _write(exp, "lil.json", exp.envelope(Suite.LIL, Verdict.FAIL, {"R11": kernel_R(C, 1.0, 1.0)},
                                                    messages=["limit variance R(1,1) is degenerate"]))
    result = lil_suite(exp.model, exp.decomposed, C, h.n_max, h.lil_seeds, derive_seed(exp.seed, "lil"),
                       lanes=h.calibration_lanes, threads=exp.threads)
    write_csv(exp.path("lil_maxima.csv"), ["seed", "max_abs_f"], enumerate(result.extra["maxima"]))
    provenance = {**_covariance_provenance(C), "band": "gaussian-lanes"}
    return _write(exp, "lil.json", exp.envelope(Suite.LIL, result.verdict, result.payload(), provenance=provenance))


def blocks_suite(exp: Experiment) -> SuiteReport:
    h = exp.config.horizon
    params = exp.config.blocks
    t_grid = h.t_grid or DEFAULT_BLOCK_GRID
    schedule = schedule_covering(params.eta, params.theta, params.tau, max(t_grid), params.delta)
    schedule.to_csv(exp.path("blocks_schedule.csv"))
    reports = negligibility_diagnostic(exp.decomposed, exp.model, schedule, t_grid, h.replicas,
                                       derive_seed(exp.seed, "blocks"), threads=exp.threads)
    verdict = Verdict.PASS if all(r.passed for r in reports) else Verdict.FAIL
    messages = ["tau >= delta/4 for the supplied delta"] if schedule.delta_flag else []
    logger.info(f"blocks: slopes {[round(r.slope, 4) for r in reports]}, verdict={verdict.value}")
    payload = {"schedule": schedule.to_dict(), "components": [r.model_dump() for r in reports]}
    return _write(exp, "blocks.json", exp.envelope(Suite.BLOCKS, verdict, payload, warning=schedule.delta_flag,
                                                   messages=messages))


def mixing_suite(exp: Experiment) -> SuiteReport:
    model = exp.model
    try:
        profile = mixing_profile(model, MIXING_DEPTH)
    except UnsupportedModel as e:
        logger.warning(f"mixing: {e.detail}")
        return _write(exp, "mixing.json", exp.envelope(Suite.MIXING, Verdict.INCONCLUSIVE, {"beta": 0.0},
                                                       warning=True, messages=[e.detail]))
    profile.to_csv(exp.path("mixing_profile.csv"))
    holder = exp.function.holder
    d = model.dimension * (exp.function.arity - 1)
    if exp.config.assumption is not None:
        report = check_assumption(profile, exp.config.assumption, holder.iota, holder.kappa, d)
    else:
        report = search_assumption(profile, holder.iota, holder.kappa, d)
    if report is None:
        verdict, assumption = Verdict.FAIL, None
    else:
        verdict = {ClauseStatus.PASS: Verdict.PASS, ClauseStatus.FAIL: Verdict.FAIL,
                   ClauseStatus.INCONCLUSIVE: Verdict.INCONCLUSIVE}[report.status]
        assumption = report.model_dump()
    logger.info(f"mixing: decay rate {profile.decay_rate:.4f}, verdict={verdict.value}")
    payload = {"profile": profile.to_dict(), "assumption": assumption}
    return _write(exp, "mixing.json", exp.envelope(Suite.MIXING, verdict, payload,
                                                   warning=verdict is Verdict.INCONCLUSIVE))


SUITES: Dict[Suite, Callable[[Experiment], SuiteReport]] = {
    Suite.VARIANCE: variance_suite,
    Suite.COVARIANCE: covariance_suite,
    Suite.ASCLT: asclt_suite,
    Suite.ARCSINE: arcsine_suite,
    Suite.LIL: lil_run,
    Suite.BLOCKS: blocks_suite,
    Suite.MIXING: mixing_suite,
}


# ----------------------------------------------------------------------
# RUNNER
# ----------------------------------------------------------------------

def run_experiment(config: ExperimentConfig, out_dir: Optional[str] = None, threads: int = 1):
    """Run the selected suites in their canonical order; returns (reports, exit code)."""
    exp = Experiment(config=config, out_dir=out_dir or config.output_dir, threads=threads)
    os.makedirs(exp.out_dir, exist_ok=True)
    selected = [s for s in Suite if s in config.suites]
    reports = [SUITES[suite](exp) for suite in selected]
    failed = [r.suite.value for r in reports if r.verdict is Verdict.FAIL]
    exit_code = EXIT_SUITE_FAILED if failed else EXIT_OK
    write_json(exp.path("summary.json"), {
        "suites": {r.suite.value: {"verdict": r.verdict.value, "warning": r.warning} for r in reports},
        "failed": failed,
        "exit_code": exit_code,
        "config_hash": exp.config_hash,
        "code_version": __version__,
        "provenance": {"seed": str(exp.seed), "model": exp.model.name, "function": exp.function.kind.value},
    })
    return reports, exit_code
