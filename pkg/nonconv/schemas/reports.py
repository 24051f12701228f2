# nonconv/schemas/reports.py

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from nonconv.models import ClauseStatus, Provenance, Suite, Verdict


# ==========================================================
#                     SUITE REPORTS
# ==========================================================

class KSPoint(BaseModel):
    """One checkpoint of a KS trajectory: {n, ks, threshold, pass}."""
    model_config = ConfigDict(populate_by_name=True)

    n: int
    ks: float
    threshold: float
    passed: bool = Field(..., serialization_alias="pass")


class CovarianceSummary(BaseModel):
    matrix: List[List[float]]
    provenance: Provenance
    U: Optional[int] = None
    tail_estimate: Optional[float] = None
    standard_errors: Optional[List[List[float]]] = None
    note: str = ""


class ClauseReport(BaseModel):
    name: str
    status: ClauseStatus
    value: Optional[float] = None
    detail: str = ""


class AssumptionReport(BaseModel):
    parameters: Dict[str, float]
    clauses: List[ClauseReport]
    status: ClauseStatus


class NegligibilityReport(BaseModel):
    component: int
    t_grid: List[int]
    rms: List[float]
    slope: float
    slope_se: float
    passed: bool
    note: str = ""


class SuiteReport(BaseModel):
    """
    Envelope written for every suite. ``payload`` holds the suite specific
    content; the remaining fields make every file self-describing.
    """
    suite: Suite
    verdict: Verdict
    warning: bool = False
    messages: List[str] = []
    config_hash: str
    code_version: str
    provenance: Dict[str, str] = {}
    payload: Dict[str, Any] = {}
