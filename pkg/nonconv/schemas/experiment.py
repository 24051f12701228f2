# nonconv/schemas/experiment.py

import math
from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from nonconv.models import Suite
from nonconv.schemas.function import FunctionDescription
from nonconv.schemas.process import ProcessDescription


# ==========================================================
#                  EXPERIMENT CONFIGURATION
# ==========================================================

class Horizon(BaseModel):
    """
    Horizon parameters shared by the suites.
    """
    model_config = ConfigDict(extra="forbid")

    N: int = Field(10**5, ge=1, description="Length of Xi paths for the variance suite")
    t: int = Field(10**5, ge=1, description="Time t of the empirical covariance estimator")
    n_max: int = Field(10**6, ge=3, description="Last index k of the log-averaged measures")
    replicas: int = Field(200, ge=2, description="Independent replicas for ensemble estimators")
    U: int = Field(200, ge=1, description="Truncation radius of the covariance series")
    lil_seeds: int = Field(20, ge=1, description="Independent paths for the LIL suite")
    calibration_lanes: Optional[int] = Field(None, ge=2, description="Gaussian lanes pooled to check the horizon")
    asclt_paths: Optional[int] = Field(None, ge=1, description="Independent paths pooled by the log-averaged suites")
    t_grid: Optional[List[int]] = Field(None, description="Time grid of the blocks diagnostic")


class BlockParameters(BaseModel):
    model_config = ConfigDict(extra="forbid")

    eta: float = Field(0.04, gt=0.0)
    theta: float = Field(0.10, gt=0.0)
    tau: float = Field(0.24, gt=0.0)
    delta: Optional[float] = Field(None, gt=0.0)


class AssumptionParameters(BaseModel):
    """(p, q, delta, m) of the summability assumption; absent values are searched."""
    model_config = ConfigDict(extra="forbid")

    p: float = Field(math.inf, ge=1.0)
    q: float = Field(math.inf, ge=1.0)
    delta: float = Field(0.5, gt=0.0)
    m: float = Field(math.inf, gt=0.0)


class ExperimentConfig(BaseModel):
    """
    One experiment: a process, a function, the suites to run and a seed.
    Unknown keys are rejected; the seed is mandatory.
    """
    model_config = ConfigDict(extra="forbid")

    model: Union[str, ProcessDescription] = Field(..., description="Catalog name or process description")
    function: Union[str, FunctionDescription] = Field(..., description="Catalog name or function description")
    suites: List[Suite] = Field(..., min_length=1)
    horizon: Horizon = Field(default_factory=Horizon)
    blocks: BlockParameters = Field(default_factory=BlockParameters)
    assumption: Optional[AssumptionParameters] = None
    seed: int = Field(..., ge=0, lt=2**64)
    output_dir: str = "results"

    @model_validator(mode="after")
    def unique_suites(self):
        if len(set(self.suites)) != len(self.suites):
            raise ValueError("suites must not repeat")
        return self
