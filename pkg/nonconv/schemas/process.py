# nonconv/schemas/process.py

from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _as_rows(value):
    """Accept a scalar observable table [h(0), h(1), ...] as rows of width 1."""
    if isinstance(value, list) and value and not isinstance(value[0], (list, tuple)):
        return [[v] for v in value]
    return value


# ==========================================================
#                  PROCESS DESCRIPTIONS
# ==========================================================

class FiniteMarkovDescription(BaseModel):
    """
    Stationary finite-state Markov chain started from its invariant vector.
    """
    model_config = ConfigDict(extra="forbid")

    kind: Literal["finite_markov"] = "finite_markov"
    transition: List[List[float]] = Field(..., description="Row-stochastic s x s transition matrix")
    observable: List[List[float]] = Field(..., description="Observable table h: state -> R^dim")

    @field_validator("observable", mode="before")
    @classmethod
    def rows(cls, value):
        return _as_rows(value)


class IIDDescription(BaseModel):
    """
    I.i.d. sequence over a finite alphabet, or the Bernoulli(p) family.
    """
    model_config = ConfigDict(extra="forbid")

    kind: Literal["iid"] = "iid"
    bernoulli: Optional[float] = Field(None, ge=0.0, le=1.0, description="Bernoulli success probability")
    probabilities: Optional[List[float]] = Field(None, description="Probability vector over the alphabet")
    observable: Optional[List[List[float]]] = Field(None, description="Alphabet values, one row per symbol")

    @field_validator("observable", mode="before")
    @classmethod
    def rows(cls, value):
        return _as_rows(value)

    @model_validator(mode="after")
    def check_form(self):
        if self.bernoulli is None and (self.probabilities is None or self.observable is None):
            raise ValueError("iid model needs either 'bernoulli' or both 'probabilities' and 'observable'")
        if self.bernoulli is not None and (self.probabilities is not None or self.observable is not None):
            raise ValueError("'bernoulli' cannot be combined with 'probabilities'/'observable'")
        return self


class DyadicObservable(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Literal["identity", "indicator", "binary_digit", "cosine"] = "identity"
    threshold: float = Field(0.5, gt=0.0, lt=1.0, description="c in 1{x < c}")
    digit: int = Field(1, ge=1, le=52, description="Index k of the binary digit")


class DyadicMapDescription(BaseModel):
    """
    Doubling map x -> 2x mod 1 with Lebesgue invariant law.
    """
    model_config = ConfigDict(extra="forbid")

    kind: Literal["dyadic_map"] = "dyadic_map"
    observable: DyadicObservable = Field(default_factory=DyadicObservable)
    variation: Optional[float] = Field(None, ge=0.0, description="Declared total variation of the observable")


ProcessDescription = Annotated[
    Union[FiniteMarkovDescription, IIDDescription, DyadicMapDescription],
    Field(discriminator="kind"),
]
