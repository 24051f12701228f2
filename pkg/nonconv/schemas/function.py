# nonconv/schemas/function.py

from typing import Annotated, List, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# ==========================================================
#                  FUNCTION DESCRIPTIONS
# ==========================================================

class HolderMetadata(BaseModel):
    """
    Regularity constants (iota, kappa, K) of the growth and Holder conditions.
    Recorded verbatim; only spot-checked by sampling.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    iota: float = Field(0.0, ge=0.0, description="Polynomial growth exponent")
    kappa: float = Field(1.0, gt=0.0, le=1.0, description="Holder exponent")
    K: float = Field(1.0, gt=0.0, description="Growth / Holder constant")


class _FunctionBase(BaseModel):
    model_config = ConfigDict(extra="forbid")

    arity: int = Field(..., ge=1, description="Number of arguments l")
    dimension: int = Field(1, ge=1, description="Argument dimension")
    holder: HolderMetadata = Field(default_factory=HolderMetadata)


class ProductDescription(_FunctionBase):
    """F = x_1[c] * x_2[c] * ... * x_l[c]."""
    kind: Literal["product"] = "product"
    coordinate: int = Field(0, ge=0)


class IndicatorProductDescription(_FunctionBase):
    """F = prod_k 1{x_k in A} with A the half-open box [lower, upper)."""
    kind: Literal["indicator_product"] = "indicator_product"
    lower: List[float]
    upper: List[float]

    @model_validator(mode="after")
    def check_box(self):
        if len(self.lower) != self.dimension or len(self.upper) != self.dimension:
            raise ValueError("box bounds must have one entry per coordinate")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("box must satisfy lower < upper in every coordinate")
        return self


class PolynomialTerm(BaseModel):
    model_config = ConfigDict(extra="forbid")

    coefficient: float
    powers: List[List[int]] = Field(..., description="powers[k][c]: exponent of coordinate c of argument k")


class PolynomialDescription(_FunctionBase):
    kind: Literal["polynomial"] = "polynomial"
    terms: List[PolynomialTerm] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_shapes(self):
        for term in self.terms:
            if len(term.powers) != self.arity or any(len(p) != self.dimension for p in term.powers):
                raise ValueError("each term needs an arity x dimension table of powers")
            if any(e < 0 for row in term.powers for e in row):
                raise ValueError("powers must be nonnegative")
        return self


class DenseTableDescription(_FunctionBase):
    """F tabulated over alphabet^arity, row-major with the last argument fastest."""
    kind: Literal["dense_table"] = "dense_table"
    alphabet: List[List[float]]
    table: List[float]

    @field_validator("alphabet", mode="before")
    @classmethod
    def rows(cls, value):
        if isinstance(value, list) and value and not isinstance(value[0], (list, tuple)):
            return [[v] for v in value]
        return value

    @model_validator(mode="after")
    def check_table(self):
        if len(self.table) != len(self.alphabet) ** self.arity:
            raise ValueError("table must cover all s^arity tuples")
        if any(len(v) != self.dimension for v in self.alphabet):
            raise ValueError("alphabet rows must have the declared dimension")
        return self


FunctionDescription = Annotated[
    Union[ProductDescription, IndicatorProductDescription, PolynomialDescription, DenseTableDescription],
    Field(discriminator="kind"),
]
