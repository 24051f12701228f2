"""
The function F, its centering constant and its martingale-type decomposition.

For a finite alphabet the full table T[a_1..a_l] = F(v_{a_1}, ..., v_{a_l})
is materialised and every partial integral is an exact contraction against
the marginal probabilities:

    G_l = T,   G_{k} = G_{k+1} . mu,   F_bar = G_0,   F_i = G_i - G_{i-1}.

For continuous laws F must be a sum of separable product terms; the factor
means are estimated once by fixed-seed Monte Carlo.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from nonconv.config import settings
from nonconv.exceptions import ArityMismatch, InvalidFunction, InvalidModel, TupleSpaceTooLarge
from nonconv.models import FunctionKind
from nonconv.process import MarginalLaw
from nonconv.schemas.function import (
    DenseTableDescription,
    HolderMetadata,
    IndicatorProductDescription,
    PolynomialDescription,
    PolynomialTerm,
    ProductDescription,
)
from nonconv.utils.logger import setup_logger
from nonconv.utils.rng import generator

logger = setup_logger("nonconv.functional")


# ============================================================
# FUNCTION SPEC
# ============================================================

@dataclass(frozen=True)
class SeparableTerm:
    """coefficient * prod_k factor_k(x_k); factors are (kind, payload) pairs evaluated by FunctionSpec."""
    coefficient: float
    factors: Tuple[Tuple[str, tuple], ...]


@dataclass(frozen=True, eq=False)
class FunctionSpec:
    """
    F : (R^dim)^arity -> R together with its Holder metadata.

    ``evaluate`` takes an array of shape (n, arity, dim) and returns (n,).
    """
    kind: FunctionKind
    arity: int
    dimension: int
    holder: HolderMetadata
    description: object
    terms: Optional[Tuple[SeparableTerm, ...]] = None

    # ---------------------------------------------------------- evaluation
    @staticmethod
    def _factor(factor: Tuple[str, tuple], x: np.ndarray) -> np.ndarray:
        name, payload = factor
        if name == "coordinate":
            return x[..., payload[0]]
        if name == "box":
            lower, upper = payload
            inside = (x >= np.asarray(lower)) & (x < np.asarray(upper))
            return inside.all(axis=-1).astype(float)
        if name == "monomial":
            return np.prod(x ** np.asarray(payload, dtype=float), axis=-1)
        raise InvalidFunction(f"unknown factor {name}")

    def factor_values(self, term: SeparableTerm, k: int, x: np.ndarray) -> np.ndarray:
        return self._factor(term.factors[k], x)

    def evaluate(self, args) -> np.ndarray:
        args = np.asarray(args, dtype=float)
        if args.ndim == 2:
            args = args[None]
        if args.shape[1:] != (self.arity, self.dimension):
            raise ArityMismatch(
                f"expected arguments of shape (n, {self.arity}, {self.dimension}), got {args.shape}"
            )
        if self.kind is FunctionKind.DENSE_TABLE:
            desc: DenseTableDescription = self.description
            alphabet = MarginalLaw.finite(desc.alphabet, np.ones(len(desc.alphabet)))
            order = _dense_order(desc, alphabet)
            idx = alphabet.index_of(args.reshape(-1, self.dimension)).reshape(args.shape[0], self.arity)
            table = np.asarray(desc.table).reshape((len(desc.alphabet),) * self.arity)
            return table[tuple(order[idx].T)]
        out = np.zeros(args.shape[0])
        for term in self.terms:
            value = np.full(args.shape[0], term.coefficient)
            for k in range(self.arity):
                value = value * self.factor_values(term, k, args[:, k, :])
            out += value
        return out

    def to_dict(self) -> dict:
        return self.description.model_dump()


def _dense_order(desc: DenseTableDescription, alphabet: MarginalLaw) -> np.ndarray:
    """Map from sorted-alphabet index to the row index used by ``desc.table``."""
    rows = np.asarray(desc.alphabet, dtype=float).reshape(len(desc.alphabet), -1)
    order = np.empty(len(desc.alphabet), dtype=np.int64)
    order[alphabet.index_of(rows)] = np.arange(len(desc.alphabet))
    return order


def from_description(desc) -> FunctionSpec:
    """Build a FunctionSpec from a validated function schema."""
    arity, dim = desc.arity, desc.dimension
    if isinstance(desc, ProductDescription):
        if desc.coordinate >= dim:
            raise InvalidFunction(f"coordinate {desc.coordinate} out of range for dimension {dim}")
        term = SeparableTerm(1.0, tuple(("coordinate", (desc.coordinate,)) for _ in range(arity)))
        return FunctionSpec(FunctionKind.PRODUCT, arity, dim, desc.holder, desc, (term,))
    if isinstance(desc, IndicatorProductDescription):
        box = (tuple(desc.lower), tuple(desc.upper))
        term = SeparableTerm(1.0, tuple(("box", box) for _ in range(arity)))
        return FunctionSpec(FunctionKind.INDICATOR_PRODUCT, arity, dim, desc.holder, desc, (term,))
    if isinstance(desc, PolynomialDescription):
        terms = tuple(
            SeparableTerm(t.coefficient, tuple(("monomial", tuple(p)) for p in t.powers)) for t in desc.terms
        )
        return FunctionSpec(FunctionKind.POLYNOMIAL, arity, dim, desc.holder, desc, terms)
    if isinstance(desc, DenseTableDescription):
        if len(set(map(tuple, desc.alphabet))) != len(desc.alphabet):
            raise InvalidFunction("dense table alphabet rows must be distinct")
        return FunctionSpec(FunctionKind.DENSE_TABLE, arity, dim, desc.holder, desc)
    raise InvalidFunction(f"unknown function description {type(desc).__name__}")


# ---------------------------------------------------------------- builders
def product(arity: int, coordinate: int = 0, dimension: int = 1,
            holder: Optional[HolderMetadata] = None) -> FunctionSpec:
    return from_description(ProductDescription(
        arity=arity, dimension=dimension, coordinate=coordinate, holder=holder or HolderMetadata()
    ))


def indicator_product(arity: int, lower: Sequence[float], upper: Sequence[float]) -> FunctionSpec:
    return from_description(IndicatorProductDescription(
        arity=arity, dimension=len(lower), lower=list(lower), upper=list(upper)
    ))


def polynomial(arity: int, terms: Sequence[Tuple[float, Sequence[Sequence[int]]]], dimension: int = 1) -> FunctionSpec:
    return from_description(PolynomialDescription(
        arity=arity, dimension=dimension,
        terms=[PolynomialTerm(coefficient=c, powers=[list(p) for p in powers]) for c, powers in terms],
    ))


def constant(value: float, arity: int, dimension: int = 1) -> FunctionSpec:
    return polynomial(arity, [(value, [[0] * dimension for _ in range(arity)])], dimension=dimension)


def dense_table(arity: int, alphabet, table) -> FunctionSpec:
    rows = [list(np.atleast_1d(np.asarray(a, dtype=float))) for a in alphabet]
    return from_description(DenseTableDescription(
        arity=arity, dimension=len(rows[0]), alphabet=rows, table=list(np.asarray(table, dtype=float).ravel())
    ))


# ============================================================
# DECOMPOSITION
# ============================================================

@dataclass(frozen=True, eq=False)
class DecomposedFunction:
    """
    F_bar and the components F_1..F_l.

    Finite laws: ``components[i-1]`` is the dense table of F_i with shape
    (s,)*i and ``table`` is F itself.  Continuous laws: ``factor_means``
    holds E f_{t,k}(X) for every separable term t and argument k.
    """
    spec: FunctionSpec
    law: MarginalLaw
    f_bar: float
    components: Optional[Tuple[np.ndarray, ...]] = None
    table: Optional[np.ndarray] = None
    factor_means: Optional[np.ndarray] = None
    standard_error: float = 0.0

    @property
    def arity(self) -> int:
        return self.spec.arity

    @property
    def is_exact(self) -> bool:
        return self.components is not None

    # ---------------------------------------------------------- symbols (finite laws)
    def component_on_symbols(self, i: int, symbols: np.ndarray) -> np.ndarray:
        """F_i at alphabet-index tuples, ``symbols`` of shape (n, i)."""
        return self.components[i - 1][tuple(np.asarray(symbols).T)]

    def evaluate_symbols(self, symbols: np.ndarray) -> np.ndarray:
        return self.table[tuple(np.asarray(symbols).T)]

    # ---------------------------------------------------------- values
    def component_on_values(self, i: int, values: np.ndarray) -> np.ndarray:
        """F_i at value tuples, ``values`` of shape (n, i, dim)."""
        values = np.asarray(values, dtype=float)
        if self.is_exact:
            n = values.shape[0]
            idx = self.law.index_of(values.reshape(-1, self.law.dimension)).reshape(n, i)
            return self.component_on_symbols(i, idx)
        out = np.zeros(values.shape[0])
        for t, term in enumerate(self.spec.terms):
            means = self.factor_means[t]
            value = np.full(values.shape[0], term.coefficient * np.prod(means[i:]))
            for k in range(i - 1):
                value = value * self.spec.factor_values(term, k, values[:, k, :])
            value = value * (self.spec.factor_values(term, i - 1, values[:, i - 1, :]) - means[i - 1])
            out += value
        return out

    def evaluate(self, values: np.ndarray) -> np.ndarray:
        """F itself at value tuples of shape (n, arity, dim)."""
        values = np.asarray(values, dtype=float)
        if self.is_exact:
            n = values.shape[0]
            idx = self.law.index_of(values.reshape(-1, self.law.dimension)).reshape(n, self.arity)
            return self.evaluate_symbols(idx)
        return self.spec.evaluate(values)

    def to_dict(self) -> dict:
        out = {"function": self.spec.to_dict(), "f_bar": self.f_bar, "exact": self.is_exact}
        if not self.is_exact:
            out["standard_error"] = self.standard_error
        return out


def _check_tuple_space(law: MarginalLaw, arity: int) -> None:
    size = law.size ** arity
    if size > settings.TUPLE_SPACE_LIMIT:
        raise TupleSpaceTooLarge(f"s^l = {law.size}^{arity} = {size} exceeds {settings.TUPLE_SPACE_LIMIT}")


def function_table(F: FunctionSpec, law: MarginalLaw) -> np.ndarray:
    """T[a_1..a_l] = F(v_{a_1}, ..., v_{a_l}) over the law's alphabet."""
    _check_tuple_space(law, F.arity)
    if F.dimension != law.dimension:
        raise ArityMismatch(f"function dimension {F.dimension} differs from observable dimension {law.dimension}")
    s, ell = law.size, F.arity
    if F.kind is FunctionKind.DENSE_TABLE:
        desc: DenseTableDescription = F.description
        own = MarginalLaw.finite(desc.alphabet, np.ones(len(desc.alphabet)))
        try:
            rows = _dense_order(desc, own)[own.index_of(law.values)]
        except InvalidModel as exc:
            raise InvalidFunction("dense table does not cover the observable alphabet") from exc
        full = np.asarray(desc.table, dtype=float).reshape((len(desc.alphabet),) * ell)
        return full[np.ix_(*([rows] * ell))]
    table = np.zeros((s,) * ell)
    for term in F.terms:
        block = np.array(term.coefficient)
        for k in range(ell):
            block = np.multiply.outer(block, F.factor_values(term, k, law.values))
        table += block
    return table


def _factor_means(F: FunctionSpec, law: MarginalLaw, samples: int, seed: int):
    rng = generator(seed)
    draws = law.sample(rng, samples)
    means = np.zeros((len(F.terms), F.arity))
    errors = np.zeros_like(means)
    for t, term in enumerate(F.terms):
        for k in range(F.arity):
            values = F.factor_values(term, k, draws)
            means[t, k] = values.mean()
            errors[t, k] = values.std(ddof=1) / np.sqrt(samples)
    return means, errors


def _separable_terms(F: FunctionSpec) -> None:
    if F.terms is None:
        raise InvalidFunction(f"{F.kind.value} functions need a finite alphabet")


def f_bar(F: FunctionSpec, law: MarginalLaw, mc_samples: Optional[int] = None,
          mc_seed: Optional[int] = None) -> float:
    """Integral of F against the l-fold product of the marginal law."""
    if law.is_finite:
        table = function_table(F, law)
        for _ in range(F.arity):
            table = table @ law.probabilities
        return float(table)
    _separable_terms(F)
    means, _ = _factor_means(F, law, mc_samples or settings.MC_SAMPLES, settings.MC_SEED if mc_seed is None else mc_seed)
    return float(sum(term.coefficient * np.prod(means[t]) for t, term in enumerate(F.terms)))


def decompose(F: FunctionSpec, law: MarginalLaw, mc_samples: Optional[int] = None,
              mc_seed: Optional[int] = None) -> DecomposedFunction:
    if law.is_finite:
        table = function_table(F, law)
        partial: List[np.ndarray] = [table]
        for _ in range(F.arity):
            partial.append(partial[-1] @ law.probabilities)
        partial.reverse()                       # partial[k] = G_k, a function of k arguments
        components = tuple(partial[i] - partial[i - 1][..., None] for i in range(1, F.arity + 1))
        for c in components:
            c.setflags(write=False)
        table.setflags(write=False)
        return DecomposedFunction(spec=F, law=law, f_bar=float(partial[0]), components=components, table=table)

    _separable_terms(F)
    samples = mc_samples or settings.MC_SAMPLES
    means, errors = _factor_means(F, law, samples, settings.MC_SEED if mc_seed is None else mc_seed)
    value = float(sum(term.coefficient * np.prod(means[t]) for t, term in enumerate(F.terms)))
    logger.debug(f"Monte Carlo factor means from {samples} samples, max SE {errors.max():.2e}")
    return DecomposedFunction(spec=F, law=law, f_bar=value, factor_means=means,
                              standard_error=float(errors.max()))


def eval_component(D: DecomposedFunction, i: int, args) -> float:
    """F_i(args) for an i-tuple of observable values."""
    if not 1 <= i <= D.arity:
        raise ArityMismatch(f"component index {i} outside 1..{D.arity}")
    values = np.asarray(args, dtype=float).reshape(-1, D.law.dimension)
    if values.shape[0] != i:
        raise ArityMismatch(f"F_{i} takes {i} arguments, got {values.shape[0]}")
    return float(D.component_on_values(i, values[None])[0])


# ============================================================
# GROWTH SPOT CHECK
# ============================================================

@dataclass(frozen=True)
class GrowthCheck:
    checked: int
    violations: int
    max_ratio: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def check_growth(F: FunctionSpec, law: MarginalLaw, seed: int, count: int = 1000) -> GrowthCheck:
    """
    Spot check |F(x)| <= K (1 + sum_j |x_j|^iota) on ``count`` random tuples drawn
    from the product law.
    """
    rng = generator(seed)
    draws = law.sample(rng, count * F.arity).reshape(count, F.arity, law.dimension)
    values = np.abs(F.evaluate(draws))
    norms = np.linalg.norm(draws, axis=2) ** F.holder.iota
    bound = F.holder.K * (1.0 + norms.sum(axis=1))
    ratio = values / bound
    violations = int(np.count_nonzero(ratio > 1.0 + 1e-12))
    if violations:
        logger.warning(f"growth bound violated on {violations} of {count} sampled tuples")
    return GrowthCheck(checked=count, violations=violations, max_ratio=float(ratio.max()))
