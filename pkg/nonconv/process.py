"""
Stationary processes X(n), their marginal law and their pair laws.

Three model families are supported: finite-state Markov chains started from
their invariant vector, i.i.d. sequences over a finite alphabet, and the
doubling map x -> 2x mod 1 under Lebesgue measure.  Observables are pushed
forward onto their distinct values, so every finite model exposes an
alphabet (s x dim) together with exact probabilities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from nonconv.exceptions import (
    InvalidModel,
    NotIrreducible,
    NotStochastic,
    Periodic,
    UnsupportedModel,
)
from nonconv.models import ModelKind, PairLawForm
from nonconv.schemas.process import (
    DyadicMapDescription,
    DyadicObservable,
    FiniteMarkovDescription,
    IIDDescription,
)
from nonconv.utils.logger import setup_logger
from nonconv.utils.rng import generator

logger = setup_logger("nonconv.process")

STOCHASTIC_TOL = 1e-12
MANTISSA_BITS = 53


# ============================================================
# LAWS
# ============================================================

@dataclass(frozen=True, eq=False)
class MarginalLaw:
    """
    Law of a single coordinate X(n).

    Finite laws carry an alphabet ``values`` (s x dim, lexicographically
    sorted distinct rows) and ``probabilities``.  Continuous laws carry a
    ``sampler(rng, count) -> (count, dim)`` and the ``support`` interval used
    for binning.
    """
    dimension: int
    values: Optional[np.ndarray] = None
    probabilities: Optional[np.ndarray] = None
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    support: Optional[Tuple[float, float]] = None

    @classmethod
    def finite(cls, values, probabilities) -> "MarginalLaw":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        alphabet, inverse = np.unique(values, axis=0, return_inverse=True)
        probs = np.bincount(inverse.ravel(), weights=np.asarray(probabilities, dtype=float),
                            minlength=alphabet.shape[0])
        keep = probs > 0.0
        alphabet, probs = alphabet[keep], probs[keep]
        alphabet.setflags(write=False)
        probs.setflags(write=False)
        return cls(dimension=alphabet.shape[1], values=alphabet, probabilities=probs)

    @classmethod
    def point(cls, value) -> "MarginalLaw":
        return cls.finite([np.atleast_1d(np.asarray(value, dtype=float))], [1.0])

    @property
    def is_finite(self) -> bool:
        return self.values is not None

    @property
    def size(self) -> int:
        if not self.is_finite:
            raise UnsupportedModel("continuous marginal law has no finite alphabet")
        return int(self.values.shape[0])

    def index_of(self, values: np.ndarray) -> np.ndarray:
        """Alphabet index of every row of ``values`` (rows must be alphabet members)."""
        values = np.asarray(values, dtype=float).reshape(-1, self.dimension)
        if not self.is_finite:
            raise UnsupportedModel("continuous marginal law has no finite alphabet")
        if self.dimension == 1:
            column = self.values[:, 0]
            idx = np.searchsorted(column, values[:, 0])
            idx = np.clip(idx, 0, column.shape[0] - 1)
            if not np.array_equal(column[idx], values[:, 0]):
                raise InvalidModel("values outside the observable alphabet")
            return idx
        lookup = {tuple(row): k for k, row in enumerate(self.values.tolist())}
        try:
            return np.array([lookup[tuple(row)] for row in values.tolist()], dtype=np.int64)
        except KeyError as exc:
            raise InvalidModel(f"value {exc.args[0]} outside the observable alphabet") from exc

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.is_finite:
            idx = _draw(self.probabilities, rng.random(count))
            return self.values[idx]
        return np.asarray(self.sampler(rng, count), dtype=float).reshape(count, self.dimension)

    def mean(self) -> np.ndarray:
        if self.is_finite:
            return self.probabilities @ self.values
        raise UnsupportedModel("mean of a continuous law requires Monte Carlo integration")

    def to_dict(self) -> dict:
        if self.is_finite:
            return {"alphabet": self.values.tolist(), "probabilities": self.probabilities.tolist()}
        return {"continuous": True, "support": list(self.support or ())}


@dataclass(frozen=True, eq=False)
class PairLaw:
    """
    Joint law of (X(n), X(n+m)) on alphabet x alphabet.

    ``table[a, b]`` is the probability of (values[a], values[b]), earlier
    coordinate first.  ``form`` tags the product and diagonal couplings.
    ``excess`` is the signed table minus the product of the marginals,
    computed without cancellation where the model allows it.
    """
    lag: int
    form: PairLawForm
    values: np.ndarray
    table: np.ndarray
    excess: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.excess is None:
            p = self.table.sum(axis=1)
            object.__setattr__(self, "excess", self.table - np.outer(p, p))

    @property
    def marginals(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.table.sum(axis=1), self.table.sum(axis=0)

    def transpose(self) -> "PairLaw":
        return PairLaw(lag=-self.lag, form=self.form, values=self.values, table=self.table.T, excess=self.excess.T)

    def total_variation(self, other: "PairLaw") -> float:
        return 0.5 * float(np.abs(self.table - other.table).sum())

    def to_dict(self) -> dict:
        return {
            "lag": self.lag,
            "form": self.form.value,
            "alphabet": self.values.tolist(),
            "table": self.table.tolist(),
        }


def diagonal_coupling(law: MarginalLaw, lag: int = 0) -> PairLaw:
    return PairLaw(lag=lag, form=PairLawForm.DIAGONAL, values=law.values, table=np.diag(law.probabilities))


def product_coupling(law: MarginalLaw, lag: int) -> PairLaw:
    p = law.probabilities
    return PairLaw(lag=lag, form=PairLawForm.PRODUCT, values=law.values, table=np.outer(p, p),
                   excess=np.zeros((p.size, p.size)))


# ============================================================
# MODEL
# ============================================================

@dataclass(frozen=True, eq=False)
class ProcessModel:
    """
    Immutable stationary process description.

    For finite models ``transition`` and ``stationary`` live on the state
    space, ``state_symbol[x]`` is the alphabet index of h(x), and
    ``marginal`` is the push-forward of the stationary vector.
    """
    kind: ModelKind
    name: str
    marginal: MarginalLaw
    transition: Optional[np.ndarray] = None
    stationary: Optional[np.ndarray] = None
    state_values: Optional[np.ndarray] = None
    state_symbol: Optional[np.ndarray] = None
    dyadic: Optional[DyadicObservable] = None
    variation: Optional[float] = None
    _deviation: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.marginal.dimension

    @property
    def state_count(self) -> int:
        if self.transition is None:
            raise UnsupportedModel(f"{self.kind.value} model has no finite state space")
        return int(self.transition.shape[0])

    @property
    def has_exact_pair_laws(self) -> bool:
        return self.kind in (ModelKind.FINITE_MARKOV, ModelKind.IID)

    @property
    def deviation(self) -> np.ndarray:
        """P - Pi, with Pi the matrix whose rows all equal the stationary vector."""
        if self._deviation is None:
            raise UnsupportedModel(f"{self.kind.value} model has no transition matrix")
        return self._deviation

    def describe(self) -> dict:
        out = {"name": self.name, "kind": self.kind.value, "marginal": self.marginal.to_dict()}
        if self.transition is not None:
            out["transition"] = self.transition.tolist()
            out["stationary"] = self.stationary.tolist()
        if self.dyadic is not None:
            out["observable"] = self.dyadic.model_dump()
        return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """X(1..L); ``values[n-1]`` is X(n).  ``symbols`` holds alphabet indices for finite models."""
    values: np.ndarray
    seed: int
    model: str
    symbols: Optional[np.ndarray] = None

    @property
    def length(self) -> int:
        return int(self.values.shape[0])


# ============================================================
# STATIONARY DISTRIBUTION
# ============================================================

def _check_stochastic(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise NotStochastic(f"transition matrix must be square, got shape {P.shape}")
    if not np.all(np.isfinite(P)) or np.any(P < 0.0):
        raise NotStochastic("transition matrix has negative or non-finite entries")
    worst = float(np.max(np.abs(P.sum(axis=1) - 1.0)))
    if worst > STOCHASTIC_TOL:
        raise NotStochastic(f"rows must sum to 1 (max deviation {worst:.3e})")
    return P


def period(P: np.ndarray) -> int:
    """gcd of return lengths, from BFS levels of an irreducible chain."""
    graph = csr_matrix(P > 0.0)
    level = shortest_path(graph, unweighted=True, indices=0)
    rows, cols = graph.nonzero()
    gaps = (level[rows] + 1 - level[cols]).astype(np.int64)
    return int(np.gcd.reduce(np.abs(gaps))) if gaps.size else 0


def stationary_distribution(P) -> np.ndarray:
    """
    Invariant probability vector of an irreducible aperiodic stochastic matrix.

    Solved as a linear system with the normalisation replacing one balance
    equation; power iteration is used when the residual is above tolerance.
    """
    P = _check_stochastic(P)
    s = P.shape[0]
    n_components, _ = connected_components(csr_matrix(P > 0.0), directed=True, connection="strong")
    if n_components != 1:
        raise NotIrreducible(f"chain has {n_components} communicating classes")
    d = period(P)
    if d != 1:
        raise Periodic(f"chain has period {d}")

    A = P.T - np.eye(s)
    A[-1, :] = 1.0
    rhs = np.zeros(s)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        pi = np.full(s, 1.0 / s)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()

    if np.max(np.abs(pi @ P - pi)) > STOCHASTIC_TOL:
        logger.debug("linear solve residual above tolerance, falling back to power iteration")
        for _ in range(100_000):
            nxt = pi @ P
            nxt /= nxt.sum()
            if np.max(np.abs(nxt - pi)) <= STOCHASTIC_TOL * 1e-2:
                pi = nxt
                break
            pi = nxt
    return pi


# ============================================================
# CONSTRUCTION
# ============================================================

def _pushforward(state_values: np.ndarray, weights: np.ndarray):
    alphabet, inverse = np.unique(state_values, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    probs = np.bincount(inverse, weights=weights, minlength=alphabet.shape[0])
    return alphabet, probs, inverse


def _freeze(*arrays):
    for a in arrays:
        if a is not None:
            a.setflags(write=False)


def finite_markov(transition, observable=None, name: str = "finite-markov") -> ProcessModel:
    P = _check_stochastic(transition)
    s = P.shape[0]
    if observable is None:
        observable = np.arange(s, dtype=float)
    h = np.asarray(observable, dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    if h.shape[0] != s:
        raise InvalidModel(f"observable table has {h.shape[0]} rows for {s} states")
    pi = stationary_distribution(P)
    alphabet, probs, symbol = _pushforward(h, pi)
    marginal = MarginalLaw(dimension=h.shape[1], values=alphabet, probabilities=probs)
    deviation = P - pi[None, :]
    _freeze(P, pi, h, alphabet, probs, symbol, deviation)
    logger.debug(f"built finite Markov model '{name}' with {s} states, alphabet size {alphabet.shape[0]}")
    return ProcessModel(
        kind=ModelKind.FINITE_MARKOV, name=name, marginal=marginal, transition=P, stationary=pi,
        state_values=h, state_symbol=symbol, _deviation=deviation,
    )


def iid(probabilities, observable, name: str = "iid") -> ProcessModel:
    """I.i.d. model; states are the distinct observable values with positive mass."""
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or np.any(p < 0.0) or not np.all(np.isfinite(p)):
        raise NotStochastic("probability vector must be finite and nonnegative")
    if abs(p.sum() - 1.0) > STOCHASTIC_TOL:
        raise NotStochastic(f"probabilities sum to {p.sum():.15g}, expected 1")
    h = np.asarray(observable, dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    if h.shape[0] != p.shape[0]:
        raise InvalidModel("one observable row per alphabet symbol is required")
    law = MarginalLaw.finite(h, p)
    pi = np.array(law.probabilities)
    P = np.tile(pi, (pi.shape[0], 1))
    symbol = np.arange(pi.shape[0])
    deviation = np.zeros_like(P)
    _freeze(P, pi, symbol, deviation)
    return ProcessModel(
        kind=ModelKind.IID, name=name, marginal=law, transition=P, stationary=pi,
        state_values=law.values, state_symbol=symbol, _deviation=deviation,
    )


def bernoulli(p: float, name: Optional[str] = None) -> ProcessModel:
    if not 0.0 <= p <= 1.0:
        raise InvalidModel(f"Bernoulli parameter {p} outside [0, 1]")
    return iid([1.0 - p, p], [0.0, 1.0], name=name or f"bernoulli({p:g})")


def _dyadic_apply(obs: DyadicObservable, x: np.ndarray) -> np.ndarray:
    if obs.name == "identity":
        return x
    if obs.name == "indicator":
        return (x < obs.threshold).astype(float)
    if obs.name == "cosine":
        return np.cos(2.0 * math.pi * x)
    raise InvalidModel(f"observable {obs.name} is evaluated on digits, not on points")


def dyadic_map(observable: Optional[DyadicObservable] = None, variation: Optional[float] = None,
               name: str = "dyadic") -> ProcessModel:
    obs = observable or DyadicObservable()
    if obs.name == "indicator":
        marginal = MarginalLaw.finite([[0.0], [1.0]], [1.0 - obs.threshold, obs.threshold])
    elif obs.name == "binary_digit":
        marginal = MarginalLaw.finite([[0.0], [1.0]], [0.5, 0.5])
    else:
        support = (0.0, 1.0) if obs.name == "identity" else (-1.0, 1.0)
        marginal = MarginalLaw(
            dimension=1,
            sampler=lambda rng, count: _dyadic_apply(obs, rng.random(count))[:, None],
            support=support,
        )
    return ProcessModel(kind=ModelKind.DYADIC_MAP, name=name, marginal=marginal, dyadic=obs, variation=variation)


def from_description(desc, name: Optional[str] = None) -> ProcessModel:
    """Build a model from a validated process schema."""
    if isinstance(desc, FiniteMarkovDescription):
        return finite_markov(desc.transition, desc.observable, name=name or "finite-markov")
    if isinstance(desc, IIDDescription):
        if desc.bernoulli is not None:
            return bernoulli(desc.bernoulli, name=name)
        return iid(desc.probabilities, desc.observable, name=name or "iid")
    if isinstance(desc, DyadicMapDescription):
        return dyadic_map(desc.observable, desc.variation, name=name or "dyadic")
    raise InvalidModel(f"unknown process description {type(desc).__name__}")


# ============================================================
# SAMPLING
# ============================================================

def _draw(probabilities: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probabilities)
    idx = np.searchsorted(cum, uniforms, side="right")
    return np.minimum(idx, probabilities.shape[0] - 1)


def _markov_states(P: np.ndarray, pi: np.ndarray, length: int, rng: np.random.Generator) -> np.ndarray:
    """
    State path of a stationary chain.

    Each step is a map x -> next(x, u_k) on the state space; a chunk of maps
    is composed with a log-depth prefix scan so the whole path is produced
    by array operations.
    """
    s = P.shape[0]
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    states = np.empty(length, dtype=np.int64)
    states[0] = int(_draw(pi, rng.random(1))[0])
    uniforms = rng.random(length - 1)
    chunk = max(256, min(1 << 16, (1 << 22) // (s * s)))

    current = states[0]
    for start in range(0, length - 1, chunk):
        u = uniforms[start:start + chunk]
        maps = (u[:, None, None] >= cum[None, :, :]).sum(axis=2)
        np.minimum(maps, s - 1, out=maps)
        d = 1
        while d < maps.shape[0]:
            maps[d:] = np.take_along_axis(maps[d:], maps[:-d], axis=1)
            d <<= 1
        states[start + 1:start + 1 + maps.shape[0]] = maps[:, current]
        current = states[start + maps.shape[0]]
    return states


def _dyadic_values(obs: DyadicObservable, length: int, rng: np.random.Generator) -> np.ndarray:
    """
    Orbit of x -> 2x mod 1 read through a sliding window of fair bits.

    x_n = sum_k b_{n+k-1} 2^-k over 53 bits, so x_{n+1} = 2 x_n mod 1 except
    for one fresh lowest bit.  Sums of distinct powers of two are exact.
    """
    bits = rng.integers(0, 2, size=length + MANTISSA_BITS - 1, dtype=np.uint8)
    if obs.name == "binary_digit":
        return bits[obs.digit - 1:obs.digit - 1 + length].astype(float)
    x = np.zeros(length)
    for k in range(1, MANTISSA_BITS + 1):
        x += bits[k - 1:k - 1 + length] * math.ldexp(1.0, -k)
    return _dyadic_apply(obs, x)


def sample_trajectory(model: ProcessModel, length: int, seed: int, replica: Optional[int] = None) -> Trajectory:
    """
    Stationary trajectory X(1..length); identical for identical (model, length, seed, replica).

    ``replica`` selects an independent stream of the same seed.
    """
    if length < 1:
        raise InvalidModel(f"trajectory length must be positive, got {length}")
    rng = generator(seed) if replica is None else generator(seed, replica)
    if model.kind is ModelKind.FINITE_MARKOV:
        states = _markov_states(model.transition, model.stationary, length, rng)
        symbols = model.state_symbol[states]
    elif model.kind is ModelKind.IID:
        symbols = _draw(model.stationary, rng.random(length))
    elif model.kind is ModelKind.DYADIC_MAP:
        values = _dyadic_values(model.dyadic, length, rng)[:, None]
        symbols = model.marginal.index_of(values) if model.marginal.is_finite else None
        return Trajectory(values=values, seed=seed, model=model.name, symbols=symbols)
    else:
        raise InvalidModel(f"unknown model kind {model.kind}")
    values = model.marginal.values[symbols]
    return Trajectory(values=values, seed=seed, model=model.name, symbols=symbols)


def trajectory_from_values(model: ProcessModel, values, seed: int = 0) -> Trajectory:
    """Wrap a given path (e.g. hand-written test data) as a Trajectory of ``model``."""
    arr = np.asarray(values, dtype=float).reshape(-1, model.dimension)
    symbols = model.marginal.index_of(arr) if model.marginal.is_finite else None
    return Trajectory(values=arr, seed=seed, model=model.name, symbols=symbols)


# ============================================================
# PAIR LAWS
# ============================================================

def _state_to_alphabet(model: ProcessModel) -> np.ndarray:
    A = np.zeros((model.state_count, model.marginal.size))
    A[np.arange(model.state_count), model.state_symbol] = 1.0
    return A


def _markov_pair_law(model: ProcessModel, m: int, deviation_power: np.ndarray) -> PairLaw:
    A = _state_to_alphabet(model)
    excess = A.T @ (model.stationary[:, None] * deviation_power) @ A
    p = model.marginal.probabilities
    return PairLaw(lag=m, form=PairLawForm.TABLE, values=model.marginal.values,
                   table=np.outer(p, p) + excess, excess=excess)


def pair_law(model: ProcessModel, m: int) -> PairLaw:
    """
    Exact law of (X(n), X(n+m)).

    Uses P^m = Pi + (P - Pi)^m for m >= 1, so the deviation from the product
    coupling decays without a rounding floor.
    """
    if m < 0:
        raise InvalidModel(f"lag must be nonnegative, got {m}")
    if not model.has_exact_pair_laws:
        raise UnsupportedModel(f"{model.kind.value} has no closed-form pair law; use empirical_pair_law")
    if m == 0:
        return diagonal_coupling(model.marginal, 0)
    if model.kind is ModelKind.IID:
        return product_coupling(model.marginal, m)
    power = np.linalg.matrix_power(model.deviation, m)
    return _markov_pair_law(model, m, power)


class PairLawProvider:
    """
    Eagerly built lag -> PairLaw table for lags 0..max_lag.

    Deviation powers are accumulated one multiplication per lag; the table is
    read-only afterwards and may be shared between threads.
    """

    def __init__(self, model: ProcessModel, max_lag: int):
        if not model.has_exact_pair_laws:
            raise UnsupportedModel(f"{model.kind.value} has no closed-form pair law")
        self.model = model
        self.max_lag = int(max_lag)
        laws = [diagonal_coupling(model.marginal, 0)]
        if model.kind is ModelKind.IID:
            laws.extend(product_coupling(model.marginal, m) for m in range(1, self.max_lag + 1))
        else:
            power = np.eye(model.state_count)
            for m in range(1, self.max_lag + 1):
                power = power @ model.deviation
                laws.append(_markov_pair_law(model, m, power))
        self._laws: Tuple[PairLaw, ...] = tuple(laws)

    def __call__(self, m: int) -> PairLaw:
        law = self._laws[abs(m)] if abs(m) <= self.max_lag else pair_law(self.model, abs(m))
        return law.transpose() if m < 0 else law


def pair_law_provider(model: ProcessModel, max_lag: int) -> PairLawProvider:
    return PairLawProvider(model, max_lag)


def empirical_pair_law(model: ProcessModel, m: int, sample_count: int, seed: int, bins: int = 20) -> PairLaw:
    """
    Histogram estimate of the law of (X(n), X(n+m)) from one stationary trajectory.

    Pairs are taken cyclically so both marginals are the same empirical law.
    Continuous observables are binned into ``bins`` equal cells of their
    support; bin centres become the alphabet.
    """
    if sample_count < 10**4:
        raise InvalidModel(f"empirical pair law needs at least 10^4 samples, got {sample_count}")
    if m < 0:
        raise InvalidModel(f"lag must be nonnegative, got {m}")
    if m == 0 and model.marginal.is_finite:
        return diagonal_coupling(model.marginal, 0)

    traj = sample_trajectory(model, sample_count, seed)
    if model.marginal.is_finite:
        symbols = traj.symbols
        values = model.marginal.values
    else:
        if model.dimension != 1:
            raise UnsupportedModel("binning is implemented for scalar continuous observables")
        lo, hi = model.marginal.support
        edges = np.linspace(lo, hi, bins + 1)
        symbols = np.clip(np.searchsorted(edges, traj.values[:, 0], side="right") - 1, 0, bins - 1)
        values = (0.5 * (edges[:-1] + edges[1:]))[:, None]
    s = values.shape[0]
    follow = np.roll(symbols, -m)
    table = np.bincount(symbols * s + follow, minlength=s * s).reshape(s, s) / float(sample_count)
    form = PairLawForm.DIAGONAL if m == 0 else PairLawForm.TABLE
    return PairLaw(lag=m, form=form, values=values, table=table)


def second_eigenvalue(model: ProcessModel) -> float:
    """|lambda_2| of the transition matrix (0 for i.i.d. models)."""
    if model.kind is ModelKind.IID:
        return 0.0
    if model.kind is not ModelKind.FINITE_MARKOV:
        raise UnsupportedModel("second eigenvalue is defined for finite chains only")
    if model.state_count == 1:
        return 0.0
    moduli = np.sort(np.abs(np.linalg.eigvals(model.transition)))[::-1]
    return float(moduli[1])

