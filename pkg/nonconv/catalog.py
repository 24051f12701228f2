"""
Named models and functions usable from configs and ``nonconv describe``.
"""
from typing import Callable, Dict, Union

from nonconv.exceptions import UnknownEntity
from nonconv.functional import FunctionSpec, from_description as function_from_description, product
from nonconv.mixing import mixing_profile
from nonconv.process import (
    ProcessModel,
    bernoulli,
    dyadic_map,
    finite_markov,
    from_description as process_from_description,
    second_eigenvalue,
)
from nonconv.schemas.process import DyadicObservable

# ----------------------------------------------------------------------
# ENTRIES
# ----------------------------------------------------------------------

MODELS: Dict[str, Callable[[], ProcessModel]] = {
    "two-state": lambda: finite_markov([[0.7, 0.3], [0.3, 0.7]], [0.0, 1.0], name="two-state"),
    "bernoulli": lambda: bernoulli(0.5, name="bernoulli"),
    "dyadic": lambda: dyadic_map(DyadicObservable(name="identity"), variation=1.0, name="dyadic"),
    "lazy-chain": lambda: finite_markov(
        [[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]], [-1.0, 0.0, 1.0], name="lazy-chain"
    ),
}

FUNCTIONS: Dict[str, Callable[[], FunctionSpec]] = {
    "identity": lambda: product(1),
    "product2": lambda: product(2),
    "product3": lambda: product(3),
}


# ----------------------------------------------------------------------
# LOOKUPS
# ----------------------------------------------------------------------

def resolve_model(entry) -> ProcessModel:
    """Catalog name or validated process description."""
    if isinstance(entry, str):
        if entry not in MODELS:
            raise UnknownEntity(f"unknown model '{entry}'")
        return MODELS[entry]()
    return process_from_description(entry)


def resolve_function(entry) -> FunctionSpec:
    if isinstance(entry, str):
        if entry not in FUNCTIONS:
            raise UnknownEntity(f"unknown function '{entry}'")
        return FUNCTIONS[entry]()
    return function_from_description(entry)


def describe(name: str, preview: int = 5) -> Dict[str, Union[str, float, list, dict]]:
    """
    Metadata for a catalog entry.  Finite models report pi, |lambda_2| and
    psi(1..preview).
    """
    if name in MODELS:
        model = MODELS[name]()
        out = model.describe()
        if model.transition is not None:
            profile = mixing_profile(model, depth=preview)
            out["second_eigenvalue"] = second_eigenvalue(model)
            out["psi"] = profile.psi[1:].tolist()
        return out
    if name in FUNCTIONS:
        spec = FUNCTIONS[name]()
        return {"name": name, "kind": spec.kind.value, **spec.to_dict()}
    raise UnknownEntity(f"unknown entity '{name}'")
