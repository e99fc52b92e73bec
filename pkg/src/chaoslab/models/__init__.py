"""Exactly computable Markov triples: cube, Ornstein-Uhlenbeck, Poisson."""

from .base import MarkovModel, ModelMismatchError, NotEigenfunctionError, Samples
from .chaos import (
    Chaos,
    ChaosSpec,
    ChaosSpecError,
    dump_spec,
    load_function,
    materialize_chaos,
    parse_spec,
    random_chaos,
    spec_norm_sq,
)
from .cube import CubeFunction, CubeModel, WalshPolynomial
from .ou import OUModel, PolyFunction, gaussian_moment, hermite_coefficients, hermite_norm_sq, hermite_product
from .poisson import BoundaryContaminationError, PoissonFunction, PoissonIntegral, PoissonModel


def build_model(tag: str, N: int = 1, theta=1) -> MarkovModel:
    if tag == "cube":
        return CubeModel(N)
    if tag == "ou":
        return OUModel(N)
    if tag == "poisson":
        return PoissonModel(theta)
    raise ValueError(f"unknown model tag {tag!r}")


__all__ = [
    "BoundaryContaminationError",
    "Chaos",
    "ChaosSpec",
    "ChaosSpecError",
    "CubeFunction",
    "CubeModel",
    "MarkovModel",
    "ModelMismatchError",
    "NotEigenfunctionError",
    "OUModel",
    "PoissonFunction",
    "PoissonIntegral",
    "PoissonModel",
    "PolyFunction",
    "Samples",
    "WalshPolynomial",
    "build_model",
    "dump_spec",
    "gaussian_moment",
    "hermite_coefficients",
    "hermite_norm_sq",
    "hermite_product",
    "load_function",
    "materialize_chaos",
    "parse_spec",
    "random_chaos",
    "spec_norm_sq",
]
