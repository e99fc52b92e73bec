"""Homogeneous chaos specifications, their materialisation, and text I/O.

A :class:`ChaosSpec` lists coefficients in one of three forms:

``product``
    strictly increasing index tuples ``(i_1 < ... < i_k)``; the function is
    ``sum a_I x_{i_1} ... x_{i_k}`` (cube or OU).
``hermite``
    OU multi-indices with ``|k| = k``; the function is ``sum a_k He_k`` with
    monic Hermite factors.
``charlier``
    a single Poisson degree ``(k,)``; the function is ``a c_k`` (monic Charlier).

``scale_sq`` records an optional irrational normalising constant: the intended
function is ``sqrt(scale_sq) * F`` where ``F`` has rational coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Mapping

import numpy as np

from ..rational import as_fraction, format_rational, parse_rational
from .base import MarkovModel, NotEigenfunctionError
from .cube import CubeFunction, CubeModel
from .ou import OUModel, PolyFunction, hermite_norm_sq, hermite_product
from .poisson import PoissonFunction, PoissonModel

MODEL_TAGS = ("cube", "ou", "poisson")
FORMS = ("product", "hermite", "charlier")


class ChaosSpecError(ValueError):
    """Malformed chaos specification."""


@dataclass(frozen=True)
class ChaosSpec:
    model: str
    N: int
    k: int
    coefficients: Mapping[tuple[int, ...], Fraction]
    form: str = "product"
    theta: Fraction = Fraction(1)
    scale_sq: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", {tuple(i): as_fraction(c) for i, c in self.coefficients.items()})
        object.__setattr__(self, "theta", as_fraction(self.theta))
        object.__setattr__(self, "scale_sq", as_fraction(self.scale_sq))
        self.validate()

    def validate(self):
        if self.model not in MODEL_TAGS:
            raise ChaosSpecError(f"unknown model {self.model!r}")
        if self.form not in FORMS:
            raise ChaosSpecError(f"unknown form {self.form!r}")
        if self.k < 1:
            raise ChaosSpecError("degree must be >= 1")
        if self.scale_sq <= 0:
            raise ChaosSpecError("scale_sq must be positive")
        if not any(self.coefficients.values()):
            raise ChaosSpecError("coefficient map is empty")
        if self.form == "product":
            if self.model == "poisson":
                raise ChaosSpecError("product form is not available on the Poisson model")
            if self.k > self.N:
                raise ChaosSpecError(f"degree {self.k} exceeds dimension {self.N}")
            for idx in self.coefficients:
                if len(idx) != self.k or any(not 1 <= i <= self.N for i in idx):
                    raise ChaosSpecError(f"index tuple {idx} invalid for N={self.N}, k={self.k}")
                if any(idx[j] >= idx[j + 1] for j in range(len(idx) - 1)):
                    raise ChaosSpecError(f"index tuple {idx} is not strictly increasing (diagonal entry)")
        elif self.form == "hermite":
            if self.model != "ou":
                raise ChaosSpecError("hermite form requires the OU model")
            for idx in self.coefficients:
                if len(idx) != self.N or min(idx) < 0 or sum(idx) != self.k:
                    raise ChaosSpecError(f"multi-index {idx} invalid for N={self.N}, k={self.k}")
        else:
            if self.model != "poisson" or self.N != 1:
                raise ChaosSpecError("charlier form requires the one-dimensional Poisson model")
            if set(self.coefficients) != {(self.k,)}:
                raise ChaosSpecError("charlier spec must hold exactly the degree (k,)")

    def build_model(self) -> MarkovModel:
        if self.model == "cube":
            return CubeModel(self.N)
        if self.model == "ou":
            return OUModel(self.N)
        return PoissonModel(self.theta)


@dataclass(frozen=True)
class Chaos:
    """A materialised eigenfunction ``sqrt(scale_sq) * F`` with ``-L F = eigenvalue * F``."""

    model: MarkovModel
    F: object
    k: int
    eigenvalue: Fraction
    norm_sq: Fraction
    scale_sq: Fraction = Fraction(1)
    spec: ChaosSpec | None = field(default=None, compare=False)


def _rational_function(spec: ChaosSpec, model: MarkovModel):
    if spec.model == "cube":
        masks = {}
        for idx, c in spec.coefficients.items():
            masks[sum(1 << (i - 1) for i in idx)] = c
        return CubeFunction.from_walsh(spec.N, masks)
    if spec.model == "ou":
        if spec.form == "product":
            terms = {}
            for idx, c in spec.coefficients.items():
                e = [0] * spec.N
                for i in idx:
                    e[i - 1] = 1
                terms[tuple(e)] = c
            return PolyFunction(spec.N, terms)
        out = PolyFunction(spec.N)
        for idx, c in spec.coefficients.items():
            out = out + hermite_product(spec.N, idx) * c
        return out
    (c,) = spec.coefficients.values()
    return model.eigenbasis_element(spec.k) * c


def spec_norm_sq(spec: ChaosSpec) -> Fraction:
    """``int (sqrt(scale_sq) F)^2 dmu`` from the coefficients by orthogonality."""
    if spec.form == "product":
        base = sum((c * c for c in spec.coefficients.values()), Fraction(0))
    elif spec.form == "hermite":
        base = sum((c * c * hermite_norm_sq(i) for i, c in spec.coefficients.items()), Fraction(0))
    else:
        (c,) = spec.coefficients.values()
        base = c * c * spec.theta**spec.k * math.factorial(spec.k)
    return base * spec.scale_sq


def materialize_chaos(spec: ChaosSpec, model: MarkovModel | None = None) -> Chaos:
    """Build the function of ``spec`` and confirm ``-L F = k F`` exactly."""
    model = spec.build_model() if model is None else model
    F = _rational_function(spec, model)
    if not model.is_eigenfunction(F, spec.k):
        raise NotEigenfunctionError(f"materialised function is not a {spec.k}-eigenfunction")
    if spec.model == "poisson":
        # untruncated value; the truncated integral differs by the tail mass
        norm_sq = spec_norm_sq(spec)
    else:
        norm_sq = model.integrate(F * F) * spec.scale_sq
    return Chaos(model, F, spec.k, Fraction(spec.k), norm_sq, spec.scale_sq, spec)


def _unit_vector(rng: np.random.Generator, d: int) -> list[Fraction]:
    """Rational point on the unit sphere ``S^{d-1}`` via inverse stereographic projection."""
    if d == 1:
        return [Fraction(1 if rng.integers(0, 2) else -1)]
    while True:
        u = [int(v) for v in rng.integers(-4, 5, size=d - 1)]
        w = int(rng.integers(1, 5))
        s = sum(v * v for v in u)
        den = s + w * w
        vec = [Fraction(2 * v * w, den) for v in u] + [Fraction(s - w * w, den)]
        if any(vec):
            return vec


def _seeded(seed: int, *tags: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=int(seed), spawn_key=tags)))


def random_chaos(model: str, N: int, k: int, seed: int, form: str = "product", theta=1) -> ChaosSpec:
    """Seeded random spec; product form is normalised to ``int F^2 = 1`` exactly."""
    rng = _seeded(seed, MODEL_TAGS.index(model) if model in MODEL_TAGS else 99, N, k)
    if model == "poisson":
        return ChaosSpec("poisson", 1, k, {(k,): Fraction(int(rng.integers(1, 4)), int(rng.integers(1, 4)))},
                         form="charlier", theta=theta)
    if form == "product":
        if k > N:
            raise ChaosSpecError(f"degree {k} exceeds dimension {N}")
        tuples = list(combinations(range(1, N + 1), k))
        coeffs = dict(zip(tuples, _unit_vector(rng, len(tuples))))
        return ChaosSpec(model, N, k, coeffs)
    if form == "hermite":
        indices = [idx for idx in _compositions(k, N)]
        coeffs = {}
        for idx in indices:
            num = int(rng.integers(-3, 4))
            if num:
                coeffs[idx] = Fraction(num, int(rng.integers(1, 4)))
        if not coeffs:
            coeffs[indices[0]] = Fraction(1)
        return ChaosSpec(model, N, k, coeffs, form="hermite")
    raise ChaosSpecError(f"unknown form {form!r}")


def _compositions(total: int, parts: int):
    """Weak compositions of ``total`` into ``parts`` nonnegative parts, lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


# -- text I/O ------------------------------------------------------------------

_ROW_PREFIX = {"product": "", "hermite": "H", "charlier": "C"}


def dump_spec(spec: ChaosSpec) -> str:
    """Header ``model,N,k[,key=value...]`` then ``i_1,...,i_k<TAB>p/q`` rows."""
    header = [spec.model, str(spec.N), str(spec.k)]
    if spec.model == "poisson":
        header.append(f"theta={format_rational(spec.theta)}")
    if spec.scale_sq != 1:
        header.append(f"scale_sq={format_rational(spec.scale_sq)}")
    prefix = _ROW_PREFIX[spec.form]
    rows = [f"{prefix}{','.join(map(str, idx))}\t{format_rational(c)}" for idx, c in sorted(spec.coefficients.items())]
    return "\n".join([",".join(header)] + rows) + "\n"


def parse_spec(text: str) -> ChaosSpec:
    lines = [(n, ln.strip()) for n, ln in enumerate(text.splitlines(), 1)]
    lines = [(n, ln) for n, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ChaosSpecError("empty chaos spec")
    n0, header = lines[0]
    fields = [f.strip() for f in header.split(",")]
    if len(fields) < 3:
        raise ChaosSpecError(f"line {n0}: header must be 'model,N,k'")
    extra = {}
    for f in fields[3:]:
        key, sep, val = f.partition("=")
        if not sep or key not in ("theta", "scale_sq"):
            raise ChaosSpecError(f"line {n0}: unknown header field {f!r}")
        extra[key] = parse_rational(val)
    try:
        model, N, k = fields[0], int(fields[1]), int(fields[2])
    except ValueError:
        raise ChaosSpecError(f"line {n0}: N and k must be integers") from None
    form = "product"
    coeffs: dict[tuple[int, ...], Fraction] = {}
    for n, ln in lines[1:]:
        idx_text, sep, val = ln.partition("\t")
        if not sep:
            raise ChaosSpecError(f"line {n}: expected 'indices<TAB>p/q'")
        row_form = "product"
        if idx_text[:1] in ("H", "C"):
            row_form = "hermite" if idx_text[0] == "H" else "charlier"
            idx_text = idx_text[1:]
        if n > lines[1][0] and row_form != form:
            raise ChaosSpecError(f"line {n}: mixed coefficient forms")
        form = row_form
        try:
            idx = tuple(int(t) for t in idx_text.split(","))
            coeffs[idx] = coeffs.get(idx, Fraction(0)) + parse_rational(val)
        except ValueError as exc:
            raise ChaosSpecError(f"line {n}: {exc}") from None
    return ChaosSpec(model, N, k, coeffs, form=form, **extra)


def load_function(model: MarkovModel, text: str):
    """Inverse of ``model.dump``."""
    rows = []
    for n, ln in enumerate(text.splitlines(), 1):
        if not ln.strip():
            continue
        key, sep, val = ln.partition("\t")
        if not sep:
            raise ValueError(f"line {n}: expected 'index<TAB>p/q'")
        rows.append((key, parse_rational(val)))
    if isinstance(model, CubeModel):
        values = [Fraction(0)] * (1 << model.N)
        for key, v in rows:
            values[int(key, 16)] = v
        return CubeFunction.from_values(model.N, values)
    if isinstance(model, OUModel):
        return PolyFunction(model.N, {tuple(int(t) for t in key.split(",")): v for key, v in rows})
    if isinstance(model, PoissonModel):
        values = [Fraction(0)] * (model.M + 1)
        for key, v in rows:
            values[int(key)] = v
        return model.function(values)
    raise TypeError(f"unsupported model {model!r}")


__all__ = [
    "Chaos",
    "ChaosSpec",
    "ChaosSpecError",
    "PoissonFunction",
    "dump_spec",
    "load_function",
    "materialize_chaos",
    "parse_spec",
    "random_chaos",
    "spec_norm_sq",
]
