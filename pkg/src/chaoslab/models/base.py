"""Pieces shared by the three concrete models."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..spectrum import Spectrum

#: samples per RNG stream; fixed so that results do not depend on the thread count
CHUNK_SIZE = 1 << 16


class ModelMismatchError(ValueError):
    """A function was handed to a model it does not belong to."""


class NotEigenfunctionError(ValueError):
    """The function is not an exact eigenfunction of ``-L`` (at the requested eigenvalue)."""


@dataclass(frozen=True)
class Samples:
    """Floating-point draws of ``f(X)``, ``X ~ mu``; ``rejected`` counts truncation rejections."""

    values: np.ndarray
    rejected: int = 0

    @property
    def rejection_rate(self) -> float:
        total = len(self.values) + self.rejected
        return self.rejected / total if total else 0.0


def chunk_rng(seed: int, chunk: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, stream, chunk)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(chunk)))
    return np.random.Generator(np.random.PCG64(ss))


def chunked_samples(
    n: int,
    seed: int,
    draw: Callable[[np.random.Generator, int], tuple[np.ndarray, int]],
    threads: int = 1,
    stream: int = 0,
    chunk_size: int = CHUNK_SIZE,
) -> Samples:
    """Run ``draw(rng, size)`` over fixed-size chunks and concatenate in chunk order.

    Chunk ``c`` always uses the generator derived from ``(seed, stream, c)``, so
    the output is identical for every ``threads`` value.
    """
    if n < 0:
        raise ValueError("sample count must be nonnegative")
    sizes = [chunk_size] * (n // chunk_size)
    if n % chunk_size:
        sizes.append(n % chunk_size)

    def job(c: int):
        return draw(chunk_rng(seed, c, stream), sizes[c])

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(c) for c in range(len(sizes))]
    if not parts:
        return Samples(np.empty(0))
    return Samples(np.concatenate([p[0] for p in parts]), sum(p[1] for p in parts))


class MarkovModel:
    """Common surface of the models; subclasses supply the exact operator."""

    tag: str = ""
    is_diffusion: bool = False

    @property
    def spectrum(self) -> Spectrum:
        return Spectrum.nat()

    def apply_L(self, f):  # pragma: no cover - abstract
        raise NotImplementedError

    def multiply(self, f, g):
        self.check(f)
        self.check(g)
        return f * g

    def check(self, f):  # pragma: no cover - abstract
        raise NotImplementedError

    def expectation(self, f):
        """Exact ``int f dmu`` as a scalar (Poisson overrides with boundary checks)."""
        return self.integrate(f)

    def find_eigenvalue(self, f):
        """Return ``lam`` with ``-L f = lam f`` exactly, or ``None``."""
        lf = self.apply_L(f)
        lam = self._ratio(lf, f)
        if lam is None:
            return None
        return -lam

    def is_eigenfunction(self, f, lam) -> bool:
        return self.is_zero(self.apply_L(f) + f * lam)
