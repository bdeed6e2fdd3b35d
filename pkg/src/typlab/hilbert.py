"""Macro-space decomposition of a finite-dimensional Hilbert space.

Macro states are labelled ``1, ..., m`` (the physics convention); basis
indices inside ``C^D`` are 0-based.  The macro space ``H_nu`` is spanned by
the contiguous block of basis vectors ``index_set(nu)``.

States are plain complex numpy vectors of length ``D``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidDecompositionError

__all__ = [
    "MacroDecomposition",
    "EntropyParams",
    "new_decomposition",
    "as_generator",
    "derive_seed",
    "sample_unit_state",
    "project_weight",
    "macro_weights",
    "projector",
    "entropy_per_particle",
    "boltzmann_entropy",
    "boltzmann_entropy_expectation",
]


@dataclass(frozen=True)
class MacroDecomposition:
    """Ordered partition of ``{0, ..., D-1}`` into contiguous blocks."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) == 0:
            raise InvalidDecompositionError("decomposition needs at least one macro space")
        if any(d < 1 for d in dims):
            raise InvalidDecompositionError(f"macro dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def m(self) -> int:
        """Number of macro spaces."""
        return len(self.dims)

    @property
    def D(self) -> int:
        return sum(self.dims)

    @property
    def offsets(self) -> np.ndarray:
        """Block start indices, length ``m + 1`` (last entry is ``D``)."""
        return np.concatenate([[0], np.cumsum(self.dims)]).astype(int)

    def _check(self, nu: int) -> int:
        if not isinstance(nu, (int, np.integer)) or not 1 <= nu <= self.m:
            raise IndexError(f"macro index {nu!r} outside 1..{self.m}")
        return int(nu)

    def dim(self, nu: int) -> int:
        return self.dims[self._check(nu) - 1]

    def block(self, nu: int) -> slice:
        nu = self._check(nu)
        off = self.offsets
        return slice(int(off[nu - 1]), int(off[nu]))

    def index_set(self, nu: int) -> range:
        sl = self.block(nu)
        return range(sl.start, sl.stop)

    def labels(self) -> range:
        return range(1, self.m + 1)


def new_decomposition(dims: Sequence[int]) -> MacroDecomposition:
    """Build a decomposition from macro dimensions in declaration order."""
    if isinstance(dims, (int, np.integer)):
        raise InvalidDecompositionError("dims must be a sequence of integers")
    dims = list(dims)
    for d in dims:
        if isinstance(d, bool) or not float(d).is_integer():
            raise InvalidDecompositionError(f"macro dimensions must be integers, got {d!r}")
    return MacroDecomposition(tuple(int(d) for d in dims))


def as_generator(seed) -> np.random.Generator:
    """Accept an integer seed or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def derive_seed(master: int, index: int) -> int:
    """Deterministic 64-bit sub-seed for trial ``index`` of a run."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_unit_state(decomp: MacroDecomposition, mu: int | None, seed) -> np.ndarray:
    """Draw a state uniformly from the unit sphere of ``H_mu``.

    Independent standard complex Gaussians on ``I_mu`` are normalized, which
    realizes the unitarily invariant measure.  ``mu=None`` samples the
    sphere of the full space.
    """
    rng = as_generator(seed)
    sl = slice(0, decomp.D) if mu is None else decomp.block(mu)
    n = sl.stop - sl.start
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    psi = np.zeros(decomp.D, dtype=complex)
    psi[sl] = z / np.linalg.norm(z)
    return psi


def macro_weights(psi: np.ndarray, decomp: MacroDecomposition) -> np.ndarray:
    """All weights ``||P_nu psi||^2`` as an array of length ``m``.

    ``psi`` may also be a 2-d array of shape ``(..., D)``; weights are taken
    along the last axis.
    """
    prob = np.abs(np.asarray(psi)) ** 2
    if prob.shape[-1] != decomp.D:
        raise DomainError(f"state length {prob.shape[-1]} != D={decomp.D}")
    return np.add.reduceat(prob, decomp.offsets[:-1], axis=-1)


def project_weight(psi: np.ndarray, decomp: MacroDecomposition, nu: int) -> float:
    sl = decomp.block(nu)
    return float(np.sum(np.abs(psi[sl]) ** 2))


def projector(decomp: MacroDecomposition, nu: int) -> np.ndarray:
    """Dense matrix of the orthogonal projection onto ``H_nu``."""
    diag = np.zeros(decomp.D)
    diag[decomp.block(nu)] = 1.0
    return np.diag(diag)


@dataclass(frozen=True)
class EntropyParams:
    N: int
    kB: float = 1.0

    def __post_init__(self):
        if self.N < 1:
            raise DomainError(f"particle count must be >= 1, got {self.N}")
        if not self.kB > 0:
            raise DomainError(f"kB must be positive, got {self.kB}")


def entropy_per_particle(d: float, p: EntropyParams) -> float:
    """Invert ``d = exp(s N / kB)`` for the entropy per particle ``s``."""
    if not d >= 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    return p.kB * math.log(d) / p.N


def boltzmann_entropy(decomp: MacroDecomposition, p: EntropyParams) -> np.ndarray:
    """Entropy values ``S(nu) = kB log d_nu`` for every macro state."""
    return p.kB * np.log(np.asarray(decomp.dims, dtype=float))


def boltzmann_entropy_expectation(psi: np.ndarray, decomp: MacroDecomposition,
                                  p: EntropyParams) -> float:
    """Expectation of the Boltzmann entropy observable ``sum_nu S(nu) P_nu``."""
    return float(boltzmann_entropy(decomp, p) @ macro_weights(psi, decomp))
