"""Hermitian eigendecomposition and spectrum/eigenvector diagnostics.

Eigen indices ``n`` are 0-based and follow ascending eigenvalue order.
Tolerances for clustering eigenvalues and eigenvalue differences default to
``1e-10`` times the spectral range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import BranchError, DomainError, IterationError, NumericError, ValidationError

__all__ = [
    "SpectralData",
    "SpectrumDiagnostics",
    "DysonSolution",
    "GapEvent",
    "Resonance",
    "EthStatistic",
    "operator_norm",
    "diagonalize",
    "default_tolerance",
    "eigenvalue_clusters",
    "distinct_eigenvalues",
    "max_degeneracy",
    "gap_count",
    "max_gap_degeneracy",
    "min_gap_separation",
    "resonance_check",
    "spectrum_diagnostics",
    "sup_norm",
    "min_subset_mass",
    "min_subset_masses",
    "subset_size",
    "detect_gap_event",
    "eth_statistic",
    "solve_dyson",
    "dyson_sup_on_grid",
    "uniform_primitivity_check",
    "is_flat",
]

DEFAULT_REL_TOL = 1e-10


def _check_square(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {H.shape}")
    return H


def hermiticity_error(H: np.ndarray) -> float:
    H = _check_square(H)
    return float(np.max(np.abs(H - H.conj().T))) if H.size else 0.0


def operator_norm(A: np.ndarray, hermitian: bool | None = None) -> float:
    """Largest singular value of ``A``.

    Hermitian (or real antisymmetric, via ``iA``) inputs use the eigenvalue
    route, everything else falls back to an SVD.
    """
    A = _check_square(A)
    if A.size == 0:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(A))))
    if hermitian is None:
        hermitian = hermiticity_error(A) <= 1e-12 * scale
    if hermitian:
        w = scipy.linalg.eigvalsh(A)
        return float(max(abs(w[0]), abs(w[-1])))
    if np.isrealobj(A) and float(np.max(np.abs(A + A.T))) <= 1e-12 * scale:
        w = scipy.linalg.eigvalsh(1j * A)
        return float(max(abs(w[0]), abs(w[-1])))
    return float(scipy.linalg.svdvals(A)[0])


@dataclass(frozen=True)
class SpectralData:
    """Ascending eigenvalues, eigenvectors as columns, and the eigen-residual."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float

    @property
    def D(self) -> int:
        return len(self.eigenvalues)

    @property
    def spectral_range(self) -> float:
        return float(self.eigenvalues[-1] - self.eigenvalues[0])

    @property
    def mean_gap(self) -> float:
        """Mean level spacing ``range / (D - 1)``."""
        if self.D < 2:
            return 0.0
        return self.spectral_range / (self.D - 1)

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T

    def orthonormality_error(self) -> float:
        V = self.eigenvectors
        return float(np.max(np.abs(V.conj().T @ V - np.eye(self.D))))

    def diagonal_elements(self, B: np.ndarray) -> np.ndarray:
        """``<phi_n|B|phi_n>`` for every eigenvector."""
        V = self.eigenvectors
        return np.real(np.einsum("in,in->n", V.conj(), np.asarray(B) @ V))


def diagonalize(H: np.ndarray, check_tol: float = 1e-10) -> SpectralData:
    """Full eigendecomposition of a dense Hermitian matrix."""
    H = _check_square(H)
    scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
    herr = hermiticity_error(H)
    if herr > check_tol * scale:
        raise ValidationError(f"matrix is not Hermitian (max |H - H*| = {herr:.3e})")
    H = 0.5 * (H + H.conj().T)
    try:
        E, V = scipy.linalg.eigh(H)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    if not (np.all(np.isfinite(E)) and np.all(np.isfinite(V))):
        raise NumericError("eigensolver returned non-finite values")
    res = H @ V - V * E
    residual = float(np.max(np.linalg.norm(res, axis=0))) if len(E) else 0.0
    return SpectralData(E, V, residual)


def default_tolerance(eigenvalues: np.ndarray, rel: float = DEFAULT_REL_TOL) -> float:
    ev = np.asarray(eigenvalues, dtype=float)
    if len(ev) == 0:
        return 0.0
    span = float(ev.max() - ev.min())
    return rel * (span if span > 0 else max(1.0, float(np.max(np.abs(ev)))))


def _tol(eigenvalues, tol):
    return default_tolerance(eigenvalues) if tol is None else float(tol)


def _clusters_sorted(values: np.ndarray, tol: float) -> list[tuple[int, int]]:
    """``[start, stop)`` runs of sorted values chained by gaps ``<= tol``."""
    if len(values) == 0:
        return []
    breaks = np.nonzero(np.diff(values) > tol)[0] + 1
    starts = np.concatenate([[0], breaks])
    stops = np.concatenate([breaks, [len(values)]])
    return list(zip(starts.tolist(), stops.tolist()))


def eigenvalue_clusters(eigenvalues: np.ndarray, tol: float | None = None) -> list[tuple[int, int]]:
    """Index ranges of ascending eigenvalues that coincide at tolerance (transitive chaining)."""
    ev = np.asarray(eigenvalues, dtype=float)
    return _clusters_sorted(ev, _tol(ev, tol))


def distinct_eigenvalues(eigenvalues: np.ndarray, tol: float | None = None) -> np.ndarray:
    ev = np.sort(np.asarray(eigenvalues, dtype=float))
    return np.array([ev[a:b].mean() for a, b in eigenvalue_clusters(ev, tol)])


def max_degeneracy(eigenvalues: np.ndarray, tol: float | None = None) -> int:
    """Maximum eigenvalue multiplicity ``D_E``."""
    clusters = eigenvalue_clusters(np.sort(np.asarray(eigenvalues, dtype=float)), tol)
    return max((b - a for a, b in clusters), default=0)


def _signed_differences(eigenvalues, tol) -> np.ndarray:
    e = distinct_eigenvalues(eigenvalues, tol)
    d = e[:, None] - e[None, :]
    off = ~np.eye(len(e), dtype=bool)
    return np.sort(d[off])


def gap_count(eigenvalues: np.ndarray, kappa: float, tol: float | None = None) -> int:
    """Maximal number of eigenvalue gaps ``G(kappa)`` in a window ``[E, E + kappa)``.

    Gaps run over ordered pairs of distinct eigenvalues.  The maximizing
    window can always be taken to start at one of the differences.
    """
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    d = _signed_differences(eigenvalues, tol)
    if len(d) == 0:
        return 0
    ends = np.searchsorted(d, d + kappa, side="left")
    return int(np.max(ends - np.arange(len(d))))


def max_gap_degeneracy(eigenvalues: np.ndarray, tol: float | None = None) -> int:
    """Maximal multiplicity ``D_G`` of an eigenvalue difference."""
    d = _signed_differences(eigenvalues, tol)
    clusters = _clusters_sorted(d, _tol(eigenvalues, tol))
    return max((b - a for a, b in clusters), default=0)


def min_gap_separation(eigenvalues: np.ndarray, tol: float | None = None) -> float:
    """Smallest spacing between neighbouring clusters of eigenvalue differences.

    ``gap_count`` evaluated at half this value equals ``max_gap_degeneracy``.
    """
    d = _signed_differences(eigenvalues, tol)
    clusters = _clusters_sorted(d, _tol(eigenvalues, tol))
    if len(clusters) < 2:
        return math.inf
    return float(min(d[b] - d[b - 1] for (_, b), _ in zip(clusters[:-1], clusters[1:])))


@dataclass(frozen=True)
class Resonance:
    resonance_free: bool
    witness: tuple[int, int, int, int] | None = None
    """Indices ``(i, j, k, l)`` with ``E_i - E_j = E_k - E_l`` at tolerance."""

    def __bool__(self):
        return self.resonance_free


def resonance_check(eigenvalues: np.ndarray, tol: float | None = None) -> Resonance:
    """Check that eigenvalues and their pairwise gaps are all non-degenerate.

    A coincidence ``E_i - E_j = E_k - E_l`` counts unless it is one of the
    trivial identities ``i = j and k = l`` or ``(i, j) = (k, l)``.
    """
    ev = np.asarray(eigenvalues, dtype=float)
    tol = _tol(ev, tol)
    order = np.argsort(ev, kind="stable")
    sev = ev[order]
    close = np.nonzero(np.diff(sev) <= tol)[0]
    if len(close):
        a, b = int(order[close[0]]), int(order[close[0] + 1])
        # E_b - E_a = 0 = E_a - E_a
        return Resonance(False, (b, a, a, a))
    i, j = np.triu_indices(len(ev), k=1)
    # i < j in sorted order, so the differences are positive
    diffs = sev[j] - sev[i]
    idx = np.argsort(diffs, kind="stable")
    sd = diffs[idx]
    hit = np.nonzero(np.diff(sd) <= tol)[0]
    if len(hit) == 0:
        return Resonance(True, None)
    p, q = idx[hit[0]], idx[hit[0] + 1]
    witness = (int(order[j[p]]), int(order[i[p]]), int(order[j[q]]), int(order[i[q]]))
    return Resonance(False, witness)


@dataclass(frozen=True)
class SpectrumDiagnostics:
    D_E: int
    D_G: int
    min_gap: float
    resonance_free: bool
    tol: float
    eigenvalues: np.ndarray = field(repr=False)

    def G(self, kappa: float) -> int:
        return gap_count(self.eigenvalues, kappa, self.tol)

    def to_dict(self) -> dict:
        return {
            "D_E": self.D_E,
            "D_G": self.D_G,
            "min_gap": self.min_gap,
            "resonance_free": self.resonance_free,
            "tol": self.tol,
        }


def spectrum_diagnostics(eigenvalues: np.ndarray, tol: float | None = None) -> SpectrumDiagnostics:
    ev = np.sort(np.asarray(eigenvalues, dtype=float))
    tol = _tol(ev, tol)
    distinct = distinct_eigenvalues(ev, tol)
    min_gap = float(np.min(np.diff(distinct))) if len(distinct) > 1 else math.inf
    return SpectrumDiagnostics(
        D_E=max_degeneracy(ev, tol),
        D_G=max_gap_degeneracy(ev, tol),
        min_gap=min_gap,
        resonance_free=resonance_check(ev, tol).resonance_free,
        tol=tol,
        eigenvalues=ev,
    )


# -- eigenvector delocalization ------------------------------------------------

def sup_norm(phi: np.ndarray) -> float:
    return float(np.max(np.abs(phi)))


def subset_size(kappa: float, D: int) -> int:
    """``ceil(kappa * D)``, robust to floating-point noise in the product."""
    return int(math.ceil(round(kappa * D, 9)))


def min_subset_masses(vectors: np.ndarray, kappa: float) -> np.ndarray:
    """Column-wise version of :func:`min_subset_mass` for a ``D x n`` array."""
    if not 0 < kappa <= 1:
        raise DomainError(f"kappa must lie in (0, 1], got {kappa}")
    W = np.abs(np.asarray(vectors)) ** 2
    if W.ndim == 1:
        W = W[:, None]
    k = subset_size(kappa, W.shape[0])
    if k >= W.shape[0]:
        return W.sum(axis=0)
    part = np.partition(W, k - 1, axis=0)[:k]
    return part.sum(axis=0)


def min_subset_mass(phi: np.ndarray, kappa: float) -> float:
    """Smallest squared mass ``||phi_I||^2`` over subsets with ``|I| = ceil(kappa D)``.

    The minimizer collects the smallest-modulus coordinates.  Note the value
    is a *squared* norm: compare it against the square of a norm bound.
    """
    return float(min_subset_masses(np.asarray(phi), kappa)[0])


@dataclass(frozen=True)
class GapEvent:
    event: bool
    worst_index: int
    worst_mass: float

    def __bool__(self):
        return self.event


def detect_gap_event(spec: SpectralData, kappa: float, delta: float) -> GapEvent:
    """Whether some eigenvector puts squared mass ``< delta**2`` on a ``kappa``-fraction."""
    if not 0 < kappa < 1:
        raise DomainError(f"kappa must lie in (0, 1), got {kappa}")
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    masses = min_subset_masses(spec.eigenvectors, kappa)
    n = int(np.argmin(masses))
    return GapEvent(bool(masses[n] < delta**2), n, float(masses[n]))


@dataclass(frozen=True)
class EthStatistic:
    stat: float
    hs_norm: float
    """Hilbert-Schmidt norm ``tr(|B - tr(B)/D|^2)^(1/2)`` of the traceless part."""
    D: int

    def threshold(self, xi: float) -> float:
        return self.D**xi / self.D * self.hs_norm

    def passes(self, xi: float) -> bool:
        return self.stat <= self.threshold(xi)


def eth_statistic(spec: SpectralData, B: np.ndarray) -> EthStatistic:
    """Largest eigenbasis matrix element of ``B`` after removing ``tr(B)/D``."""
    B = _check_square(B)
    D = spec.D
    if B.shape[0] != D:
        raise ValidationError(f"observable dimension {B.shape[0]} != D={D}")
    V = spec.eigenvectors
    mean = np.trace(B).real / D
    Bt = V.conj().T @ B @ V
    Bt[np.diag_indices(D)] -= mean
    B0 = B - mean * np.eye(D)
    hs = float(np.sqrt(np.sum(np.abs(B0) ** 2)))
    return EthStatistic(float(np.max(np.abs(Bt))), hs, D)


# -- vector Dyson equation -----------------------------------------------------

@dataclass(frozen=True)
class DysonSolution:
    m: np.ndarray
    z: complex
    residual: float
    iterations: int


def _dyson_residual(S, m, z):
    return float(np.max(np.abs(1.0 / m + z + S @ m)))


def solve_dyson(S: np.ndarray, z: complex, tol: float = 1e-10, max_iter: int = 100_000,
                damping: float = 0.5) -> DysonSolution:
    """Solve ``-1/m_i = z + sum_j S_ij m_j`` by damped fixed-point iteration.

    Starts from ``m = -1/z`` and applies
    ``m <- (1 - damping) m + damping * (-1 / (z + S m))``.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValidationError(f"variance matrix must be square, got {S.shape}")
    if np.any(S < 0):
        raise DomainError("variance matrix must be entrywise non-negative")
    z = complex(z)
    if not z.imag > 0:
        raise DomainError(f"spectral parameter must satisfy Im z > 0, got {z}")
    if not 0 < damping <= 1:
        raise DomainError(f"damping must lie in (0, 1], got {damping}")
    m = np.full(S.shape[0], -1.0 / z, dtype=complex)
    res = _dyson_residual(S, m, z)
    it = 0
    while res > tol:
        if it >= max_iter:
            raise IterationError(
                f"Dyson iteration did not converge in {max_iter} steps (residual {res:.3e})",
                residual=res, iterations=it)
        m = (1 - damping) * m + damping * (-1.0 / (z + S @ m))
        it += 1
        if np.any(m.imag <= 0):
            raise BranchError(f"iterate left the upper half-plane at step {it}")
        res = _dyson_residual(S, m, z)
    return DysonSolution(m, z, res, it)


def dyson_sup_on_grid(S: np.ndarray, zs, **kwargs) -> float:
    """``max_{z, i} |m_i(z)|`` over a finite grid of spectral parameters."""
    return max(float(np.max(np.abs(solve_dyson(S, z, **kwargs).m))) for z in zs)


def uniform_primitivity_check(S: np.ndarray, L: int, p: float) -> bool:
    """Every entry of ``S^L`` is at least ``p / D``."""
    if L < 1:
        raise DomainError(f"L must be >= 1, got {L}")
    if not p > 0:
        raise DomainError(f"p must be positive, got {p}")
    S = np.asarray(S, dtype=float)
    D = S.shape[0]
    SL = np.linalg.matrix_power(S, int(L))
    return bool(np.all(SL >= (p / D) * (1 - 1e-12)))


def is_flat(S: np.ndarray) -> bool:
    """Variances bounded by ``1/D``."""
    S = np.asarray(S, dtype=float)
    return bool(np.all(S <= (1.0 / S.shape[0]) * (1 + 1e-12)))
