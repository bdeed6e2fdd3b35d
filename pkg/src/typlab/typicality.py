"""Unitary dynamics and typicality quantities in the eigenbasis of ``H``.

Macro labels ``mu, nu`` are 1-based as in :mod:`typlab.hilbert`; array
axes over macro states are 0-based (``M.entries[mu - 1, nu - 1]``).

Time averages and asymptotic weights use the eigenspace projectors
``Pi_e``.  When the spectrum has no degeneracy at tolerance this reduces to
sums over eigenvectors; otherwise a block form is used and a
:class:`~typlab.errors.DegenerateSpectrumWarning` is emitted.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .errors import DegenerateSpectrumWarning, DomainError, ValidationError
from .hilbert import MacroDecomposition, derive_seed, macro_weights, sample_unit_state
from .spectral import SpectralData, eigenvalue_clusters

__all__ = [
    "Trajectory",
    "MMatrix",
    "ErrorSeries",
    "FractionEstimate",
    "TypicalityReport",
    "evolve",
    "evolve_many",
    "trajectory",
    "compute_M_psiB",
    "compute_M_muB",
    "compute_M_psi_weights",
    "compute_M_matrix",
    "ensemble_curve_w",
    "ensemble_curves",
    "grid_average",
    "error_series",
    "most_t_fraction",
    "most_psi_fraction",
    "typicality_report",
]

UNDEFINED_DENOMINATOR = 1e-14
_CHUNK_ELEMENTS = 1 << 22


# -- dynamics ------------------------------------------------------------------

def _coefficients(spec: SpectralData, psi0: np.ndarray) -> np.ndarray:
    psi0 = np.asarray(psi0)
    if psi0.shape != (spec.D,):
        raise ValidationError(f"state shape {psi0.shape} does not match D={spec.D}")
    return spec.eigenvectors.conj().T @ psi0


def evolve(spec: SpectralData, psi0: np.ndarray, t: float) -> np.ndarray:
    """``exp(-iHt) psi0`` via eigenbasis phases."""
    c = _coefficients(spec, psi0)
    return spec.eigenvectors @ (np.exp(-1j * spec.eigenvalues * t) * c)


def _chunks(n_times: int, D: int):
    step = max(1, _CHUNK_ELEMENTS // max(D, 1))
    for a in range(0, n_times, step):
        yield slice(a, min(a + step, n_times))


def evolve_many(spec: SpectralData, psi0: np.ndarray, times) -> np.ndarray:
    """States ``psi_t`` for every grid time, as rows of a ``(T, D)`` array."""
    c = _coefficients(spec, psi0)
    times = np.asarray(times, dtype=float)
    phases = np.exp(-1j * np.outer(times, spec.eigenvalues))
    return (phases * c) @ spec.eigenvectors.T


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Macro weights ``||P_nu psi_t||^2`` (column ``nu - 1``) along a time grid."""

    times: np.ndarray
    weights: np.ndarray
    norms: np.ndarray = field(repr=False)
    observable: np.ndarray | None = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return self.weights.shape[1]

    def weight(self, nu: int) -> np.ndarray:
        if not 1 <= nu <= self.m:
            raise IndexError(f"macro index {nu} outside 1..{self.m}")
        return self.weights[:, nu - 1]

    def completeness_error(self) -> float:
        return float(np.max(np.abs(self.weights.sum(axis=1) - 1.0)))

    def unitarity_error(self) -> float:
        return float(np.max(np.abs(self.norms - 1.0)))


def trajectory(spec: SpectralData, decomp: MacroDecomposition, psi0: np.ndarray, times,
               B: np.ndarray | None = None) -> Trajectory:
    """Evolve ``psi0`` over ``times`` and record weights (and ``<B>`` if given)."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValidationError("time grid must be a nonempty 1-d array")
    if np.any(np.diff(times) < 0):
        raise ValidationError("time grid must be ascending")
    if decomp.D != spec.D:
        raise ValidationError(f"decomposition D={decomp.D} does not match spectrum D={spec.D}")
    c = _coefficients(spec, psi0)
    VT = spec.eigenvectors.T
    E = spec.eigenvalues
    T = len(times)
    weights = np.empty((T, decomp.m))
    norms = np.empty(T)
    obs = None if B is None else np.empty(T)
    for sl in _chunks(T, spec.D):
        psi = (np.exp(-1j * np.outer(times[sl], E)) * c) @ VT
        prob = np.abs(psi) ** 2
        weights[sl] = np.add.reduceat(prob, decomp.offsets[:-1], axis=1)
        norms[sl] = np.sqrt(prob.sum(axis=1))
        if B is not None:
            obs[sl] = np.real(np.einsum("tj,tj->t", psi.conj(), psi @ np.asarray(B).T))
    return Trajectory(times, weights, norms, obs)


def grid_average(values, axis: int = 0):
    """Uniform-grid (Riemann) time average."""
    return np.mean(np.asarray(values), axis=axis)


# -- asymptotic weights --------------------------------------------------------

def _clusters(spec: SpectralData, tol: float | None, warn: bool = True):
    clusters = eigenvalue_clusters(spec.eigenvalues, tol)
    multi = [(a, b) for a, b in clusters if b - a > 1]
    if multi and warn:
        D_E = max(b - a for a, b in multi)
        warnings.warn(f"degenerate spectrum (D_E = {D_E}); using eigenspace blocks",
                      DegenerateSpectrumWarning, stacklevel=3)
    return multi


def _singleton_mask(D: int, multi) -> np.ndarray:
    mask = np.ones(D, dtype=bool)
    for a, b in multi:
        mask[a:b] = False
    return mask


def compute_M_psiB(spec: SpectralData, psi0: np.ndarray, B: np.ndarray,
                   tol: float | None = None) -> float:
    """Infinite-time average of ``<psi_t|B|psi_t>``: ``sum_e <psi0|Pi_e B Pi_e|psi0>``."""
    c = _coefficients(spec, psi0)
    V = spec.eigenvectors
    B = np.asarray(B)
    multi = _clusters(spec, tol)
    single = _singleton_mask(spec.D, multi)
    Vs = V[:, single]
    diag = np.real(np.einsum("in,in->n", Vs.conj(), B @ Vs))
    total = float(np.sum(np.abs(c[single]) ** 2 * diag))
    for a, b in multi:
        Ve = V[:, a:b]
        ce = c[a:b]
        total += float(np.real(ce.conj() @ (Ve.conj().T @ B @ Ve) @ ce))
    return total


def compute_M_psi_weights(spec: SpectralData, decomp: MacroDecomposition, psi0: np.ndarray,
                          tol: float | None = None) -> np.ndarray:
    """``M_{psi0 nu}`` for every ``nu`` (infinite-time averages of the weights)."""
    c = _coefficients(spec, psi0)
    V = spec.eigenvectors
    multi = _clusters(spec, tol)
    single = _singleton_mask(spec.D, multi)
    W = macro_weights(V[:, single].T, decomp)  # (n_single, m)
    out = (np.abs(c[single]) ** 2) @ W
    for a, b in multi:
        u = V[:, a:b] @ c[a:b]  # Pi_e psi0
        out = out + macro_weights(u, decomp)
    return out


def compute_M_muB(spec: SpectralData, decomp: MacroDecomposition, mu: int, B: np.ndarray,
                  tol: float | None = None) -> float:
    """``(1/d_mu) sum_e tr(P_mu Pi_e B Pi_e)``."""
    V = spec.eigenvectors
    B = np.asarray(B)
    sl = decomp.block(mu)
    d_mu = decomp.dim(mu)
    multi = _clusters(spec, tol)
    single = _singleton_mask(spec.D, multi)
    Vs = V[:, single]
    p_mu = np.sum(np.abs(Vs[sl]) ** 2, axis=0)
    b = np.real(np.einsum("in,in->n", Vs.conj(), B @ Vs))
    total = float(p_mu @ b)
    for a, b_ in multi:
        Ve = V[:, a:b_]
        X = Ve[sl].conj().T @ Ve[sl]
        Y = Ve.conj().T @ B @ Ve
        total += float(np.real(np.sum(X * Y.T)))
    return total / d_mu


@dataclass(frozen=True, eq=False)
class MMatrix:
    """Asymptotic weights ``M_mu,nu``; use :meth:`entry` for 1-based access."""

    entries: np.ndarray
    dims: tuple[int, ...]
    degenerate: bool = False

    @property
    def m(self) -> int:
        return len(self.dims)

    def entry(self, mu: int, nu: int) -> float:
        if not (1 <= mu <= self.m and 1 <= nu <= self.m):
            raise IndexError(f"macro indices ({mu}, {nu}) outside 1..{self.m}")
        return float(self.entries[mu - 1, nu - 1])

    def row(self, mu: int) -> np.ndarray:
        return self.entries[mu - 1]

    def row_sum_error(self) -> float:
        return float(np.max(np.abs(self.entries.sum(axis=1) - 1.0)))

    def detailed_balance_error(self) -> float:
        dM = np.asarray(self.dims, dtype=float)[:, None] * self.entries
        return float(np.max(np.abs(dM - dM.T)))

    def column_identity_error(self) -> float:
        d = np.asarray(self.dims, dtype=float)
        return float(np.max(np.abs(d @ self.entries - d)))

    def min_entry(self) -> float:
        return float(self.entries.min())

    def normal_typicality_deviation(self) -> np.ndarray:
        """``|M_mu,nu - d_nu / D|``."""
        d = np.asarray(self.dims, dtype=float)
        return np.abs(self.entries - d[None, :] / d.sum())


def compute_M_matrix(spec: SpectralData, decomp: MacroDecomposition,
                     tol: float | None = None) -> MMatrix:
    """``M_mu,nu = (1/d_mu) sum_e tr(P_mu Pi_e P_nu Pi_e)``."""
    if decomp.D != spec.D:
        raise ValidationError(f"decomposition D={decomp.D} does not match spectrum D={spec.D}")
    V = spec.eigenvectors
    multi = _clusters(spec, tol)
    single = _singleton_mask(spec.D, multi)
    W = macro_weights(V[:, single].T, decomp).T  # (m, n_single)
    G = W @ W.T
    for a, b in multi:
        Ve = V[:, a:b]
        blocks = [Ve[decomp.block(nu)] for nu in decomp.labels()]
        grams = [blk.conj().T @ blk for blk in blocks]
        for i, Gi in enumerate(grams):
            for j, Gj in enumerate(grams):
                G[i, j] += float(np.real(np.sum(Gi * Gj.T)))
    d = np.asarray(decomp.dims, dtype=float)
    return MMatrix(G / d[:, None], decomp.dims, degenerate=bool(multi))


# -- ensemble curves -----------------------------------------------------------

def _curve(Z: np.ndarray, E: np.ndarray, times: np.ndarray) -> np.ndarray:
    """``sum_{n,m} exp(it(E_m - E_n)) Z_nm`` with ``Z_nm = X_nm Y_mn``."""
    out = np.empty(len(times))
    ZT = Z.T
    for sl in _chunks(len(times), len(E)):
        P = np.exp(-1j * np.outer(times[sl], E))
        out[sl] = np.real(np.sum(P * (P.conj() @ ZT), axis=1))
    return out


def ensemble_curve_w(spec: SpectralData, decomp: MacroDecomposition, mu: int,
                     B: np.ndarray, times) -> np.ndarray:
    """``w_muB(t) = (1/d_mu) tr(P_mu e^{iHt} B e^{-iHt})`` on a time grid."""
    V = spec.eigenvectors
    Vm = V[decomp.block(mu)]
    X = Vm.conj().T @ Vm
    Y = V.conj().T @ np.asarray(B) @ V
    times = np.atleast_1d(np.asarray(times, dtype=float))
    return _curve(X * Y.T, spec.eigenvalues, times) / decomp.dim(mu)


def ensemble_curves(spec: SpectralData, decomp: MacroDecomposition, mu: int,
                    times) -> np.ndarray:
    """``w_mu,nu(t)`` for all ``nu`` (column ``nu - 1``) with ``B = P_nu``."""
    V = spec.eigenvectors
    Vm = V[decomp.block(mu)]
    X = Vm.conj().T @ Vm
    times = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.empty((len(times), decomp.m))
    for nu in decomp.labels():
        Vn = V[decomp.block(nu)]
        Y = Vn.conj().T @ Vn
        out[:, nu - 1] = _curve(X * Y.T, spec.eigenvalues, times)
    return out / decomp.dim(mu)


# -- error series and fractions ------------------------------------------------

@dataclass(frozen=True, eq=False)
class ErrorSeries:
    """Pointwise errors; undefined samples (tiny denominators) are NaN."""

    values: np.ndarray
    mode: str
    n_undefined: int

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def error_series(series, reference, mode: Literal["absolute", "relative", "comparative"] = "absolute",
                 denominator=None) -> ErrorSeries:
    """Absolute, relative or comparative deviation of a series from a reference.

    ``reference`` broadcasts against ``series`` (a constant such as
    ``M_mu,nu`` or a curve such as ``w_mu,nu(t)``).  Relative mode divides by
    the reference; comparative mode divides by ``denominator`` (the
    infinite-time average ``M_psi0,nu``).  Denominators below ``1e-14``
    mark the sample undefined.
    """
    x = np.asarray(series, dtype=float)
    ref = np.asarray(reference, dtype=float)
    err = np.abs(x - ref)
    if mode == "absolute":
        return ErrorSeries(err, mode, 0)
    if mode == "relative":
        den = np.broadcast_to(ref, err.shape)
    elif mode == "comparative":
        if denominator is None:
            raise DomainError("comparative mode needs the denominator M_psi0,nu")
        den = np.broadcast_to(np.asarray(denominator, dtype=float), err.shape)
    else:
        raise DomainError(f"unknown error mode {mode!r}")
    bad = np.abs(den) < UNDEFINED_DENOMINATOR
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(bad, np.nan, err / np.where(bad, 1.0, den))
    return ErrorSeries(out, mode, int(bad.sum()))


def most_t_fraction(series, bound, axis: int = 0):
    """Fraction of grid times with ``value <= bound``, skipping undefined samples."""
    vals = np.asarray(series, dtype=float)
    if vals.size == 0:
        raise DomainError("empty series")
    ok = ~np.isnan(vals)
    hit = np.logical_and(ok, vals <= np.asarray(bound))
    n = ok.sum(axis=axis)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = hit.sum(axis=axis) / n
    return float(frac) if np.ndim(frac) == 0 else frac


@dataclass(frozen=True)
class FractionEstimate:
    fraction: float
    stderr: float
    n: int

    def __float__(self):
        return self.fraction


def most_psi_fraction(spec: SpectralData, decomp: MacroDecomposition, mu: int,
                      predicate: Callable[[np.ndarray], bool], n_samples: int,
                      seed: int) -> FractionEstimate:
    """Monte Carlo fraction of ``psi0`` uniform on the sphere of ``H_mu`` satisfying a predicate."""
    if n_samples < 1:
        raise DomainError(f"need at least one sample, got {n_samples}")
    hits = sum(bool(predicate(sample_unit_state(decomp, mu, derive_seed(seed, k))))
               for k in range(n_samples))
    p = hits / n_samples
    return FractionEstimate(p, math.sqrt(p * (1 - p) / n_samples), n_samples)


# -- report ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TypicalityReport:
    """Error series against ``M`` and against the ensemble curves for one run."""

    mu: int
    M: MMatrix
    trajectory: Trajectory
    M_psi0: np.ndarray
    curves: np.ndarray
    absolute: ErrorSeries
    relative: ErrorSeries
    comparative: ErrorSeries
    most_t: np.ndarray | None = None
    bound: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = {
            "mu": self.mu,
            "M_row": self.M.row(self.mu).tolist(),
            "M_psi0": self.M_psi0.tolist(),
            "undefined_relative": self.relative.n_undefined,
            "undefined_comparative": self.comparative.n_undefined,
        }
        if self.most_t is not None:
            out["bound"] = np.asarray(self.bound).tolist()
            out["most_t_fraction"] = np.asarray(self.most_t).tolist()
        return out


def typicality_report(spec: SpectralData, decomp: MacroDecomposition, mu: int, psi0: np.ndarray,
                      times, bound=None, M: MMatrix | None = None,
                      tol: float | None = None) -> TypicalityReport:
    """Assemble trajectory, M-matrix, ensemble curves and all error series."""
    M = compute_M_matrix(spec, decomp, tol) if M is None else M
    traj = trajectory(spec, decomp, psi0, times)
    Mpsi = compute_M_psi_weights(spec, decomp, psi0, tol)
    curves = ensemble_curves(spec, decomp, mu, traj.times)
    row = M.row(mu)
    ab = error_series(traj.weights, row, "absolute")
    rel = error_series(traj.weights, row, "relative")
    comp = error_series(traj.weights, curves, "comparative", Mpsi)
    frac = None if bound is None else np.atleast_1d(most_t_fraction(ab.values, bound))
    return TypicalityReport(mu, M, traj, Mpsi, curves, ab, rel, comp, frac,
                            None if bound is None else np.broadcast_to(bound, (decomp.m,)).copy())
