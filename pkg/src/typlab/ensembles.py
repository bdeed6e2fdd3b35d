"""Random Hermitian Hamiltonians ``H = H0 + V`` and their ensemble constants.

The random part is ``V = (A + A*) / sqrt(2)`` where ``A`` has independent
entries with ``Re a_ij, Im a_ij ~ N(0, sigma_ij**2 / 2)``.  Off-diagonal
entries of ``V`` then have real and imaginary parts of variance
``sigma_ij**2 / 2`` and the diagonal is real with variance ``sigma_ii**2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import DomainError, EstimatorError, SpecError
from .hilbert import as_generator, derive_seed
from .spectral import operator_norm

__all__ = [
    "VarianceProfile",
    "EnsembleSpec",
    "EnsembleConstants",
    "JEstimate",
    "constant_profile",
    "exponential_band_profile",
    "table_profile",
    "profile_from_json",
    "profile_to_json",
    "sample_hamiltonian",
    "latala_expression",
    "compute_CH0",
    "boundedness_event",
    "estimate_J",
    "J_markov",
    "density_bound_K",
    "compute_C_sigma",
    "solve_eta",
    "ensemble_constants",
]

SQRT_2PI = math.sqrt(2 * math.pi)


@dataclass(frozen=True, eq=False)
class VarianceProfile:
    """Symmetric table of entry standard deviations ``sigma_ij``.

    ``floor`` and ``cap`` are the declared bounds ``sigma_-`` and ``sigma_+``;
    when absent the extreme table entries are used.
    """

    kind: str
    sigma: np.ndarray = field(repr=False)
    s: float | None = None
    floor: float | None = None
    cap: float | None = None

    def __post_init__(self):
        sig = np.asarray(self.sigma, dtype=float)
        if sig.ndim != 2 or sig.shape[0] != sig.shape[1]:
            raise SpecError(f"variance table must be square, got shape {sig.shape}")
        if np.any(sig < 0) or not np.all(np.isfinite(sig)):
            raise SpecError("standard deviations must be finite and non-negative")
        if not np.array_equal(sig, sig.T):
            raise SpecError("variance table must be symmetric")
        for name in ("floor", "cap"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise SpecError(f"{name} must be positive, got {v}")
        if self.floor is not None and self.cap is not None and self.floor > self.cap:
            raise SpecError("floor exceeds cap")
        sig.setflags(write=False)
        object.__setattr__(self, "sigma", sig)

    @property
    def D(self) -> int:
        return self.sigma.shape[0]

    @property
    def sigma2(self) -> np.ndarray:
        return self.sigma**2

    @property
    def sigma_minus(self) -> float:
        return float(self.floor) if self.floor is not None else float(self.sigma.min())

    @property
    def sigma_plus(self) -> float:
        return float(self.cap) if self.cap is not None else float(self.sigma.max())


def _clip(sigma: np.ndarray, floor, cap) -> np.ndarray:
    if floor is not None or cap is not None:
        sigma = np.clip(sigma, floor, cap)
    return sigma


def constant_profile(D: int, sigma: float = 1.0) -> VarianceProfile:
    if D < 1:
        raise SpecError(f"D must be >= 1, got {D}")
    if sigma < 0:
        raise SpecError(f"sigma must be non-negative, got {sigma}")
    return VarianceProfile("constant", np.full((D, D), float(sigma)))


def exponential_band_profile(D: int, s: float, floor: float | None = None,
                             cap: float | None = None) -> VarianceProfile:
    """``sigma_jk**2 = exp(-s |j - k|)``, optionally clipped to ``[floor, cap]``."""
    if D < 1:
        raise SpecError(f"D must be >= 1, got {D}")
    if not s >= 0:
        raise DomainError(f"band parameter must be non-negative, got {s}")
    idx = np.arange(D)
    sigma = np.exp(-0.5 * s * np.abs(idx[:, None] - idx[None, :]))
    return VarianceProfile("exponential-band", _clip(sigma, floor, cap), s=float(s),
                           floor=floor, cap=cap)


def table_profile(sigma2, floor: float | None = None, cap: float | None = None) -> VarianceProfile:
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(sigma2 < 0):
        raise SpecError("variances must be non-negative")
    return VarianceProfile("table", _clip(np.sqrt(sigma2), floor, cap), floor=floor, cap=cap)


def profile_from_json(obj: dict, D: int | None = None) -> VarianceProfile:
    """Build a profile from its JSON record (``kind`` plus parameters)."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SpecError("profile record needs a 'kind' field")
    kind = obj["kind"]
    floor, cap = obj.get("floor"), obj.get("cap")
    if kind == "table":
        if "sigma2" not in obj:
            raise SpecError("table profile needs 'sigma2'")
        prof = table_profile(obj["sigma2"], floor, cap)
        if D is not None and prof.D != D:
            raise SpecError(f"table dimension {prof.D} != D={D}")
        return prof
    if D is None:
        raise SpecError(f"profile kind {kind!r} needs the dimension D")
    if kind == "exponential-band":
        if "s" not in obj:
            raise SpecError("exponential-band profile needs 's'")
        return exponential_band_profile(D, float(obj["s"]), floor, cap)
    if kind == "constant":
        prof = constant_profile(D, float(obj.get("sigma", 1.0)))
        if floor is not None or cap is not None:
            prof = VarianceProfile("constant", _clip(prof.sigma, floor, cap), floor=floor, cap=cap)
        return prof
    raise SpecError(f"unknown profile kind {kind!r}")


def profile_to_json(profile: VarianceProfile) -> dict:
    if profile.kind == "exponential-band":
        out = {"kind": "exponential-band", "s": profile.s}
    elif profile.kind == "constant":
        out = {"kind": "constant", "sigma": float(profile.sigma.flat[0]) if profile.D else 0.0}
    else:
        out = {"kind": "table", "sigma2": profile.sigma2.tolist()}
    if profile.floor is not None:
        out["floor"] = profile.floor
    if profile.cap is not None:
        out["cap"] = profile.cap
    return out


@dataclass(frozen=True, eq=False)
class EnsembleSpec:
    """Recipe for ``H = H0 + V``; ``H0 = None`` means no deterministic part."""

    profile: VarianceProfile
    H0: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.H0 is not None:
            H0 = np.asarray(self.H0)
            if H0.shape != (self.D, self.D):
                raise SpecError(f"H0 shape {H0.shape} does not match D={self.D}")
            scale = max(1.0, float(np.max(np.abs(H0)))) if H0.size else 1.0
            if float(np.max(np.abs(H0 - H0.conj().T))) > 1e-12 * scale:
                raise SpecError("H0 is not Hermitian")
            H0 = 0.5 * (H0 + H0.conj().T)
            H0.setflags(write=False)
            object.__setattr__(self, "H0", H0)

    @property
    def D(self) -> int:
        return self.profile.D


def sample_hamiltonian(spec: EnsembleSpec, seed) -> np.ndarray:
    """Draw one Hamiltonian; the output is exactly Hermitian."""
    rng = as_generator(seed)
    D = spec.D
    scale = spec.profile.sigma / math.sqrt(2.0)  # std of Re a and Im a
    A = scale * (rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D)))
    H = (A + A.conj().T) / math.sqrt(2.0)
    if spec.H0 is not None:
        H = H + spec.H0
    return H


def latala_expression(profile, fourth_moments=None, C_hat: float = 1.0) -> float:
    """Three-term norm bound for a matrix of independent centred entries.

    ``profile`` is a :class:`VarianceProfile` or an array of variances.
    Without ``fourth_moments`` the Gaussian value ``3 var**2`` is used.
    """
    var = profile.sigma2 if isinstance(profile, VarianceProfile) else np.asarray(profile, dtype=float)
    m4 = 3.0 * var**2 if fourth_moments is None else np.asarray(fourth_moments, dtype=float)
    rows = float(np.sqrt(var.sum(axis=1)).max())
    cols = float(np.sqrt(var.sum(axis=0)).max())
    return C_hat * (rows + cols + float(m4.sum()) ** 0.25)


def compute_CH0(H0: np.ndarray | None, D: int | None = None) -> float:
    """``D**-0.5 * max(||Re H0||, ||Im H0||)``."""
    if H0 is None:
        return 0.0
    H0 = np.asarray(H0)
    D = H0.shape[0] if D is None else D
    re = operator_norm(np.ascontiguousarray(H0.real))
    im = operator_norm(np.ascontiguousarray(H0.imag)) if np.iscomplexobj(H0) else 0.0
    return max(re, im) / math.sqrt(D)


def boundedness_event(H: np.ndarray, J: float) -> bool:
    """Whether ``||H|| <= J sqrt(D)`` (relative tolerance 1e-10)."""
    H = np.asarray(H)
    return operator_norm(H) <= J * math.sqrt(H.shape[0]) * (1 + 1e-10)


def density_bound_K(profile) -> float:
    """Density bound ``1 / (sqrt(2 pi) sigma_-)`` of the Gaussian entries."""
    sm = profile.sigma_minus if isinstance(profile, VarianceProfile) else float(profile)
    if not sm > 0:
        raise DomainError("sigma_- = 0: entry densities are unbounded")
    return 1.0 / (SQRT_2PI * sm)


@dataclass(frozen=True)
class JEstimate:
    quantile: float
    J: float
    K_inv: float
    branch: str
    eta: float
    samples: np.ndarray = field(repr=False)


def _norm_statistic(H: np.ndarray, part: str) -> float:
    if part == "full":
        return operator_norm(H, hermitian=True)
    return max(operator_norm(np.ascontiguousarray(H.real)),
               operator_norm(np.ascontiguousarray(H.imag)))


def estimate_J(spec: EnsembleSpec, eta: float, n_samples: int, seed: int,
               part: Literal["re-im", "full"] = "re-im") -> JEstimate:
    """Empirical ``(1 - eta)``-quantile of the scaled norm, floored at ``1/K``.

    ``part="re-im"`` uses ``max(||Re H||, ||Im H||) / sqrt(D)``;
    ``part="full"`` uses ``||H|| / sqrt(D)``.  Sample ``k`` is drawn with
    seed ``derive_seed(seed, k)``.
    """
    if not 0 < eta < 0.5:
        raise DomainError(f"eta must lie in (0, 1/2), got {eta}")
    if n_samples < 20:
        raise EstimatorError(f"need at least 20 samples, got {n_samples}")
    if part not in ("re-im", "full"):
        raise DomainError(f"unknown norm part {part!r}")
    D = spec.D
    vals = np.array([_norm_statistic(sample_hamiltonian(spec, derive_seed(seed, k)), part)
                     for k in range(n_samples)]) / math.sqrt(D)
    q = float(np.quantile(vals, 1.0 - eta))
    sm = spec.profile.sigma_minus
    K_inv = SQRT_2PI * sm
    branch = "K_inv" if K_inv >= q else "quantile"
    return JEstimate(q, max(K_inv, q), K_inv, branch, eta, vals)


def J_markov(profile: VarianceProfile, eta: float, C_hat: float = 1.0) -> float:
    """Markov-type choice ``J = (4 / eta) C_hat sigma_+``."""
    if not 0 < eta < 0.5:
        raise DomainError(f"eta must lie in (0, 1/2), got {eta}")
    return 4.0 / eta * C_hat * profile.sigma_plus


def compute_C_sigma(sigma_minus: float, sigma_plus: float, C_H0: float,
                    c_minus: float = 1.0, c_plus: float = 1.0) -> float:
    """``c_- sigma_- / (c_+ sigma_+ + C_H0)``."""
    den = c_plus * sigma_plus + C_H0
    if not den > 0:
        raise DomainError("C_sigma denominator must be positive")
    return c_minus * sigma_minus / den


def solve_eta(eps_prime: float, d_mu: int, d_nu: int) -> float:
    """Quantile level ``eta`` with ``1 - eps' = (1 - 2**(-d_mu/2) - 2**(-d_nu/2)) (1 - eta)**4``."""
    if not 0 < eps_prime < 0.5:
        raise DomainError(f"eps' must lie in (0, 1/2), got {eps_prime}")
    base = 1.0 - 2.0 ** (-d_mu / 2) - 2.0 ** (-d_nu / 2)
    if not base > 0:
        raise DomainError("dimensions too small for a valid quantile level")
    eta = 1.0 - ((1.0 - eps_prime) / base) ** 0.25
    if not 0 < eta < 0.5:
        raise DomainError(f"no quantile level in (0, 1/2) for eps'={eps_prime}, "
                          f"d_mu={d_mu}, d_nu={d_nu} (got {eta})")
    return eta


@dataclass(frozen=True)
class EnsembleConstants:
    """Ensemble constants together with the absolute constants used."""

    K: float
    J: float
    eta: float
    C_H0: float
    C_sigma: float
    c_minus: float = 1.0
    c_plus: float = 1.0
    c_c: float = 1.0
    C_hat: float = 1.0

    def __post_init__(self):
        if not (self.K > 0 and self.J > 0):
            raise DomainError("K and J must be positive")
        if not 0 < self.eta < 0.5:
            raise DomainError(f"eta must lie in (0, 1/2), got {self.eta}")

    @property
    def s_nogaps(self) -> float:
        """``s = 1 / (2 c_c sqrt(K J))``."""
        return 1.0 / (2.0 * self.c_c * math.sqrt(self.K * self.J))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("K", "J", "eta", "C_H0", "C_sigma", "c_minus", "c_plus", "c_c", "C_hat")}


def ensemble_constants(spec: EnsembleSpec, eta: float, n_samples: int, seed: int, *,
                       c_minus: float = 1.0, c_plus: float = 1.0, c_c: float = 1.0,
                       C_hat: float = 1.0, part: Literal["re-im", "full"] = "re-im"
                       ) -> EnsembleConstants:
    """Estimate ``K``, ``J``, ``C_H0`` and ``C_sigma`` for an ensemble."""
    prof = spec.profile
    K = density_bound_K(prof)
    J = estimate_J(spec, eta, n_samples, seed, part=part).J
    ch0 = compute_CH0(spec.H0, spec.D)
    cs = compute_C_sigma(prof.sigma_minus, prof.sigma_plus, ch0, c_minus, c_plus)
    return EnsembleConstants(K, J, eta, ch0, cs, c_minus, c_plus, c_c, C_hat)
