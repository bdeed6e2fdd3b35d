"""Closed-form typicality bounds as pure functions of recorded inputs.

Every evaluator reads what it needs from a :class:`BoundInputs` record and
raises :class:`~typlab.errors.DomainError` if a required field is missing.
Bounds whose premises fail at the given sizes are still evaluated; see
:func:`preconditions` for the flags.

Conventions
-----------
* The dimension ``d_E`` in the finite-time bound is taken to be ``D``.
* ``log2`` is used in the finite-time bound and the natural log in the
  concentration branch of the dynamical-typicality bound.
* Entropy forms use ``d = exp(s N / kB)`` for the macro spaces and
  ``D = exp(s_mc N / kB)``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from typing import Any, NamedTuple

import numpy as np

from .errors import DomainError

__all__ = [
    "BoundInputs",
    "ObservableData",
    "observable_data",
    "projector_data",
    "bound_abs_finiteT",
    "bound_abs_infT",
    "bound_abs_infT_entropy",
    "bound_Mmunu_lower_rv",
    "bound_MmuB_lower",
    "bound_Mmunu_lower_nogaps",
    "bound_relative_gnt",
    "bound_dyntyp_abs",
    "bound_dyntyp_L2",
    "bound_comparative",
    "bound_LB_B_psi",
    "bound_spectral_gap",
    "bound_aek",
    "bound_eth",
    "nogaps_threshold",
    "preconditions",
    "evaluate_all",
]


@dataclass(frozen=True)
class BoundInputs:
    """All symbols that appear in the bounds; unset fields are ``None``."""

    eps: float | None = None
    delta: float | None = None
    eps_prime: float | None = None
    kappa: float | None = None
    T: float | None = None
    d_mu: float | None = None
    d_nu: float | None = None
    D: float | None = None
    D_E: int = 1
    D_G: int = 1
    G_kappa: int | None = None
    B_norm: float | None = None
    B_trace: float | None = None
    B_trace_abs: float | None = None
    B_trace_pos: float | None = None
    B_trace_neg: float | None = None
    b_pos_min: float | None = None
    b_pos_max: float | None = None
    b_neg_min: float | None = None
    b_neg_max: float | None = None
    B_hs_traceless: float | None = None
    K: float | None = None
    J: float | None = None
    C_sigma: float | None = None
    c_c: float = 1.0
    s_mu: float | None = None
    s_nu: float | None = None
    s_mc: float | None = None
    N: float | None = None
    kB: float = 1.0
    xi: float | None = None
    tau: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        for name in ("eps", "delta", "kappa", "T", "d_mu", "d_nu", "D", "K", "J",
                     "C_sigma", "N", "xi", "tau"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise DomainError(f"{name} must be positive, got {v}")
        if self.eps_prime is not None and not 0 < self.eps_prime < 0.5:
            raise DomainError(f"eps' must lie in (0, 1/2), got {self.eps_prime}")
        if self.B_norm is not None and self.B_norm < 0:
            raise DomainError("operator norm must be non-negative")
        if not (self.c_c > 0 and self.kB > 0):
            raise DomainError("c_c and kB must be positive")

    def need(self, *names: str) -> tuple:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise DomainError(f"missing bound inputs: {', '.join(missing)}")
        return tuple(getattr(self, n) for n in names)

    def entropies(self) -> tuple[float, float, float]:
        """``(s_mu, s_nu, s_mc)``, derived from the dimensions when not given."""
        if None not in (self.s_mu, self.s_nu, self.s_mc):
            return self.s_mu, self.s_nu, self.s_mc
        d_mu, d_nu, D, N = self.need("d_mu", "d_nu", "D", "N")
        f = self.kB / N
        return f * math.log(d_mu), f * math.log(d_nu), f * math.log(D)

    def replace(self, **changes) -> "BoundInputs":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class ObservableData(NamedTuple):
    B_norm: float
    B_trace: float
    B_trace_abs: float
    B_trace_pos: float
    B_trace_neg: float
    b_pos_min: float
    b_pos_max: float
    b_neg_min: float
    b_neg_max: float
    B_hs_traceless: float


def observable_data(B: np.ndarray) -> ObservableData:
    """Spectral data of a Hermitian ``B`` with ``B = B+ - B-``.

    The extreme eigenvalues of ``B+`` and ``B-`` are taken over the whole
    space, so zero eigenvalues count.
    """
    b = np.linalg.eigvalsh(np.asarray(B))
    pos = np.maximum(b, 0.0)
    neg = np.maximum(-b, 0.0)
    mean = b.sum() / len(b)
    return ObservableData(
        B_norm=float(np.max(np.abs(b))),
        B_trace=float(b.sum()),
        B_trace_abs=float(np.abs(b).sum()),
        B_trace_pos=float(pos.sum()),
        B_trace_neg=float(neg.sum()),
        b_pos_min=float(pos.min()),
        b_pos_max=float(pos.max()),
        b_neg_min=float(neg.min()),
        b_neg_max=float(neg.max()),
        B_hs_traceless=float(np.sqrt(np.sum((b - mean) ** 2))),
    )


def projector_data(d_nu: int, D: int) -> ObservableData:
    """Closed-form :class:`ObservableData` of a rank-``d_nu`` projector."""
    full = d_nu == D
    hs = math.sqrt(max(d_nu - d_nu**2 / D, 0.0))
    return ObservableData(1.0, float(d_nu), float(d_nu), float(d_nu), 0.0,
                          1.0 if full else 0.0, 1.0, 0.0, 0.0, hs)


# -- absolute errors -------------------------------------------------------------

def bound_abs_finiteT(inp: BoundInputs) -> float:
    """Absolute-error bound on ``[0, T]`` with ``d_E = D``."""
    eps, delta, kappa, T, d_mu, D, G, Bn, trB = inp.need(
        "eps", "delta", "kappa", "T", "d_mu", "D", "G_kappa", "B_norm", "B_trace_abs")
    finite = 1.0 + (8.0 * math.log2(D) / (kappa * T) if math.isfinite(T) else 0.0)
    return 4.0 * math.sqrt(inp.D_E * G * Bn / (delta * eps * d_mu) * finite * min(Bn, trB / d_mu))


def bound_abs_infT(inp: BoundInputs) -> float:
    """Long-time absolute-error bound for ``B = P_nu``."""
    eps, delta, d_mu, d_nu = inp.need("eps", "delta", "d_mu", "d_nu")
    return 4.0 * math.sqrt(inp.D_E * inp.D_G / (delta * eps * d_mu) * min(1.0, d_nu / d_mu))


def bound_abs_infT_entropy(inp: BoundInputs) -> float:
    """Entropy form of :func:`bound_abs_infT`."""
    eps, delta, N = inp.need("eps", "delta", "N")
    s_mu, s_nu, _ = inp.entropies()
    pre = 4.0 * math.sqrt(inp.D_E * inp.D_G / (eps * delta))
    if s_nu >= s_mu:
        return pre * math.exp(-s_mu * N / (2 * inp.kB))
    return pre * math.exp(-(s_mu - s_nu / 2) * N / inp.kB)


# -- lower bounds on asymptotic weights -------------------------------------------

def bound_Mmunu_lower_rv(inp: BoundInputs) -> float:
    """Lower bound on ``M_mu,nu`` in terms of ``C_sigma`` and ``eps'``."""
    eps_p, C_s, d_mu, d_nu, D = inp.need("eps_prime", "C_sigma", "d_mu", "d_nu", "D")
    return (math.sqrt(eps_p * C_s) * max(d_mu, d_nu) / D) ** 16 * min(1.0, d_nu / d_mu)


def _nogaps_factor(inp: BoundInputs, d: float) -> float:
    K, J, D = inp.need("K", "J", "D")
    return (d / (4.0 * inp.c_c * math.sqrt(K * J) * D)) ** 16


def bound_MmuB_lower(inp: BoundInputs) -> float:
    """Lower bound on ``|M_muB|`` from no-gaps delocalization (may be <= 0)."""
    d_mu, bpm, trp, bnM, trn = inp.need("d_mu", "b_pos_min", "B_trace_pos", "b_neg_max", "B_trace_neg")
    return max(bpm, _nogaps_factor(inp, d_mu) * trp / d_mu) - min(bnM, trn / d_mu)


class NoGapsLower(NamedTuple):
    lb1: float
    lb2: float
    combined: float


def bound_Mmunu_lower_nogaps(inp: BoundInputs) -> NoGapsLower:
    """Lower bounds on ``M_mu,nu`` in terms of ``K``, ``J`` and ``c_c``."""
    d_mu, d_nu = inp.need("d_mu", "d_nu")
    lb1 = d_nu / d_mu * _nogaps_factor(inp, d_mu)
    lb2 = _nogaps_factor(inp, d_nu)
    comb = _nogaps_factor(inp, max(d_mu, d_nu)) * min(1.0, d_nu / d_mu)
    return NoGapsLower(lb1, lb2, comb)


class TwoForms(NamedTuple):
    dimension: float
    entropy: float | None


def bound_relative_gnt(inp: BoundInputs) -> TwoForms:
    """Relative-error bound for ``B = P_nu`` over long times.

    The dimension form uses ``4 c_c sqrt(KJ)``; the entropy form uses
    ``(C_sigma eps')**-8``.  They coincide when
    ``4 c_c sqrt(KJ) = (C_sigma eps')**-1/2``.
    """
    eps, delta, d_mu, d_nu, D, K, J = inp.need("eps", "delta", "d_mu", "d_nu", "D", "K", "J")
    dim = (4.0 / math.sqrt(eps * delta * min(d_mu, d_nu))
           * (4.0 * inp.c_c * math.sqrt(K * J) * D / max(d_mu, d_nu)) ** 16)
    if None in (inp.C_sigma, inp.eps_prime, inp.N):
        return TwoForms(dim, None)
    s_mu, s_nu, s_mc = inp.entropies()
    lo, hi = min(s_mu, s_nu), max(s_mu, s_nu)
    ent = (4.0 / math.sqrt(eps * delta) * (inp.C_sigma * inp.eps_prime) ** -8
           * math.exp(-inp.N / (2 * inp.kB) * (lo - 32 * (s_mc - hi))))
    return TwoForms(dim, ent)


# -- dynamical typicality --------------------------------------------------------

def bound_dyntyp_abs(inp: BoundInputs) -> float:
    """Fixed-time deviation bound from the ensemble curve (minimum of three)."""
    eps, d_mu, Bn, trB = inp.need("eps", "d_mu", "B_norm", "B_trace_abs")
    a = Bn / math.sqrt(eps * d_mu)
    b = math.sqrt(Bn * trB / (eps * d_mu**2))
    c = math.sqrt(18 * math.pi**3 * max(math.log(4.0 / eps), 0.0) / d_mu) * Bn
    return min(a, b, c)


def bound_dyntyp_L2(inp: BoundInputs) -> float:
    """Time-averaged squared deviation bound on ``[0, T]``."""
    eps, d_mu, Bn = inp.need("eps", "d_mu", "B_norm")
    return Bn**2 / (eps * d_mu)


class ComparativeBound(NamedTuple):
    pointwise: float
    L2: float
    pointwise_dimension: float
    L2_dimension: float


def bound_comparative(inp: BoundInputs) -> ComparativeBound:
    """Comparative-error bounds (fixed time and time-averaged square)."""
    eps, C_s, eps_p, d_mu, d_nu, D = inp.need("eps", "C_sigma", "eps_prime", "d_mu", "d_nu", "D")
    c = C_s * eps_p
    dim_pt = c**-8 / math.sqrt(eps) * math.sqrt(min(d_mu, d_nu)) / d_mu * (D / d_nu) ** 16
    dim_l2 = c**-16 / eps / d_mu * (D / d_nu) ** 32
    if inp.N is None and None in (inp.s_mu, inp.s_nu, inp.s_mc):
        return ComparativeBound(dim_pt, dim_l2, dim_pt, dim_l2)
    N, = inp.need("N")
    s_mu, s_nu, s_mc = inp.entropies()
    f = N / inp.kB
    ent_pt = c**-8 / math.sqrt(eps) * math.exp(-f / 2 * (2 * s_mu - min(s_mu, s_nu) - 32 * (s_mc - s_nu)))
    ent_l2 = c**-16 / eps * math.exp(-f * (s_mu - 32 * (s_mc - s_nu)))
    return ComparativeBound(ent_pt, ent_l2, dim_pt, dim_l2)


def bound_LB_B_psi(inp: BoundInputs) -> float:
    """Lower bound on the time average of ``<psi_t|B|psi_t>`` for most ``psi0``."""
    eps, d_mu, Bn, trB = inp.need("eps", "d_mu", "B_norm", "B_trace_abs")
    corr = math.sqrt(2.0) * math.sqrt(Bn / (eps * d_mu) * min(Bn, trB / d_mu))
    return bound_MmuB_lower(inp) - corr


class SpectralGapBound(NamedTuple):
    b: float
    applicable: bool
    relative: float | None
    relative_L2: float | None


def bound_spectral_gap(inp: BoundInputs) -> SpectralGapBound:
    """Spectral gap ``b`` of ``B`` and the resulting relative dynamical bounds."""
    bpm, bnM, bnm, bpM = inp.need("b_pos_min", "b_neg_max", "b_neg_min", "b_pos_max")
    b = max(bpm - bnM, bnm - bpM)
    if not b > 0:
        return SpectralGapBound(b, False, None, None)
    rel = bound_dyntyp_abs(inp) / b if inp.eps is not None else None
    l2 = bound_dyntyp_L2(inp) / b**2 if inp.eps is not None else None
    return SpectralGapBound(b, True, rel, l2)


# -- sup-norm and ETH routes -----------------------------------------------------

class AekBound(NamedTuple):
    lb1: float
    lb2: float
    MmuB: float | None


def bound_aek(inp: BoundInputs) -> AekBound:
    """Lower bounds on ``M_mu,nu`` from sup-norm delocalization at exponent ``tau``."""
    d_mu, d_nu, D, tau = inp.need("d_mu", "d_nu", "D", "tau")
    scale = D ** (1 - 2 * tau)
    lb1 = d_nu / d_mu * (1 - (D - d_mu) / scale)
    lb2 = 1 - (D - d_nu) / scale
    MmuB = None
    if None not in (inp.b_pos_min, inp.B_trace_pos, inp.b_neg_max, inp.B_trace_neg):
        MmuB = (max(inp.b_pos_min, inp.B_trace_pos / d_mu * (1 - (D - d_mu) / scale))
                - min(inp.b_neg_max, inp.B_trace_neg / d_mu))
    return AekBound(lb1, lb2, MmuB)


class EthBound(NamedTuple):
    MmuB: float | None
    Mmunu: float
    Mmunu_alt: float
    relative: float | None
    relative_dimension: float | None


def bound_eth(inp: BoundInputs) -> EthBound:
    """Lower bounds on ``M`` under the ETH inequality at exponent ``xi``.

    ``relative`` is the entropy form of the relative-error bound and
    ``relative_dimension`` its dimension form.
    """
    d_mu, d_nu, D, xi = inp.need("d_mu", "d_nu", "D", "xi")
    Dx = D**xi
    mmub = None
    if inp.B_trace is not None and inp.B_hs_traceless is not None:
        mmub = abs(inp.B_trace) / D - Dx / D * inp.B_hs_traceless
    mmunu = d_nu / D * (1 - Dx / math.sqrt(d_nu))
    alt = d_nu / D * (1 - Dx / math.sqrt(d_mu))
    rel = rel_dim = None
    if inp.eps is not None and inp.delta is not None:
        pre = 8.0 / math.sqrt(inp.eps * inp.delta)
        rel_dim = pre * D / (d_nu * math.sqrt(d_mu)) * math.sqrt(min(1.0, d_nu / d_mu))
        if inp.N is not None or None not in (inp.s_mu, inp.s_nu, inp.s_mc):
            s_mu, s_nu, s_mc = inp.entropies()
            N, = inp.need("N")
            rel = pre * math.exp(-N / inp.kB * (max(s_mu, s_nu) - s_mc + 0.5 * min(s_mu, s_nu)))
    return EthBound(mmub, mmunu, alt, rel, rel_dim)


def nogaps_threshold(kappa: float, K: float, J: float, c_c: float = 1.0) -> float:
    """Squared-mass threshold ``(kappa s)**16`` with ``s = 1 / (2 c_c sqrt(KJ))``."""
    s = 1.0 / (2.0 * c_c * math.sqrt(K * J))
    return (kappa * s) ** 16


# -- preconditions and reports ----------------------------------------------------

def preconditions(inp: BoundInputs) -> dict[str, bool | None]:
    """Premise checks of the bounds (``None`` when inputs are missing)."""
    out: dict[str, bool | None] = {}
    d_mu, d_nu, ep = inp.d_mu, inp.d_nu, inp.eps_prime
    if None not in (d_mu, d_nu, ep):
        lim_rv = max(166.0, 4 * abs(math.log2(ep / math.sqrt(2))))
        out["Mmunu_lower_rv"] = d_mu > lim_rv and d_nu > lim_rv
        out["relative_gnt"] = out["Mmunu_lower_rv"]
        lim_c = max(166.0, 4 * abs(math.log2(ep)))
        out["comparative"] = d_nu > lim_c
        out["LB_B_psi"] = d_mu > lim_c and d_nu > lim_c
    else:
        out.update(Mmunu_lower_rv=None, relative_gnt=None, comparative=None, LB_B_psi=None)
    if d_mu is not None and ep is not None:
        out["MmuB_lower"] = d_mu > max(166.0, 2 * abs(math.log2(ep)))
    else:
        out["MmuB_lower"] = None
    if None not in (d_mu, d_nu, inp.D, inp.xi):
        lim = 2 * inp.D**inp.xi
        out["eth_relative"] = math.sqrt(d_nu) >= lim or math.sqrt(d_mu) >= lim
    else:
        out["eth_relative"] = None
    out["MmuB_lower_positive"] = None
    try:
        out["MmuB_lower_positive"] = bound_MmuB_lower(inp) > 0
    except DomainError:
        pass
    return out


def _jsonable(v: Any):
    if isinstance(v, tuple) and hasattr(v, "_asdict"):
        return {k: _jsonable(x) for k, x in v._asdict().items()}
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


_EVALUATORS = {
    "abs_finiteT": bound_abs_finiteT,
    "abs_infT": bound_abs_infT,
    "abs_infT_entropy": bound_abs_infT_entropy,
    "Mmunu_lower_rv": bound_Mmunu_lower_rv,
    "Mmunu_lower_nogaps": bound_Mmunu_lower_nogaps,
    "MmuB_lower": bound_MmuB_lower,
    "relative_gnt": bound_relative_gnt,
    "dyntyp_abs": bound_dyntyp_abs,
    "dyntyp_L2": bound_dyntyp_L2,
    "comparative": bound_comparative,
    "LB_B_psi": bound_LB_B_psi,
    "spectral_gap": bound_spectral_gap,
    "aek": bound_aek,
    "eth": bound_eth,
}


def evaluate_all(inp: BoundInputs, empirical: dict | None = None,
                 constants: dict | None = None) -> dict:
    """Evaluate every bound whose inputs are present.

    Returns a JSON-ready report echoing the inputs, the bound values, the
    premise flags, the constants used and any empirical quantities supplied
    for comparison.  Non-finite values are reported as ``null``.
    """
    values: dict[str, Any] = {}
    skipped: dict[str, str] = {}
    for name, fn in _EVALUATORS.items():
        try:
            values[name] = _jsonable(fn(inp))
        except (DomainError, ValueError, OverflowError, ZeroDivisionError) as exc:
            skipped[name] = str(exc)
    return {
        "inputs": {k: _jsonable(v) for k, v in inp.to_dict().items()},
        "conventions": {"d_E": "D", "log_finiteT": "log2", "log_dyntyp": "ln"},
        "constants": {k: _jsonable(v) for k, v in (constants or {}).items()},
        "bounds": values,
        "skipped": skipped,
        "preconditions": preconditions(inp),
        "empirical": {k: _jsonable(v) for k, v in (empirical or {}).items()},
    }
