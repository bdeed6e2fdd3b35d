import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from typlab.ensembles import (
    EnsembleConstants,
    EnsembleSpec,
    J_markov,
    VarianceProfile,
    boundedness_event,
    compute_C_sigma,
    compute_CH0,
    constant_profile,
    density_bound_K,
    ensemble_constants,
    estimate_J,
    exponential_band_profile,
    latala_expression,
    profile_from_json,
    profile_to_json,
    sample_hamiltonian,
    solve_eta,
    table_profile,
)
from typlab.errors import DomainError, EstimatorError, SpecError
from typlab.hilbert import derive_seed


# -- profiles ------------------------------------------------------------------

def test_band_profile_examples():
    assert np.all(exponential_band_profile(7, 0.0).sigma == 1.0)
    p = exponential_band_profile(6, math.log(4))
    assert p.sigma2[2, 3] == pytest.approx(0.25, rel=1e-14)
    assert p.sigma2[3, 2] == pytest.approx(0.25, rel=1e-14)
    assert np.all(np.diag(exponential_band_profile(9, 3.3).sigma) == 1.0)


@given(st.integers(1, 30), st.floats(0, 5))
@settings(max_examples=40, deadline=None)
def test_band_profile_symmetric(D, s):
    p = exponential_band_profile(D, s)
    assert np.array_equal(p.sigma, p.sigma.T)
    j, k = np.indices((D, D))
    assert np.allclose(p.sigma2, np.exp(-s * np.abs(j - k)), rtol=1e-13)


def test_profile_floor_cap():
    p = exponential_band_profile(20, 1.0, floor=0.3, cap=0.9)
    assert p.sigma.min() >= 0.3 and p.sigma.max() <= 0.9
    assert p.sigma_minus == 0.3 and p.sigma_plus == 0.9


def test_profile_validation():
    with pytest.raises(SpecError):
        VarianceProfile("custom-table", np.array([[1.0, 2.0], [0.5, 1.0]]))
    with pytest.raises(SpecError):
        VarianceProfile("custom-table", -np.ones((2, 2)))
    with pytest.raises(SpecError):
        VarianceProfile("custom-table", np.ones((2, 3)))


@pytest.mark.parametrize("obj", [
    {"kind": "exponential-band", "s": 0.5},
    {"kind": "constant", "sigma": 0.7},
    {"kind": "table", "sigma2": [[1.0, 0.25], [0.25, 4.0]]},
])
def test_profile_json_roundtrip(obj):
    p = profile_from_json(obj, 2)
    q = profile_from_json(profile_to_json(p), 2)
    assert np.allclose(p.sigma, q.sigma)


# -- sampling ------------------------------------------------------------------

@given(st.integers(1, 25), st.integers(0, 2**32))
@settings(max_examples=30, deadline=None)
def test_sample_exactly_hermitian(D, seed):
    H = sample_hamiltonian(EnsembleSpec(exponential_band_profile(D, 0.3)), seed)
    assert np.max(np.abs(H - H.conj().T)) == 0
    assert np.all(np.diag(H).imag == 0)


def test_sample_determinism():
    spec = EnsembleSpec(constant_profile(30))
    assert sample_hamiltonian(spec, 77).tobytes() == sample_hamiltonian(spec, 77).tobytes()


def test_sample_dimension_mismatch():
    with pytest.raises(SpecError):
        EnsembleSpec(constant_profile(3), np.eye(4))


def test_non_hermitian_H0_rejected():
    with pytest.raises(SpecError):
        EnsembleSpec(constant_profile(2), np.array([[0, 1], [0, 0]], dtype=float))


def _draws(spec, n, seed):
    return np.stack([sample_hamiltonian(spec, derive_seed(seed, k)) for k in range(n)])


def test_entry_second_moments():
    D = 6
    prof = exponential_band_profile(D, 0.7)
    X = _draws(EnsembleSpec(prof), 10_000, 1)
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 10:
        i, j = rng.integers(0, D, size=2)
        if i == j:
            x = X[:, i, i].real
            target = prof.sigma2[i, i]
            assert np.all(X[:, i, i].imag == 0)
        else:
            x = X[:, i, j].real
            target = prof.sigma2[i, j] / 2
            y = X[:, i, j].imag
            se_y = np.std(y**2) / math.sqrt(len(y))
            assert abs(np.mean(y**2) - target) <= 4 * se_y
        se = np.std(x**2) / math.sqrt(len(x))
        assert abs(np.mean(x**2) - target) <= 4 * se
        checked += 1


def test_mean_shift_H0_identity():
    D = 4
    X = _draws(EnsembleSpec(constant_profile(D), np.eye(D)), 10_000, 2)
    h = X[:, 1, 1].real
    assert abs(h.mean() - 1) <= 4 * h.std(ddof=1) / math.sqrt(len(h))


# -- norm expressions ----------------------------------------------------------

def test_latala_examples():
    assert latala_expression(np.zeros((5, 5))) == 0
    assert latala_expression(constant_profile(100)) == pytest.approx(20 + (3e4) ** 0.25, rel=1e-12)
    assert latala_expression(constant_profile(100)) == pytest.approx(33.161, abs=5e-4)


@given(st.integers(1, 20), st.floats(0.1, 3), st.floats(0.0, 2.0))
@settings(max_examples=30, deadline=None)
def test_latala_homogeneous(D, c, s):
    p = exponential_band_profile(D, s)
    q = table_profile(p.sigma2 * 4 * c**2)
    assert latala_expression(q) == pytest.approx(2 * c * latala_expression(p), rel=1e-12)


def test_CH0_examples():
    assert compute_CH0(np.zeros((3, 3))) == 0
    assert compute_CH0(None, 8) == 0
    assert compute_CH0(np.eye(9)) == pytest.approx(1 / 3)
    assert compute_CH0(np.diag([3.0, -5.0])) == pytest.approx(5 / math.sqrt(2), rel=1e-14)
    assert compute_CH0(np.array([[0, 2j], [-2j, 0]])) == pytest.approx(2 / math.sqrt(2))


def test_boundedness_examples():
    assert boundedness_event(np.zeros((4, 4)), 1e-3)
    assert not boundedness_event(np.eye(4), 0.4)
    assert boundedness_event(np.eye(4), 0.5)


def test_boundedness_gue_frequency():
    spec = EnsembleSpec(constant_profile(400))
    hits = sum(boundedness_event(sample_hamiltonian(spec, derive_seed(8, k)), 3.0) for k in range(100))
    assert hits / 100 >= 0.99


# -- constants -----------------------------------------------------------------

def test_density_bound_K():
    assert density_bound_K(constant_profile(4)) == pytest.approx(0.39894, abs=5e-6)
    assert density_bound_K(1 / math.sqrt(2 * math.pi)) == pytest.approx(1.0)
    assert density_bound_K(0.25) == pytest.approx(2 * density_bound_K(0.5))
    with pytest.raises(DomainError):
        density_bound_K(constant_profile(4, 0.0))


def test_estimate_J_zero_ensemble():
    est = estimate_J(EnsembleSpec(constant_profile(5, 0.0)), 0.1, 20, 0)
    assert est.quantile == 0
    assert est.branch == "K_inv"
    assert est.J == est.K_inv == 0


def test_estimate_J_wigner_edge():
    est = estimate_J(EnsembleSpec(constant_profile(400)), 0.1, 100, 3, part="full")
    assert 1.9 <= est.quantile <= 2.3
    # the K^-1 = sqrt(2 pi) floor dominates the edge for sigma = 1
    assert est.J == max(est.K_inv, est.quantile)
    assert est.K_inv == pytest.approx(math.sqrt(2 * math.pi))


def test_estimate_J_monotone_and_deterministic():
    spec = EnsembleSpec(exponential_band_profile(40, 0.2))
    a = estimate_J(spec, 0.3, 30, 5)
    b = estimate_J(spec, 0.05, 30, 5)
    assert b.quantile >= a.quantile
    assert np.array_equal(a.samples, b.samples)
    assert estimate_J(spec, 0.3, 30, 5).J == a.J


def test_estimate_J_errors():
    spec = EnsembleSpec(constant_profile(5))
    with pytest.raises(EstimatorError):
        estimate_J(spec, 0.1, 19, 0)
    with pytest.raises(DomainError):
        estimate_J(spec, 0.5, 20, 0)


def test_J_markov():
    assert J_markov(constant_profile(3, 2.0), 0.1) == pytest.approx(80.0)


def test_C_sigma_examples():
    assert compute_C_sigma(1, 1, 0) == 1
    assert compute_C_sigma(1, 2, 1) == pytest.approx(1 / 3)
    assert compute_C_sigma(1, 1, 2.0) < compute_C_sigma(1, 1, 1.0)
    with pytest.raises(DomainError):
        compute_C_sigma(1, 0, 0)


def test_solve_eta_identity():
    eta = solve_eta(0.25, 200, 2000)
    lhs = (1 - 2.0**-100 - 2.0**-1000) * (1 - eta) ** 4
    assert lhs == pytest.approx(0.75, rel=1e-14)
    with pytest.raises(DomainError):
        solve_eta(0.25, 1, 1)


def test_ensemble_constants():
    spec = EnsembleSpec(constant_profile(30, 0.8))
    c = ensemble_constants(spec, 0.1, 20, 1)
    assert c.K == pytest.approx(1 / (math.sqrt(2 * math.pi) * 0.8))
    assert c.C_sigma == pytest.approx(1.0)
    assert c.C_H0 == 0
    assert c.s_nogaps == pytest.approx(1 / (2 * math.sqrt(c.K * c.J)))
    assert set(c.to_dict()) >= {"K", "J", "eta", "C_sigma"}
    with pytest.raises(DomainError):
        EnsembleConstants(K=1, J=1, eta=0.7, C_H0=0, C_sigma=1)

@pytest.mark.parametrize("D", [50, 100])
def test_latala_vs_empirical_re_norm(D):
    # C_hat = 1 is not guaranteed to bound, so the outcome is reported only
    p = constant_profile(D)
    spec = EnsembleSpec(p)
    norms = [np.linalg.norm(sample_hamiltonian(spec, derive_seed(D, k)).real, 2) for k in range(100)]
    var_re = p.sigma2 / 2 + np.diag(np.diag(p.sigma2)) / 2
    bound = latala_expression(var_re)
    verdict = "holds" if bound >= np.mean(norms) else "fails"
    print(f"latala C_hat=1 D={D}: bound {bound:.4f} vs mean ||Re H|| {np.mean(norms):.4f} ({verdict})")
    assert np.isfinite(bound) and bound > 0
