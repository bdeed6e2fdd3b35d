import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_spectrum
from typlab.ensembles import EnsembleSpec, constant_profile, exponential_band_profile, sample_hamiltonian
from typlab.errors import BranchError, DomainError, IterationError, ValidationError
from typlab.hilbert import derive_seed, new_decomposition, projector
from typlab.spectral import (
    SpectralData,
    detect_gap_event,
    diagonalize,
    eth_statistic,
    gap_count,
    is_flat,
    max_degeneracy,
    max_gap_degeneracy,
    min_subset_mass,
    min_subset_masses,
    operator_norm,
    resonance_check,
    solve_dyson,
    spectrum_diagnostics,
    sup_norm,
    uniform_primitivity_check,
)

GOLDEN = (math.sqrt(5) - 1) / 2


def brute_gap_count(ev, kappa, tol):
    distinct = []
    for e in sorted(ev):
        if not distinct or e - distinct[-1] > tol:
            distinct.append(e)
    diffs = [a - b for a in distinct for b in distinct if a != b]
    return max(sum(1 for d in diffs if E <= d < E + kappa) for E in diffs)


def brute_subset_mass(v, kappa):
    D = len(v)
    k = math.ceil(round(kappa * D, 9))
    w = np.abs(v) ** 2
    return min(w[list(I)].sum() for I in itertools.combinations(range(D), k))


# -- diagonalize ---------------------------------------------------------------

def test_diagonalize_permuted_identity():
    s = diagonalize(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(s.eigenvalues, [1, 2, 3])
    assert np.allclose(np.abs(s.eigenvectors), np.eye(3)[:, [1, 2, 0]])


def test_diagonalize_pauli_x():
    assert np.allclose(diagonalize(np.array([[0.0, 1.0], [1.0, 0.0]])).eigenvalues, [-1, 1])


def test_diagonalize_random_reconstruction():
    H = sample_hamiltonian(EnsembleSpec(constant_profile(50)), 1)
    s = diagonalize(H)
    assert np.max(np.abs(s.reconstruct() - H)) <= 1e-9
    assert s.orthonormality_error() <= 1e-12
    assert np.all(np.diff(s.eigenvalues) >= 0)
    assert s.residual <= 1e-10


def test_diagonalize_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        diagonalize(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValidationError):
        diagonalize(np.ones((2, 3)))


def test_operator_norm_variants(rng):
    A = rng.standard_normal((6, 6))
    S = A - A.T
    assert operator_norm(S) == pytest.approx(np.linalg.norm(S, 2), rel=1e-12)
    assert operator_norm(A) == pytest.approx(np.linalg.norm(A, 2), rel=1e-12)
    H = A + A.T
    assert operator_norm(H) == pytest.approx(np.linalg.norm(H, 2), rel=1e-12)


# -- degeneracy and gaps -------------------------------------------------------

def test_max_degeneracy_examples():
    assert max_degeneracy(np.array([0.0, 1.0, 2.0]), 1e-9) == 1
    assert max_degeneracy(np.array([0.0, 0.0, 1.0]), 1e-9) == 2
    assert max_degeneracy(np.array([0.0, 0.5e-9, 1e-9, 5.0]), 0.6e-9) == 3


def test_continuous_ensemble_nondegenerate():
    for k in range(5):
        ev = random_spectrum(200, derive_seed(2, k)).eigenvalues
        tol = 1e-10 * (ev[-1] - ev[0])
        assert max_degeneracy(ev, tol) == 1
        assert max_gap_degeneracy(ev, tol) == 1


def test_gap_count_examples():
    ev = np.array([0.0, 1.0, 3.0])
    assert gap_count(ev, 0.5, 1e-12) == 1
    assert gap_count(ev, 10, 1e-12) == 6
    with pytest.raises(DomainError):
        gap_count(ev, 0.0, 1e-12)


@given(arrays(np.float64, st.integers(2, 12), elements=st.integers(-6, 6).map(float)),
       st.floats(0.01, 12))
@settings(max_examples=100, deadline=None)
def test_gap_count_brute_force_integers(ev, kappa):
    if len(np.unique(ev)) < 2:
        return
    assert gap_count(ev, kappa, 1e-9) == brute_gap_count(ev, kappa, 1e-9)


@given(arrays(np.float64, st.integers(2, 15), elements=st.floats(-3, 3)),
       st.floats(1e-3, 1), st.floats(1e-3, 1))
@settings(max_examples=50, deadline=None)
def test_gap_count_monotone(ev, k1, k2):
    tol = 1e-12
    if len(np.unique(np.round(ev, 9))) < 2:
        return
    lo, hi = sorted((k1, k2))
    assert gap_count(ev, lo, tol) <= gap_count(ev, hi, tol)


def test_max_gap_degeneracy_examples():
    assert max_gap_degeneracy(np.array([0.0, 1.0, 2.0]), 1e-12) == 2
    assert max_gap_degeneracy(np.array([0.0, 1.0, math.pi]), 1e-12) == 1


def test_resonance_examples():
    r = resonance_check(np.array([0.0, 1.0, 2.0]), 1e-12)
    assert not r
    i, j, k, l = r.witness
    ev = [0.0, 1.0, 2.0]
    assert ev[i] - ev[j] == pytest.approx(ev[k] - ev[l])
    assert (i, j) != (k, l)
    assert resonance_check(np.array([0.0, 1.0, math.pi]), 1e-12)


def test_resonance_degenerate_witness():
    r = resonance_check(np.array([0.0, 3.0, 3.0]), 1e-12)
    assert not r.resonance_free
    i, j, k, l = r.witness
    assert {i, j} == {1, 2} and k == l


def test_spectrum_diagnostics_dict():
    d = spectrum_diagnostics(np.array([0.0, 1.0, 3.0]), 1e-12)
    assert d.to_dict() == {"D_E": 1, "D_G": 1, "min_gap": 1.0, "resonance_free": True, "tol": 1e-12}
    assert d.G(10) == 6


# -- eigenvector statistics ----------------------------------------------------

def test_sup_norm_examples():
    assert sup_norm(np.full(16, 0.25)) == pytest.approx(0.25)
    assert sup_norm(np.eye(5)[2]) == 1


def test_sup_norm_wigner_delocalized():
    passes = 0
    for k in range(10):
        V = random_spectrum(500, derive_seed(4, k)).eigenvectors
        passes += np.max(np.abs(V)) <= 500 ** (-0.5 + 0.3)
    assert passes >= 9


def test_min_subset_mass_examples():
    assert min_subset_mass(np.full(8, 1 / math.sqrt(8)), 0.5) == pytest.approx(0.5)
    assert min_subset_mass(np.eye(10)[0], 0.5) == 0
    v = np.sqrt([0.5, 0.25, 0.25, 0.0])
    assert min_subset_mass(v, 0.5) == pytest.approx(0.25)
    assert brute_subset_mass(v, 0.5) == pytest.approx(0.25)
    with pytest.raises(DomainError):
        min_subset_mass(v, 0.0)
    with pytest.raises(DomainError):
        min_subset_mass(v, 1.5)


@given(arrays(np.complex128, 7, elements=st.complex_numbers(max_magnitude=10, allow_nan=False)),
       st.integers(1, 7))
@settings(max_examples=80, deadline=None)
def test_min_subset_mass_brute_force(v, j):
    n = np.linalg.norm(v)
    if n == 0:
        return
    v = v / n
    kappa = j / 7
    assert min_subset_mass(v, kappa) == pytest.approx(brute_subset_mass(v, kappa), abs=1e-14)


def test_min_subset_masses_columns(rng):
    V = rng.standard_normal((9, 4))
    out = min_subset_masses(V, 1 / 3)
    assert np.allclose(out, [min_subset_mass(V[:, n], 1 / 3) for n in range(4)])
    assert np.allclose(min_subset_masses(V, 1.0), np.sum(V**2, axis=0))


def test_gap_event_examples():
    diag = diagonalize(np.diag(np.arange(6.0)))
    ev = detect_gap_event(diag, 0.5, 1e-6)
    assert ev.event and ev.worst_mass == 0
    F = np.fft.fft(np.eye(8)) / math.sqrt(8)
    dft = SpectralData(np.arange(8.0), F, 0.0)
    ev = detect_gap_event(dft, 0.5, 0.1)
    assert not ev.event
    assert ev.worst_mass == pytest.approx(0.5)
    with pytest.raises(DomainError):
        detect_gap_event(dft, 1.0, 0.1)


def test_no_gap_event_gaussian():
    for k in range(3):
        assert not detect_gap_event(random_spectrum(500, derive_seed(6, k)), 0.25, 1e-8)


# -- ETH -----------------------------------------------------------------------

def test_eth_identity_observable(spectrum60):
    e = eth_statistic(spectrum60, 3.0 * np.eye(60))
    assert e.stat == pytest.approx(0, abs=1e-12)
    assert e.hs_norm == 0


def test_eth_diagonal_projector():
    d = new_decomposition([1, 3])
    e = eth_statistic(diagonalize(np.diag([0.3, 1.0, 2.0, 5.0])), projector(d, 1))
    assert e.stat == pytest.approx(0.75)
    assert e.threshold(0.5) == pytest.approx(4**0.5 / 4 * math.sqrt(0.75))


def test_eth_wigner_passes():
    d = new_decomposition([256, 256])
    P = projector(d, 1)
    passes = sum(eth_statistic(random_spectrum(512, derive_seed(9, k)), P).passes(0.3) for k in range(10))
    assert passes >= 9


# -- Dyson equation ------------------------------------------------------------

def test_dyson_zero_variance():
    z = 0.3 + 0.7j
    sol = solve_dyson(np.zeros((5, 5)), z)
    assert np.all(sol.m == -1 / z)
    assert sol.iterations == 0


def test_dyson_flat_semicircle():
    D = 300
    sol = solve_dyson(np.full((D, D), 1 / D), 1j, tol=1e-10)
    assert np.max(np.abs(sol.m - 1j * GOLDEN)) <= 1e-8
    z = sol.z
    assert np.max(np.abs(1 / sol.m + z + np.full((D, D), 1 / D) @ sol.m)) <= 1e-10


@given(st.floats(-3, 3), st.floats(0.2, 3))
@settings(max_examples=30, deadline=None)
def test_dyson_matches_stieltjes(x, y):
    z = complex(x, y)
    D = 20
    sol = solve_dyson(np.full((D, D), 1 / D), z, tol=1e-12)
    r = np.sqrt(z * z - 4)
    msc = (-z + r) / 2
    if msc.imag <= 0:
        msc = (-z - r) / 2
    assert np.max(np.abs(sol.m - msc)) <= 1e-9
    assert np.all(sol.m.imag > 0)


def test_dyson_band_residual():
    S = exponential_band_profile(40, 0.5).sigma2 / 40
    sol = solve_dyson(S, 0.5 + 0.2j, tol=1e-11)
    assert sol.residual <= 1e-11


def test_dyson_errors():
    S = np.full((4, 4), 0.25)
    with pytest.raises(DomainError):
        solve_dyson(S, 1.0)
    with pytest.raises(DomainError):
        solve_dyson(-S, 1j)
    with pytest.raises(IterationError) as exc:
        solve_dyson(S, 0.01j, tol=1e-14, max_iter=3)
    assert exc.value.residual > 1e-14
    assert exc.value.iterations == 3
    with pytest.raises(BranchError):
        # Im m underflows to zero in floating point
        solve_dyson(np.full((2, 2), 1.0), complex(1e200, 1e-200), tol=0.0)


def test_primitivity_examples():
    D = 10
    assert uniform_primitivity_check(np.full((D, D), 1 / D), 1, 1.0)
    assert not uniform_primitivity_check(np.zeros((D, D)), 3, 1e-3)
    S = exponential_band_profile(50, 2.0).sigma2
    SL = np.linalg.matrix_power(S, 3)
    assert uniform_primitivity_check(S, 3, 1e-6) == bool(np.all(SL >= 1e-6 / 50))
    assert is_flat(np.full((D, D), 1 / D))
    assert not is_flat(np.full((D, D), 2 / D))
