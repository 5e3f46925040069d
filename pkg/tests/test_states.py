import numpy as np
import pytest
from scipy.special import factorial

from waverec import states
from waverec.errors import BasisMismatch, NonUniformGrid, Overflow, TruncationTooSmall


def series_overlap(a, b, terms=120):
    """(a|b) from the power series, without using the library."""
    n = np.arange(terms)
    s = np.sum((np.conj(a) * b) ** n / factorial(n))
    return np.exp(-0.5 * abs(a) ** 2 - 0.5 * abs(b) ** 2) * s


def test_coherent_overlap_matches_series_and_fock():
    assert np.isclose(states.coherent_overlap(0, 1), np.exp(-0.5), atol=1e-15)
    for a, b in [(0.3 + 1j, -1.2), (2.0, 1.5 - 1.0j), (-1j, 0.7j)]:
        va = states.coherent_vector(a, 64).coeffs
        vb = states.coherent_vector(b, 64).coeffs
        assert abs(np.vdot(va, vb) - series_overlap(a, b)) < 1e-12
        assert abs(states.coherent_overlap(a, b) - series_overlap(a, b)) < 1e-12


def test_coherent_vector_overflow():
    with pytest.raises(Overflow):
        states.coherent_vector(6.0, 16)


def test_number_mean_of_thermal_coherent_state():
    s = states.thermal_coherent_density(1.0 + 0.5j, 0.25, 64).op
    n = states.number_operator(64)
    assert np.isclose(np.trace(s @ n).real, 1.25 + 0.25, atol=1e-9)


def test_thermal_populations_diagonal():
    s = states.thermal_coherent_density(0.0, 1.0, 64).op
    assert np.allclose(np.diag(s).real[:20], 2.0 ** -(np.arange(20) + 1), atol=1e-14)


def test_thermal_truncation_error():
    with pytest.raises(TruncationTooSmall):
        states.thermal_coherent_density(3.0, 1.0, 16)


def test_batch_matches_single_state():
    th = [0.0, 1.5 - 0.5j, -3.0j]
    batch = states.thermal_coherent_batch(th, 0.7, 40)
    for k, t in enumerate(th):
        single = states.thermal_coherent_density(t, 0.7, 40, check=False).op
        assert np.max(np.abs(batch[k] - single)) < 1e-13


def test_fourier_involution_is_exact_and_unitary():
    phi = states.gaussian_amplitude(0.7, q0=0.4, p0=-0.3, n_points=512)
    f = states.fourier_involution(phi)
    assert np.isclose(f.intensity, phi.intensity, rtol=1e-12)
    back = states.fourier_involution(f)
    assert np.max(np.abs(back.coeffs - phi.coeffs)) < 1e-12


def test_uncertainty_product_gaussian_saturates():
    sq, sp = states.uncertainty_product(states.gaussian_amplitude(1.3))
    assert abs(sq * sp - 1 / (4 * np.pi)) < 1e-6


def test_uncertainty_product_superposition_above_bound():
    g = states.uniform_grid(12.0, 2048)
    q = g.points
    c = np.exp(-((q - 2) ** 2)) + np.exp(-((q + 2) ** 2))
    sq, sp = states.uncertainty_product(states.Amplitude(c, g))
    assert sq * sp > 1 / (4 * np.pi) + 1e-3


def test_non_uniform_grid_rejected():
    g = states.Grid(np.array([0.0, 1.0, 3.0]), 1.0)
    with pytest.raises(NonUniformGrid):
        states.fourier_involution(states.Amplitude(np.ones(3), g))


def test_inner_product_basis_mismatch():
    a = states.Amplitude(np.ones(3))
    b = states.Amplitude(np.ones(3), states.uniform_grid(1.0, 3))
    with pytest.raises(BasisMismatch):
        a.inner(b)


def test_grid_inner_product_carries_weight():
    g = states.uniform_grid(5.0, 1001)
    phi = states.Amplitude(np.exp(-g.points ** 2 / 2), g)
    assert np.isclose(phi.intensity, np.sqrt(np.pi), rtol=1e-10)


def test_husimi_density_integrates_to_one():
    s = states.thermal_coherent_density(0.0, 1.0, 48).op
    pts, area = states.alpha_grid(6.0, 121)
    k = states.husimi_density(s, pts)
    assert abs(k.sum() * area / np.pi - 1) < 2e-3


def test_gram_and_mixture_consistent():
    amps = [states.Amplitude(states.coherent_vector(a, 32).coeffs) for a in (0.0, 1.0, 1j)]
    g = states.gram_matrix(amps)
    assert np.isclose(g[0, 1], np.exp(-0.5), atol=1e-12)
    s = states.mixture_density(amps, [0.2, 0.3, 0.5])
    assert np.isclose(s.trace, 1.0, atol=1e-10)
