import numpy as np
import pytest

from waverec import estimate, identify, measure, oracle, states
from waverec.errors import SingularFisher, SingularS, SupportDeficient
from waverec.estimate import PAULI_X, PAULI_Y, PAULI_Z


def projective(axis):
    n = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    p = 0.5 * (np.eye(2) + n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z)
    return measure.Povm(np.array([p, np.eye(2) - p]), labels=[1.0, -1.0]), n


def locally_unbiased(family, m, theta0, h=1e-6):
    """Estimates a + b*s on outcomes s = +-1, unbiased to first order at theta0."""
    s = np.array(m.labels)
    mean = lambda t: float(np.dot(m.probabilities(family([t])), s))
    slope = (mean(theta0 + h) - mean(theta0 - h)) / (2 * h)
    return theta0 + (s - mean(theta0)) / slope


def test_sld_rotation_qubit():
    rep = estimate.sld_bound(estimate.rotation_qubit(), [0.3])
    assert abs(rep.info[0, 0] - 0.64) < 1e-9
    assert abs(rep.bound[0, 0] - 1.5625) < 1e-9


def test_sld_operator_solves_defining_equation():
    fam = estimate.rotation_qubit()
    rep = estimate.sld_bound(fam, [0.7])
    s = fam([0.7])
    ds = estimate.real_derivatives(fam, [0.7])[0]
    g = rep.operators[0]
    assert np.linalg.norm(g @ s + s @ g - 2 * ds) < 1e-6


def test_sld_coherent_displacement():
    assert abs(estimate.sld_bound(estimate.coherent_displacement(48), [0.4]).info[0, 0] - 4.0) < 1e-7


def test_sld_commuting_family_equals_classical_fisher():
    fam = estimate.ParamFamily(lambda p: np.diag([np.cos(p[0]) ** 2, np.sin(p[0]) ** 2]))
    m = measure.Povm(np.array([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]))
    g = estimate.sld_bound(fam, [0.5]).info[0, 0]
    f = estimate.classical_bound(m, fam, [0.5]).info[0, 0]
    assert abs(g - f) < 1e-7 and abs(g - 4.0) < 1e-7


def test_classical_fisher_qubit_example():
    fam = estimate.ParamFamily(lambda p: 0.5 * (np.eye(2) + np.sin(p[0]) * PAULI_X + np.cos(p[0]) * PAULI_Z))
    m, _ = projective([0, 0, 1])
    assert abs(estimate.classical_bound(m, fam, [np.pi / 4]).info[0, 0] - 1.0) < 1e-8


def test_classical_singular_fisher():
    m = measure.Povm(np.array([np.eye(2) / 2, np.eye(2) / 2]))
    with pytest.raises(SingularFisher):
        estimate.classical_bound(m, estimate.rotation_qubit(), [0.2])


def test_sld_reparameterisation_invariance():
    fam = estimate.rotation_qubit()
    beta = lambda t: t**3 + 2 * t
    direct = estimate.sld_bound(fam, [0.4], theta_map=beta).bound[0, 0]
    assert abs(direct - (3 * 0.4**2 + 2) ** 2 / 0.64) < 1e-7
    # The same quantity computed in the new parameter: family indexed by beta.
    from scipy.optimize import brentq
    inv = lambda b: brentq(lambda t: beta(t) - b, -5, 5, xtol=1e-15)
    refam = estimate.ParamFamily(lambda p: fam([inv(p[0])]))
    assert abs(estimate.sld_bound(refam, [beta(0.4)]).bound[0, 0] - direct) < 1e-5 * direct


def test_rld_coherent_and_thermal():
    assert abs(estimate.rld_bound(estimate.coherent_family(48), [0.3 + 0.2j]).info[0, 0] - 1.0) < 1e-8
    for nbar in (0.5, 2.0):
        h = estimate.rld_bound(estimate.thermal_coherent(nbar, 64), [0.3 - 0.1j]).info[0, 0]
        assert abs(h - 1 / (nbar + 1)) < 1e-6


def test_rld_wirtinger_sign_convention():
    # With d/d conj(alpha) = (d/dx + j d/dy)/2, d|alpha)(alpha|/d conj(alpha) = S (a - alpha),
    # so the support solution is h = |alpha)(alpha| (a - alpha) and H = (alpha|(a - alpha)(a^* - conj alpha)|alpha) = 1.
    alpha = 0.5 - 0.25j
    rep = estimate.rld_bound(estimate.coherent_family(48), [alpha])
    v = states.coherent_vector(alpha, 48).coeffs
    a = np.diag(np.sqrt(np.arange(1, 48)), 1)
    expected = np.outer(v, v.conj()) @ (a - alpha * np.eye(48))
    assert np.linalg.norm(rep.operators[0] - expected) < 1e-6


def test_rld_analytic_and_non_analytic_maps():
    fam = estimate.coherent_family(48)
    a = 0.3 + 0.2j
    assert abs(estimate.rld_bound(fam, [a], theta_map=lambda x: x**2).bound[0, 0] - 4 * abs(a) ** 2) < 1e-7
    # conj(alpha) is estimated exactly as well as alpha (variance 1 under heterodyne),
    # yet the transformed right bound collapses to 0: the rule needs analytic maps.
    assert abs(estimate.rld_bound(fam, [a], theta_map=np.conj).bound[0, 0]) < 1e-8


def test_rld_support_deficient():
    # A pure qubit rotated about z: the derivative has a component off the support.
    rot = estimate.ParamFamily(lambda p: estimate.rotation_qubit(radius=1.0)([p[0].real]), 1, "complex")
    with pytest.raises(SupportDeficient):
        estimate.rld_bound(rot, [0.2])


def test_ordering_chain_on_projective_measurements():
    fam = estimate.rotation_qubit()
    rng = np.random.default_rng(17)
    theta0 = 0.3
    sld = estimate.sld_bound(fam, [theta0]).bound[0, 0]
    for _ in range(50):
        m, _ = projective(rng.normal(size=3))
        est = locally_unbiased(fam, m, theta0)
        r, bias = estimate.measurement_covariance(m, est, fam([theta0]), [theta0])
        cl = estimate.classical_bound(m, fam, [theta0]).bound[0, 0]
        assert abs(bias[0]) < 1e-12
        assert r[0, 0] - cl >= -1e-6 * max(1.0, cl)
        assert cl - sld >= -1e-6 * max(1.0, cl)


def test_measurement_covariance_examples():
    s = 0.5 * (np.eye(2) + 0.8 * PAULI_X)
    r, bias = estimate.measurement_covariance(measure.Povm(np.array([np.eye(2)])), [0.2], s, 0.2)
    assert r[0, 0] == 0 and bias[0] == 0
    m, _ = projective([0, 0, 1])
    r, _ = estimate.measurement_covariance(m, [1.0, -1.0], s, 0.0)
    assert abs(r[0, 0] - 1.0) < 1e-12


def test_coherent_povm_attains_right_bound():
    m = measure.coherent_povm(32, 8.0, 161)
    fam = estimate.coherent_family(32)
    rep = estimate.efficiency_check(fam, m, lambda a: a, [0.5 + 0.3j], bound="rld", attain_tol=2e-3,
                                    x_ops=[np.diag(np.sqrt(np.arange(1, 32)), -1)])
    assert rep["attained"]
    assert abs(rep["points"][0]["R"][0, 0] - 1.0) < 2e-3


def test_sigma_z_does_not_attain_sld_on_rotation():
    fam = estimate.rotation_qubit()
    m, _ = projective([0, 1, 1])
    theta0 = 0.4
    rep = estimate.efficiency_check(fam, m, locally_unbiased(fam, m, theta0), [theta0], bound="sld")
    assert not rep["attained"] and rep["points"][0]["slack_min_eig"] > 1e-3


def test_commuting_canonical_family_is_efficient():
    # S_theta diagonal with a Gaussian-like exponential family in theta; spectral measurement of x.
    x = np.array([-1.0, 0.0, 1.0])

    def ev(p):
        w = np.exp(p[0] * x)
        return np.diag(w / w.sum())

    fam = estimate.ParamFamily(ev)
    m = measure.Povm(np.array([np.diag(np.eye(3)[k]) for k in range(3)]))
    theta0 = 0.3
    s = ev([theta0])
    mean = float(np.dot(np.diag(s), x))
    var = float(np.dot(np.diag(s), x**2)) - mean**2
    # mean parameter tau(theta) = E x, estimated unbiasedly by the spectral outcome.
    rep = estimate.sld_bound(fam, [theta0], theta_map=lambda t: np.dot(np.diag(ev(t)).real, x))
    r, bias = estimate.measurement_covariance(m, x, s, mean)
    assert abs(bias[0]) < 1e-14
    assert abs(r[0, 0] - rep.bound[0, 0]) < 1e-8 and abs(r[0, 0] - var) < 1e-12


def test_uncertainty_number_phase():
    n = 24
    s0 = states.coherent_vector(1.0, n).coeffs
    s0 = np.outer(s0, s0.conj())
    m = identify.phase_povm(n, 64)
    phases = np.arange(64) / 64
    est = np.where(phases >= 0.5, phases - 1.0, phases)
    rep = estimate.uncertainty_check(s0, -np.diag(np.arange(n)), m, est, periodic=True)
    assert rep["product"] >= 0.25 and rep["slack"] > 1e-3


def test_uncertainty_vacuous_for_trivial_generator():
    with pytest.raises(SingularS):
        estimate.uncertainty_check(np.eye(2) / 2, np.eye(2), measure.Povm(np.array([np.eye(2)])), [0.0])


def test_bayes_point_prior_has_zero_error():
    s = 0.5 * (np.eye(2) + 0.6 * PAULI_Z)
    res = estimate.bayes_quadratic([s], [0.7], [1.0])
    assert abs(res.sigma2) < 1e-12
    assert np.allclose(res.x_hat, 0.7 * np.eye(2), atol=1e-12)


def test_bayes_two_point_qubit_matches_grid_search():
    sp = 0.5 * (np.eye(2) + 0.7 * PAULI_X + 0.3 * PAULI_Z)
    sm = 0.5 * (np.eye(2) - 0.7 * PAULI_X + 0.3 * PAULI_Z)
    res = estimate.bayes_quadratic([sp, sm], [1.0, -1.0], [0.5, 0.5])
    best, _ = oracle.bayes_qubit_search([sp, sm], [1.0, -1.0], [0.5, 0.5], n_theta=181, n_phi=360)
    assert abs(res.sigma2 - best) < 1e-6
    assert abs(res.sigma2 - 0.51) < 1e-12
    assert res.certificate.passed


def test_bayes_variance_between_zero_and_prior():
    rng = np.random.default_rng(2)
    t = rng.normal(size=6)
    w = rng.uniform(size=6)
    w /= w.sum()
    fam = estimate.rotation_qubit(0.9)
    res = estimate.bayes_quadratic([fam([x]) for x in t], t, w)
    assert -1e-12 <= res.sigma2 <= res.prior_variance + 1e-12


def test_gaussian_amplitude_real_case():
    res = estimate.gaussian_amplitude_bayes(1.0, 2.0, fock_dim=80)
    cf = estimate.gaussian_amplitude_closed_form(1.0, 2.0)
    assert abs(res.sigma2 - 6 / 11) < 1e-6
    assert abs(cf["sigma2"] - 6 / 11) < 1e-15
    assert res.certificate.passed
    # x_hat is proportional to the quadrature Q = (a + a^*)/2 on the well-resolved block.
    a = np.diag(np.sqrt(np.arange(1, 80)), 1)
    q = 0.5 * (a + a.T)
    blk = slice(0, 15)
    assert np.max(np.abs(res.x_hat[blk, blk] - cf["x_scale"] * q[blk, blk])) < 1e-8


def test_heterodyne_closed_form_values():
    assert abs(estimate.heterodyne_closed_form(1.0, 3.0)["sigma2"] - 1.2) < 1e-15
    assert estimate.heterodyne_closed_form(1.0, 0.0)["sigma2"] == 0.0
    assert abs(estimate.heterodyne_closed_form(0.0, 1.0)["sigma2"] - 0.5) < 1e-15


def test_heterodyne_numeric_and_certificate():
    moments = estimate.complex_moment_operators(1.0, 3.0, 64)
    m = measure.coherent_povm(64, 12.0, 160)
    assert abs(estimate.heterodyne_numeric(1.0, 3.0, m, moments=moments) - 1.2) < 2e-3
    cert = estimate.heterodyne_certificate(1.0, 3.0, moments)
    assert cert["complementarity"] < 1e-6 and cert["feasibility"] < 1e-6
    assert abs(cert["dual"] - 1.2) < 1e-6
