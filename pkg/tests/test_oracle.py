import numpy as np
import pytest

from waverec import measure, oracle
from waverec.errors import StepTooSmall
from waverec.estimate import PAULI_X, PAULI_Z


def test_random_povm_valid_and_deterministic():
    m = oracle.random_povm(2, 3, 7)
    assert measure.validate_povm(m, tol=1e-12)["valid"]
    assert np.array_equal(m.elements, oracle.random_povm(2, 3, 7).elements)
    assert not np.array_equal(m.elements, oracle.random_povm(2, 3, 8).elements)


def test_single_outcome_is_identity():
    assert np.allclose(oracle.random_povm(4, 1, 0).elements[0], np.eye(4))


def test_sampler_is_symmetric_across_outcomes():
    s = np.diag([0.7, 0.3]).astype(complex)
    rng = oracle.make_rng(5)
    p = np.mean([oracle.random_povm(2, 3, rng).probabilities(s) for _ in range(10_000)], axis=0)
    assert np.max(np.abs(p - 1 / 3)) < 0.01


def test_sampled_max_is_monotone_in_draws():
    c = np.diag([0.4, -0.4]) + 0.2 * PAULI_X
    obj = oracle.detection_objective(c)
    vals = [oracle.sampled_max_objective(obj, 2, 2, n, 3)["best_value"] for n in (10, 100, 1000)]
    assert vals[0] <= vals[1] <= vals[2]


def test_constant_objective():
    assert oracle.sampled_max_objective(lambda m: 1.5, 3, 2, 20, 0)["best_value"] == 1.5


def test_trine_weak_duality():
    el = []
    for k in range(3):
        a = 2 * np.pi * k / 3
        v = np.array([np.cos(a / 2), np.sin(a / 2)])
        el.append(np.outer(v, v) / 3)
    best = oracle.sampled_max_objective(oracle.identification_objective(el), 2, 3, 10_000, 1)["best_value"]
    assert best <= 2 / 3 + 1e-8


def test_duality_gap():
    assert oracle.duality_gap(0.4, 0.4) == 0.0
    c = np.diag([0.3, -0.5])
    assert abs(oracle.duality_gap(oracle.detection_objective(c)(measure.Povm(
        np.array([np.zeros((2, 2)), np.eye(2)]))), 0.3) - 0.3) < 1e-15


def rotation(theta):
    s0 = 0.5 * (np.eye(2) + 0.8 * PAULI_X)
    u = np.diag(np.exp(0.5j * theta * np.array([1.0, -1.0])))
    return u @ s0 @ u.conj().T


def test_rotation_derivative_matches_commutator():
    d, err = oracle.finite_difference_derivative(rotation, 0.4)
    s = rotation(0.4)
    exact = 0.5j * (PAULI_Z @ s - s @ PAULI_Z)
    assert np.max(np.abs(d - exact)) < 1e-8
    assert err < 1e-6
    dr, err_r = oracle.finite_difference_derivative(rotation, 0.4, step=1e-3, richardson=True)
    assert np.max(np.abs(dr - exact)) <= err_r + 1e-12


def test_constant_and_quadratic_families():
    d, _ = oracle.finite_difference_derivative(lambda t: np.eye(2), 0.3)
    assert np.all(d == 0)
    d2, _ = oracle.finite_difference_derivative(lambda t: np.array([[3 * t**2 + t + 1]]), 0.7, step=1e-2, order=2)
    assert abs(d2[0, 0] - 6.0) < 1e-9


def test_step_too_small():
    with pytest.raises(StepTooSmall):
        oracle.finite_difference_derivative(rotation, 0.4, step=1e-10)
    with pytest.raises(ValueError):
        oracle.finite_difference_derivative(rotation, 0.4, step=0.0)


def test_bayes_search_finds_known_axis():
    sp = 0.5 * (np.eye(2) + 0.7 * PAULI_X)
    sm = 0.5 * (np.eye(2) - 0.7 * PAULI_X)
    risk, axis = oracle.bayes_qubit_search([sp, sm], [1.0, -1.0], [0.5, 0.5], n_theta=91, n_phi=72)
    assert abs(risk - (1 - 0.49)) < 1e-12
    assert abs(abs(axis[0]) - 1.0) < 1e-12
