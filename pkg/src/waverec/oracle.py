"""Independent brute-force checks: random measurements, sampled objectives,
duality gaps, exhaustive qubit searches and finite-difference derivatives.

Nothing here calls the solver modules.  Objectives are evaluated directly
from their definitions with plain numpy so that a solver bug cannot hide
behind a shared helper.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import StepTooSmall
from .measure import Povm

RNG_ALGORITHM = "numpy.PCG64"


def make_rng(seed):
    """``numpy`` generator for an integer seed (or a generator passed through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _inv_sqrt(t):
    w, v = np.linalg.eigh(0.5 * (t + t.conj().T))
    return (v / np.sqrt(w)) @ v.conj().T


def random_povm(dim, n_outcomes, rng) -> Povm:
    """Random complete measurement ``M_i = T^-1/2 A_i T^-1/2`` with ``A_i = G_i G_i^*``.

    Each ``G_i`` is a complex Gaussian ``dim x r_i`` matrix with a random rank
    ``r_i`` in ``1..dim``, so projective and full-rank elements are both drawn.
    Ranks are redrawn until they add up to at least ``dim`` so that ``T`` is
    invertible.
    """
    rng = make_rng(rng)
    if dim < 1 or n_outcomes < 1:
        raise ValueError("dim and n_outcomes must be positive")
    if n_outcomes == 1:
        return Povm(np.eye(dim, dtype=complex)[None])
    ranks = rng.integers(1, dim + 1, size=n_outcomes)
    while ranks.sum() < dim:
        ranks = rng.integers(1, dim + 1, size=n_outcomes)
    a = []
    for r in ranks:
        g = rng.normal(size=(dim, r)) + 1j * rng.normal(size=(dim, r))
        a.append(g @ g.conj().T)
    a = np.array(a)
    t = a.sum(axis=0)
    ti = _inv_sqrt(t)
    el = np.einsum("ij,kjl,lm->kim", ti, a, ti)
    return Povm(0.5 * (el + el.conj().transpose(0, 2, 1)))


def sampled_max_objective(objective: Callable[[Povm], float], dim, n_outcomes, draws, seed=0):
    """Best objective value over ``draws`` random measurements.

    Draw ``i`` uses its own stream seeded by ``(seed, i)``, so the running
    maximum is nondecreasing in ``draws`` and reproducible.
    """
    if draws < 1:
        raise ValueError("draws must be at least 1")
    best, best_povm = -np.inf, None
    for i in range(draws):
        m = random_povm(dim, n_outcomes, np.random.default_rng([*np.atleast_1d(seed).astype(int).tolist(), i]))
        v = float(objective(m))
        if v > best:
            best, best_povm = v, m
    return {"best_value": best, "best_povm": best_povm, "draws": draws}


def duality_gap(primal_value, dual_value):
    """``dual - primal``; nonnegative for admissible pairs."""
    p, d = float(primal_value), float(dual_value)
    if not (np.isfinite(p) and np.isfinite(d)):
        raise ValueError("values must be finite")
    return d - p


# ------------------------------------------------------------- objectives

def detection_objective(c):
    """``M -> Tr(C M_0)``: contrast scored by the first outcome."""
    c = np.asarray(c, dtype=complex)
    return lambda m: float(np.real(np.sum(c.T * m.elements[0])))


def identification_objective(states: Sequence):
    """``M -> sum_i Tr(S_i M_i)``."""
    s = np.asarray([np.asarray(getattr(x, "op", x), dtype=complex) for x in states])
    return lambda m: float(np.real(np.einsum("kij,kji->", s, m.elements)))


def quasifilter_objective(c, d):
    """``Tr(C D)`` for a single operator."""
    return float(np.real(np.sum(np.asarray(c).T * np.asarray(d))))


def qubit_projective_search(score: Callable[[np.ndarray, np.ndarray], float], n_theta=181, n_phi=360):
    """Exhaustive search over qubit projective measurements ``{P(n), P(-n)}``.

    ``score(P_plus, P_minus)`` is evaluated on a polar grid of axes ``n``.
    Returns ``(best_score, best_axis)``.
    """
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    best, axis = -np.inf, None
    for th in np.linspace(0, np.pi, n_theta):
        for ph in np.linspace(0, 2 * np.pi, n_phi, endpoint=False):
            n = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
            p = 0.5 * (np.eye(2) + n[0] * sx + n[1] * sy + n[2] * sz)
            v = score(p, np.eye(2) - p)
            if v > best:
                best, axis = v, n
            if th == 0 or th == np.pi:
                break
    return best, axis


def bayes_projective_risk(states, thetas, weights, projectors):
    """Bayes risk of a projective measurement with posterior-mean estimates."""
    s = np.asarray([np.asarray(getattr(x, "op", x), dtype=complex) for x in states])
    t = np.asarray(thetas, dtype=float)
    w = np.asarray(weights, dtype=float)
    risk = float(np.sum(w * t**2 * np.real(np.einsum("kii->k", s))))
    for p in projectors:
        pk = np.real(np.einsum("kij,ji->k", s, p)) * w
        if pk.sum() > 0:
            risk -= float(np.dot(pk, t)) ** 2 / pk.sum()
    return risk


def bayes_qubit_search(states, thetas, weights, n_theta=181, n_phi=360):
    """Minimal Bayes risk over qubit projective measurements (grid search)."""
    best, axis = qubit_projective_search(
        lambda p, q: -bayes_projective_risk(states, thetas, weights, [p, q]), n_theta, n_phi)
    return -best, axis


# -------------------------------------------------------------- derivatives

def _eval(family, x):
    return np.asarray(getattr(family(x), "op", family(x)), dtype=complex)


def _central(family, x, h, order):
    if order == 1:
        return (_eval(family, x + h) - _eval(family, x - h)) / (2 * h)
    if order == 2:
        return (_eval(family, x + h) - 2 * _eval(family, x) + _eval(family, x - h)) / h**2
    raise ValueError("order must be 1 or 2")


def finite_difference_derivative(family, alpha, step=1e-5, order=1, richardson=False, rtol=1e-8):
    """Central-difference derivative of an operator-valued function of one real variable.

    Returns ``(derivative, error_estimate)`` at the requested step ``h``; the
    estimate is ``4/3 |D(h) - D(h/2)|`` plus a rounding allowance.  When that
    difference is larger than the one between ``2h`` and ``h`` (the error
    grows as the step shrinks) and exceeds ``rtol`` relative to the operator
    scale, cancellation dominates and :class:`StepTooSmall` is raised.  With
    ``richardson=True`` the ``h^2`` term is cancelled using ``h`` and ``h/2``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    d_big = _central(family, alpha, 2 * step, order)
    d = _central(family, alpha, step, order)
    d_half = _central(family, alpha, step / 2, order)
    e_big = float(np.max(np.abs(d_big - d)))
    e = float(np.max(np.abs(d - d_half)))
    scale = max(float(np.max(np.abs(_eval(family, alpha)))), 1.0)
    if e > e_big and e > rtol * scale:
        raise StepTooSmall(f"difference error grows from {e_big:.2e} to {e:.2e} as the step shrinks")
    rounding = 8 * np.finfo(float).eps * scale / step**order
    if richardson:
        return (4 * d_half - d) / 3, e / 3 + rounding
    return d, 4 * e / 3 + rounding
