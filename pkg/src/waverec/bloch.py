"""Two-dimensional pattern recognition in Bloch coordinates.

A 2x2 Hermitian operator is written ``R = (nu + r . sigma) / 2``.  For
weighted patterns ``R_i`` the optimal dual operator ``L = (lam + l . sigma)/2``
minimises ``lam = max_i (nu_i + |r_i - l|)`` over the apex ``l``; the optimal
measurement has rank-one elements ``D_i = delta_i + d_i . sigma`` pointing
from the apex towards the active points.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, nnls

from . import linop
from .certificate import Certificate
from .errors import AllDominated, DimMismatch, Dominated, ModeMismatch, NumericalFailure
from .measure import Povm

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
MAX_POINTS = 64


@dataclass(frozen=True)
class BlochPoint:
    nu: float
    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float).reshape(3))
        object.__setattr__(self, "nu", float(self.nu))

    @property
    def is_positive(self):
        return bool(np.linalg.norm(self.r) <= self.nu + 1e-12)

    def operator(self):
        return from_bloch(self)


@dataclass
class BlochSolution:
    l: np.ndarray
    lam: float
    mu: np.ndarray
    d: np.ndarray
    delta: np.ndarray
    active_set: tuple
    kappa: float
    povm: Povm = None
    certificate: Certificate = None
    pruned: tuple = field(default_factory=tuple)


def to_bloch(r):
    """``(nu, r)`` with ``nu = Tr R`` and ``r_k = Tr(R sigma_k)``."""
    r = linop.as_hermitian(r)
    if r.shape != (2, 2):
        raise DimMismatch("Bloch coordinates need a 2x2 operator")
    nu = float(np.real(np.trace(r)))
    vec = np.real(np.einsum("kij,ji->k", PAULI, r))
    return BlochPoint(nu, vec)


def from_bloch(p: BlochPoint):
    return 0.5 * (p.nu * np.eye(2) + np.einsum("k,kij->ij", p.r, PAULI))


def decision_operator(delta, d):
    """``delta I + d . sigma`` (no factor one half)."""
    return delta * np.eye(2) + np.einsum("k,kij->ij", np.asarray(d, dtype=float), PAULI)


def pair_closed_form(p: BlochPoint, q: BlochPoint):
    """``(nu_p + nu_q)/2 + |r_p - r_q|/2`` for a non-dominated pair."""
    dist = float(np.linalg.norm(p.r - q.r))
    if dist <= abs(p.nu - q.nu):
        raise Dominated("one operator dominates the other")
    return 0.5 * (p.nu + q.nu) + 0.5 * dist


def _prune(points):
    keep = []
    pruned = []
    for i, p in enumerate(points):
        dominated = False
        for k, q in enumerate(points):
            if k == i:
                continue
            gap = q.nu - p.nu - np.linalg.norm(q.r - p.r)
            # q dominates p; for exact ties keep the lower index.
            if gap > 1e-12 or (abs(gap) <= 1e-12 and k < i):
                dominated = True
                break
        (pruned if dominated else keep).append(i)
    if pruned:
        warnings.warn(f"dominated hypotheses ignored: {pruned}", stacklevel=3)
    return keep, pruned


def _subset_candidates(nu, r):
    """Apexes ``l`` in the affine hull of ``r`` with ``nu_j + |r_j - l|`` constant."""
    k = len(nu)
    base = r[0]
    e = (r[1:] - base).T  # 3 x (k-1)
    if np.linalg.matrix_rank(e, tol=1e-9 * max(1.0, np.abs(e).max())) < k - 1:
        return []
    # Differences of squared equations are linear in (c, lam), l = base + e c:
    # |r_j - l|^2 - |r_0 - l|^2 = (nu_0 - nu_j)(2 lam - nu_0 - nu_j).
    a = np.zeros((k - 1, k))
    b = np.zeros(k - 1)
    for j in range(1, k):
        dj = r[j] - base
        a[j - 1, : k - 1] = -2 * dj @ e
        a[j - 1, k - 1] = -2 * (nu[0] - nu[j])
        b[j - 1] = -(dj @ dj) - (nu[0] - nu[j]) * (nu[0] + nu[j])
    x_p, *_ = np.linalg.lstsq(a, b, rcond=None)
    _, s, vt = np.linalg.svd(a)
    x_n = vt[-1]
    # |e c|^2 = (lam - nu_0)^2 along x = x_p + t x_n
    ep = e @ x_p[: k - 1]
    en = e @ x_n[: k - 1]
    lp, ln = x_p[k - 1] - nu[0], x_n[k - 1]
    qa = en @ en - ln * ln
    qb = 2 * (ep @ en - lp * ln)
    qc = ep @ ep - lp * lp
    if abs(qa) < 1e-14 * max(1.0, abs(qb), abs(qc)):
        roots = [-qc / qb] if abs(qb) > 1e-300 else []
    else:
        disc = qb * qb - 4 * qa * qc
        if disc < -1e-12 * max(1.0, qb * qb):
            return []
        sq = np.sqrt(max(disc, 0.0))
        roots = [(-qb + sq) / (2 * qa), (-qb - sq) / (2 * qa)]
    out = []
    for t in roots:
        x = x_p + t * x_n
        if np.all(x[k - 1] - nu >= -1e-12):
            out.append(_newton_refine(nu, r, base, e, x))
    return [c for c in out if c is not None]


def _newton_refine(nu, r, base, e, x, steps=3):
    """Polish ``(c, lam)`` on ``nu_j + |r_j - l| = lam`` by Newton's method."""
    k = len(nu)
    for _ in range(steps):
        l = base + e @ x[: k - 1]
        diff = l - r
        dist = np.linalg.norm(diff, axis=1)
        if np.any(dist < 1e-14):
            break
        f = nu + dist - x[k - 1]
        jac = np.zeros((k, k))
        jac[:, : k - 1] = (diff / dist[:, None]) @ e
        jac[:, k - 1] = -1.0
        try:
            dx = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            break
        x = x + dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    l = base + e @ x[: k - 1]
    return l, float(x[k - 1])


def _barycentric(r, l):
    """Coordinates ``pi`` with ``sum pi_j r_j = l`` and ``sum pi_j = 1``."""
    k = len(r)
    a = np.vstack([r.T, np.ones(k)])
    b = np.concatenate([l, [1.0]])
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    return pi, float(np.linalg.norm(a @ pi - b))


def _decisions(nu, r, idx, l):
    """Decision vectors for active set ``idx`` and apex ``l``."""
    diff = r[list(idx)] - l
    dist = np.linalg.norm(diff, axis=1)
    pi, _ = _barycentric(r[list(idx)], l)
    weights = pi / np.sum(pi * dist)
    d = weights[:, None] * diff
    delta = np.linalg.norm(d, axis=1)
    return weights, d, delta


def _assemble(points, keep, pruned, l, lam, idx, mu_a, d_a):
    m = len(points)
    nu = np.array([p.nu for p in points])
    r = np.array([p.r for p in points])
    mu = np.zeros(m)
    d = np.zeros((m, 3))
    for j, i in enumerate(idx):
        mu[i] = mu_a[j]
        d[i] = d_a[j]
    delta = np.linalg.norm(d, axis=1)
    els = np.stack([decision_operator(delta[i], d[i]) for i in range(m)])
    povm = Povm(els)
    cert = bloch_certificate(points, l, lam, els)
    return BlochSolution(l, float(lam), mu, d, delta, tuple(int(i) for i in idx), float(lam), povm, cert, tuple(pruned))


def bloch_certificate(points, l, lam, elements, tol=1e-8):
    """Residuals of ``L >= R_i`` and ``(L - R_i) D_i = 0`` for a 2x2 measurement."""
    big_l = from_bloch(BlochPoint(lam, l))
    comp, dual_psd, min_d = 0.0, 0.0, 0.0
    primal = 0.0
    for p, dmat in zip(points, elements):
        diff = big_l - from_bloch(p)
        dual_psd = max(dual_psd, -linop.min_eig(diff))
        comp = max(comp, float(np.linalg.norm(diff @ dmat, 2)))
        min_d = max(min_d, -linop.min_eig(dmat))
        primal += float(np.real(np.trace(from_bloch(p) @ dmat)))
    complete = float(np.linalg.norm(np.sum(elements, axis=0) - np.eye(2), 2))
    res = {
        "complementarity": comp,
        "dual_psd": max(dual_psd, 0.0),
        "decision_psd": max(min_d, 0.0),
        "completeness": complete,
    }
    return Certificate(res, primal, float(lam), tol)


def solve_polarizations(points, tol=1e-9):
    """Optimal measurement for weighted 2x2 patterns given in Bloch form."""
    points = [p if isinstance(p, BlochPoint) else BlochPoint(*p) for p in points]
    if len(points) > MAX_POINTS:
        raise DimMismatch(f"at most {MAX_POINTS} hypotheses are supported")
    keep, pruned = _prune(points)
    if len(keep) < 2:
        raise AllDominated("fewer than two hypotheses remain after pruning")
    nu = np.array([points[i].nu for i in keep])
    r = np.array([points[i].r for i in keep])
    best = None
    worst_violation = np.inf
    for size in (2, 3, 4):
        for sub in itertools.combinations(range(len(keep)), size):
            sub_nu, sub_r = nu[list(sub)], r[list(sub)]
            for l, lam in _subset_candidates(sub_nu, sub_r):
                pi, resid = _barycentric(sub_r, l)
                cover = np.max(nu + np.linalg.norm(r - l, axis=1)) - lam
                violation = max(-pi.min(), cover, resid * 1e-3)
                worst_violation = min(worst_violation, violation)
                if pi.min() < -1e-10 or cover > tol or resid > 1e-8:
                    continue
                if best is None or lam > best[1] + 1e-10:
                    best = (l, lam, sub)
    if best is None:
        raise NumericalFailure(f"no subset yields a feasible apex (best violation {worst_violation:.2e})")
    l, lam, sub = best
    mu_a, d_a, _ = _decisions(nu, r, sub, l)
    idx = [keep[j] for j in sub]
    return _assemble(points, keep, pruned, l, lam, idx, mu_a, d_a)


def _solution_from_apex(points, l, lam, active_tol=1e-7):
    nu = np.array([p.nu for p in points])
    r = np.array([p.r for p in points])
    level = nu + np.linalg.norm(r - l, axis=1)
    idx = [i for i in range(len(points)) if level[i] >= lam - active_tol]
    u = r[idx] - l
    u = u / np.linalg.norm(u, axis=1)[:, None]
    a = np.vstack([u.T, np.ones(len(idx))])
    delta, _ = nnls(a, np.array([0.0, 0.0, 0.0, 1.0]))
    d_a = delta[:, None] * u
    mu_a = delta / np.linalg.norm(r[idx] - l, axis=1)
    return _assemble(points, list(range(len(points))), [], l, lam, idx, mu_a, d_a)


def minimal_enclosing_sphere(centres):
    """Smallest ball containing the points, by enumeration of circumspheres."""
    c = np.asarray(centres, dtype=float)
    best = None
    for size in (1, 2, 3, 4):
        for sub in itertools.combinations(range(len(c)), size):
            pts = c[list(sub)]
            base = pts[0]
            e = (pts[1:] - base).T
            if size > 1 and np.linalg.matrix_rank(e, tol=1e-10) < size - 1:
                continue
            if size == 1:
                centre = base
            else:
                g = e.T @ e
                coef = np.linalg.solve(g, 0.5 * np.diag(g))
                centre = base + e @ coef
            rad = float(np.linalg.norm(pts[0] - centre))
            if np.all(np.linalg.norm(c - centre, axis=1) <= rad + 1e-12):
                if best is None or rad < best[1] - 1e-14:
                    best = (centre, rad)
    return best


def special_case_solvers(points, mode):
    """Independent routes for the pure-state and equal-intensity special cases."""
    points = [p if isinstance(p, BlochPoint) else BlochPoint(*p) for p in points]
    nu = np.array([p.nu for p in points])
    r = np.array([p.r for p in points])
    if mode == "equal_intensity_sphere":
        if np.ptp(nu) > 1e-12:
            raise ModeMismatch("intensities differ")
        centre, rad = minimal_enclosing_sphere(r)
        return _solution_from_apex(points, centre, rad + nu[0])
    if mode == "pure_ellipsoid":
        if np.max(np.abs(np.linalg.norm(r, axis=1) - nu)) > 1e-12:
            raise ModeMismatch("not all points are pure (|r| = nu)")
        return _ellipsoid(points, nu, r)
    raise ModeMismatch(f"unknown mode {mode!r}")


def _ellipsoid(points, nu, r):
    """Smallest ellipsoid with one focus at the origin enclosing all ``r_i``.

    For pure points ``nu_i = |r_i|`` so ``nu_i + |r_i - l|`` is the sum of the
    focal distances and its maximum is the major axis.  Solved in epigraph form.
    """
    x0 = np.concatenate([r.mean(axis=0), [np.max(nu + np.linalg.norm(r - r.mean(axis=0), axis=1)) + 1e-3]])
    cons = [{"type": "ineq", "fun": (lambda x, i=i: x[3] - nu[i] - np.linalg.norm(r[i] - x[:3]))} for i in range(len(r))]
    res = minimize(lambda x: x[3], x0, jac=lambda x: np.array([0, 0, 0, 1.0]), constraints=cons,
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 500})
    l = res.x[:3]
    lam = float(np.max(nu + np.linalg.norm(r - l, axis=1)))
    return _solution_from_apex(points, l, lam)
