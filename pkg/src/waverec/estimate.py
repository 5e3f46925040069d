"""Parameter estimation: Fisher, SLD and RLD bounds, measurement covariances,
efficiency and uncertainty predicates, and Bayesian quadratic estimation.

Parameter derivatives are taken by central finite differences.  For complex
parameters the conjugate derivative is ``d/d conj(alpha) = (d/dx + j d/dy)/2``
with ``alpha = x + j y``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import linop
from .certificate import Certificate
from .errors import (
    DimMismatch,
    NegativeVariance,
    NegativeWeight,
    SingularFisher,
    SingularG,
    SingularH,
    SingularS,
    SupportDeficient,
    ZeroOutcome,
)
from .measure import Povm
from .states import coherent_vector, thermal_coherent_batch, thermal_coherent_density

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _op(s):
    return np.asarray(getattr(s, "op", s), dtype=complex)


@dataclass
class ParamFamily:
    """Map from a parameter vector to a density operator."""

    evaluator: Callable
    dim_params: int = 1
    param_kind: str = "real"

    def __post_init__(self):
        if self.param_kind not in ("real", "complex"):
            raise ValueError("param_kind must be 'real' or 'complex'")

    def __call__(self, params):
        p = np.atleast_1d(np.asarray(params, dtype=complex if self.param_kind == "complex" else float))
        if p.size != self.dim_params:
            raise DimMismatch(f"family takes {self.dim_params} parameters, got {p.size}")
        return _op(self.evaluator(p))


@dataclass
class BoundReport:
    """Lower bound on the covariance and, when a covariance is supplied, the slack."""

    bound: np.ndarray
    info: np.ndarray
    R: np.ndarray | None = None
    slack_min_eig: float | None = None
    operators: list = field(default_factory=list)

    def with_covariance(self, r):
        r = np.atleast_2d(np.asarray(r))
        return BoundReport(self.bound, self.info, r, linop.min_eig(r - self.bound), self.operators)


# ---------------------------------------------------------------- families

def rotation_qubit(radius=0.8, axis=PAULI_X, generator=PAULI_Z):
    """``S_theta = exp(j theta g/2) S0 exp(-j theta g/2)`` with ``S0 = (I + r n.sigma)/2``."""
    s0 = 0.5 * (np.eye(2) + radius * axis)

    def ev(p):
        u = linop.apply_function(generator, lambda w: np.exp(0.5j * p[0].real * w))
        return u @ s0 @ u.conj().T

    return ParamFamily(ev, 1, "real")


def coherent_displacement(fock_dim=48):
    """Pure coherent states ``|theta)(theta|`` with real ``theta``."""

    def ev(p):
        v = coherent_vector(float(p[0].real), fock_dim).coeffs
        return np.outer(v, v.conj())

    return ParamFamily(ev, 1, "real")


def coherent_family(fock_dim=48):
    """Pure coherent states ``|alpha)(alpha|`` with complex ``alpha``."""

    def ev(p):
        v = coherent_vector(complex(p[0]), fock_dim).coeffs
        return np.outer(v, v.conj())

    return ParamFamily(ev, 1, "complex")


def thermal_coherent(nbar, fock_dim=48, kind="complex"):
    """Displaced thermal states with ``nbar`` noise quanta."""

    def ev(p):
        return thermal_coherent_density(complex(p[0]), nbar, fock_dim).op

    return ParamFamily(ev, 1, kind)


def custom(matrices: Sequence, params: Sequence[float]):
    """Family given as a table of density matrices, linearly interpolated in one real parameter."""
    mats = np.asarray(matrices, dtype=complex)
    t = np.asarray(params, dtype=float)
    if mats.ndim != 3 or mats.shape[0] != t.size or t.size < 2:
        raise DimMismatch("need one matrix per parameter value and at least two values")
    order = np.argsort(t)
    t, mats = t[order], mats[order]

    def ev(p):
        x = float(p[0].real)
        k = int(np.clip(np.searchsorted(t, x) - 1, 0, t.size - 2))
        w = (x - t[k]) / (t[k + 1] - t[k])
        return (1 - w) * mats[k] + w * mats[k + 1]

    return ParamFamily(ev, 1, "real")


def unitary_family(s0, x_op):
    """``S_theta = exp(2 pi j theta x) S0 exp(-2 pi j theta x)`` for Hermitian ``x``."""
    s0 = _op(s0)
    x = linop.as_hermitian(x_op)

    def ev(p):
        u = linop.apply_function(x, lambda w: np.exp(2j * np.pi * p[0].real * w))
        return u @ s0 @ u.conj().T

    return ParamFamily(ev, 1, "real")


# ----------------------------------------------------------- derivatives

def _step(x, fd_step):
    return fd_step * max(1.0, abs(x))


def real_derivatives(family: ParamFamily, at, fd_step=1e-5):
    """Central differences of ``S`` in each real coordinate of the parameter."""
    kind = float if family.param_kind == "real" else complex
    at = np.atleast_1d(np.asarray(at, dtype=kind))
    out = []
    for i in range(family.dim_params):
        for unit in ((1.0,) if family.param_kind == "real" else (1.0, 1j)):
            h = _step(at[i], fd_step)
            e = np.zeros(family.dim_params, dtype=kind)
            e[i] = unit * h
            out.append((family(at + e) - family(at - e)) / (2 * h))
    return out


def conj_derivatives(family: ParamFamily, at, fd_step=1e-5):
    """``dS/d conj(alpha_i) = (dS/dx_i + j dS/dy_i)/2`` for a complex family."""
    if family.param_kind != "complex":
        raise ValueError("conjugate derivatives need a complex family")
    d = real_derivatives(family, at, fd_step)
    return [0.5 * (d[2 * i] + 1j * d[2 * i + 1]) for i in range(family.dim_params)]


def _jacobian(theta_map, at, n, fd_step):
    if theta_map is None:
        return np.eye(n)
    at = np.atleast_1d(np.asarray(at, dtype=float))
    cols = []
    for i in range(n):
        h = _step(at[i], fd_step)
        e = np.zeros(n)
        e[i] = h
        cols.append((np.atleast_1d(theta_map(at + e)) - np.atleast_1d(theta_map(at - e))) / (2 * h))
    return np.array(cols).T


def _inverse_info(info, exc, rel=1e-10):
    w = np.linalg.eigvalsh(0.5 * (info + info.conj().T))
    if w.min() <= rel * max(abs(w).max(), 1.0):
        raise exc(f"information matrix has eigenvalue {w.min():.3e}")
    return np.linalg.inv(info)


# ---------------------------------------------------------------- bounds

def classical_bound(m: Povm, family: ParamFamily, at, theta_map=None, fd_step=1e-5, zero_tol=1e-12):
    """Fisher information of the outcome intensities and ``D F^-1 D^T``."""
    if family.param_kind != "real":
        raise ValueError("classical_bound takes a real family")
    at = np.atleast_1d(np.asarray(at, dtype=float))
    mu = m.probabilities(family(at))
    dmu = np.array([m.probabilities(d) for d in real_derivatives(family, at, fd_step)])
    live = mu > zero_tol
    if np.any(~live & (np.abs(dmu).max(axis=0) > 1e3 * zero_tol)):
        raise ZeroOutcome("an outcome with zero intensity has nonzero derivative")
    fisher = (dmu[:, live] / mu[live]) @ dmu[:, live].T
    jac = _jacobian(theta_map, at, family.dim_params, fd_step)
    bound = jac @ _inverse_info(fisher, SingularFisher) @ jac.T
    return BoundReport(bound, fisher)


def sld_bound(family: ParamFamily, at, theta_map=None, fd_step=1e-5, tol=1e-10):
    """``G_ij = Re Tr(S g_i g_j)`` with ``g_i S + S g_i = 2 dS/dtheta_i``."""
    if family.param_kind != "real":
        raise ValueError("sld_bound takes a real family")
    at = np.atleast_1d(np.asarray(at, dtype=float))
    s = family(at)
    gs = [linop.solve_anticommutator(s, d, tol=tol) for d in real_derivatives(family, at, fd_step)]
    n = len(gs)
    g = np.array([[np.real(np.trace(s @ gs[i] @ gs[k])) for k in range(n)] for i in range(n)])
    g = 0.5 * (g + g.T)
    jac = _jacobian(theta_map, at, n, fd_step)
    bound = jac @ _inverse_info(g, SingularG) @ jac.T
    return BoundReport(bound, g, operators=gs)


def rld_bound(family: ParamFamily, at, theta_map=None, fd_step=1e-5, tol=1e-10, support_tol=1e-6):
    """``S h_i = dS/d conj(alpha_i)`` solved on the support of ``S``.

    ``H_ik = Tr(S h_i h_k^*)`` is Hermitian and positive; the bound is
    ``D H^-1 D^*``.  ``theta_map`` must then be an analytic function.
    """
    at = np.atleast_1d(np.asarray(at, dtype=complex))
    s = family(at)
    sp = linop.pinv_on_support(s, tol=tol)
    hs = []
    for d in conj_derivatives(family, at, fd_step):
        resid = np.linalg.norm(s @ sp @ d - d, 2)
        if resid > support_tol * max(np.linalg.norm(d, 2), 1e-300):
            raise SupportDeficient(f"derivative leaves the support of S (residual {resid:.2e})")
        hs.append(sp @ d)
    n = len(hs)
    info = np.array([[np.trace(s @ hs[i] @ hs[k].conj().T) for k in range(n)] for i in range(n)])
    info = 0.5 * (info + info.conj().T)
    if theta_map is None:
        jac = np.eye(n, dtype=complex)
    else:
        jac = np.zeros((n, n), dtype=complex)
        for i in range(n):
            h = _step(at[i], fd_step)
            e = np.zeros(n, dtype=complex)
            e[i] = h
            fx = (np.atleast_1d(theta_map(at + e)) - np.atleast_1d(theta_map(at - e))) / (2 * h)
            fy = (np.atleast_1d(theta_map(at + 1j * e)) - np.atleast_1d(theta_map(at - 1j * e))) / (2 * h)
            jac[:, i] = 0.5 * (fx - 1j * fy)
    bound = jac @ _inverse_info(info, SingularH) @ jac.conj().T
    return BoundReport(bound, info, operators=hs)


# ------------------------------------------------------------ covariances

def _estimates(m: Povm, estimator):
    if callable(estimator):
        vals = [np.atleast_1d(estimator(lab)) for lab in m.labels]
    else:
        vals = [np.atleast_1d(v) for v in estimator]
    est = np.array(vals)
    if est.shape[0] != m.n_outcomes:
        raise DimMismatch("need one estimate per outcome")
    return est


def measurement_covariance(m: Povm, estimator, s, theta, periodic=False):
    """Covariance of the estimates about ``theta`` and the bias.

    ``estimator`` is a callable on outcome labels or an array with one row
    per outcome.  With ``periodic=True`` deviations are wrapped to [-1/2, 1/2).
    Returns ``(R, bias)``.
    """
    est = _estimates(m, estimator)
    theta = np.atleast_1d(np.asarray(theta))
    p = m.probabilities(s)
    dev = est - theta[None, :]
    if periodic:
        dev = (dev.real + 0.5) % 1.0 - 0.5
    r = np.einsum("ki,kj,k->ij", dev, dev.conj(), p)
    bias = dev.T @ p
    if not np.iscomplexobj(est) and not np.iscomplexobj(theta):
        r, bias = r.real, bias.real
    return r, bias


def right_eigen_residual(m: Povm, x_ops, estimator):
    """``max_k ||(x_i - x_i(k)) M_k||``: how far the POVM is a right proper resolution."""
    est = _estimates(m, estimator)
    x_ops = [np.asarray(x_ops, dtype=complex)] if np.ndim(x_ops) == 2 else [np.asarray(x, dtype=complex) for x in x_ops]
    worst = 0.0
    n = m.dim
    for k in range(m.n_outcomes):
        if m.vectors is not None:
            v = m.vectors[:, k] * np.sqrt(m.weights[k])
            for i, x in enumerate(x_ops):
                worst = max(worst, float(np.linalg.norm(x @ v - est[k, i] * v)) * float(np.linalg.norm(v)))
        else:
            e = m.elements[k]
            for i, x in enumerate(x_ops):
                worst = max(worst, float(np.linalg.norm((x - est[k, i] * np.eye(n)) @ e, 2)))
    return worst


def log_mgf_curvature(m: Povm, estimator, s, ts=None):
    """Residual of a quadratic fit to ``log sum_k exp(t x_k) mu_k``.

    A zero residual means the outcome distribution of the (real) estimate is
    Gaussian in its generating function.
    """
    est = np.real(_estimates(m, estimator)[:, 0])
    p = m.probabilities(s)
    ts = np.linspace(-1.0, 1.0, 21) if ts is None else np.asarray(ts)
    shift = est.max()
    logm = np.array([np.log(np.sum(p * np.exp(t * (est - shift)))) + t * shift for t in ts])
    coef = np.polyfit(ts, logm, 2)
    return float(np.max(np.abs(np.polyval(coef, ts) - logm)))


def efficiency_check(family: ParamFamily, m: Povm, estimator, points, bound="sld", x_ops=None,
                     attain_tol=1e-6, fd_step=1e-5):
    """Report whether the bound is attained, the right-eigen residual and Gaussianity.

    ``bound`` is ``"sld"``, ``"rld"`` or ``"classical"``.  Returns a dict.
    """
    slacks = []
    for pt in points:
        pt = np.atleast_1d(pt)
        s = family(pt)
        r, _ = measurement_covariance(m, estimator, s, pt)
        if bound == "sld":
            rep = sld_bound(family, pt, fd_step=fd_step)
        elif bound == "rld":
            rep = rld_bound(family, pt, fd_step=fd_step)
        else:
            rep = classical_bound(m, family, pt, fd_step=fd_step)
        rep = rep.with_covariance(r)
        w = np.linalg.eigvalsh(0.5 * (rep.R - rep.bound + (rep.R - rep.bound).conj().T))
        slacks.append({"point": pt.tolist(), "R": rep.R, "bound": rep.bound,
                       "slack_min_eig": float(w.min()), "slack_max_eig": float(w.max())})
    attained = all(abs(s["slack_max_eig"]) < attain_tol for s in slacks)
    report = {"points": slacks, "attained": attained}
    if x_ops is not None:
        report["right_eigen_residual"] = right_eigen_residual(m, x_ops, estimator)
    if family.param_kind == "real":
        report["log_mgf_residual"] = log_mgf_curvature(m, estimator, family(np.atleast_1d(points[0])))
    return report


def uncertainty_check(s0, x_op, m: Povm, estimator, theta=0.0, periodic=False, tol=1e-12):
    """``(2 pi)^2 R_theta Var(x) >= 1/4`` for ``S_theta = e^{2 pi j theta x} S0 e^{-2 pi j theta x}``.

    Returns a dict with the product and the slack.  Raises :class:`SingularS`
    when ``x`` has no spread in ``S0``, where the relation is vacuous.
    """
    s0 = _op(s0)
    x = linop.as_hermitian(x_op)
    tr = np.real(np.trace(s0))
    mean = np.real(np.trace(s0 @ x)) / tr
    var = np.real(np.trace(s0 @ x @ x)) / tr - mean**2
    if var <= tol * max(1.0, np.linalg.norm(x, 2) ** 2):
        raise SingularS("the generator has zero variance in the reference state")
    fam = unitary_family(s0, x)
    r, bias = measurement_covariance(m, estimator, fam([theta]), [theta], periodic=periodic)
    prod = (2 * np.pi) ** 2 * float(np.real(r[0, 0])) * var
    return {"R": float(np.real(r[0, 0])), "variance": float(var), "product": prod,
            "slack": prod - 0.25, "bias": float(np.real(bias[0]))}


# --------------------------------------------------------- Bayesian case

@dataclass
class BayesResult:
    x_hat: np.ndarray
    povm: Povm
    estimates: np.ndarray
    sigma2: float
    prior_variance: float
    certificate: Certificate

    def estimator_map(self, k):
        return float(self.estimates[k])


def gaussian_prior(sbar, n_points=201, width=6.0):
    """Grid over ``+-width`` standard deviations with normalised Gaussian weights."""
    sd = np.sqrt(sbar)
    t = np.linspace(-width * sd, width * sd, n_points)
    w = np.exp(-0.5 * t**2 / sbar)
    return t, w / w.sum()


def moment_operators(states, thetas, weights):
    """``R^(k) = sum_theta theta^k S_theta P(theta)`` for ``k = 0, 1, 2``."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise NegativeWeight("prior weights must be nonnegative")
    t = np.asarray(thetas, dtype=float)
    ops = np.asarray([_op(s) for s in states])
    if ops.shape[0] != t.size or t.size != w.size:
        raise DimMismatch("one state and one weight per prior point")
    return tuple(np.einsum("k,kij->ij", w * t**j, ops) for j in range(3))


def bayes_quadratic(states, thetas, weights, tol=1e-10, cert_tol=1e-7, n_check=None):
    """Optimal estimate for quadratic cost from a finite prior.

    Solves ``x R0 + R0 x = 2 R1``; the optimal measurement is the spectral
    measurement of ``x`` and the minimal error is ``Tr(R2 - x R0 x)``.  The
    certificate evaluates ``R_x - L`` with ``R_x = x^2 R0 - 2 x R1 + R2`` and
    ``L = R2 - x R0 x`` on the eigenvectors of ``x`` (complementarity) and its
    smallest eigenvalue over the eigenvalues of ``x`` (feasibility).
    """
    r0, r1, r2 = moment_operators(states, thetas, weights)
    r0 = linop.as_hermitian(r0, tol=1e-9)
    r1 = linop.as_hermitian(r1, tol=1e-9)
    r2 = linop.as_hermitian(r2, tol=1e-9)
    x = linop.solve_anticommutator(r0, r1, tol=tol)
    lam = r2 - x @ r0 @ x
    sigma2 = float(np.real(np.trace(lam)))
    total = float(np.sum(weights))
    t = np.asarray(thetas, dtype=float)
    mean = float(np.dot(weights, t)) / total
    prior_var = float(np.dot(weights, t**2)) / total - mean**2
    scale = max(float(np.real(np.trace(r2))), 1e-300)
    if sigma2 < -1e-9 * scale:
        raise NegativeVariance(f"posterior variance {sigma2:.3e} is negative")
    vals, vecs = np.linalg.eigh(x)
    idx = np.arange(len(vals)) if n_check is None else np.unique(
        np.linspace(0, len(vals) - 1, n_check).astype(int))
    comp = 0.0
    feas = 0.0
    for k in idx:
        rx = vals[k] ** 2 * r0 - 2 * vals[k] * r1 + r2
        diff = rx - lam
        comp = max(comp, float(np.linalg.norm(diff @ vecs[:, k])))
        feas = max(feas, -linop.min_eig(diff))
    primal = float(np.sum([np.real(vecs[:, k].conj() @ (vals[k] ** 2 * r0 - 2 * vals[k] * r1 + r2) @ vecs[:, k])
                           for k in range(len(vals))]))
    cert = Certificate({"complementarity": comp, "feasibility": feas}, primal=primal, dual=sigma2,
                       tol=cert_tol)
    povm = Povm(vectors=vecs, labels=list(vals))
    return BayesResult(x, povm, vals, sigma2, prior_var, cert)


def gaussian_amplitude_bayes(nbar, sbar, fock_dim=80, n_points=201, width=6.0, **kw):
    """Real-amplitude example: displaced thermal states under a Gaussian prior."""
    t, w = gaussian_prior(sbar, n_points, width)
    return bayes_quadratic(thermal_coherent_batch(t, nbar, fock_dim), t, w, **kw)


def gaussian_amplitude_closed_form(nbar, sbar):
    """Gain and posterior variance for measuring ``Q = (a + a^*)/2``.

    ``Q`` has variance ``(nbar + 1/2)/2`` in a displaced thermal state, so
    the estimate is ``x = 2 sbar q / (2 sbar + nbar + 1/2)`` and the error is
    ``sbar (nbar + 1/2) / (2 sbar + nbar + 1/2)``.
    """
    d = 2 * sbar + nbar + 0.5
    return {"x_scale": 2 * sbar / d, "sigma2": sbar * (nbar + 0.5) / d}


def heterodyne_closed_form(nbar, sbar):
    """Complex amplitude with prior variance ``sbar``: ``x = c alpha``, ``c = sbar/(sbar+nbar+1)``."""
    if nbar < 0 or sbar < 0:
        raise ValueError("nbar and sbar must be nonnegative")
    d = sbar + nbar + 1.0
    return {"x_scale": sbar / d, "sigma2": sbar * (nbar + 1.0) / d}


def complex_gaussian_prior(sbar, n_nodes=24, drop=1e-14):
    """Gauss-Hermite product rule for ``exp(-|theta|^2/sbar)``; returns points and weights.

    Nodes whose weight is below ``drop`` are discarded (their total weight is
    far below any tolerance used here, and they carry the largest amplitudes).
    """
    z, wz = np.polynomial.hermite.hermgauss(n_nodes)
    re, im = np.meshgrid(z, z, indexing="ij")
    pts = (np.sqrt(sbar) * (re + 1j * im)).ravel()
    w = (np.outer(wz, wz) / np.pi).ravel()
    keep = w >= drop
    return pts[keep], w[keep]


def complex_moment_operators(nbar, sbar, fock_dim, n_nodes=24):
    """``R0``, ``R1 = sum theta S P`` and ``R2 = sum |theta|^2 S P`` for the complex prior."""
    pts, w = complex_gaussian_prior(sbar, n_nodes)
    ops = thermal_coherent_batch(pts, nbar, fock_dim)
    return tuple(np.einsum("k,kij->ij", w * f, ops) for f in (np.ones_like(pts), pts, np.abs(pts) ** 2))


def heterodyne_numeric(nbar, sbar, m: Povm, moments=None, fock_dim=64, n_nodes=24):
    """Mean squared error of ``x = c alpha`` under a coherent POVM, by quadrature.

    The risk is ``sum_alpha (alpha| R_{c alpha} |alpha) w_alpha`` with
    ``R_x = |x|^2 R0 - conj(x) R1 - x R1^* + R2``.
    """
    r0, r1, r2 = moments if moments is not None else complex_moment_operators(nbar, sbar, fock_dim, n_nodes)
    c = heterodyne_closed_form(nbar, sbar)["x_scale"]
    alpha = np.asarray(m.labels, dtype=complex)
    x = c * alpha
    p0 = m.probabilities(r0)
    p2 = m.probabilities(r2)
    v = m.vectors
    q1 = np.einsum("ik,ij,jk->k", v.conj(), r1, v) * m.weights
    risk = np.sum(np.abs(x) ** 2 * p0 - 2 * np.real(np.conj(x) * q1) + p2)
    return float(risk)


def heterodyne_certificate(nbar, sbar, moments, samples=None):
    """Residuals of ``R_x - L`` with ``L = sigma2 R0`` against ``(conj x - c a^*) R0 (x - c a)``.

    Reports the largest ``||(R_x - L) |x/c)||`` over the samples and the
    smallest eigenvalue of ``R_x - L``.
    """
    r0, r1, r2 = moments
    n = r0.shape[0]
    cf = heterodyne_closed_form(nbar, sbar)
    c, s2 = cf["x_scale"], cf["sigma2"]
    lam = s2 * r0
    samples = np.array([0.0, 0.5, -0.7 + 0.4j, 1.0j, 1.2 - 0.3j]) if samples is None else np.asarray(samples)
    comp = 0.0
    feas = 0.0
    for x in samples:
        rx = abs(x) ** 2 * r0 - np.conj(x) * r1 - x * r1.conj().T + r2
        diff = rx - lam
        chi = coherent_vector(x / c, n, check=False).coeffs
        comp = max(comp, float(np.linalg.norm(diff @ chi)))
        feas = max(feas, -linop.min_eig(diff))
    return {"complementarity": comp, "feasibility": feas, "dual": float(np.real(np.trace(lam)))}
