"""Multi-alternative identification of pure (or low-rank mixed) patterns.

Everything is computed in signal space, the span of the pattern amplitudes
expressed through the correlation matrix ``sigma``.  With ``h = sqrt(sigma)``
and a block-diagonal weight ``mu`` the candidate dual operator is
``lam = sqrt(h mu h)`` and the decision operators are

    D_i = lam^+ h mu_i h lam^+ ,

which always form a valid measurement on the range of ``lam``.  Optimality
holds when ``g = h lam^+ h`` satisfies ``mu_i (1 - g_ii) = 0`` and
``g_ii <= 1``.  The fixed point is found with the multiplicative update
``mu_i <- mu_i g_ii`` (symmetrised for block patterns).  Since ``g`` scales
as ``c^(-1/2)`` when ``mu`` is scaled by ``c``, any starting scale is
attracted to the same fixed point.  ``lam`` is obtained from the singular
values of ``h sqrt(mu)`` rather than from the eigenvalues of ``h mu h``, which
would square the condition number and stall the iteration near 1e-9.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import poisson

from . import linop
from .certificate import Certificate
from .errors import (
    DegenerateGram,
    DimMismatch,
    GammaOutOfRange,
    NoConvergence,
    NotEquidiagonal,
    NotPsd,
    TooFewPoints,
)
from .measure import Povm
from .states import Amplitude, synthesis_matrix

RANK_TOL = 1e-12


@dataclass
class IdentifyResult:
    povm: Povm
    mu: list
    L_opt: np.ndarray
    kappa: float
    certificate: Certificate
    iterations: int
    extra: dict = field(default_factory=dict)


def _blocks(sizes):
    out, start = [], 0
    for k in sizes:
        out.append(slice(start, start + k))
        start += k
    return out


def _psd_eig(a):
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    return np.clip(w, 0.0, None), v


class _SignalSpace:
    """Correlation-matrix form of an identification problem."""

    def __init__(self, sigma, sizes=None, h=None, psi=None):
        sigma = linop.as_hermitian(sigma, 1e-9)
        self.sigma = sigma
        self.sizes = [1] * sigma.shape[0] if sizes is None else list(sizes)
        if sum(self.sizes) != sigma.shape[0]:
            raise DimMismatch("block sizes do not add up to the correlation matrix size")
        self.blocks = _blocks(self.sizes)
        self.scale = float(np.real(np.trace(sigma)))
        if self.scale <= 0:
            raise DegenerateGram("all patterns vanish")
        if h is None and psi is not None:
            # sqrt(Psi^* Psi) from the SVD of Psi keeps small singular values accurate.
            _, sv, vt = np.linalg.svd(psi, full_matrices=False)
            v = vt.conj().T
            h = (v * sv) @ v.conj().T
        if h is None:
            w, v = linop.eig_hermitian(sigma)
            if w.min() < -1e-9 * w.max():
                raise NotPsd("correlation matrix is not positive semidefinite")
            h = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
        self.h = h

    def initial_mu(self):
        return [self.h[b, b] @ self.h[b, b] for b in self.blocks]

    def root_weight(self, mu):
        k = self.sigma.shape[0]
        m = np.zeros((k, k), dtype=complex)
        for b, mb in zip(self.blocks, mu):
            w, v = _psd_eig(mb)
            m[b, b] = (v * np.sqrt(w)) @ v.conj().T
        return m

    def weight_matrix(self, mu):
        k = self.sigma.shape[0]
        m = np.zeros((k, k), dtype=complex)
        for b, mb in zip(self.blocks, mu):
            m[b, b] = mb
        return m

    def evaluate(self, mu):
        h = self.h
        # lam = sqrt(B B^*) with B = h sqrt(mu); the SVD of B avoids squaring.
        u, root, _ = np.linalg.svd(h @ self.root_weight(mu))
        keep = root > RANK_TOL * max(root.max(initial=0.0), 1e-300)
        uk = u[:, keep]
        lam = (u * root) @ u.conj().T
        lam_pinv = (uk / root[keep]) @ uk.conj().T
        g = h @ lam_pinv @ h
        return lam, lam_pinv, g

    def residuals(self, mu, g):
        comp, feas = 0.0, 0.0
        for b, mb in zip(self.blocks, mu):
            gb = g[b, b]
            comp = max(comp, float(np.linalg.norm(mb @ (np.eye(len(gb)) - gb), 2)))
            feas = max(feas, float(np.linalg.eigvalsh(0.5 * (gb + gb.conj().T)).max()) - 1.0)
        return comp, max(feas, 0.0)

    def update(self, mu, g):
        """``mu_i <- g_ii^(1/2) mu_i g_ii^(1/2)``; for scalar blocks ``mu_i g_ii``."""
        out = []
        for b, mb in zip(self.blocks, mu):
            w, v = _psd_eig(g[b, b])
            root = (v * np.sqrt(w)) @ v.conj().T
            nb = root @ mb @ root
            out.append(0.5 * (nb + nb.conj().T))
        return out

    def certificate(self, mu, tol):
        lam, lam_pinv, g = self.evaluate(mu)
        comp, feas = self.residuals(mu, g)
        h = self.h
        decisions = [lam_pinv @ h[:, b] @ mb @ h[:, b].conj().T @ lam_pinv for b, mb in zip(self.blocks, mu)]
        primal = float(sum(np.real(np.trace(h[:, b].conj().T @ d @ h[:, b])) for b, d in zip(self.blocks, decisions)))
        # Scaling lam by the largest block of g makes it dual feasible.
        c = max(1.0, 1.0 + feas)
        dual_psd = 0.0
        for b in self.blocks:
            hb = h[:, b]
            dual_psd = max(dual_psd, -linop.min_eig(c * lam - hb @ hb.conj().T))
        dual = c * float(np.real(np.trace(lam)))
        res = {
            "complementarity": comp,
            "feasibility": feas,
            "dual_psd": max(dual_psd, 0.0),
        }
        return Certificate(res, primal, dual, tol), lam, decisions, g


def _prune(mu, scale):
    """Zero out weights that the iteration has driven to the noise floor."""
    return [np.zeros_like(mb) if np.linalg.norm(mb, 2) < 1e-14 * scale else mb for mb in mu]


def _fixed_point(space: _SignalSpace, mu0, max_iters, iter_tol):
    mu = [np.asarray(m, dtype=complex).copy() for m in mu0]
    best = None
    for it in range(max_iters + 1):
        _, _, g = space.evaluate(mu)
        comp, feas = space.residuals(mu, g)
        r = max(comp, feas * space.scale) / space.scale
        if best is None or r < best[0]:
            best = (r, mu, it)
        if r < iter_tol:
            return mu, it, True
        if it == max_iters:
            break
        mu = space.update(mu, g)
    return best[1], best[2], False


def _as_synthesis(patterns, weights=None):
    """Return (Psi, block sizes) from amplitudes, a matrix or operator patterns."""
    if isinstance(patterns, np.ndarray) and patterns.ndim == 2:
        psi, sizes = patterns.astype(complex), [1] * patterns.shape[1]
    elif len(patterns) and all(isinstance(p, Amplitude) for p in patterns):
        psi, sizes = synthesis_matrix(patterns), [1] * len(patterns)
    else:
        mats = [np.asarray(p, dtype=complex) for p in patterns]
        mats = [m[:, None] if m.ndim == 1 else m for m in mats]
        if len({m.shape[0] for m in mats}) != 1:
            raise DimMismatch("patterns live in spaces of different dimension")
        psi, sizes = np.hstack(mats), [m.shape[1] for m in mats]
    if weights is not None:
        w = np.sqrt(np.repeat(np.asarray(weights, dtype=float), sizes))
        psi = psi * w
    return psi, sizes


def _lift(space, psi, lam, decisions):
    """Map signal-space operators to the original space via W = Psi h^+."""
    if psi is None:
        sup = linop.support_projector(space.h, 1e-10)
        return Povm(np.stack(decisions), support=sup), lam
    hp = linop.pinv_on_support(space.h, 1e-12)
    w = psi @ hp
    els = np.stack([w @ d @ w.conj().T for d in decisions])
    els = 0.5 * (els + els.conj().transpose(0, 2, 1))
    sup = w @ w.conj().T
    return Povm(els, support=0.5 * (sup + sup.conj().T)), w @ lam @ w.conj().T


def _result(space, psi, mu, iterations, tol, **extra):
    cert, lam, decisions, _ = space.certificate(mu, tol)
    povm, big_l = _lift(space, psi, lam, decisions)
    mu_out = [float(np.real(m[0, 0])) if m.shape == (1, 1) else np.real_if_close(m) for m in mu]
    kappa = float(sum(np.real(np.trace(m)) for m in mu))
    return IdentifyResult(povm, mu_out, big_l, kappa, cert, iterations, dict(extra))


def solve_identification(patterns=None, *, sigma=None, sizes=None, weights=None,
                         mu0=None, max_iters=20000, iter_tol=1e-11, tol=1e-8):
    """Optimal identification measurement for a family of patterns.

    ``patterns`` may be a list of :class:`Amplitude`, a matrix whose columns
    are amplitudes, or a list of ``n x k_i`` matrices for rank-``k_i`` mixed
    patterns ``S_i = H_i H_i^*``.  Alternatively pass the correlation matrix
    ``sigma`` (with ``sizes`` for block patterns).

    Raises :class:`NoConvergence` carrying the best iterate's result when the
    certificate does not reach ``iter_tol`` within ``max_iters`` updates.
    """
    psi = None
    if patterns is not None:
        psi, sizes = _as_synthesis(patterns, weights)
        sigma = psi.conj().T @ psi
    elif sigma is None:
        raise DimMismatch("either patterns or sigma is required")
    space = _SignalSpace(sigma, sizes, psi=psi)
    if len(space.sizes) < 2:
        raise DimMismatch("identification needs at least two patterns")
    if mu0 is None:
        start = space.initial_mu()
    else:
        start = [np.atleast_2d(np.asarray(m, dtype=complex)) for m in mu0]
    mu, it, ok = _fixed_point(space, start, max_iters, iter_tol)
    mu = _prune(mu, space.scale)
    result = _result(space, psi, mu, it, tol)
    if not ok:
        raise NoConvergence(f"no fixed point after {max_iters} iterations", best=result)
    return result


def srm_equidiagonal(patterns=None, *, sigma=None, tol=1e-8, diag_tol=1e-8):
    """Square-root measurement, optimal when ``sqrt(sigma)`` has a constant diagonal."""
    psi = None
    if patterns is not None:
        psi, sizes = _as_synthesis(patterns)
        if any(s != 1 for s in sizes):
            raise DimMismatch("the equidiagonal construction needs pure patterns")
        sigma = psi.conj().T @ psi
    space = _SignalSpace(sigma)
    return _equidiagonal_result(space, psi, tol, diag_tol)


def _equidiagonal_result(space, psi, tol, diag_tol, **extra):
    d = np.real(np.diag(space.h))
    if np.max(np.abs(d - d.mean())) > diag_tol:
        raise NotEquidiagonal(f"diagonal of sqrt(sigma) spreads by {np.ptp(d):.3e}")
    mu = [np.array([[v * v]], dtype=complex) for v in d]
    return _result(space, psi, mu, 0, tol, **extra)


def equiangular_gram(m, nu, gamma):
    """``nu ((1 - gamma) I + gamma J)`` for ``m`` patterns of intensity ``nu``."""
    return nu * ((1 - gamma) * np.eye(m) + gamma * np.ones((m, m))).astype(complex)


def equiangular_amplitudes(m, nu, gamma):
    """Explicit amplitudes ``psi_i = phi_0 + phi_i`` with mutually orthogonal ``phi``."""
    if not 0 <= gamma <= 1:
        raise GammaOutOfRange("explicit construction needs 0 <= gamma <= 1")
    out = []
    for i in range(m):
        c = np.zeros(m + 1, dtype=complex)
        c[0] = np.sqrt(nu * gamma)
        c[i + 1] = np.sqrt(nu * (1 - gamma))
        out.append(Amplitude(c))
    return out


def equiangular_closed_form(m, nu, gamma):
    """``(nu/m) ((m-1) sqrt(1-gamma) + sqrt(1+(m-1) gamma))^2``."""
    if not (1.0 / (1 - m) < gamma <= 1):
        raise GammaOutOfRange(f"gamma={gamma} outside (1/(1-m), 1]")
    return float(nu / m * ((m - 1) * np.sqrt(1 - gamma) + np.sqrt(1 + (m - 1) * gamma)) ** 2)


def circulant(sigma_row):
    row = np.asarray(sigma_row, dtype=complex)
    m = len(row)
    i = np.arange(m)
    return row[(i[:, None] - i[None, :]) % m]


def cyclic_solve(sigma_row, tol=1e-8, psd_tol=1e-10):
    """Optimal identification of a cyclic family ``sigma_ik = sigma(i - k)``.

    The circulant is diagonalised by the discrete Fourier transform, which
    gives both its spectrum and a circulant ``sqrt(sigma)``.
    """
    row = np.asarray(sigma_row, dtype=complex)
    m = len(row)
    if np.max(np.abs(row[(-np.arange(m)) % m] - row.conj())) > 1e-12 * max(abs(row[0]), 1.0):
        raise NotPsd("sigma(-l) must equal conj(sigma(l))")
    eig = np.real(np.fft.fft(row))
    if eig.min() < -psd_tol * max(eig.max(), 1e-300):
        raise NotPsd(f"circulant has eigenvalue {eig.min():.3e}")
    h_row = np.fft.ifft(np.sqrt(np.clip(eig, 0.0, None)))
    space = _SignalSpace(circulant(row), h=circulant(h_row))
    return _equidiagonal_result(space, None, tol, 1e-8, eigenvalues=eig)


def coherent_phase_row(m, lam):
    """``sigma(l) = exp(lam (exp(-2 pi j l / m) - 1))`` for phase-shifted coherent states."""
    l = np.arange(m)
    return np.exp(lam * (np.exp(-2j * np.pi * l / m) - 1))


def wrapped_gaussian_row(m, delta, images=8):
    """Gaussian correlation ``exp(-delta^2 l^2 / 2)`` periodised over ``m`` sites.

    Summing over periodic images keeps the circulant positive semidefinite.
    """
    l = np.arange(m)[:, None] + m * np.arange(-images, images + 1)[None, :]
    return np.exp(-(delta**2) * l**2 / 2).sum(axis=1).astype(complex)


def phase_povm(fock_dim, n_points):
    """Discrete canonical phase measurement on ``fock_dim`` number states.

    Elements ``(1/N) |chi_x)(chi_x|`` with ``chi_x = sum_n exp(2 pi j x n) |n)``
    at ``x = k/N``.
    """
    if n_points < fock_dim:
        raise TooFewPoints(f"{n_points} points cannot resolve {fock_dim} levels")
    x = np.arange(n_points) / n_points
    n = np.arange(fock_dim)
    chi = np.exp(2j * np.pi * np.outer(n, x))
    return Povm(vectors=chi, weights=np.full(n_points, 1.0 / n_points), labels=list(x))


def phase_completeness_residual(fock_dim, n_points):
    """``||sum_x M_x - I||`` for any ``n_points``; aliasing spoils it below ``fock_dim``."""
    x = np.arange(n_points) / n_points
    n = np.arange(fock_dim)
    chi = np.exp(2j * np.pi * np.outer(n, x))
    total = chi @ chi.conj().T / n_points
    return float(np.linalg.norm(total - np.eye(fock_dim), 2))


def phase_intensities(lam, fock_dim):
    """Poisson weights ``lam^n e^-lam / n!`` of a coherent state of mean ``lam``."""
    return poisson.pmf(np.arange(fock_dim), lam)


def phase_distribution(amp: Amplitude, n_points):
    """Outcome intensities of :func:`phase_povm` on a Fock amplitude."""
    povm = phase_povm(amp.basis.size, n_points)
    v = amp.coeffs
    return np.asarray(povm.labels), np.abs(povm.vectors.conj().T @ v) ** 2 / n_points


def value_of(povm: Povm, patterns: Sequence):
    """Identification intensity ``sum_i Tr(S_i D_i)`` of an arbitrary measurement."""
    psi, sizes = _as_synthesis(patterns)
    total = 0.0
    for b, d in zip(_blocks(sizes), povm.elements):
        hb = psi[:, b]
        total += float(np.real(np.trace(hb.conj().T @ d @ hb)))
    return total
