"""Two-alternative optimal detection.

Maximise the degree of contrast ``Tr(C D)`` over quasifilters ``0 <= D <= E``.
The optimum is the projector onto the positive eigenspace of ``C`` and the
dual operator is the positive part ``C_+``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linop
from .certificate import Certificate
from .errors import Inadmissible, SupportViolation, ZeroSignal
from .states import Amplitude

ZERO_TOL = 1e-10


@dataclass
class DetectionResult:
    D_opt: np.ndarray
    B_opt: np.ndarray
    kappa: float
    certificate: Certificate


def detect_certificate(c, d, b, e=None, tol=1e-9):
    """Residuals of ``B(E - D) = 0`` and ``(B - C) D = 0`` plus the duality gap.

    Raises :class:`Inadmissible` if ``D``, ``E - D``, ``B`` or ``B - C`` has an
    eigenvalue below ``-tol``.
    """
    c = linop.as_hermitian(c, 1e-9)
    d = linop.as_hermitian(d, 1e-9)
    b = linop.as_hermitian(b, 1e-9)
    e = np.eye(c.shape[0], dtype=complex) if e is None else linop.as_hermitian(e, 1e-9)
    for name, op in (("D >= 0", d), ("D <= E", e - d), ("B >= 0", b), ("B >= C", b - c)):
        w = linop.min_eig(op)
        if w < -tol:
            raise Inadmissible(name, -w)
    res = {
        "B(E-D)": float(np.linalg.norm(b @ (e - d), 2)),
        "(B-C)D": float(np.linalg.norm((b - c) @ d, 2)),
    }
    primal = float(np.real(np.trace(c @ d)))
    dual = float(np.real(np.trace(b @ e)))
    return Certificate(res, primal, dual, tol)


def optimal_detect(c, e=None, tol=1e-9):
    """Optimal quasifilter for contrast operator ``c`` on support ``e``.

    Returns the minimal optimal filter, i.e. the projector onto eigenvectors
    with eigenvalue above ``1e-10 * ||C||``.
    """
    c = linop.as_hermitian(c)
    n = c.shape[0]
    e = np.eye(n, dtype=complex) if e is None else linop.as_hermitian(e, 1e-9)
    scale = max(linop.spectral_norm(c), 1e-300)
    if np.linalg.norm(c @ e - c, 2) > 1e-9 * scale:
        raise SupportViolation("contrast operator is not supported in E")
    w, v = linop.eig_hermitian(c)
    pos = w > ZERO_TOL * scale
    vp = v[:, pos]
    d = vp @ vp.conj().T
    b = (vp * w[pos]) @ vp.conj().T
    kappa = float(np.sum(w[pos]))
    cert = detect_certificate(c, d, b, e, tol)
    return DetectionResult(d, b, kappa, cert)


@dataclass
class CoherentPairResult:
    kappa_plus: float
    chi_plus: Amplitude
    kappa_matched: float
    kappa_resulting: float
    ratio: float


def coherent_pair_detect(phi: Amplitude, phi0: Amplitude):
    """Detect signal ``phi`` on top of a coherent background ``phi0``.

    The contrast operator ``|phi0+phi)(phi0+phi| - |phi0)(phi0|`` has rank at
    most two, so the eigenproblem is solved in the span of the two amplitudes.
    """
    psi0 = phi0.vector()
    psi1 = (phi0 + phi).vector()
    if np.linalg.norm(phi.vector()) == 0 and np.linalg.norm(psi0) == 0:
        raise ZeroSignal("both amplitudes vanish")
    u, s, _ = np.linalg.svd(np.column_stack([psi0, psi1]), full_matrices=False)
    q = u[:, s > 1e-12 * s.max()]
    a0 = q.conj().T @ psi0
    a1 = q.conj().T @ psi1
    c = np.outer(a1, a1.conj()) - np.outer(a0, a0.conj())
    w, v = linop.eig_hermitian(c)
    kappa_plus = max(float(w[0]), 0.0)
    chi = q @ v[:, 0]
    chi_amp = Amplitude(chi / np.sqrt(phi.basis.weight), phi.basis)

    def contrast(x):
        x = x / np.linalg.norm(x)
        return float(abs(np.vdot(x, psi1)) ** 2 - abs(np.vdot(x, psi0)) ** 2)

    sig = phi.vector()
    matched = contrast(sig) if np.linalg.norm(sig) > 0 else float("nan")
    resulting = contrast(psi1) if np.linalg.norm(psi1) > 0 else float("nan")
    ratio = kappa_plus / matched if matched and np.isfinite(matched) else float("nan")
    return CoherentPairResult(kappa_plus, chi_amp, matched, resulting, ratio)


def orthogonal_pair_kappa(mu, nu0):
    """Closed form of ``kappa_plus`` when signal and background are orthogonal.

    ``sqrt(mu nu0) (sqrt(1 + lam) + sqrt(lam))`` with ``lam = mu / (4 nu0)``.
    """
    if nu0 == 0:
        return float(mu)
    lam = mu / (4.0 * nu0)
    return float(np.sqrt(mu * nu0) * (np.sqrt(1 + lam) + np.sqrt(lam)))


def orthogonal_pair_ratio(mu, nu0):
    """Gain of the optimal filter over the matched filter, ``(1 + sqrt(1 + eps)) / 2``
    with ``eps = 4 nu0 / mu``."""
    eps = 4.0 * nu0 / mu
    return 0.5 * (1.0 + np.sqrt(1.0 + eps))


def pair_secular_kappa(nu0, nu1, beta):
    """Positive eigenvalue of ``|psi1)(psi1| - |psi0)(psi0|`` from norms and overlap.

    ``beta`` is the overlap of the normalised amplitudes scaled by
    ``sqrt(nu0 nu1)``, i.e. ``(psi0|psi1)``.
    """
    return float((nu1 - nu0) / 2 + np.sqrt(((nu1 + nu0) / 2) ** 2 - abs(beta) ** 2))
