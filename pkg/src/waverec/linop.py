"""Dense Hermitian linear algebra used by every other module.

All functions take and return plain ``numpy`` arrays.  Rank decisions use a
single relative tolerance, ``tol * ||H||`` with ``||H||`` the spectral norm.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DimMismatch, NonFinite, NonHermitian, NotPsd, SingularPair

DEFAULT_TOL = 1e-10
HERMITIAN_TOL = 1e-12


class EigenSystem(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def spectral_norm(a):
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def as_hermitian(h, tol=HERMITIAN_TOL):
    """Validate ``h`` and return its exactly symmetrised copy."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise NonFinite("matrix has NaN or infinite entries")
    scale = max(spectral_norm(h), 1.0)
    asym = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if asym > tol * scale:
        raise NonHermitian(f"asymmetry {asym:.3e} exceeds {tol:.1e}*||H||")
    return 0.5 * (h + h.conj().T)


def eig_hermitian(h, tol=HERMITIAN_TOL):
    """Eigen-decomposition with eigenvalues sorted in descending order."""
    h = as_hermitian(h, tol)
    w, v = np.linalg.eigh(h)
    order = np.argsort(w)[::-1]
    return EigenSystem(w[order], v[:, order])


def reconstruct(es: EigenSystem):
    v = es.vectors
    return (v * es.values) @ v.conj().T


def apply_function(h, f, tol=HERMITIAN_TOL):
    """Return ``f(H)`` for a real scalar function ``f`` applied to the spectrum."""
    w, v = eig_hermitian(h, tol)
    return (v * f(w)) @ v.conj().T


def positive_part(h, tol=DEFAULT_TOL):
    """Keep only the eigen-components of ``h`` above ``tol * ||h||``."""
    w, v = eig_hermitian(h)
    cut = tol * max(np.max(np.abs(w), initial=0.0), 0.0)
    keep = w > cut
    vk = v[:, keep]
    return (vk * w[keep]) @ vk.conj().T


def support_projector(h, tol=DEFAULT_TOL, sign=+1):
    """Projector onto the eigenspace where ``sign * eigenvalue > tol * ||h||``."""
    w, v = eig_hermitian(h)
    cut = tol * np.max(np.abs(w), initial=0.0)
    keep = sign * w > cut
    vk = v[:, keep]
    return vk @ vk.conj().T


def _check_psd(w, tol, scale):
    if w.size and w.min() < -tol * scale:
        raise NotPsd(f"eigenvalue {w.min():.3e} below -{tol:.1e}*||P||")


def sqrt_psd(p, tol=1e-9):
    """Principal square root of a positive semidefinite matrix."""
    w, v = eig_hermitian(p)
    scale = np.max(np.abs(w), initial=0.0)
    _check_psd(w, tol, scale)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def pinv_on_support(p, tol=DEFAULT_TOL):
    """Inverse of a PSD matrix restricted to its support; zero elsewhere."""
    w, v = eig_hermitian(p)
    scale = np.max(np.abs(w), initial=0.0)
    _check_psd(w, 1e-9, scale)
    keep = w > tol * scale
    vk = v[:, keep]
    return (vk / w[keep]) @ vk.conj().T


def inv_sqrt_on_support(p, tol=DEFAULT_TOL):
    w, v = eig_hermitian(p)
    scale = np.max(np.abs(w), initial=0.0)
    _check_psd(w, 1e-9, scale)
    keep = w > tol * scale
    vk = v[:, keep]
    return (vk / np.sqrt(w[keep])) @ vk.conj().T


def tensor(*ops):
    """Kronecker product of any number of matrices."""
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def partial_trace(ab, dims, which):
    """Trace out subsystem ``which`` (0 or 1) of a bipartite operator.

    ``dims = (d_a, d_b)`` gives the factor dimensions; the result lives on the
    remaining factor.
    """
    ab = np.asarray(ab, dtype=complex)
    da, db = (int(d) for d in dims)
    if ab.shape != (da * db, da * db):
        raise DimMismatch(f"shape {ab.shape} inconsistent with dims {dims}")
    t = ab.reshape(da, db, da, db)
    if which == 0:
        return np.einsum("ijil->jl", t)
    if which == 1:
        return np.einsum("ijkj->ik", t)
    raise DimMismatch(f"subsystem index must be 0 or 1, got {which}")


def solve_anticommutator(s, b, tol=DEFAULT_TOL):
    """Solve ``G S + S G = 2 B`` for Hermitian ``G``.

    Works in the eigenbasis of ``S`` where the equation is diagonal:
    ``G_ij = 2 B_ij / (s_i + s_j)``.  Blocks with ``s_i + s_j`` at the noise
    level must carry no data in ``B``; there ``G_ij`` is set to zero, giving
    the minimum-norm solution.  Otherwise :class:`SingularPair` is raised.
    """
    s = as_hermitian(s)
    b = as_hermitian(b, tol=1e-9)
    if s.shape != b.shape:
        raise DimMismatch(f"S is {s.shape} but B is {b.shape}")
    w, v = np.linalg.eigh(s)
    scale_s = max(np.max(np.abs(w), initial=0.0), 1e-300)
    _check_psd(w, 1e-9, scale_s)
    bt = v.conj().T @ b @ v
    denom = w[:, None] + w[None, :]
    small = denom <= tol * scale_s
    scale_b = max(spectral_norm(b), 1e-300)
    if np.any(np.abs(bt[small]) > tol * scale_b):
        bad = np.max(np.abs(bt[small]))
        raise SingularPair(f"B has weight {bad:.3e} on a null block of S")
    gt = np.zeros_like(bt)
    gt[~small] = 2.0 * bt[~small] / denom[~small]
    g = v @ gt @ v.conj().T
    return 0.5 * (g + g.conj().T)


def is_psd(h, tol=1e-9):
    w = np.linalg.eigvalsh(0.5 * (h + np.conj(h).T))
    return bool(w.size == 0 or w.min() >= -tol * max(np.max(np.abs(w)), 1.0))


def min_eig(h):
    h = np.asarray(h, dtype=complex)
    return float(np.linalg.eigvalsh(0.5 * (h + h.conj().T)).min())


def random_unitary(dim, rng):
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
