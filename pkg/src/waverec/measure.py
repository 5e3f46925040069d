"""Measurements: POVMs (quasiselectors), their validity report, Halmos and
Neumark dilations, indirect measurement through an ancilla, and the coherent
(heterodyne) POVM.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaincc

from . import linop
from .errors import BadReference, DimMismatch, GridTooCoarse, InvalidDilation, NotContraction, NotUnitary
from .states import alpha_grid, annihilation, coherent_matrix


class Povm:
    """Ordered family of positive operators summing to a support projector.

    Elements may be stored densely (``elements`` of shape ``(k, n, n)``) or
    as weighted rank-one terms ``weights[k] |v_k)(v_k|`` with ``vectors`` of
    shape ``(n, k)``.  The rank-one form keeps large quadrature grids cheap.
    """

    def __init__(self, elements=None, support=None, labels=None, vectors=None, weights=None):
        if elements is None and vectors is None:
            raise DimMismatch("a POVM needs elements or vectors")
        if elements is not None:
            el = np.asarray(elements, dtype=complex)
            if el.ndim != 3 or el.shape[1] != el.shape[2]:
                raise DimMismatch(f"elements must have shape (k, n, n), got {el.shape}")
            self._elements = el
            self.vectors = None
            self.weights = None
            n, k = el.shape[1], el.shape[0]
        else:
            self._elements = None
            self.vectors = np.asarray(vectors, dtype=complex)
            k = self.vectors.shape[1]
            self.weights = np.ones(k) if weights is None else np.asarray(weights, dtype=float)
            n = self.vectors.shape[0]
        self.dim = n
        self.n_outcomes = k
        self.support = np.eye(n, dtype=complex) if support is None else np.asarray(support, dtype=complex)
        self.labels = list(range(k)) if labels is None else list(labels)

    @property
    def elements(self):
        if self._elements is None:
            v = self.vectors
            self._elements = np.einsum("ik,jk,k->kij", v, v.conj(), self.weights)
        return self._elements

    def total(self):
        if self._elements is None:
            v = self.vectors
            return (v * self.weights) @ v.conj().T
        return self._elements.sum(axis=0)

    def probabilities(self, s):
        """Outcome intensities ``Tr(S M_k)``."""
        s = np.asarray(getattr(s, "op", s), dtype=complex)
        if s.shape != (self.dim, self.dim):
            raise DimMismatch(f"state is {s.shape}, POVM acts on dim {self.dim}")
        if self._elements is None:
            v = self.vectors
            return np.real(np.einsum("ik,ij,jk->k", v.conj(), s, v)) * self.weights
        return np.real(np.einsum("kij,ji->k", self._elements, s))

    def __len__(self):
        return self.n_outcomes


@dataclass
class Dilation:
    embed: np.ndarray
    projective: Povm


def validate_povm(m: Povm, tol=1e-9):
    """Report minimum eigenvalue, completeness residual and disjointness."""
    sup = m.support
    if sup.shape != (m.dim, m.dim):
        raise DimMismatch("support projector has the wrong shape")
    if m.vectors is not None:
        min_eig = min(0.0, float(np.min(m.weights)))
        ortho = np.abs(m.vectors.conj().T @ m.vectors) * np.sqrt(np.outer(m.weights, m.weights))
        np.fill_diagonal(ortho, 0.0)
        ortho_res = float(ortho.max(initial=0.0))
    else:
        el = m.elements
        min_eig = float(min(np.linalg.eigvalsh(e).min() for e in el))
        ortho_res = 0.0
        for i in range(len(el)):
            for k in range(i + 1, len(el)):
                ortho_res = max(ortho_res, float(np.linalg.norm(el[i] @ el[k], 2)))
    complete = float(np.linalg.norm(m.total() - sup, 2))
    proj = float(np.linalg.norm(sup @ sup - sup, 2))
    return {
        "min_eig": min_eig,
        "completeness_residual": complete,
        "support_idempotence": proj,
        "orthogonality_residual": ortho_res,
        "disjoint": bool(ortho_res <= tol),
        "valid": bool(min_eig >= -tol and complete <= tol and proj <= tol),
    }


def halmos_dilate(d, tol=1e-9):
    """Orthoprojector in the doubled space whose corner is the quasifilter ``d``."""
    w, v = linop.eig_hermitian(d)
    if w.size and (w.min() < -tol or w.max() > 1 + tol):
        raise NotContraction(f"spectrum [{w.min():.3e}, {w.max():.3e}] leaves [0, 1]")
    w = np.clip(w, 0.0, 1.0)
    n = len(w)
    e11 = (v * w) @ v.conj().T
    e12 = (v * np.sqrt(w * (1 - w))) @ v.conj().T
    e22 = (v * (1 - w)) @ v.conj().T
    e = np.block([[e11, e12], [e12, e22]])
    embed = np.vstack([np.eye(n), np.zeros((n, n))]).astype(complex)
    return Dilation(embed, Povm(np.stack([e, np.eye(2 * n) - e])))


def neumark_dilate(m: Povm):
    """Isometry ``F = [sqrt(M_1); sqrt(M_2); ...]`` and block projectors."""
    el = m.elements
    k, n = el.shape[0], el.shape[1]
    roots = [linop.sqrt_psd(e) for e in el]
    f = np.vstack(roots)
    blocks = []
    for i in range(k):
        p = np.zeros((k * n, k * n), dtype=complex)
        p[i * n:(i + 1) * n, i * n:(i + 1) * n] = np.eye(n)
        blocks.append(p)
    return Dilation(f, Povm(np.stack(blocks), labels=m.labels))


def neumark_reduce(dilation: Dilation, tol=1e-9):
    """``M_i = F^* E_i F``."""
    f = np.asarray(dilation.embed, dtype=complex)
    n = f.shape[1]
    if np.linalg.norm(f.conj().T @ f - np.eye(n), 2) > tol:
        raise InvalidDilation("embedding is not an isometry")
    el = dilation.projective.elements
    if el.shape[1] != f.shape[0]:
        raise InvalidDilation("projective measurement does not act on the embedding's range")
    for e in el:
        if np.linalg.norm(e @ e - e, 2) > tol:
            raise InvalidDilation("an element of the dilation is not a projector")
    red = np.einsum("ai,kab,bj->kij", f.conj(), el, f)
    return Povm(0.5 * (red + red.conj().transpose(0, 2, 1)), labels=dilation.projective.labels)


def indirect_povm(u, s0, e0: Povm, tol=1e-9):
    """Measurement induced on ``H`` by coupling to an ancilla prepared in ``s0``.

    ``u`` acts on ``H (x) H0`` with ``H`` as the first factor.
    """
    u = np.asarray(u, dtype=complex)
    s0 = np.asarray(getattr(s0, "op", s0), dtype=complex)
    d0 = s0.shape[0]
    if u.shape[0] % d0 or u.shape[0] != u.shape[1]:
        raise DimMismatch("unitary size is not a multiple of the ancilla dimension")
    n = u.shape[0] // d0
    if np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]), 2) > tol:
        raise NotUnitary("coupling operator is not unitary")
    if abs(np.trace(s0) - 1) > tol or not linop.is_psd(s0):
        raise BadReference("ancilla state must be a unit-trace positive operator")
    if e0.dim != d0:
        raise DimMismatch("ancilla measurement has the wrong dimension")
    left = np.kron(np.eye(n), s0)
    out = []
    for e in e0.elements:
        ep = u.conj().T @ np.kron(np.eye(n), e) @ u
        out.append(linop.partial_trace(left @ ep, (n, d0), 1))
    out = np.stack(out)
    return Povm(0.5 * (out + out.conj().transpose(0, 2, 1)), labels=e0.labels)


def neumark_coupling(f):
    """Self-inverse unitary on ``H (x) H'`` built from an isometry ``F: H -> H'``.

    ``U (phi (x) psi') = F^* psi' (x) F phi + phi (x) (I - F F^*) psi'``, so a
    reference ``F psi`` is mapped to ``psi (x) F phi``.
    """
    f = np.asarray(f, dtype=complex)
    big, n = f.shape
    swap = np.zeros((n * big, big * n), dtype=complex)
    for i in range(n):
        for a in range(big):
            swap[a * n + i, i * big + a] = 1.0
    w = np.kron(f.conj().T, f) @ swap
    u = w + np.kron(np.eye(n), np.eye(big) - f @ f.conj().T)
    if np.linalg.norm(u.conj().T @ u - np.eye(n * big), 2) > 1e-9:
        raise NotUnitary("constructed coupling is not unitary")
    return u


def coherent_povm(fock_dim, alpha_max=5.0, n_side=80, tail_tol=1e-3):
    """Heterodyne POVM ``|alpha)(alpha| dRe dIm / pi`` on a square grid.

    Raises :class:`GridTooCoarse` when the disk of radius ``alpha_max`` misses
    more than ``tail_tol`` of some Fock level's Husimi mass.
    """
    tail = float(gammaincc(fock_dim, alpha_max**2))
    if tail > tail_tol:
        raise GridTooCoarse(f"alpha_max={alpha_max} leaves tail mass {tail:.2e}")
    pts, area = alpha_grid(alpha_max, n_side)
    pts = pts.ravel()
    v = coherent_matrix(pts, fock_dim)
    return Povm(vectors=v, weights=np.full(len(pts), area / np.pi), labels=list(pts))


def two_mode_moment(s, k, l, anc_dim=None):
    """``Tr[(S (x) |0)(0|) (B^*)^k B^l]`` with ``B = a (x) I + I (x) a0^*``.

    ``B`` is normal, and with the ancilla in vacuum its joint spectral measure
    is the heterodyne distribution, so these moments equal the antinormally
    ordered moments ``Tr(S a^l (a^*)^k)``.
    """
    s = np.asarray(getattr(s, "op", s), dtype=complex)
    n = s.shape[0]
    anc_dim = n if anc_dim is None else anc_dim
    a = annihilation(n)
    a0 = annihilation(anc_dim)
    b = np.kron(a, np.eye(anc_dim)) + np.kron(np.eye(n), a0.conj().T)
    vac = np.zeros((anc_dim, anc_dim))
    vac[0, 0] = 1.0
    rho = np.kron(s, vac)
    op = np.linalg.matrix_power(b.conj().T, k) @ np.linalg.matrix_power(b, l)
    return complex(np.trace(rho @ op))


def povm_moment(m: Povm, s, k, l):
    """``sum_x conj(x)^k x^l Tr(S M_x)`` for a POVM labelled by complex outcomes."""
    x = np.asarray(m.labels, dtype=complex)
    return complex(np.sum(np.conj(x) ** k * x**l * m.probabilities(s)))


def quasifilter(m: Povm, coeffs: Sequence[float]):
    """``D = sum c_i M_i`` for ``c_i`` in ``[0, 1]``."""
    c = np.asarray(coeffs, dtype=float)
    return np.einsum("k,kij->ij", c, m.elements)
