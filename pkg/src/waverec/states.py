"""Wave-pattern construction: amplitudes on grids or in a Fock basis,
coherent and displaced-thermal states, Gram matrices, the involutive Fourier
transform and quadrature uncertainty products.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

from .errors import (
    BasisMismatch,
    NegativeWeight,
    NonUniformGrid,
    Overflow,
    TruncationTooSmall,
    ZeroAmplitude,
)

DEFAULT_FOCK_DIM = 64
TRUNCATION_TOL = 1e-9


@dataclass(frozen=True)
class Fock:
    dim: int

    @property
    def size(self):
        return self.dim

    @property
    def weight(self):
        return 1.0


@dataclass(frozen=True, eq=False)
class Grid:
    points: np.ndarray
    step: float

    @property
    def size(self):
        return len(self.points)

    @property
    def weight(self):
        return self.step

    def __eq__(self, other):
        return (isinstance(other, Grid) and len(self.points) == len(other.points)
                and np.allclose(self.points, other.points, rtol=0, atol=1e-12 * max(1.0, abs(self.step))))

    __hash__ = None


def uniform_grid(half_width, n_points):
    """Symmetric uniform grid on ``[-half_width, half_width]``."""
    pts = np.linspace(-half_width, half_width, n_points)
    return Grid(pts, float(pts[1] - pts[0]))


@dataclass(frozen=True)
class Amplitude:
    """Complex vector together with the basis it is expressed in.

    On a grid the coefficients are samples ``phi(q_k)`` and the scalar
    product carries the quadrature weight ``step``.
    """

    coeffs: np.ndarray
    basis: Fock | Grid = field(default=None)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).ravel()
        object.__setattr__(self, "coeffs", c)
        if self.basis is None:
            object.__setattr__(self, "basis", Fock(len(c)))
        if self.basis.size != len(c):
            raise BasisMismatch(f"{len(c)} coefficients for basis of size {self.basis.size}")

    def inner(self, other: "Amplitude"):
        """Scalar product ``(self|other)``, antilinear in ``self``."""
        if self.basis != other.basis:
            raise BasisMismatch("amplitudes live in different bases")
        return complex(np.vdot(self.coeffs, other.coeffs) * self.basis.weight)

    @property
    def intensity(self):
        return float(np.real(self.inner(self)))

    def vector(self):
        """Coefficients scaled so that the Euclidean product equals ``inner``."""
        return self.coeffs * np.sqrt(self.basis.weight)

    def __add__(self, other):
        if self.basis != other.basis:
            raise BasisMismatch("amplitudes live in different bases")
        return Amplitude(self.coeffs + other.coeffs, self.basis)

    def __mul__(self, c):
        return Amplitude(self.coeffs * c, self.basis)

    __rmul__ = __mul__


@dataclass(frozen=True)
class DensityOperator:
    op: np.ndarray
    basis: Fock | Grid = None

    def __post_init__(self):
        op = np.asarray(self.op, dtype=complex)
        object.__setattr__(self, "op", op)
        if self.basis is None:
            object.__setattr__(self, "basis", Fock(op.shape[0]))

    @property
    def trace(self):
        return float(np.real(np.trace(self.op)))


def coherent_coeffs(alpha, fock_dim):
    """Fock coefficients ``exp(-|a|^2/2) a^n / sqrt(n!)`` by stable recursion."""
    n = np.arange(1, fock_dim)
    c = np.empty(fock_dim, dtype=complex)
    c[0] = np.exp(-0.5 * abs(alpha) ** 2)
    if fock_dim > 1:
        c[1:] = c[0] * np.cumprod(alpha / np.sqrt(n))
    return c


def coherent_vector(alpha, fock_dim=DEFAULT_FOCK_DIM, check=True):
    """Coherent amplitude ``|alpha)`` truncated to ``fock_dim`` levels.

    Raises :class:`Overflow` if the discarded Poisson tail exceeds 1e-9
    (disable with ``check=False``, e.g. for quadrature grids).
    """
    if fock_dim < 1:
        raise ValueError("fock_dim must be positive")
    c = coherent_coeffs(complex(alpha), int(fock_dim))
    if check:
        loss = 1.0 - float(np.sum(np.abs(c) ** 2))
        if loss > TRUNCATION_TOL:
            raise Overflow(f"|alpha|^2={abs(alpha)**2:.3g} loses {loss:.2e} at fock_dim={fock_dim}")
    return Amplitude(c, Fock(int(fock_dim)))


def coherent_overlap(alpha, alpha_prime):
    """Closed-form ``(alpha|alpha')`` for multimode coherent amplitudes."""
    a = np.atleast_1d(np.asarray(alpha, dtype=complex))
    b = np.atleast_1d(np.asarray(alpha_prime, dtype=complex))
    if a.shape != b.shape:
        raise BasisMismatch("mode counts differ")
    return complex(np.exp(-0.5 * np.sum(np.abs(b) ** 2) + np.sum(a.conj() * b) - 0.5 * np.sum(np.abs(a) ** 2)))


def gram_matrix(amps: Sequence[Amplitude]):
    """Correlation matrix ``sigma_ik = (psi_i|psi_k)``."""
    basis = amps[0].basis
    for a in amps[1:]:
        if a.basis != basis:
            raise BasisMismatch("amplitudes live in different bases")
    psi = np.column_stack([a.coeffs for a in amps])
    g = psi.conj().T @ psi * basis.weight
    return 0.5 * (g + g.conj().T)


def synthesis_matrix(amps: Sequence[Amplitude]):
    """Columns are the amplitudes in an orthonormal coordinate frame."""
    return np.column_stack([a.vector() for a in amps])


def mixture_density(amps: Sequence[Amplitude], weights):
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise NegativeWeight("mixture weights must be nonnegative")
    if len(w) != len(amps):
        raise BasisMismatch("one weight per amplitude is required")
    psi = synthesis_matrix(amps)
    if any(a.basis != amps[0].basis for a in amps):
        raise BasisMismatch("amplitudes live in different bases")
    return DensityOperator((psi * w) @ psi.conj().T, amps[0].basis)


def annihilation(dim):
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


def number_operator(dim):
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def displacement(alpha, dim):
    a = annihilation(dim)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def thermal_populations(nbar, dim):
    n = np.arange(dim)
    if nbar == 0:
        return (n == 0).astype(float)
    return (nbar / (1 + nbar)) ** n / (1 + nbar)


def _working_dim(theta, nbar, fock_dim):
    extra = 30 + int(np.ceil(abs(theta) ** 2 + 8 * abs(theta)))
    if nbar > 0:
        q = nbar / (1.0 + nbar)
        extra += int(np.ceil(np.log(1e-17) / np.log(q)))
    return fock_dim + extra


def thermal_coherent_density(theta, nbar, fock_dim=DEFAULT_FOCK_DIM, check=True):
    """Displaced thermal state with mean amplitude ``theta`` and ``nbar`` noise quanta.

    Built exactly in an enlarged Fock space and then cut to ``fock_dim``.
    Raises :class:`TruncationTooSmall` if more than 1e-9 of the trace is lost.
    """
    if nbar < 0:
        raise ValueError("nbar must be nonnegative")
    theta = complex(theta)
    if nbar == 0:
        v = coherent_vector(theta, fock_dim, check=check).coeffs
        return DensityOperator(np.outer(v, v.conj()), Fock(fock_dim))
    big = _working_dim(theta, nbar, fock_dim)
    d = displacement(theta, big)
    p = thermal_populations(nbar, big)
    s = (d * p) @ d.conj().T
    s = s[:fock_dim, :fock_dim]
    s = 0.5 * (s + s.conj().T)
    if check:
        loss = 1.0 - float(np.real(np.trace(s)))
        if loss > TRUNCATION_TOL:
            raise TruncationTooSmall(f"trace loss {loss:.2e} at fock_dim={fock_dim}")
    return DensityOperator(s, Fock(fock_dim))


def thermal_coherent_batch(thetas, nbar, fock_dim=DEFAULT_FOCK_DIM):
    """Stack of displaced thermal states, one per amplitude in ``thetas``.

    Same truncation scheme as :func:`thermal_coherent_density` (no loss
    check), but the generator ``a^* - a`` is diagonalised once in a working
    space large enough for every amplitude, and each displacement is
    ``D(r e^{j phi}) = U_phi D(r) U_phi^*`` with ``U_phi = diag(e^{j n phi})``.
    """
    thetas = np.asarray(thetas, dtype=complex).ravel()
    if nbar < 0:
        raise ValueError("nbar must be nonnegative")
    big = max(_working_dim(t, nbar, fock_dim) for t in thetas) if thetas.size else fock_dim
    a = annihilation(big)
    lam, v = np.linalg.eigh(1j * (a.conj().T - a))
    p = thermal_populations(nbar, big)
    rho = (v.conj().T * p) @ v
    n = np.arange(fock_dim)
    out = np.empty((thetas.size, fock_dim, fock_dim), dtype=complex)
    for k, t in enumerate(thetas):
        e = np.exp(-1j * abs(t) * lam)
        left = np.exp(1j * n * np.angle(t))[:, None] * v[:fock_dim] * e
        s = left @ rho @ left.conj().T
        out[k] = 0.5 * (s + s.conj().T)
    return out


def _check_uniform(grid: Grid):
    d = np.diff(grid.points)
    if len(d) == 0 or np.max(np.abs(d - grid.step)) > 1e-9 * abs(grid.step):
        raise NonUniformGrid("grid spacing is not uniform")


def fourier_involution(phi: Amplitude):
    """``phi~(p) = int phi(q)^* exp(2 pi j p q) dq`` on the reciprocal grid.

    The reciprocal grid has step ``1/(N dq)`` and the same symmetric layout,
    which makes the discrete transform an exact involution.
    """
    if not isinstance(phi.basis, Grid):
        raise NonUniformGrid("fourier_involution needs a grid amplitude")
    grid = phi.basis
    _check_uniform(grid)
    n = grid.size
    dq = grid.step
    dp = 1.0 / (n * dq)
    c = 0.5 * (n - 1)
    # Offsets of a generic grid from the symmetric layout enter as phases.
    q0 = grid.points[0] + c * dq
    k = np.arange(n)
    tw = np.exp(-2j * np.pi * c * k / n)
    core = n * np.fft.ifft(phi.coeffs.conj() * tw)
    p = (k - c) * dp
    out = dq * core * tw * np.exp(2j * np.pi * c * c / n) * np.exp(2j * np.pi * p * q0)
    return Amplitude(out, Grid(p, dp))


def gaussian_amplitude(sigma_q=1.0, q0=0.0, p0=0.0, n_points=2048, half_width=None):
    """Minimum-uncertainty Gaussian with ``|phi|^2`` of variance ``sigma_q^2``."""
    half_width = 8.0 * sigma_q if half_width is None else half_width
    grid = uniform_grid(half_width + abs(q0), n_points)
    q = grid.points
    phi = (2 * np.pi * sigma_q**2) ** -0.25 * np.exp(-((q - q0) ** 2) / (4 * sigma_q**2) + 2j * np.pi * p0 * q)
    return Amplitude(phi, grid)


def _spread(x, density, step):
    mass = np.sum(density) * step
    mean = np.sum(x * density) * step / mass
    var = np.sum((x - mean) ** 2 * density) * step / mass
    return float(np.sqrt(max(var, 0.0)))


def uncertainty_product(phi: Amplitude):
    """Return ``(sigma_q, sigma_p)`` for a grid amplitude."""
    if not isinstance(phi.basis, Grid):
        raise NonUniformGrid("uncertainty_product needs a grid amplitude")
    dens = np.abs(phi.coeffs) ** 2
    if np.sum(dens) == 0:
        raise ZeroAmplitude("amplitude is identically zero")
    sq = _spread(phi.basis.points, dens, phi.basis.step)
    tilde = fourier_involution(phi)
    sp = _spread(tilde.basis.points, np.abs(tilde.coeffs) ** 2, tilde.basis.step)
    return sq, sp


def coherent_matrix(alphas, fock_dim):
    """Columns ``|alpha_k)`` (untruncated-normalised coefficients)."""
    alphas = np.asarray(alphas, dtype=complex).ravel()
    n = np.arange(fock_dim)
    # log-magnitude form keeps large |alpha| finite
    with np.errstate(divide="ignore", invalid="ignore"):
        logabs = n[:, None] * np.log(np.abs(alphas)[None, :]) - 0.5 * gammaln(n + 1)[:, None] - 0.5 * np.abs(alphas)[None, :] ** 2
    logabs[0, :] = -0.5 * np.abs(alphas) ** 2
    phase = np.exp(1j * n[:, None] * np.angle(alphas)[None, :])
    return np.exp(logabs) * phase


def husimi_density(s, alphas):
    """``k(alpha) = (alpha|S|alpha)`` evaluated at each point of ``alphas``."""
    op = s.op if isinstance(s, DensityOperator) else np.asarray(s, dtype=complex)
    alphas = np.asarray(alphas, dtype=complex)
    v = coherent_matrix(alphas.ravel(), op.shape[0])
    k = np.real(np.einsum("ik,ij,jk->k", v.conj(), op, v))
    return k.reshape(alphas.shape)


def alpha_grid(alpha_max, n_side):
    """Square grid of complex points and its cell area (before the 1/pi)."""
    x = np.linspace(-alpha_max, alpha_max, n_side)
    dx = x[1] - x[0]
    re, im = np.meshgrid(x, x, indexing="ij")
    return re + 1j * im, dx * dx
