import numpy as np
from dataclasses import dataclass
from typing import Callable, Optional

# Eigenvalues of a "PSD" input down to -PSD_CLAMP * max(1, spectral radius) are treated as zero.
PSD_CLAMP = 1e-10
RANK_TOL = 1e-12


class ToolkitError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(ToolkitError, ValueError):
    """Parameter outside the range an operation is defined on."""


class SpectralError(ToolkitError):
    """Operator is not positive semidefinite within tolerance."""


class AdaptednessError(ToolkitError):
    """Sequence is not adapted (or not a martingale difference sequence)."""


class FactorizationError(ToolkitError):
    """Supplied factorization does not reproduce the sequence."""


class OrliczError(ToolkitError):
    """Orlicz function fails a certificate or a numeric construction."""


@dataclass(frozen=True)
class TracialAlgebra:
    """Full matrix algebra M_D with the standard trace."""
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError(f"Algebra dimension must be >= 1, got {self.dim}")

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)

    def zeros(self) -> np.ndarray:
        return np.zeros((self.dim, self.dim), dtype=complex)

    def trace(self, x: np.ndarray) -> complex:
        return complex(np.trace(self.validate(x)))

    def validate(self, x: np.ndarray) -> np.ndarray:
        """Returns x as a complex D x D array, rejecting foreign shapes."""
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.dim, self.dim):
            raise DomainError(f"Operator of shape {x.shape} is not in M_{self.dim}")
        return x

    def random_ginibre(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        """I.i.d. complex Gaussian entries with E|g_ij|^2 = scale^2."""
        shape = (self.dim, self.dim)
        g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        return (scale / np.sqrt(2.0)) * g

    def random_unitary(self, rng: np.random.Generator) -> np.ndarray:
        """Haar unitary via QR of a Ginibre matrix with phase correction."""
        q, r = np.linalg.qr(self.random_ginibre(rng))
        phases = np.diagonal(r) / np.abs(np.diagonal(r))
        return q * phases


def adjoint(x: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(x, -1, -2))


def hermitian_part(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + adjoint(x))


def modulus_squared(x: np.ndarray) -> np.ndarray:
    """|x|^2 = x* x (works on stacks of operators)."""
    return adjoint(x) @ x


def singular_profile(x: np.ndarray) -> np.ndarray:
    """Singular values of x, non-increasing."""
    x = np.asarray(x, dtype=complex)
    if not np.any(x):
        return np.zeros(x.shape[-1])
    return np.linalg.svd(x, compute_uv=False)


def vector_quasinorm(values: np.ndarray, p: float) -> float:
    """(sum |v_i|^p)^(1/p), or max |v_i| for p = inf."""
    p = check_exponent(p)
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    if v.size == 0 or not np.any(v):
        return 0.0
    if np.isinf(p):
        return float(v.max())
    # Factor out the maximum so small p does not underflow.
    top = v.max()
    return float(top * np.sum((v / top) ** p) ** (1.0 / p))


def schatten_norm(x: np.ndarray, p: float) -> float:
    """Schatten p-(quasi)norm; p = inf gives the operator norm."""
    return vector_quasinorm(singular_profile(x), p)


def psd_root_norm(a: np.ndarray, p: float) -> float:
    """||a^(1/2)||_p for a PSD a, computed from the spectrum of a."""
    eig = np.clip(np.linalg.eigvalsh(hermitian_part(np.asarray(a, dtype=complex))), 0.0, None)
    return vector_quasinorm(np.sqrt(eig), p)


def psd_spectrum(x: np.ndarray, clamp: float = PSD_CLAMP):
    """Eigen-decomposition of a PSD x with tolerance clamping.

    Returns (eigenvalues >= 0, eigenvectors). Raises SpectralError when the
    most negative eigenvalue is below -clamp * max(1, spectral radius).
    """
    h = hermitian_part(np.asarray(x, dtype=complex))
    eigvals, eigvecs = np.linalg.eigh(h)
    radius = float(np.max(np.abs(eigvals))) if eigvals.size else 0.0
    floor = -clamp * max(1.0, radius)
    if eigvals.size and eigvals[0] < floor:
        raise SpectralError(
            f"Operator is not PSD: min eigenvalue {eigvals[0]:.3e} < {floor:.3e} "
            f"(spectral radius {radius:.3e}, {int(np.sum(eigvals < floor))} negative modes)"
        )
    return np.clip(eigvals, 0.0, None), eigvecs


def func_calc(x: np.ndarray, f: Callable[[np.ndarray], np.ndarray], clamp: float = PSD_CLAMP) -> np.ndarray:
    """Applies f to the spectrum of a PSD operator x."""
    eigvals, eigvecs = psd_spectrum(x, clamp)
    values = np.asarray(f(eigvals), dtype=float)
    return (eigvecs * values) @ adjoint(eigvecs)


def psd_power(x: np.ndarray, exponent: float, cutoff: float = 0.0) -> np.ndarray:
    """x^exponent on the support of x.

    Eigenvalues at or below cutoff * max eigenvalue are treated as zero, so
    negative exponents act as powers of the pseudo-inverse.
    """
    eigvals, eigvecs = psd_spectrum(x)
    top = eigvals.max() if eigvals.size else 0.0
    support = eigvals > max(cutoff * top, 0.0)
    values = np.zeros_like(eigvals)
    values[support] = eigvals[support] ** exponent
    return (eigvecs * values) @ adjoint(eigvecs)


def pseudo_inverse(x: np.ndarray, rank_tol: Optional[float] = None) -> np.ndarray:
    """Moore-Penrose inverse of a PSD operator.

    Eigenvalues above rank_tol are inverted, the rest are zeroed. The default
    threshold is RANK_TOL times the largest eigenvalue.
    """
    eigvals, eigvecs = psd_spectrum(x)
    if rank_tol is None:
        rank_tol = RANK_TOL * (eigvals.max() if eigvals.size else 0.0)
    support = eigvals > rank_tol
    values = np.zeros_like(eigvals)
    values[support] = 1.0 / eigvals[support]
    return (eigvecs * values) @ adjoint(eigvecs)


def support_projection(x: np.ndarray, rank_tol: Optional[float] = None) -> np.ndarray:
    """Projection onto the range of a PSD operator."""
    return x @ pseudo_inverse(x, rank_tol)


def min_eigenvalue(x: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian part of x."""
    return float(np.linalg.eigvalsh(hermitian_part(np.asarray(x, dtype=complex)))[0])


def conjugate_exponent(p: float) -> float:
    if p == 1:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


def check_exponent(p: float) -> float:
    p = float(p)
    if not p > 0:
        raise DomainError(f"Exponent p must be positive, got {p}")
    return p
