import numpy as np
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Union

from src.algebra.tracial import (
    DomainError,
    FactorizationError,
    check_exponent,
    adjoint,
    hermitian_part,
    modulus_squared,
    psd_power,
    psd_root_norm,
    schatten_norm,
    singular_profile,
    vector_quasinorm,
)
from src.martingales.filtration import AdaptedSequence, Filtration, Martingale, cond_expect
from src.norms.spaces import SymmetricSpace, profile_norm

SequenceLike = Union[AdaptedSequence, Martingale, np.ndarray, Sequence[np.ndarray]]

SIDES = ("column", "row")


def as_terms(seq: SequenceLike) -> np.ndarray:
    """Stack of terms (N, D, D) for any of the sequence types."""
    if isinstance(seq, AdaptedSequence):
        return seq.terms
    if isinstance(seq, Martingale):
        return seq.differences
    terms = np.asarray(seq, dtype=complex)
    if terms.ndim != 3 or terms.shape[1] != terms.shape[2]:
        raise DomainError(f"Expected a stack of square operators, got shape {terms.shape}")
    return terms


def _filtration_of(seq: SequenceLike, f: Optional[Filtration]) -> Filtration:
    if f is not None:
        return f
    if isinstance(seq, (AdaptedSequence, Martingale)):
        return seq.filtration
    raise DomainError("A filtration is required to condition a raw operator sequence")


def _sided(terms: np.ndarray, side: str) -> np.ndarray:
    if side not in SIDES:
        raise DomainError(f"Unknown side '{side}', expected one of {SIDES}")
    return terms if side == "column" else adjoint(terms)


@dataclass
class SquareFunctionReport:
    """Running square functions S_{c,n} (or s_{c,n}) of a sequence."""
    running: np.ndarray
    squares: np.ndarray
    side: str
    conditioned: bool

    @property
    def final(self) -> np.ndarray:
        return self.running[-1]

    @property
    def final_squared(self) -> np.ndarray:
        return self.squares[-1]

    def monotonicity_margin(self) -> float:
        """Smallest eigenvalue over n of S_n^2 - S_{n-1}^2 (>= 0 up to rounding)."""
        margins = [0.0]
        for prev, cur in zip(self.squares[:-1], self.squares[1:]):
            margins.append(float(np.linalg.eigvalsh(hermitian_part(cur - prev))[0]))
        return min(margins)


def _conditioned_increments(seq: SequenceLike, side: str, filtration: Optional[Filtration] = None) -> np.ndarray:
    """E_{k-1}|a_k|² for every k (E_0 = E_1)."""
    f = _filtration_of(seq, filtration)
    increments = hermitian_part(modulus_squared(_sided(as_terms(seq), side)))
    return np.stack([hermitian_part(cond_expect(f, k - 1, inc)) for k, inc in enumerate(increments, start=1)])


def square_fn(seq: SequenceLike, side: str = "column", conditioned: bool = False,
              filtration: Optional[Filtration] = None) -> SquareFunctionReport:
    """Column (or row) square function, conditioned with E_{k-1} when asked (E_0 = E_1)."""
    if conditioned:
        increments = _conditioned_increments(seq, side, filtration)
    else:
        increments = hermitian_part(modulus_squared(_sided(as_terms(seq), side)))
    squares = np.cumsum(increments, axis=0)
    running = np.stack([psd_power(s, 0.5) for s in squares])
    return SquareFunctionReport(running=running, squares=squares, side=side, conditioned=conditioned)


def _sum_of_squares(terms: np.ndarray, side: str) -> np.ndarray:
    return hermitian_part(modulus_squared(_sided(terms, side)).sum(axis=0))


def col_l2_norm(seq: SequenceLike, p: float, side: str = "column") -> float:
    """‖(Σ|a_n|²)^(1/2)‖_p; side="row" uses the adjoints."""
    check_exponent(p)
    terms = as_terms(seq)
    if terms.shape[0] == 0:
        return 0.0
    return psd_root_norm(_sum_of_squares(terms, side), p)


def cond_col_norm(seq: SequenceLike, p: float, filtration: Optional[Filtration] = None,
                  side: str = "column") -> float:
    """‖(Σ E_{n-1}|a_n|²)^(1/2)‖_p with E_0 = E_1.

    For p = inf this is the sup over partial sums.
    """
    check_exponent(p)
    terms = as_terms(seq)
    if terms.shape[0] == 0:
        return 0.0
    report = square_fn(seq, side=side, conditioned=True, filtration=filtration)
    if np.isinf(p):
        return max(psd_root_norm(s, np.inf) for s in report.squares)
    return psd_root_norm(report.final_squared, p)


def diag_norm(seq: SequenceLike, p: float) -> float:
    """(Σ_n ‖a_n‖_p^p)^(1/p), the h_p^d (quasi)norm; p = inf gives max ‖a_n‖_inf."""
    check_exponent(p)
    terms = as_terms(seq)
    return vector_quasinorm([schatten_norm(t, p) for t in terms], p)


def l1c_norm_upper(betas: SequenceLike, alphas: SequenceLike, p: float,
                   target: Optional[SequenceLike] = None, tol: float = 1e-8) -> float:
    """Single-factorization witness value for ‖ξ‖_{L_p(M;ℓ_1^c)} with ξ_n = β_n α_n.

    Returns (Σ‖β_n‖_2²)^(1/2) · ‖(Σ|α_n|²)^(1/2)‖_q where 1/p = 1/2 + 1/q.
    """
    p = check_exponent(p)
    if not p < 2:
        raise DomainError(f"ℓ_1^c witness needs 0 < p < 2, got {p}")
    b, a = as_terms(betas), as_terms(alphas)
    if b.shape != a.shape:
        raise DomainError(f"Factor stacks differ in shape: {b.shape} vs {a.shape}")
    if target is not None:
        mismatch = max((schatten_norm(d, np.inf) for d in b @ a - as_terms(target)), default=0.0)
        if mismatch > tol:
            raise FactorizationError(f"Factorization does not reproduce the sequence (operator-norm deviation {mismatch:.3e})")
    if not np.any(b) or not np.any(a):
        return 0.0
    q = 2.0 * p / (2.0 - p)
    beta_part = np.sqrt(np.sum(np.abs(b) ** 2))
    return float(beta_part * col_l2_norm(a, q))


HARDY_KEYS = ("H_c", "H_r", "h_c", "h_r", "h_d")


def _root_profile(squared: np.ndarray) -> np.ndarray:
    """Singular values of squared^(1/2), read off the spectrum of squared."""
    return np.sqrt(np.clip(np.linalg.eigvalsh(hermitian_part(squared)), 0.0, None))


def hardy_norms(x: Martingale, space: SymmetricSpace, keys: Sequence[str] = HARDY_KEYS) -> Dict[str, float]:
    """Hardy norms of x in a concrete symmetric space.

    Keys: H_c, H_r (square functions), h_c, h_r (conditioned), h_d (diagonal,
    the norm of ⊕_n dx_n). Only the requested keys are computed.
    """
    terms = as_terms(x)
    profiles = {
        "H_c": lambda: _root_profile(_sum_of_squares(terms, "column")),
        "H_r": lambda: _root_profile(_sum_of_squares(terms, "row")),
        "h_c": lambda: _root_profile(_conditioned_increments(x, "column").sum(axis=0)),
        "h_r": lambda: _root_profile(_conditioned_increments(x, "row").sum(axis=0)),
        "h_d": lambda: np.concatenate([singular_profile(t) for t in terms]),
    }
    unknown = [key for key in keys if key not in profiles]
    if unknown:
        raise DomainError(f"Unknown Hardy norms {unknown}, expected some of {HARDY_KEYS}")
    return {key: profile_norm(profiles[key](), space) for key in keys}
