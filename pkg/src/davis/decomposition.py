import numpy as np
from dataclasses import dataclass
from typing import Optional, Tuple, Union
from loguru import logger

from src.algebra.tracial import DomainError, adjoint, hermitian_part, min_eigenvalue, modulus_squared, psd_power
from src.davis.certificates import (
    Certificate,
    InequalityRow,
    deviation_row,
    margin_row,
    ratio_row,
    report_row,
    sigma_cutoff,
)
from src.martingales.filtration import AdaptedSequence, Filtration, Martingale, cond_expect
from src.norms.square import col_l2_norm, cond_col_norm, diag_norm

MARTINGALE_CONSTANT = 2.0 ** 2.5
# What the previsible argument actually yields: 2(|z|² + |E z|²) <= 4 S².
PREVISIBLE_CONSTANT = 4.0
PREVISIBLE_STATED = 2.0


@dataclass
class DavisDecomposition:
    """ξ = y + z with weights w_n = ς_n^α, α = 1 - p/2.

    The column_* fields hold the decomposition of the sequence actually
    decomposed (ξ for side="column", ξ* for side="row"); y and z are mapped
    back to the side of ξ.
    """
    xi: AdaptedSequence
    y: AdaptedSequence
    z: AdaptedSequence
    column_xi: AdaptedSequence
    column_y: AdaptedSequence
    column_z: AdaptedSequence
    weights: np.ndarray
    sigma_squares: np.ndarray
    variant: str
    p: float
    alpha: float
    side: str = "column"
    witness_left: Optional[np.ndarray] = None
    witness_right: Optional[np.ndarray] = None
    in_theorem_range: bool = True

    def reconstruction_error(self) -> float:
        return float(np.max(np.abs(self.y.terms + self.z.terms - self.xi.terms), initial=0.0))

    def weight_monotonicity_margin(self) -> float:
        """min_n of the smallest eigenvalue of w_n - w_{n-1} (w_0 = 0)."""
        previous = np.zeros_like(self.weights[0])
        margins = []
        for w in self.weights:
            margins.append(min_eigenvalue(w - previous))
            previous = w
        return min(margins)


def _as_adapted(xi: Union[AdaptedSequence, Martingale]) -> AdaptedSequence:
    return xi.as_adapted() if isinstance(xi, Martingale) else xi


def _decompose(xi: Union[AdaptedSequence, Martingale], p: float, variant: str, side: str) -> DavisDecomposition:
    if side not in ("column", "row"):
        raise DomainError(f"Unknown side '{side}'")
    xi = _as_adapted(xi)
    f = xi.filtration
    terms = xi.terms if side == "column" else adjoint(xi.terms)
    alpha = 1.0 - p / 2.0
    # type1 transfers with w_n, type2 with W_n = w_n²
    transfer = alpha / 2.0 if variant == "type1" else alpha

    sigma_squares = np.cumsum(hermitian_part(modulus_squared(terms)), axis=0)
    cutoff = sigma_cutoff(terms.shape[-1], alpha)
    weights = np.stack([psd_power(s, alpha / 2.0, cutoff=cutoff) for s in sigma_squares])
    ys, zs, lefts, rights = [], [], [], []
    previous = np.zeros_like(terms[0])
    for n, (term, sig2) in enumerate(zip(terms, sigma_squares), start=1):
        current = psd_power(sig2, transfer, cutoff=cutoff)
        inverse = psd_power(sig2, -transfer, cutoff=cutoff)
        lead = term @ inverse
        increment = current - previous
        # snap to M_n; exact in arithmetic, removes rounding drift
        ys.append(cond_expect(f, n, lead @ increment))
        zs.append(cond_expect(f, n, lead @ previous))
        if variant == "type2":
            root = psd_power(increment, 0.5)
            lefts.append(lead @ root)
            rights.append(root)
        previous = current

    column_xi = AdaptedSequence(terms, f)
    column_y = AdaptedSequence(np.stack(ys), f)
    column_z = AdaptedSequence(np.stack(zs), f)
    if side == "column":
        y, z = column_y, column_z
    else:
        y, z = column_y.adjoint(), column_z.adjoint()
    decomposition = DavisDecomposition(
        xi=xi, y=y, z=z, column_xi=column_xi, column_y=column_y, column_z=column_z,
        weights=weights, sigma_squares=sigma_squares, variant=variant, p=p, alpha=alpha, side=side,
        witness_left=np.stack(lefts) if lefts else None,
        witness_right=np.stack(rights) if rights else None,
        in_theorem_range=(variant == "type1" or p < 2.0 / 3.0),
    )
    logger.debug(f"{variant} decomposition p={p} side={side}: reconstruction error "
                 f"{decomposition.reconstruction_error():.2e}")
    return decomposition


def davis_type1(xi: Union[AdaptedSequence, Martingale], p: float, side: str = "column") -> DavisDecomposition:
    """y_n = ξ_n w_n⁺(w_n - w_{n-1}), z_n = ξ_n w_n⁺ w_{n-1}, for 2/3 <= p < 2."""
    if not (2.0 / 3.0 <= p < 2.0):
        raise DomainError(f"Type 1 decomposition needs 2/3 <= p < 2, got {p}")
    return _decompose(xi, p, "type1", side)


def davis_type2(xi: Union[AdaptedSequence, Martingale], p: float, side: str = "column") -> DavisDecomposition:
    """Squared-weight transfer with the ℓ_1^c witness; defined on 0 < p < 2."""
    if not (0.0 < p < 2.0):
        raise DomainError(f"Type 2 decomposition needs 0 < p < 2, got {p}")
    return _decompose(xi, p, "type2", side)


def classical_davis(values: np.ndarray, p: float, variant: str = "type1") -> Tuple[np.ndarray, np.ndarray]:
    """Scalar decomposition run independently on each column of (N, K) values."""
    values = np.asarray(values, dtype=complex)
    alpha = 1.0 - p / 2.0
    transfer = alpha / 2.0 if variant == "type1" else alpha
    sigma_squares = np.cumsum(np.abs(values) ** 2, axis=0)
    cutoff = sigma_cutoff(values.shape[1], alpha)
    ys, zs = [], []
    previous = np.zeros(values.shape[1])
    for value, sig2 in zip(values, sigma_squares):
        support = sig2 > cutoff * sig2.max()
        current = np.where(support, sig2, 1.0) ** transfer * support
        inverse = np.where(support, sig2, 1.0) ** -transfer * support
        ys.append(value * inverse * (current - previous))
        zs.append(value * inverse * previous)
        previous = current
    return np.stack(ys), np.stack(zs)


def classical_cross_check(d: DavisDecomposition, tol: float = 1e-10) -> InequalityRow:
    """Deviation of a decomposition on a partition filtration from the per-atom scalar computation."""
    f = d.xi.filtration
    if not f.is_commutative:
        raise DomainError(f"Per-atom cross-check needs a partition filtration, got {f.describe()}")
    terms = d.column_xi.terms
    ys, zs = classical_davis(np.diagonal(terms, axis1=1, axis2=2), d.p, d.variant)
    deviation = 0.0
    for computed, scalar in ((d.column_y.terms, ys), (d.column_z.terms, zs)):
        off_diagonal = computed - np.stack([np.diag(np.diagonal(t)) for t in computed])
        deviation = max(deviation,
                        float(np.max(np.abs(np.diagonal(computed, axis1=1, axis2=2) - scalar), initial=0.0)),
                        float(np.max(np.abs(off_diagonal), initial=0.0)))
    scale = max(1.0, float(np.max(np.abs(terms), initial=0.0)))
    return deviation_row(f"{d.variant}-classical", deviation, tol=tol * scale)


def _center(f: Filtration, terms: np.ndarray) -> Martingale:
    """Centers terms for n >= 2; the first term is kept as is (E_0 = E_1)."""
    centered = [terms[0]] + [t - cond_expect(f, n - 1, t) for n, t in enumerate(terms[1:], start=2)]
    return Martingale(np.stack(centered), f)


def _martingale_parts(x: Martingale, d: DavisDecomposition) -> Tuple[Martingale, Martingale]:
    f = x.filtration
    x_d, x_c = _center(f, d.y.terms), _center(f, d.z.terms)
    return x_d, x_c


def _reconstruction_row(x: Martingale, x_d: Martingale, x_c: Martingale):
    deviation = np.max(np.abs(x_d.differences + x_c.differences - x.differences), initial=0.0)
    return deviation_row("davis-reconstruction", deviation, tol=1e-8 * max(1.0, np.max(np.abs(x.differences))))


def martingale_davis(x: Martingale, p: float = 1.0, q: float = 2.0,
                     side: str = "column") -> Tuple[Martingale, Martingale, Certificate]:
    """x = x^d + x^c with ‖x^c‖_{h_p^c} + ‖x^d‖_{h_p^d} <= 2^(5/2) ‖x‖_{H_p^c}.

    The q-side ratio is reported without a constant.
    """
    if not (1.0 <= p < 2.0 <= q < np.inf):
        raise DomainError(f"Martingale decomposition needs 1 <= p < 2 <= q < inf, got p={p}, q={q}")
    if side == "row":
        x_d, x_c, cert = martingale_davis(x.adjoint(), p, q)
        cert.name = "martingale-davis-row"
        return x_d.adjoint(), x_c.adjoint(), cert
    if side != "column":
        raise DomainError(f"Unknown side '{side}'")

    d = davis_type1(x.as_adapted(), p)
    x_d, x_c = _martingale_parts(x, d)
    cert = Certificate("martingale-davis")
    lhs = cond_col_norm(x_c, p) + diag_norm(x_d, p)
    cert.rows.append(ratio_row("davis-martingale-p", lhs, col_l2_norm(x, p), MARTINGALE_CONSTANT, p=p, q=q))
    lhs_q = cond_col_norm(x_c, q) + diag_norm(x_d, q)
    cert.rows.append(report_row("davis-martingale-q", lhs_q, col_l2_norm(x, q), p=p, q=q))
    cert.rows.append(_reconstruction_row(x, x_d, x_c))
    return x_d, x_c, cert


def previsible_davis(x: Martingale) -> Tuple[Martingale, Martingale, Certificate]:
    """p = 1 squared-weight decomposition, W_n = S_{c,n}, with previsible control of dx^c."""
    d = davis_type2(x.as_adapted(), 1.0)
    x_d, x_c = _martingale_parts(x, d)
    cert = Certificate("previsible-davis")
    lhs = cond_col_norm(x_c, 1.0) + diag_norm(x_d, 1.0)
    cert.rows.append(ratio_row("previsible-h1", lhs, col_l2_norm(x, 1.0), MARTINGALE_CONSTANT, p=1.0))

    scale = float(np.max(np.abs(d.sigma_squares[-1]), initial=0.0))
    previous = np.zeros_like(d.sigma_squares[0])
    margins = {PREVISIBLE_CONSTANT: np.inf, PREVISIBLE_STATED: np.inf}
    for sig2, diff in zip(d.sigma_squares, x_c.differences):
        square = modulus_squared(diff)
        for constant in margins:
            margins[constant] = min(margins[constant], min_eigenvalue(constant * previous - square))
        previous = sig2
    cert.rows.append(margin_row("previsible-margin", margins[PREVISIBLE_CONSTANT], scale, p=1.0))
    stated = margin_row("previsible-margin-2", margins[PREVISIBLE_STATED], scale, asserted=False, p=1.0)
    cert.rows.append(stated)
    if not stated.passed:
        cert.flags.append("stated-previsible-constant-exceeded")
    cert.rows.append(_reconstruction_row(x, x_d, x_c))
    return x_d, x_c, cert
