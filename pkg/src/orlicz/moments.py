import numpy as np
from dataclasses import dataclass
from typing import Dict, Optional
from loguru import logger

from src.algebra.tracial import (
    DomainError,
    OrliczError,
    func_calc,
    hermitian_part,
    psd_spectrum,
    singular_profile,
)
from src.davis.certificates import Certificate, identity_row, report_row
from src.davis.decomposition import martingale_davis
from src.martingales.filtration import Martingale
from src.norms.square import square_fn
from src.orlicz.functions import OrliczFunction, complementary

REGIMES = ("2-concave", "2-convex")


def phi_moment(phi: OrliczFunction, x: np.ndarray) -> float:
    """τ[Φ(|x|)] = Σ_i Φ(s_i(x))."""
    return float(np.sum(phi(singular_profile(x))))


def _diagonal_moment(phi: OrliczFunction, x: Martingale) -> float:
    return float(sum(phi_moment(phi, d) for d in x.differences))


@dataclass
class DualityWitness:
    y: np.ndarray
    lhs: float
    rhs: float
    commutator: float

    @property
    def passed(self) -> bool:
        scale = max(abs(self.lhs), abs(self.rhs), 1e-300)
        return abs(self.lhs - self.rhs) <= 1e-5 * scale + 1e-12 and self.commutator <= 1e-9 * max(1.0, scale)


def phi_duality_witness(phi: OrliczFunction, x: np.ndarray, phi_star: Optional[OrliczFunction] = None) -> DualityWitness:
    """y = Φ'(x), for which τ(xy) = τΦ(x) + τΦ*(y)."""
    eigvals, _ = psd_spectrum(x)
    y = hermitian_part(func_calc(x, phi.derivative))
    if not np.all(np.isfinite(y)):
        raise OrliczError(f"{phi.name}: derivative failed on the spectrum of x")
    phi_star = phi_star if phi_star is not None else complementary(phi)
    y_eig, _ = psd_spectrum(y)
    lhs = float(np.real(np.trace(x @ y)))
    rhs = float(np.sum(phi(eigvals)) + np.sum(phi_star(y_eig)))
    commutator = float(np.max(np.abs(x @ y - y @ x), initial=0.0))
    return DualityWitness(y=y, lhs=lhs, rhs=rhs, commutator=commutator)


def _require_sandwich(phi: OrliczFunction):
    p, q = phi.declared_p, phi.declared_q
    if not (1.0 < p <= q < np.inf):
        raise DomainError(f"{phi.name}: needs 1 < p <= q < inf, got p={p}, q={q}")
    if not (phi.certificate.p_convex and phi.certificate.q_concave):
        raise OrliczError(f"{phi.name}: p-convexity or q-concavity certificate failed")


def construction_exponent(phi: OrliczFunction) -> float:
    """Exponent used for the witness decomposition: the declared p clipped to [1, 1.5]."""
    return float(np.clip(phi.declared_p, 1.0, 1.5))


def phi_davis_check(phi: OrliczFunction, x: Martingale) -> Certificate:
    """Φ-moment Davis ratios for a witness decomposition, plus the square-function upper side."""
    _require_sandwich(phi)
    p = construction_exponent(phi)
    x_d, x_c, _ = martingale_davis(x, p, 2.0)

    big_s = phi_moment(phi, square_fn(x).final)
    big_s_row = phi_moment(phi, square_fn(x, side="row").final)
    small_s_c = phi_moment(phi, square_fn(x, conditioned=True).final)
    witness = phi_moment(phi, square_fn(x_c, conditioned=True).final) + _diagonal_moment(phi, x_d)
    diagonal = _diagonal_moment(phi, x)
    final = phi_moment(phi, x.final)

    cert = Certificate(f"phi-davis:{phi.name}")
    cert.rows.append(report_row("phi-davis-decomposition", witness, big_s, p=phi.declared_p, q=phi.declared_q))
    cert.rows.append(report_row("phi-davis-max", big_s, max(diagonal, small_s_c), p=phi.declared_p, q=phi.declared_q))
    cert.rows.append(report_row("phi-bg-upper", final, max(big_s, big_s_row), p=phi.declared_p, q=phi.declared_q))
    return cert


def three_way_split(x: Martingale, p: float):
    """x = x^d + x^c + x^r from the column decomposition of x and of x*, diagonal parts averaged."""
    d1, c, _ = martingale_davis(x, p, 2.0)
    d2, r, _ = martingale_davis(x, p, 2.0, side="row")
    f = x.filtration
    x_d = Martingale(0.5 * (d1.differences + d2.differences), f)
    return x_d, Martingale(0.5 * c.differences, f), Martingale(0.5 * r.differences, f)


def phi_burkholder_check(phi: OrliczFunction, x: Martingale, regime: str) -> Certificate:
    """Two-sided Φ-moment Burkholder ratios in the inf-form (2-concave) or max-form (2-convex)."""
    if regime not in REGIMES:
        raise DomainError(f"Unknown regime '{regime}', expected one of {REGIMES}")
    p_star = min(phi.declared_p, 2.0)
    q_star = max(phi.declared_q, 2.0)
    if regime == "2-concave":
        if not (phi.is_q_concave(2.0) and p_star > 1.0 and phi.is_p_convex(p_star)):
            raise DomainError(f"{phi.name}: not p-convex (1 < p) and 2-concave")
    else:
        if not (phi.is_p_convex(2.0) and np.isfinite(q_star) and phi.is_q_concave(q_star)):
            raise DomainError(f"{phi.name}: not 2-convex and q-concave (q < inf)")

    final = phi_moment(phi, x.final)
    cert = Certificate(f"phi-burkholder:{phi.name}:{regime}")
    if regime == "2-concave":
        x_d, x_c, x_r = three_way_split(x, construction_exponent(phi))
        witness = (phi_moment(phi, square_fn(x_c, conditioned=True).final)
                   + phi_moment(phi, square_fn(x_r, side="row", conditioned=True).final)
                   + _diagonal_moment(phi, x_d))
        cert.rows.append(report_row("phi-burkholder-inf-upper", witness, final, p=p_star, q=2.0))
        cert.rows.append(report_row("phi-burkholder-inf-lower", final, witness, p=p_star, q=2.0))
        deviation = np.max(np.abs(x_d.differences + x_c.differences + x_r.differences - x.differences),
                           initial=0.0)
        if deviation > 1e-8 * max(1.0, np.max(np.abs(x.differences))):
            logger.warning(f"Three-way split off by {deviation:.2e}")
            cert.flags.append("three-way-split-mismatch")
    else:
        best = max(_diagonal_moment(phi, x),
                   phi_moment(phi, square_fn(x, conditioned=True).final),
                   phi_moment(phi, square_fn(x, side="row", conditioned=True).final))
        cert.rows.append(report_row("phi-burkholder-max-upper", best, final, p=2.0, q=q_star))
        cert.rows.append(report_row("phi-burkholder-max-lower", final, best, p=2.0, q=q_star))
    return cert


def quadratic_identity_rows(x: Martingale) -> Certificate:
    """For Φ(t) = t²: τΦ(|x|) = Σ τΦ(|dx_n|) = τΦ(s_c(x)) (orthogonality)."""
    final = float(np.sum(singular_profile(x.final) ** 2))
    diagonal = float(sum(np.sum(singular_profile(d) ** 2) for d in x.differences))
    conditioned = float(np.real(np.trace(square_fn(x, conditioned=True).final_squared)))
    return Certificate("phi-quadratic", [
        identity_row("phi-quadratic-diagonal", final, diagonal, p=2.0, q=2.0),
        identity_row("phi-quadratic-conditioned", final, conditioned, p=2.0, q=2.0),
    ])


def summarize_ratios(cert: Certificate) -> Dict[str, float]:
    return {row.check: row.ratio for row in cert.rows}
