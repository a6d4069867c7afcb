import math
import numpy as np
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Iterable, List, Optional, Sequence

from src.algebra.tracial import (
    DomainError,
    adjoint,
    hermitian_part,
    modulus_squared,
    psd_power,
    psd_root_norm,
    schatten_norm,
)
from src.martingales.filtration import AdaptedSequence, Filtration, cond_expect
from src.norms.square import as_terms, col_l2_norm, cond_col_norm, diag_norm, l1c_norm_upper

if TYPE_CHECKING:
    from src.davis.decomposition import DavisDecomposition

# Multiplicative slack on every asserted constant.
SLACK = 1e-7
PSD_MARGIN = 1e-8
LEPINGLE_CONSTANT = 2.0 * math.sqrt(2.0)
SUPPORT_CUTOFF = 1e-12

NAN = float("nan")


def sigma_cutoff(dim: int, alpha: float) -> float:
    """Relative cutoff on the spectrum of ς² that puts SUPPORT_CUTOFF on the spectrum of w = ς^α.

    Floored at the numerical rank tolerance dim·eps of the ς² eigensolver.
    """
    return max(SUPPORT_CUTOFF ** (2.0 / alpha), dim * float(np.finfo(float).eps))


@dataclass
class InequalityRow:
    """One checked (or reported) inequality.

    kind: "ratio" (lhs <= constant * rhs), "lower" (lhs >= constant * rhs),
    "margin" (lhs >= rhs, with rhs a negative tolerance), "identity"
    (lhs == rhs relatively), "absolute" (|lhs - rhs| <= tol), "deviation"
    (lhs <= tol) or "report" (flag only).
    """
    check: str
    lhs: float
    rhs: float
    constant: float = NAN
    p: float = NAN
    q: float = NAN
    kind: str = "ratio"
    asserted: bool = True
    tol: float = SLACK
    note: str = ""

    @property
    def ratio(self) -> float:
        if self.kind in ("margin", "deviation"):
            return float(self.lhs)
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else math.inf
        return float(self.lhs / self.rhs)

    @property
    def passed(self) -> bool:
        if self.kind == "ratio":
            return self.ratio <= self.constant * (1.0 + self.tol)
        if self.kind == "lower":
            return self.ratio >= self.constant * (1.0 - self.tol)
        if self.kind == "margin":
            return self.lhs >= self.rhs
        if self.kind == "identity":
            return abs(self.lhs - self.rhs) <= self.tol * max(abs(self.lhs), abs(self.rhs), 1e-300)
        if self.kind == "absolute":
            return abs(self.lhs - self.rhs) <= self.tol
        if self.kind == "deviation":
            return self.lhs <= self.tol
        # report rows carry an optional threshold on the ratio
        return not math.isfinite(self.constant) or self.ratio <= self.constant

    def to_dict(self) -> Dict:
        return {
            "check": self.check, "p": self.p, "q": self.q, "lhs": self.lhs, "rhs": self.rhs,
            "constant": self.constant, "ratio": self.ratio, "pass": self.passed,
            "asserted": self.asserted, "kind": self.kind, "note": self.note,
        }


def ratio_row(check: str, lhs: float, rhs: float, constant: float, p: float = NAN, q: float = NAN,
              asserted: bool = True) -> InequalityRow:
    return InequalityRow(check, float(lhs), float(rhs), float(constant), p, q, "ratio", asserted)


def report_row(check: str, lhs: float, rhs: float, p: float = NAN, q: float = NAN,
               threshold: float = NAN, note: str = "") -> InequalityRow:
    return InequalityRow(check, float(lhs), float(rhs), threshold, p, q, "report", False, note=note)


def margin_row(check: str, min_eig: float, scale: float = 1.0, asserted: bool = True,
               p: float = NAN, q: float = NAN) -> InequalityRow:
    return InequalityRow(check, float(min_eig), -PSD_MARGIN * max(1.0, scale), NAN, p, q, "margin", asserted)


def identity_row(check: str, lhs: float, rhs: float, tol: float = 1e-9, p: float = NAN,
                 q: float = NAN, absolute: bool = False, asserted: bool = True) -> InequalityRow:
    kind = "absolute" if absolute else "identity"
    return InequalityRow(check, float(lhs), float(rhs), 1.0, p, q, kind, asserted, tol=tol)


def deviation_row(check: str, deviation: float, tol: float = 1e-8) -> InequalityRow:
    return InequalityRow(check, float(deviation), tol, NAN, kind="deviation", tol=tol)


@dataclass
class Certificate:
    name: str
    rows: List[InequalityRow] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows if row.asserted)

    def failures(self) -> List[InequalityRow]:
        return [row for row in self.rows if row.asserted and not row.passed]

    def max_ratio(self, check: Optional[str] = None) -> float:
        ratios = [row.ratio for row in self.rows if check is None or row.check == check]
        return max(ratios) if ratios else NAN

    def row(self, check: str) -> InequalityRow:
        for row in self.rows:
            if row.check == check:
                return row
        raise KeyError(check)

    def extend(self, other: "Certificate") -> "Certificate":
        self.rows.extend(other.rows)
        self.flags.extend(f for f in other.flags if f not in self.flags)
        return self

    def to_dict(self) -> Dict:
        return {"name": self.name, "passed": self.passed, "flags": list(self.flags),
                "rows": [row.to_dict() for row in self.rows]}


def davis_constant(p: float) -> float:
    """2 (2/p)^(1/2)."""
    return 2.0 * math.sqrt(2.0 / p)


def _implicit_rows(d: "DavisDecomposition") -> List[InequalityRow]:
    """The intermediate bound Σ‖ξ_n w_n⁺‖_2² <= (2/p)‖ξ‖^p and its per-step scalar lemma."""
    xi = as_terms(d.column_xi)
    p, alpha = d.p, d.alpha
    lhs = 0.0
    worst_step = (0.0, 0.0)
    worst_ratio = -math.inf
    cutoff = sigma_cutoff(xi.shape[-1], alpha)
    previous_power = np.zeros_like(xi[0])
    for sig2, term in zip(d.sigma_squares, xi):
        inverse_weight = psd_power(sig2, -alpha / 2.0, cutoff=cutoff)
        lhs += float(np.real(np.trace(inverse_weight @ modulus_squared(term) @ inverse_weight)))
        current_power = psd_power(sig2, p / 2.0, cutoff=cutoff)
        step_lhs = float(np.real(np.trace(psd_power(sig2, (p - 2.0) / 2.0, cutoff=cutoff)
                                          @ hermitian_part(modulus_squared(term)))))
        step_rhs = float(np.real(np.trace(current_power - previous_power)))
        step_ratio = step_lhs / step_rhs if step_rhs > 0 else (0.0 if step_lhs <= 0 else math.inf)
        if step_ratio > worst_ratio:
            worst_ratio, worst_step = step_ratio, (step_lhs, step_rhs)
        previous_power = current_power
    rhs = col_l2_norm(xi, p) ** p
    return [
        ratio_row("l2-implicit", lhs, rhs, 2.0 / p, p=p),
        ratio_row("step-lemma", worst_step[0], worst_step[1], 2.0 / p, p=p),
    ]


def verify_type1(d: "DavisDecomposition", xi: Optional[AdaptedSequence] = None,
                 q_list: Iterable[float] = (2.0, 4.0, math.inf)) -> Certificate:
    """p-side bound 2(2/p)^(1/2), q-side bound 3 on the same decomposition, plus the implicit bounds."""
    if d.variant != "type1":
        raise DomainError(f"verify_type1 needs a type1 decomposition, got {d.variant}")
    _check_source(d, xi)
    source, y, z = d.column_xi, d.column_y, d.column_z
    f = source.filtration
    p = d.p
    cert = Certificate(f"type1-{d.side}")
    lhs = diag_norm(y, p) + cond_col_norm(z, p, f)
    cert.rows.append(ratio_row("type1-p", lhs, col_l2_norm(source, p), davis_constant(p), p=p))
    for q in q_list:
        if q < 2:
            continue
        lhs_q = col_l2_norm(y, q) + col_l2_norm(z, q)
        cert.rows.append(ratio_row("type1-q", lhs_q, col_l2_norm(source, q), 3.0, p=p, q=q))
    cert.rows.extend(_implicit_rows(d))
    return cert


def verify_type2(d: "DavisDecomposition", xi: Optional[AdaptedSequence] = None) -> Certificate:
    """ℓ_1^c witness bound 2(2/p)^(1/2); asserted only inside the theorem's range."""
    if d.variant != "type2":
        raise DomainError(f"verify_type2 needs a type2 decomposition, got {d.variant}")
    _check_source(d, xi)
    source, y, z = d.column_xi, d.column_y, d.column_z
    p = d.p
    cert = Certificate(f"type2-{d.side}")
    witness = l1c_norm_upper(d.witness_left, d.witness_right, p, target=y)
    lhs = witness + cond_col_norm(z, p, source.filtration)
    row = ratio_row("type2-p", lhs, col_l2_norm(source, p), davis_constant(p), p=p,
                    asserted=d.in_theorem_range)
    cert.rows.append(row)
    if not d.in_theorem_range:
        cert.flags.append("outside-theorem-range")
    cert.rows.extend(_implicit_rows(d))
    return cert


def _check_source(d: "DavisDecomposition", xi: Optional[AdaptedSequence]):
    if xi is None:
        return
    if np.max(np.abs(as_terms(xi) - as_terms(d.xi)), initial=0.0) > 1e-12:
        raise DomainError("Decomposition was not built from the supplied sequence")


def predicted_terms(terms: np.ndarray, f: Filtration) -> np.ndarray:
    """(E_{n-1} ξ_n)_n with E_0 = E_1."""
    return np.stack([cond_expect(f, n - 1, t) for n, t in enumerate(terms, start=1)])


def lepingle_ratio(terms: np.ndarray, f: Filtration) -> float:
    rhs = col_l2_norm(terms, 1.0)
    if rhs == 0:
        return 0.0
    return col_l2_norm(predicted_terms(terms, f), 1.0) / rhs


def lepingle_yor_check(xi: AdaptedSequence, side: str = "column") -> Certificate:
    """‖(Σ|E_{n-1}ξ_n|²)^(1/2)‖_1 <= 2√2 ‖(Σ|ξ_n|²)^(1/2)‖_1."""
    if side not in ("column", "row"):
        raise DomainError(f"Unknown side '{side}'")
    terms = xi.terms if side == "column" else adjoint(xi.terms)
    lhs = col_l2_norm(predicted_terms(terms, xi.filtration), 1.0)
    rhs = col_l2_norm(terms, 1.0)
    return Certificate(f"lepingle-{side}", [ratio_row("lepingle", lhs, rhs, LEPINGLE_CONSTANT, p=1.0)])


def row_lemma_check(a: Sequence[np.ndarray], A: np.ndarray, p: float, q: float, r: float) -> Certificate:
    """‖(a_n A)‖_{L_p(ℓ_2^r)} <= max{‖a‖_{L_q(ℓ_2^c)}, ‖a‖_{L_q(ℓ_2^r)}} ‖A‖_r."""
    if not p >= 2:
        raise DomainError(f"Row lemma needs p >= 2, got {p}")
    if abs(1.0 / p - (1.0 / q + 1.0 / r)) > 1e-12:
        raise DomainError(f"Exponents do not satisfy 1/p = 1/q + 1/r: p={p}, q={q}, r={r}")
    terms = as_terms(a)
    A = np.asarray(A, dtype=complex)
    products = terms @ A
    row_square = hermitian_part(np.sum(products @ adjoint(products), axis=0))
    lhs = psd_root_norm(row_square, p)
    rhs = max(col_l2_norm(terms, q), col_l2_norm(terms, q, side="row")) * schatten_norm(A, r)
    return Certificate("row-lemma", [ratio_row("row-lemma", lhs, rhs, 1.0, p=p, q=q)])
