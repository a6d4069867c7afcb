"""Orlicz functions on [0, inf) with grid-level certificates."""
import math
import numpy as np
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple
from loguru import logger
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize_scalar

from src.algebra.tracial import DomainError, OrliczError, conjugate_exponent

GRID_POINTS = 400
GRID_RANGE = (1e-6, 1e6)
CERT_TOL = 1e-9
# Complementary functions bracket the maximizer by doubling up to this bound.
BRACKET_CAP = 1e150
# Pointwise Φ* evaluations kept per complementary function.
POINT_CACHE_SIZE = 4096


def standard_grid(points: int = GRID_POINTS, lo: float = GRID_RANGE[0], hi: float = GRID_RANGE[1]) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), points)


def _slopes(u: np.ndarray, values: np.ndarray) -> np.ndarray:
    return np.diff(values) / np.diff(u)


def _convexity_defect(u: np.ndarray, values: np.ndarray) -> float:
    """Largest normalized drop between consecutive slopes (<= 0 when convex)."""
    slopes = _slopes(u, values)
    if slopes.size < 2:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(slopes[:-1]), np.abs(slopes[1:])), 1e-300)
    return float(np.max((slopes[:-1] - slopes[1:]) / scale))


@dataclass(frozen=True)
class OrliczCertificate:
    nonnegative: bool
    nondecreasing: bool
    p: float
    q: float
    p_convex: bool
    q_concave: bool
    p_convexity_defect: float
    q_concavity_defect: float
    delta2: float


class OrliczFunction:
    """Φ on [0, inf) with Φ(0) = 0 and declared convexity/concavity exponents.

    The evaluator must accept numpy arrays. Certificates are computed on
    the sample grid at construction; the object is read-only afterwards.
    """

    def __init__(self, evaluator: Callable[[np.ndarray], np.ndarray], declared_p: float,
                 declared_q: float, name: str = "phi", grid: Optional[np.ndarray] = None):
        if declared_p <= 0 or declared_q < declared_p:
            raise DomainError(f"Declared exponents must satisfy 0 < p <= q, got p={declared_p}, q={declared_q}")
        self._evaluator = evaluator
        self.declared_p = float(declared_p)
        self.declared_q = float(declared_q)
        self.name = name
        self.grid = standard_grid() if grid is None else np.asarray(grid, dtype=float)
        self._values = self(self.grid)
        self._validate()
        self.certificate = self._certify()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("Orlicz functions are evaluated on [0, inf)")
        out = np.zeros_like(t)
        positive = t > 0
        if np.any(positive):
            out[positive] = self._evaluator(t[positive])
        return out if out.ndim else float(out)

    def __repr__(self) -> str:
        return f"OrliczFunction({self.name}, p={self.declared_p:g}, q={self.declared_q:g})"

    # --- certificates ---
    def _validate(self):
        values = self._values
        if not np.all(np.isfinite(values)):
            raise OrliczError(f"{self.name}: non-finite values on the grid")
        if not np.any(values > 0):
            raise OrliczError(f"{self.name}: degenerate (zero on the whole grid)")

    def convexity_defect(self, p: float) -> float:
        """Defect of u -> Φ(u^(1/p)) being convex on the grid (<= tol when p-convex)."""
        u = self.grid ** p
        return _convexity_defect(u, self._values)

    def concavity_defect(self, q: float) -> float:
        if math.isinf(q):
            return 0.0
        u = self.grid ** q
        return _convexity_defect(u, -self._values)

    def is_p_convex(self, p: float, tol: float = CERT_TOL) -> bool:
        return self.convexity_defect(p) <= tol

    def is_q_concave(self, q: float, tol: float = CERT_TOL) -> bool:
        return self.concavity_defect(q) <= tol

    def delta2(self, grid: Optional[np.ndarray] = None) -> float:
        """max Φ(2t)/Φ(t) over the grid."""
        grid = self.grid if grid is None else grid
        base = self(grid)
        mask = base > 0
        if not np.any(mask):
            raise OrliczError(f"{self.name}: degenerate (zero on the whole grid)")
        return float(np.max(self(2.0 * grid[mask]) / base[mask]))

    def _certify(self) -> OrliczCertificate:
        values = self._values
        p_defect = self.convexity_defect(self.declared_p)
        q_defect = self.concavity_defect(self.declared_q)
        cert = OrliczCertificate(
            nonnegative=bool(np.all(values >= 0)),
            nondecreasing=bool(np.all(np.diff(values) >= -CERT_TOL * np.abs(values[1:]))),
            p=self.declared_p, q=self.declared_q,
            p_convex=p_defect <= CERT_TOL, q_concave=q_defect <= CERT_TOL,
            p_convexity_defect=p_defect, q_concavity_defect=q_defect,
            delta2=self.delta2(),
        )
        if not (cert.nonnegative and cert.nondecreasing):
            raise OrliczError(f"{self.name}: not a nonnegative nondecreasing function on the grid")
        if not (cert.p_convex and cert.q_concave):
            logger.warning(f"{self.name}: declared exponents not certified "
                           f"(p-defect {p_defect:.2e}, q-defect {q_defect:.2e})")
        return cert

    def derivative(self, t):
        """Central-difference Φ'(t); one-sided at t = 0."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        h = 1e-6 * np.maximum(t, 1e-8)
        lower = np.clip(t - h, 0.0, None)
        slope = (self(t + h) - self(lower)) / (t + h - lower)
        if not np.all(np.isfinite(slope)):
            raise OrliczError(f"{self.name}: derivative estimation failed")
        return slope


# --- families ---
def power(p: float, scale: float = 1.0, grid: Optional[np.ndarray] = None) -> OrliczFunction:
    """Φ(t) = c t^p."""
    if p <= 0 or scale <= 0:
        raise DomainError(f"Power family needs p > 0 and c > 0, got p={p}, c={scale}")
    return OrliczFunction(lambda t: scale * t ** p, p, p, name=f"power({p:g})", grid=grid)


def plog(p: float, q: float, grid: Optional[np.ndarray] = None) -> OrliczFunction:
    """Φ(t) = t^p log(1 + t^q): p-convex and (p+q)-concave."""
    if p < 1 or q <= 0:
        raise DomainError(f"plog family needs p >= 1 and q > 0, got p={p}, q={q}")
    return OrliczFunction(lambda t: t ** p * np.log1p(t ** q), p, p + q, name=f"plog({p:g},{q:g})", grid=grid)


def table(points: Sequence[Tuple[float, float]], declared_p: Optional[float] = None,
          declared_q: Optional[float] = None, grid: Optional[np.ndarray] = None) -> OrliczFunction:
    """Monotone (pchip) interpolation of log Φ against log t, power-law beyond the ends."""
    pts = sorted((float(t), float(v)) for t, v in points)
    if len(pts) < 2 or any(t <= 0 or v <= 0 for t, v in pts):
        raise OrliczError("Tabulated Orlicz function needs at least two points with t > 0 and Φ(t) > 0")
    log_t = np.log([t for t, _ in pts])
    log_v = np.log([v for _, v in pts])
    if np.any(np.diff(log_t) <= 0) or np.any(np.diff(log_v) < 0):
        raise OrliczError("Tabulated points must have distinct t and nondecreasing values")
    spline = PchipInterpolator(log_t, log_v, extrapolate=False)
    slopes = np.diff(log_v) / np.diff(log_t)
    head, tail = slopes[0], slopes[-1]

    def evaluate(t):
        x = np.log(t)
        y = spline(np.clip(x, log_t[0], log_t[-1]))
        y = np.where(x < log_t[0], log_v[0] + head * (x - log_t[0]), y)
        y = np.where(x > log_t[-1], log_v[-1] + tail * (x - log_t[-1]), y)
        return np.exp(y)

    p = float(declared_p) if declared_p is not None else float(np.min(slopes))
    q = float(declared_q) if declared_q is not None else float(np.max(slopes))
    return OrliczFunction(evaluate, p, q, name=f"table({len(pts)})", grid=grid)


def from_spec(spec: Dict) -> OrliczFunction:
    """{family: power, p} | {family: plog, p, q} | {family: table, points, [p], [q]}."""
    family = spec.get("family")
    if family == "power":
        return power(spec["p"], spec.get("scale", 1.0))
    if family == "plog":
        return plog(spec["p"], spec["q"])
    if family == "table":
        return table(spec["points"], spec.get("p"), spec.get("q"))
    raise DomainError(f"Unknown Orlicz family '{family}'")


# --- indices ---
@dataclass(frozen=True)
class IndexEstimate:
    lower: float
    upper: float
    lower_error: float
    upper_error: float


def _log_dilation(phi: OrliczFunction, t: float, samples: int, span: float) -> float:
    """log M_Φ(t) = log sup_s Φ(ts)/Φ(s), the sup over log-spaced s in [10^-span, 10^span]."""
    s = np.logspace(-span, span, samples)
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        top = phi(t * s)
        bottom = phi(s)
        usable = (bottom > 0) & (top > 0) & np.isfinite(top) & np.isfinite(bottom)
        if not np.any(usable):
            raise OrliczError(f"{phi.name}: degenerate (no usable dilation samples)")
        return float(np.max(np.log(top[usable]) - np.log(bottom[usable])))


def matuszewska_indices(phi: OrliczFunction, t_small: float = 1e-4, t_large: float = 1e4,
                        span: float = 50.0, samples: int = 4001) -> IndexEstimate:
    """Lower/upper indices from log M_Φ(t)/log t at t_small and t_large.

    The error bar is the change between `samples` and half as many.
    """
    if not math.isfinite(phi.certificate.delta2):
        raise OrliczError(f"{phi.name}: Δ2 certificate failed")

    def estimate(n):
        return (_log_dilation(phi, t_small, n, span) / math.log(t_small),
                _log_dilation(phi, t_large, n, span) / math.log(t_large))

    fine, coarse = estimate(samples), estimate(samples // 2 + 1)
    result = IndexEstimate(fine[0], fine[1], abs(fine[0] - coarse[0]), abs(fine[1] - coarse[1]))
    logger.debug(f"{phi.name}: indices {result}")
    return result


# --- complementary function ---
class ComplementaryFunction(OrliczFunction):
    """Φ*(s) = sup_{t >= 0} (st - Φ(t)), evaluated pointwise by bounded Brent search."""

    def __init__(self, phi: OrliczFunction, grid: Optional[np.ndarray] = None):
        if not phi.is_p_convex(1.0):
            raise OrliczError(f"{phi.name}: complementary function needs a convex Φ")
        self.primal = phi
        self._point = lru_cache(maxsize=POINT_CACHE_SIZE)(self._sup)
        grid = phi.grid if grid is None else grid
        super().__init__(self._evaluate, conjugate_exponent(phi.declared_q),
                         conjugate_exponent(phi.declared_p), name=f"{phi.name}*", grid=grid)
        # eager table on the grid
        self.table = dict(zip(self.grid.tolist(), self._values.tolist()))

    def _sup(self, s: float) -> float:
        phi = self.primal
        upper = 1.0
        while phi(upper) < s * upper:
            upper *= 2.0
            if upper > BRACKET_CAP:
                raise OrliczError(f"{phi.name}: complementary supremum unbounded at s={s:g}")
        result = minimize_scalar(lambda t: float(phi(t)) - s * t, bounds=(0.0, upper), method="bounded",
                                 options={"xatol": 1e-9 * upper})
        return max(0.0, -float(result.fun))

    def _evaluate(self, s: np.ndarray) -> np.ndarray:
        return np.array([self._point(float(v)) for v in np.ravel(s)]).reshape(np.shape(s))


def complementary(phi: OrliczFunction, grid: Optional[np.ndarray] = None) -> ComplementaryFunction:
    return ComplementaryFunction(phi, grid)


def young_gap(phi: OrliczFunction, phi_star: OrliczFunction, t: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Φ(t) + Φ*(s) - st (>= 0 by Young's inequality)."""
    t, s = np.asarray(t, dtype=float), np.asarray(s, dtype=float)
    return phi(t) + phi_star(s) - s * t


def default_families() -> List[OrliczFunction]:
    return [plog(1.5, 0.4), plog(1.3, 0.7), power(3.0)]
