import csv
import numpy as np
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union
from loguru import logger
from scipy.optimize import minimize_scalar

from src.algebra.tracial import DomainError, schatten_norm, singular_profile, vector_quasinorm

MAX_ITERATIONS = 100_000
RELATIVE_TOL = 1e-7


@dataclass(frozen=True)
class Couple:
    """Interpolation couple (L_p, L_q) with 1 <= p < q <= inf."""
    p: float
    q: float

    def __post_init__(self):
        if self.q is None or not (1.0 <= self.p < self.q):
            raise DomainError(f"Invalid couple (L_{self.p}, L_{self.q}): need 1 <= p < q <= inf")

    @property
    def is_exact(self) -> bool:
        return self.p == 1.0 and np.isinf(self.q)

    @property
    def rho(self) -> float:
        """1/rho = 1/p - 1/q."""
        if np.isinf(self.q):
            return self.p
        return self.p * self.q / (self.q - self.p)


CoupleLike = Union[Couple, Tuple[float, float]]


def as_couple(couple: CoupleLike) -> Couple:
    return couple if isinstance(couple, Couple) else Couple(float(couple[0]), float(couple[1]))


@dataclass
class KSolution:
    value: float
    split: np.ndarray
    method: str
    iterations: int = 0
    converged: bool = True


def _profile_primitive(s: np.ndarray, x: float, r: float) -> float:
    """∫_0^x μ^r for the step profile μ = s_i on [i, i+1)."""
    powers = s ** r
    if np.isinf(x) or x >= s.size:
        return float(powers.sum())
    whole = int(np.floor(x))
    return float(powers[:whole].sum() + (x - whole) * powers[whole])


def _check_t(t: float) -> float:
    t = float(t)
    if not t > 0:
        raise DomainError(f"K-functional parameter t must be positive, got {t}")
    return t


def _norm_gradient(v: np.ndarray, r: float) -> np.ndarray:
    norm = vector_quasinorm(v, r)
    if norm == 0.0:
        return np.ones_like(v) if r == 1 else np.zeros_like(v)
    return (v / norm) ** (r - 1.0)


def _solve_box(s: np.ndarray, t: float, couple: Couple) -> KSolution:
    """Projected gradient with Armijo backtracking on 0 <= g <= s."""
    p, q = couple.p, couple.q

    def objective(g):
        return vector_quasinorm(g, p) + t * vector_quasinorm(s - g, q)

    g = s / 2.0
    value = objective(g)
    step = float(s.max()) / (1.0 + t)
    scale = max(float(np.linalg.norm(s)), np.finfo(float).tiny)
    stalled = 0
    converged = False
    iterations = 0
    while iterations < MAX_ITERATIONS:
        iterations += 1
        grad = _norm_gradient(g, p) - t * _norm_gradient(s - g, q)
        if np.linalg.norm(g - np.clip(g - grad, 0.0, s)) <= RELATIVE_TOL * scale:
            converged = True
            break
        accepted = False
        for _ in range(60):
            candidate = np.clip(g - step * grad, 0.0, s)
            moved = candidate - g
            cand_value = objective(candidate)
            if cand_value <= value + 1e-4 * float(grad @ moved):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        decrease = value - cand_value
        g, value = candidate, cand_value
        step *= 2.0
        stalled = stalled + 1 if decrease <= 1e-12 * max(value, 1e-300) else 0
        if stalled >= 20:
            converged = True
            break
    if not converged:
        logger.warning(f"K-functional optimizer stopped after {iterations} iterations (couple {p}, {q}, t={t})")

    # The optimum is never worse than the one-sided splits.
    trivial = [(vector_quasinorm(s, p), s.copy()), (t * vector_quasinorm(s, q), np.zeros_like(s))]
    best_value, best_split = min([(value, g)] + trivial, key=lambda item: item[0])
    return KSolution(float(best_value), best_split, "convex-opt", iterations, converged)


def _solve_sup(s: np.ndarray, t: float, couple: Couple) -> KSolution:
    """(L_p, L_inf): for a clip level λ the best split is g = (s - λ)_+."""
    p = couple.p

    def objective(lam):
        return vector_quasinorm(np.clip(s - lam, 0.0, None), p) + t * lam

    top = float(s.max())
    result = minimize_scalar(objective, bounds=(0.0, top), method="bounded",
                             options={"xatol": 1e-12 * max(top, 1.0)})
    candidates = [(float(result.fun), float(result.x)), (objective(0.0), 0.0), (objective(top), top)]
    value, lam = min(candidates)
    return KSolution(value, np.clip(s - lam, 0.0, None), "convex-opt", int(result.nfev), bool(result.success))


def solve_profile(s: np.ndarray, t: float, couple: CoupleLike) -> KSolution:
    """K(t) for the commutative problem on a nonnegative vector s."""
    couple = as_couple(couple)
    t = _check_t(t)
    s = np.sort(np.abs(np.asarray(s, dtype=float)))[::-1]
    if not np.any(s):
        return KSolution(0.0, np.zeros_like(s), "trivial")
    if couple.is_exact:
        value = _profile_primitive(s, t, 1.0)
        return KSolution(value, np.clip(s - (s[int(t)] if t < s.size else 0.0), 0.0, None), "exact-L1Linf")
    if np.isinf(couple.q):
        return _solve_sup(s, t, couple)
    return _solve_box(s, t, couple)


def k_solution(x: np.ndarray, t: float, couple: CoupleLike) -> KSolution:
    return solve_profile(singular_profile(x), t, couple)


def k_functional(x: np.ndarray, t: float, couple: CoupleLike) -> float:
    """K(t, x; L_p, L_q) = inf over x = a + b of ‖a‖_p + t‖b‖_q."""
    return k_solution(x, t, couple).value


def j_functional(x: np.ndarray, t: float, couple: CoupleLike) -> float:
    couple = as_couple(couple)
    t = _check_t(t)
    return max(schatten_norm(x, couple.p), t * schatten_norm(x, couple.q))


def holmstedt_estimate(x: np.ndarray, t: float, couple: CoupleLike) -> float:
    """(∫_0^{t^ρ} μ^p)^(1/p) + t (∫_{t^ρ}^∞ μ^q)^(1/q); equivalent to K, not equal."""
    couple = as_couple(couple)
    t = _check_t(t)
    s = singular_profile(x)
    if not np.any(s):
        return 0.0
    p, q = couple.p, couple.q
    cut = t ** couple.rho
    head = _profile_primitive(s, cut, p) ** (1.0 / p)
    if np.isinf(q):
        index = int(np.floor(cut))
        tail = float(s[index]) if index < s.size else 0.0
    else:
        tail = max(_profile_primitive(s, np.inf, q) - _profile_primitive(s, cut, q), 0.0) ** (1.0 / q)
    return float(head + t * tail)


def brute_force_k(s: np.ndarray, t: float, couple: CoupleLike, resolution: float = 1e-3) -> float:
    """Grid search over 0 <= g <= s (endpoints included); only for very small vectors."""
    couple = as_couple(couple)
    t = _check_t(t)
    s = np.abs(np.asarray(s, dtype=float))
    if s.size > 3:
        raise DomainError(f"Brute-force K-functional is limited to 3 coordinates, got {s.size}")
    axes = [np.linspace(0.0, si, int(np.ceil(si / resolution)) + 1) for si in s]
    g = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=-1)
    h = s - g
    if np.isinf(couple.q):
        second = np.abs(h).max(axis=-1)
    else:
        second = np.sum(np.abs(h) ** couple.q, axis=-1) ** (1.0 / couple.q)
    first = np.sum(g ** couple.p, axis=-1) ** (1.0 / couple.p)
    return float(np.min(first + t * second))


def _stacked_norm(values: np.ndarray, r: float) -> np.ndarray:
    if np.isinf(r):
        return values.max(axis=-1)
    return np.sum(values ** r, axis=-1) ** (1.0 / r)


def brute_force_split_k(x: np.ndarray, t: float, couple: CoupleLike, points: int = 7, rounds: int = 120,
                        seed: int = 0) -> float:
    """Pattern search over every real split x = a + b of a real 2x2 x, commuting with |x| or not.

    Each round tries a randomly rotated grid around the best split so far and
    halves the grid radius when nothing improves. The objective is convex in a.
    """
    couple = as_couple(couple)
    t = _check_t(t)
    x = np.asarray(x)
    if x.shape != (2, 2) or (np.iscomplexobj(x) and np.any(x.imag)):
        raise DomainError(f"Split brute force needs a real 2x2 operator, got shape {x.shape}")
    x = np.real(x).astype(float)

    def objective(a: np.ndarray) -> np.ndarray:
        first = np.linalg.svd(a, compute_uv=False)
        second = np.linalg.svd(x - a, compute_uv=False)
        return _stacked_norm(first, couple.p) + t * _stacked_norm(second, couple.q)

    rng = np.random.default_rng(seed)
    offsets = np.linspace(-1.0, 1.0, points)
    grid = np.stack(np.meshgrid(*[offsets] * 4, indexing="ij"), axis=-1).reshape(-1, 4)
    best = x / 2.0
    best_value = float(objective(best[None])[0])
    # optimal a has operator norm at most ‖x‖_inf
    scale = max(schatten_norm(x, np.inf), np.finfo(float).tiny)
    radius = 1.5 * scale
    for _ in range(rounds):
        if radius < 1e-5 * scale:
            break
        rotation, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        candidates = best + radius * (grid @ rotation).reshape(-1, 2, 2)
        values = objective(candidates)
        i = int(np.argmin(values))
        if values[i] < best_value:
            best_value, best = float(values[i]), candidates[i]
        else:
            radius *= 0.5
    return best_value


@dataclass
class KFunctionalCurve:
    couple: Couple
    ts: np.ndarray
    values: np.ndarray
    method: str
    norm_p: float
    norm_q: float
    converged: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.converged is None:
            self.converged = np.ones(self.ts.shape, dtype=bool)

    def concavity_defect(self) -> float:
        """Largest increase of consecutive slopes (<= 0 for a concave curve)."""
        if self.ts.size < 3:
            return 0.0
        slopes = np.diff(self.values) / np.diff(self.ts)
        return float(np.max(np.diff(slopes)))

    def monotonicity_defect(self) -> float:
        if self.ts.size < 2:
            return 0.0
        return float(max(0.0, -np.min(np.diff(self.values))))

    def min_bound_violation(self) -> float:
        bound = np.minimum(self.norm_p, self.ts * self.norm_q)
        return float(np.max(self.values - bound))

    def is_concave(self, tol: float = 1e-8) -> bool:
        scale = max(1.0, float(np.max(self.values)))
        return self.concavity_defect() <= tol * scale and self.monotonicity_defect() <= tol * scale

    def diagnostics(self) -> dict:
        return {
            "couple": [self.couple.p, self.couple.q],
            "method": self.method,
            "points": int(self.ts.size),
            "concavity_defect": self.concavity_defect(),
            "monotonicity_defect": self.monotonicity_defect(),
            "min_bound_violation": self.min_bound_violation(),
            "unconverged": int(np.sum(~self.converged)),
        }

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["t", "k", "converged"])
            for t, k, ok in zip(self.ts, self.values, self.converged):
                writer.writerow([repr(float(t)), repr(float(k)), "true" if ok else "false"])
        return path


def k_functional_curve(x: np.ndarray, ts: Iterable[float], couple: CoupleLike,
                       method: Optional[str] = None) -> KFunctionalCurve:
    """Samples K(t) (or the Holmstedt surrogate when method="holmstedt") on ts."""
    couple = as_couple(couple)
    ts = np.asarray(sorted(float(t) for t in ts))
    s = singular_profile(x)
    values: List[float] = []
    flags: List[bool] = []
    if method == "holmstedt":
        values = [holmstedt_estimate(x, t, couple) for t in ts]
        flags = [True] * ts.size
        label = "holmstedt"
    else:
        label = "exact-L1Linf" if couple.is_exact else "convex-opt"
        for t in ts:
            solution = solve_profile(s, t, couple)
            values.append(solution.value)
            flags.append(solution.converged)
    curve = KFunctionalCurve(couple, ts, np.asarray(values), label,
                             norm_p=schatten_norm(x, couple.p), norm_q=schatten_norm(x, couple.q),
                             converged=np.asarray(flags, dtype=bool))
    logger.debug(f"K-functional curve {curve.diagnostics()}")
    return curve
