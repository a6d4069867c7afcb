import time
import numpy as np
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple
from loguru import logger

from src.algebra.tracial import DomainError, schatten_norm
from src.davis.certificates import davis_constant, lepingle_ratio
from src.davis.decomposition import davis_type1
from src.martingales.filtration import AdaptedSequence, Filtration, cond_expect
from src.harness.instances import lopsided_lepingle_instance, predictable_instance
from src.harness.operators import stein_map
from src.norms.square import col_l2_norm, cond_col_norm, diag_norm

Objective = Callable[[np.ndarray, Filtration], float]


def _orthogonality_ratio(terms: np.ndarray, f: Filtration) -> float:
    x = stein_map(f, terms)
    total = sum(schatten_norm(d, 2.0) ** 2 for d in x.differences)
    return schatten_norm(x.final, 2.0) ** 2 / total if total > 0 else 1.0


def _type1_ratio(terms: np.ndarray, f: Filtration, p: float = 1.0) -> float:
    d = davis_type1(AdaptedSequence(terms, f), p)
    rhs = col_l2_norm(terms, p)
    if rhs == 0:
        return 0.0
    return (diag_norm(d.y, p) + cond_col_norm(d.z, p, f)) / rhs / davis_constant(p)


OBJECTIVES: Dict[str, Objective] = {
    "lepingle": lepingle_ratio,
    "orthogonality": _orthogonality_ratio,
    "davis-type1": _type1_ratio,
}


def project(terms: np.ndarray, f: Filtration) -> np.ndarray:
    """Maps arbitrary terms to an adapted sequence: ξ_n = E_n(g_n)."""
    return np.stack([cond_expect(f, n, t) for n, t in enumerate(terms, start=1)])


@dataclass
class SearchResult:
    check: str
    best_terms: np.ndarray
    best_ratio: float
    trace: List[float]
    restarts: List[float] = field(default_factory=list)
    runtime: float = 0.0
    # where the winning restart started, and its ratio there
    origin: str = ""
    start_ratio: float = float("nan")

    @property
    def climb_gain(self) -> float:
        return self.best_ratio - self.start_ratio


class ExtremalSearch:
    """Seeded multi-start hill climbing on the ratio of a check."""

    def __init__(self, check: str, filtration: Filtration, seed: int, restarts: int = 3,
                 iterations: int = 300, sigma: float = 0.25, patience: int = 20):
        if check not in OBJECTIVES:
            raise DomainError(f"No ratio objective for check '{check}'; known: {sorted(OBJECTIVES)}")
        self.check = check
        self.objective = OBJECTIVES[check]
        self.filtration = filtration
        self.seed = seed
        self.restarts = restarts
        self.iterations = iterations
        self.sigma = sigma
        self.patience = patience
        self.is_running = False
        self.evaluations = 0
        self.best_ratio = -np.inf
        self.result: Optional[SearchResult] = None

    def seeds(self, rng: np.random.Generator) -> List[Tuple[str, np.ndarray]]:
        """Labelled structured starting points for the check."""
        f = self.filtration
        starts = []
        if self.check == "lepingle":
            starts.append(("predictable", predictable_instance(f, rng).terms))
            head = lopsided_lepingle_instance(f.dim)
            if head.filtration == f:
                starts.append(("lopsided", head.terms))
        return starts

    def _evaluate(self, terms: np.ndarray) -> float:
        self.evaluations += 1
        return float(self.objective(terms, self.filtration))

    def _random_start(self, rng: np.random.Generator) -> np.ndarray:
        algebra = self.filtration.algebra
        return project(np.stack([algebra.random_ginibre(rng) for _ in range(self.filtration.length)]),
                       self.filtration)

    def _propose(self, current: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
        """One move, drawn uniformly from: Gaussian on every term, Gaussian on one term, per-term rescaling."""
        move = int(rng.integers(3))
        shape = current.shape
        if move == 2:
            factors = np.exp(self.sigma * rng.standard_normal(shape[0]))
            return current * factors[:, None, None]
        noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        if move == 1:
            mask = np.zeros(shape[0])
            mask[rng.integers(shape[0])] = 1.0
            noise = noise * mask[:, None, None]
        return project(current + (sigma / np.sqrt(2.0)) * noise, self.filtration)

    def _climb(self, start: np.ndarray, rng: np.random.Generator, trace: List[float]):
        current = start
        current_ratio = self._evaluate(current)
        start_ratio = current_ratio
        self.best_ratio = max(self.best_ratio, current_ratio)
        sigma = self.sigma * max(float(np.max(np.abs(current))), 1.0)
        misses = 0
        for _ in range(self.iterations):
            candidate = self._propose(current, sigma, rng)
            ratio = self._evaluate(candidate)
            if ratio > current_ratio * (1.0 + 1e-12) + 1e-15:
                current, current_ratio = candidate, ratio
                misses = 0
            else:
                misses += 1
                if misses >= self.patience:
                    sigma *= 0.5
                    misses = 0
            self.best_ratio = max(self.best_ratio, current_ratio)
            trace.append(self.best_ratio)
        return current, current_ratio, start_ratio

    def run(self) -> SearchResult:
        """Runs every restart and keeps the best instance."""
        self.is_running = True
        started = time.time()
        rng = np.random.default_rng(self.seed)
        logger.info(f"Extremal search on '{self.check}' over {self.filtration.describe()} "
                    f"({self.restarts} restarts x {self.iterations} steps)")

        seeds = self.seeds(rng)
        if seeds:
            ranked = sorted(seeds, key=lambda item: self._evaluate(item[1]), reverse=True)
            starts = [ranked[0]] + [(f"random:{k}", self._random_start(rng)) for k in range(1, self.restarts)]
        else:
            starts = [(f"random:{k}", self._random_start(rng)) for k in range(self.restarts)]

        trace: List[float] = []
        best_terms, best_ratio = None, -np.inf
        origin, start_ratio = "", float("nan")
        per_restart = []
        for label, start in starts:
            terms, ratio, initial = self._climb(start, rng, trace)
            per_restart.append(ratio)
            if ratio > best_ratio:
                best_terms, best_ratio = terms, ratio
                origin, start_ratio = label, initial

        self.result = SearchResult(self.check, best_terms, best_ratio, trace, per_restart, time.time() - started,
                                   origin, start_ratio)
        self.is_running = False
        logger.success(f"Extremal search '{self.check}' finished: best ratio {best_ratio:.6f} from start "
                       f"'{origin}' (ratio {start_ratio:.6f} there, climb gain {self.result.climb_gain:.3e})")
        return self.result

    def get_status(self) -> Dict:
        return {
            "check": self.check,
            "filtration": self.filtration.describe(),
            "is_running": self.is_running,
            "evaluations": self.evaluations,
            "best_ratio": self.best_ratio,
        }
