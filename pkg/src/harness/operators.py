import numpy as np
from typing import Sequence

from src.algebra.tracial import DomainError
from src.martingales.filtration import Filtration, Martingale, cond_expect
from src.norms.square import as_terms


def stein_map(f: Filtration, a) -> Martingale:
    """(E_n(a_n) - E_{n-1}(a_n))_n; the first term is E_1(a_1)."""
    terms = as_terms(a)
    if terms.shape[0] > f.length:
        raise DomainError(f"Sequence of length {terms.shape[0]} exceeds filtration length {f.length}")
    differences = []
    for n, term in enumerate(terms, start=1):
        current = cond_expect(f, n, term)
        differences.append(current if n == 1 else current - cond_expect(f, n - 1, term))
    return Martingale(np.stack(differences), f)


def martingale_transform(x: Martingale, signs: Sequence[float]) -> Martingale:
    """Differences ε_n dx_n for a sign pattern ε."""
    signs = np.asarray(signs, dtype=float)
    if signs.shape != (x.length,):
        raise DomainError(f"Need {x.length} signs, got {signs.shape}")
    if not np.all(np.abs(signs) == 1.0):
        raise DomainError("Transform signs must be +1 or -1")
    return Martingale(signs[:, None, None] * x.differences, x.filtration)


def random_signs(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.choice([-1.0, 1.0], size=n)
