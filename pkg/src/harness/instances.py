import numpy as np
from dataclasses import dataclass
from typing import List, Optional, Tuple
from loguru import logger

from src.algebra.tracial import func_calc, hermitian_part
from src.martingales.filtration import (
    AdaptedSequence,
    Filtration,
    Martingale,
    cond_expect,
    martingale_from_final,
)

FAMILIES = ("ginibre", "classical", "rank-deficient", "near-commuting")
# Keeps the Burkholder-Gundy filtration at N = steps + 2 <= 8.
MAX_FAMILY_STEPS = 6


def instance_seed(master: int, index: int) -> int:
    """Independent per-instance seed derived from the master seed and the instance index."""
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1, np.uint64)[0])


@dataclass
class Instance:
    index: int
    seed: int
    family: str
    filtration: Filtration
    adapted: AdaptedSequence
    martingale: Martingale


class InstanceGenerator:
    """Random test instances, round-robin over the four families.

    ginibre: Ginibre terms on the main filtration; classical: the same on the
    commutative model; rank-deficient: low-rank and repeated terms;
    near-commuting: real diagonal terms plus a small Ginibre perturbation.
    """

    def __init__(self, filtration: Filtration, classical: Filtration, master_seed: int,
                 families: Tuple[str, ...] = FAMILIES):
        self.filtration = filtration
        self.classical = classical
        self.master_seed = master_seed
        self.families = families
        self.generated = 0

    def family_of(self, index: int) -> str:
        return self.families[index % len(self.families)]

    def instance(self, index: int) -> Instance:
        seed = instance_seed(self.master_seed, index)
        family = self.family_of(index)
        rng = np.random.default_rng(seed)
        f = self.classical if family == "classical" else self.filtration
        builder = {
            "ginibre": self._ginibre,
            "classical": self._ginibre,
            "rank-deficient": self._rank_deficient,
            "near-commuting": self._near_commuting,
        }[family]
        terms, final = builder(f, rng)
        self.generated += 1
        return Instance(index, seed, family, f, AdaptedSequence(terms, f), martingale_from_final(f, final))

    # --- families ---
    @staticmethod
    def _scales(rng: np.random.Generator, n: int) -> np.ndarray:
        return np.exp(rng.normal(0.0, 1.0, n))

    def _ginibre(self, f: Filtration, rng: np.random.Generator):
        algebra = f.algebra
        scales = self._scales(rng, f.length)
        terms = np.stack([cond_expect(f, n, algebra.random_ginibre(rng, scales[n - 1]))
                          for n in range(1, f.length + 1)])
        return terms, algebra.random_ginibre(rng)

    def _rank_deficient(self, f: Filtration, rng: np.random.Generator):
        algebra = f.algebra
        terms = []
        for n in range(1, f.length + 1):
            roll = rng.random()
            if terms and roll < 0.25:
                terms.append(terms[-1].copy())
                continue
            if roll < 0.4:
                terms.append(algebra.zeros())
                continue
            term = cond_expect(f, n, algebra.random_ginibre(rng))
            terms.append(term @ _low_rank_projection(f, n, rng))
        # keep a nonzero first term so the sequence is not trivially zero
        if not np.any(terms[0]):
            terms[0] = cond_expect(f, 1, algebra.random_ginibre(rng))
        final = algebra.random_ginibre(rng) @ _low_rank_projection(f, f.length, rng)
        return np.stack(terms), final

    def _near_commuting(self, f: Filtration, rng: np.random.Generator, eps: float = 1e-3):
        algebra = f.algebra
        d = algebra.dim

        def draw():
            return np.diag(rng.standard_normal(d)) + eps * algebra.random_ginibre(rng)

        terms = np.stack([cond_expect(f, n, draw()) for n in range(1, f.length + 1)])
        return terms, draw()


def _low_rank_projection(f: Filtration, n: int, rng: np.random.Generator) -> np.ndarray:
    """A projection in M_n of roughly a third of full rank."""
    algebra = f.algebra
    rank = max(1, algebra.dim // 3)
    v = algebra.random_ginibre(rng)[:, :rank]
    averaged = hermitian_part(cond_expect(f, n, v @ v.conj().T))
    eigvals = np.linalg.eigvalsh(averaged)
    threshold = np.median(eigvals)
    return func_calc(averaged, lambda t: (t > threshold).astype(float))


def lopsided_lepingle_instance(dim: int = 64) -> AdaptedSequence:
    """Classical three-step sequence whose Lépingle-Yor ratio exceeds 1.2 at dim = 64."""
    f = Filtration.lopsided(dim, head=2)
    head = np.zeros(dim)
    head[:2] = 1.0
    spike = np.zeros(dim)
    spike[0] = 4.0 / 3.0
    terms = np.stack([np.zeros((dim, dim)), np.diag(head), np.diag(spike)]).astype(complex)
    return AdaptedSequence(terms, f)


def predictable_instance(f: Filtration, rng: np.random.Generator) -> AdaptedSequence:
    """ξ_n in M_{n-1} (and ξ_1 in M_1): E_{n-1} ξ_n = ξ_n, Lépingle-Yor ratio exactly 1."""
    terms = [cond_expect(f, max(n - 1, 1), f.algebra.random_ginibre(rng)) for n in range(1, f.length + 1)]
    return AdaptedSequence(np.stack(terms), f)


def burkholder_gundy_family(steps: int, dim: int = 64) -> Martingale:
    """Classical martingale where ‖x‖_p / ‖S_c(x)‖_p grows with the number of steps for p < 1.

    Each step moves +1 on the surviving atom except one point that absorbs the
    compensating drop; surviving points end at x = steps with S_c = √steps.
    """
    limit = min(MAX_FAMILY_STEPS, dim - 2)
    if not 1 <= steps <= limit:
        raise ValueError(f"steps must be in [1, {limit}], got {steps}")
    partitions: List[Tuple[int, ...]] = [tuple([0] * dim)]
    differences = [np.zeros(dim)]
    survivors = list(range(dim))
    for k in range(steps):
        dropped = survivors.pop()
        labels = [0 if i in survivors else i + 1 for i in range(dim)]
        partitions.append(tuple(labels))
        step = np.zeros(dim)
        step[survivors] = 1.0
        step[dropped] = -float(len(survivors))
        differences.append(step)
    partitions.append(tuple(range(dim)))
    differences.append(np.zeros(dim))
    f = Filtration.partition(partitions)
    logger.debug(f"Burkholder-Gundy family: {steps} steps on D={dim}")
    return Martingale(np.stack([np.diag(d) for d in differences]).astype(complex), f)
