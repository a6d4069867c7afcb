import numpy as np
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple
from loguru import logger

from src.algebra.tracial import (
    AdaptednessError,
    DomainError,
    TracialAlgebra,
    adjoint,
)

ADAPTED_TOL = 1e-10


@dataclass(frozen=True)
class Filtration:
    """Increasing chain M_1 ⊆ ... ⊆ M_N of subalgebras of M_D.

    kind "tensor": D = d_1 ... d_N and M_n holds the first n tensor factors.
    kind "partition": M_n holds the diagonal matrices constant on the atoms
    of partitions[n-1]; the last partition must be the singletons.
    """
    kind: str
    factors: Tuple[int, ...] = ()
    partitions: Tuple[Tuple[int, ...], ...] = ()
    algebra: TracialAlgebra = field(init=False)

    def __post_init__(self):
        if self.kind == "tensor":
            if not self.factors or any(d < 1 for d in self.factors):
                raise DomainError(f"Tensor filtration needs positive factor dimensions, got {self.factors}")
            dim = int(np.prod(self.factors))
        elif self.kind == "partition":
            if not self.partitions:
                raise DomainError("Partition filtration needs at least one partition")
            dim = len(self.partitions[0])
            self._validate_partitions(dim)
        else:
            raise DomainError(f"Unknown filtration kind: {self.kind}")
        object.__setattr__(self, "algebra", TracialAlgebra(dim))

    def _validate_partitions(self, dim: int):
        for n, labels in enumerate(self.partitions, start=1):
            if len(labels) != dim:
                raise DomainError(f"Partition P_{n} labels {len(labels)} points, expected {dim}")
        for n in range(1, len(self.partitions)):
            coarse = np.asarray(self.partitions[n - 1])
            fine = np.asarray(self.partitions[n])
            for atom in np.unique(fine):
                parents = np.unique(coarse[fine == atom])
                if parents.size != 1:
                    raise DomainError(f"Partition P_{n + 1} does not refine P_{n}: atom {atom} straddles {parents.tolist()}")
        if len(np.unique(self.partitions[-1])) != dim:
            raise DomainError("The last partition of a filtration must consist of singletons")

    @property
    def dim(self) -> int:
        return self.algebra.dim

    @property
    def length(self) -> int:
        return len(self.factors) if self.kind == "tensor" else len(self.partitions)

    @property
    def is_commutative(self) -> bool:
        return self.kind == "partition"

    def describe(self) -> str:
        if self.kind == "tensor":
            return "tensor:" + "x".join(str(d) for d in self.factors)
        return f"partition:D={self.dim}:N={self.length}"

    def to_dict(self) -> dict:
        if self.kind == "tensor":
            return {"kind": "tensor", "factors": list(self.factors)}
        return {"kind": "partition", "partitions": [list(p) for p in self.partitions]}

    # --- constructors ---
    @classmethod
    def tensor(cls, factors: Sequence[int]) -> "Filtration":
        return cls(kind="tensor", factors=tuple(int(d) for d in factors))

    @classmethod
    def partition(cls, partitions: Sequence[Sequence[int]]) -> "Filtration":
        return cls(kind="partition", partitions=tuple(tuple(int(a) for a in p) for p in partitions))

    @classmethod
    def dyadic(cls, dim: int = 64, length: int = 6) -> "Filtration":
        """P_n has 2^n equal atoms, except P_N which is the singletons."""
        partitions = []
        for n in range(1, length + 1):
            atoms = dim if n == length else min(2 ** n, dim)
            partitions.append(tuple(i * atoms // dim for i in range(dim)))
        return cls.partition(partitions)

    @classmethod
    def lopsided(cls, dim: int = 64, head: int = 2) -> "Filtration":
        """Three steps: trivial, {head atom, rest}, singletons."""
        if not 1 <= head < dim:
            raise DomainError(f"Head atom size must be in [1, {dim}), got {head}")
        trivial = tuple(0 for _ in range(dim))
        split = tuple(0 if i < head else 1 for i in range(dim))
        return cls.partition([trivial, split, tuple(range(dim))])

    @classmethod
    def trivial(cls, dim: int, length: int) -> "Filtration":
        """Every M_n is the full diagonal, so E_n is the identity on the model."""
        return cls.partition([tuple(range(dim))] * length)


def _check_index(f: Filtration, n: int) -> int:
    if not 0 <= n <= f.length:
        raise DomainError(f"Filtration index {n} outside 0..{f.length}")
    # E_0 = E_1
    return max(n, 1)


def cond_expect(f: Filtration, n: int, x: np.ndarray) -> np.ndarray:
    """Trace-preserving conditional expectation E_n onto M_n."""
    n = _check_index(f, n)
    x = np.asarray(x, dtype=complex)
    if f.kind == "tensor":
        front = int(np.prod(f.factors[:n]))
        rest = f.dim // front
        if rest == 1:
            return x.copy()
        blocks = x.reshape(front, rest, front, rest)
        reduced = np.trace(blocks, axis1=1, axis2=3) / rest
        return np.kron(reduced, np.eye(rest))
    _, labels = np.unique(np.asarray(f.partitions[n - 1]), return_inverse=True)
    labels = labels.reshape(-1)
    diagonal = np.real_if_close(np.diagonal(x)).astype(complex)
    counts = np.bincount(labels)
    sums = np.bincount(labels, weights=diagonal.real) + 1j * np.bincount(labels, weights=diagonal.imag)
    return np.diag((sums / counts)[labels])


@dataclass
class AdaptedSequence:
    """(ξ_1, ..., ξ_N) with ξ_n in M_n."""
    terms: np.ndarray
    filtration: Filtration

    def __post_init__(self):
        self.terms = _as_stack(self.terms, self.filtration)
        for n, term in enumerate(self.terms, start=1):
            gap = np.max(np.abs(cond_expect(self.filtration, n, term) - term), initial=0.0)
            if gap > ADAPTED_TOL * max(1.0, np.max(np.abs(term), initial=0.0)):
                raise AdaptednessError(f"Term {n} is not in M_{n} (deviation {gap:.3e})")

    @property
    def length(self) -> int:
        return self.terms.shape[0]

    def adjoint(self) -> "AdaptedSequence":
        return AdaptedSequence(adjoint(self.terms), self.filtration)


@dataclass
class Martingale:
    """Martingale given by its differences dx_n (E_{n-1} dx_n = 0 for n >= 2)."""
    differences: np.ndarray
    filtration: Filtration

    def __post_init__(self):
        self.differences = _as_stack(self.differences, self.filtration)
        f = self.filtration
        for n, d in enumerate(self.differences, start=1):
            scale = max(1.0, np.max(np.abs(d), initial=0.0))
            if np.max(np.abs(cond_expect(f, n, d) - d), initial=0.0) > ADAPTED_TOL * scale:
                raise AdaptednessError(f"Difference {n} is not in M_{n}")
            if n >= 2 and np.max(np.abs(cond_expect(f, n - 1, d)), initial=0.0) > ADAPTED_TOL * scale:
                raise AdaptednessError(f"Difference {n} is not centered: E_{n - 1}(dx_{n}) != 0")

    @property
    def length(self) -> int:
        return self.differences.shape[0]

    @property
    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.differences, axis=0)

    @property
    def final(self) -> np.ndarray:
        return self.differences.sum(axis=0)

    def adjoint(self) -> "Martingale":
        return Martingale(adjoint(self.differences), self.filtration)

    def as_adapted(self) -> AdaptedSequence:
        return AdaptedSequence(self.differences, self.filtration)


def _as_stack(terms, f: Filtration) -> np.ndarray:
    stack = np.asarray(terms, dtype=complex)
    if stack.ndim != 3 or stack.shape[1:] != (f.dim, f.dim):
        raise DomainError(f"Sequence of shape {stack.shape} does not live in M_{f.dim}")
    if stack.shape[0] > f.length:
        raise DomainError(f"Sequence of length {stack.shape[0]} exceeds filtration length {f.length}")
    return stack


def martingale_from_final(f: Filtration, x: np.ndarray) -> Martingale:
    """dx_n = E_n(x) - E_{n-1}(x) with x_0 = 0."""
    x = f.algebra.validate(x)
    levels = [cond_expect(f, n, x) for n in range(1, f.length + 1)]
    previous = [np.zeros_like(x)] + levels[:-1]
    return Martingale(np.stack([cur - prev for cur, prev in zip(levels, previous)]), f)


def random_adapted(f: Filtration, seed: Optional[int] = None, scale: float = 1.0,
                   rng: Optional[np.random.Generator] = None) -> AdaptedSequence:
    """ξ_n = E_n(g_n) for independent Ginibre g_n; deterministic per seed."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    terms = [cond_expect(f, n, f.algebra.random_ginibre(rng, scale)) for n in range(1, f.length + 1)]
    logger.debug(f"Generated adapted sequence on {f.describe()} (scale={scale})")
    return AdaptedSequence(np.stack(terms), f)


def random_martingale(f: Filtration, seed: Optional[int] = None, scale: float = 1.0,
                      rng: Optional[np.random.Generator] = None) -> Martingale:
    """Martingale of a Ginibre final value."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    return martingale_from_final(f, f.algebra.random_ginibre(rng, scale))


def parse_filtration(spec: str) -> Filtration:
    """Parses `tensor:2x2x2`, `partition:dyadic:64:6`, `partition:lopsided:64[:head]`, `partition:trivial:8:3`."""
    parts = spec.strip().split(":")
    try:
        if parts[0] == "tensor" and len(parts) == 2:
            return Filtration.tensor([int(d) for d in parts[1].split("x")])
        if parts[0] == "partition" and len(parts) >= 3:
            preset, args = parts[1], [int(a) for a in parts[2:]]
            if preset == "dyadic":
                return Filtration.dyadic(*args)
            if preset == "lopsided":
                return Filtration.lopsided(*args)
            if preset == "trivial":
                return Filtration.trivial(*args)
    except (TypeError, ValueError) as e:
        raise DomainError(f"Malformed filtration spec '{spec}': {e}") from e
    raise DomainError(f"Unknown filtration spec '{spec}'")


def filtration_from_dict(data: dict) -> Filtration:
    kind = data.get("kind")
    if kind == "tensor":
        return Filtration.tensor(data["factors"])
    if kind == "partition":
        if "partitions" in data:
            return Filtration.partition(data["partitions"])
        preset = data.get("preset", "dyadic")
        args = [data[k] for k in ("dim", "length", "head") if k in data]
        return parse_filtration(":".join(["partition", preset] + [str(a) for a in args]))
    raise DomainError(f"Unknown filtration kind: {kind}")
