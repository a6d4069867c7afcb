import numpy as np
from dataclasses import dataclass
from typing import Optional

from src.algebra.tracial import DomainError, check_exponent, singular_profile, vector_quasinorm
from src.kfunc.functionals import Couple, solve_profile

KINDS = ("Lp", "intersection", "sum")


@dataclass(frozen=True)
class SymmetricSpace:
    """L_p, L_p ∩ L_q or L_p + L_q over the matrix algebra."""
    kind: str
    p: float
    q: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"Unknown symmetric space '{self.kind}', expected one of {KINDS}")
        check_exponent(self.p)
        if self.kind != "Lp":
            # raises on an invalid couple
            Couple(self.p, self.q)

    @classmethod
    def lp(cls, p: float) -> "SymmetricSpace":
        return cls("Lp", float(p))

    @classmethod
    def intersection(cls, p: float, q: float) -> "SymmetricSpace":
        return cls("intersection", float(p), float(q))

    @classmethod
    def sum(cls, p: float, q: float) -> "SymmetricSpace":
        return cls("sum", float(p), float(q))

    @classmethod
    def parse(cls, spec: str) -> "SymmetricSpace":
        """`L3`, `Lp:3`, `cap:2:4` (or `intersection:2:4`), `sum:1:inf`."""
        text = spec.strip()
        try:
            if text.startswith("L") and ":" not in text:
                return cls.lp(float(text[1:]))
            parts = text.split(":")
            if parts[0] == "Lp" and len(parts) == 2:
                return cls.lp(float(parts[1]))
            if parts[0] in ("cap", "intersection") and len(parts) == 3:
                return cls.intersection(float(parts[1]), float(parts[2]))
            if parts[0] == "sum" and len(parts) == 3:
                return cls.sum(float(parts[1]), float(parts[2]))
        except ValueError as e:
            raise DomainError(f"Malformed space spec '{spec}': {e}") from e
        raise DomainError(f"Unknown space spec '{spec}'")

    @property
    def couple(self) -> Couple:
        return Couple(self.p, self.q)

    def describe(self) -> str:
        if self.kind == "Lp":
            return f"L{self.p:g}"
        joiner = "cap" if self.kind == "intersection" else "sum"
        return f"{joiner}:{self.p:g}:{self.q:g}"


def profile_norm(s: np.ndarray, space: SymmetricSpace) -> float:
    """Norm of any operator whose singular values are s (order irrelevant)."""
    s = np.abs(np.asarray(s, dtype=float))
    if space.kind == "Lp":
        return vector_quasinorm(s, space.p)
    if space.kind == "intersection":
        return max(vector_quasinorm(s, space.p), vector_quasinorm(s, space.q))
    return solve_profile(s, 1.0, space.couple).value


def symmetric_space_norm(x: np.ndarray, space: SymmetricSpace) -> float:
    return profile_norm(singular_profile(x), space)
