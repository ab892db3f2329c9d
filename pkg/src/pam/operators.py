"""Finitely supported vectors and matrices over K: pairing, rank-one
products, transpose, trace, and traces of matrix-valued measures.

Finite support makes every matrix compact automatically; the trace is the
diagonal sum and satisfies |Tr F|_p <= max-entry norm of F exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import InvalidArgument
from .measures import LinearValueMap, Measure, pushforward_values
from .padic_core import UltraNorm, norm_max, padic_valuation, require_prime


@dataclass(frozen=True, slots=True)
class FinVector:
    """A vector with finitely many nonzero rational entries."""

    p: int
    entries: tuple  # tuple[(index, Fraction), ...] sorted, nonzero

    def __post_init__(self):
        require_prime(self.p)
        last = -1
        for i, v in self.entries:
            if i <= last or i < 0:
                raise InvalidArgument("entries must be sorted by nonnegative index")
            if v == 0:
                raise InvalidArgument("zero entries must be omitted")
            last = i

    @classmethod
    def of(cls, p: int, data) -> "FinVector":
        if isinstance(data, dict):
            items = data.items()
        else:
            items = enumerate(data)
        clean = sorted((i, Fraction(v)) for i, v in items if Fraction(v) != 0)
        return cls(p, tuple(clean))

    def as_dict(self) -> dict:
        return dict(self.entries)

    def sup_norm(self) -> UltraNorm:
        return norm_max((padic_valuation(v, self.p) for _, v in self.entries), self.p)

    def __add__(self, other: "FinVector") -> "FinVector":
        d = self.as_dict()
        for i, v in other.entries:
            d[i] = d.get(i, Fraction(0)) + v
        return FinVector.of(self.p, d)

    def scale(self, c) -> "FinVector":
        return FinVector.of(self.p, {i: Fraction(c) * v for i, v in self.entries})


@dataclass(frozen=True, slots=True)
class FinMatrix:
    """A matrix with finitely many nonzero rational entries."""

    p: int
    entries: tuple  # tuple[((i, j), Fraction), ...] sorted, nonzero

    def __post_init__(self):
        require_prime(self.p)
        seen = set()
        for (i, j), v in self.entries:
            if (i, j) in seen or i < 0 or j < 0:
                raise InvalidArgument("bad matrix support")
            if v == 0:
                raise InvalidArgument("zero entries must be omitted")
            seen.add((i, j))

    @classmethod
    def of(cls, p: int, data: dict) -> "FinMatrix":
        clean = sorted(((i, j), Fraction(v)) for (i, j), v in data.items() if Fraction(v) != 0)
        return cls(p, tuple(clean))

    @classmethod
    def identity(cls, p: int, n: int) -> "FinMatrix":
        return cls.of(p, {(i, i): Fraction(1) for i in range(n)})

    def as_dict(self) -> dict:
        return dict(self.entries)

    def transpose(self) -> "FinMatrix":
        return FinMatrix.of(self.p, {(j, i): v for (i, j), v in self.entries})

    def __add__(self, other: "FinMatrix") -> "FinMatrix":
        d = self.as_dict()
        for k, v in other.entries:
            d[k] = d.get(k, Fraction(0)) + v
        return FinMatrix.of(self.p, d)

    def scale(self, c) -> "FinMatrix":
        return FinMatrix.of(self.p, {k: Fraction(c) * v for k, v in self.entries})


def pairing(a: FinVector, b: FinVector) -> Fraction:
    """The bilinear symmetric form sum_j a_j b_j (a finite exact sum)."""
    if a.p != b.p:
        raise InvalidArgument("mixed value primes")
    bd = b.as_dict()
    return sum((v * bd[i] for i, v in a.entries if i in bd), Fraction(0))


def rank_one(a: FinVector, b: FinVector) -> FinMatrix:
    """The rank-one operator with entries F[l, j] = a_l b_j."""
    if a.p != b.p:
        raise InvalidArgument("mixed value primes")
    return FinMatrix.of(
        a.p, {(i, j): va * vb for i, va in a.entries for j, vb in b.entries}
    )


def trace(f: FinMatrix) -> Fraction:
    """The diagonal sum; linear, and Tr(rank_one(a, b)) equals pairing(a, b)."""
    return sum((v for (i, j), v in f.entries if i == j), Fraction(0))


def op_norm(f: FinMatrix) -> UltraNorm:
    """Max-entry norm, which is the operator norm on finitely supported
    vectors with the sup norm."""
    return norm_max((padic_valuation(v, f.p) for _, v in f.entries), f.p)


def trace_measure(mu: Measure) -> Measure:
    """The scalar measure A -> Tr(mu(A)) of a matrix-valued measure."""
    if len(mu.shape) != 2:
        raise InvalidArgument("trace needs a matrix-valued measure")
    return pushforward_values(mu, LinearValueMap.trace(mu.p, mu.shape[0]))
