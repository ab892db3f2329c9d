"""Exact arithmetic substrate: p-adic valuations, fractional parts, cyclotomics.

Everything is exact.  Rationals are `fractions.Fraction`; a non-archimedean
norm is stored as its valuation exponent (an integer, or a rational for the
fractional L^q exponents), never as a float; roots of unity live in the field
Q(zeta) for zeta a primitive r^M-th root, represented on the power basis
zeta^0, ..., zeta^(phi(r^M)-1) and reduced by the sparse relation

    zeta^((r-1) r^(M-1) + s) = -(zeta^s + zeta^(r^(M-1)+s) + ... ),

which is linear-time because the r^M-th cyclotomic polynomial has only r
terms.  Equality is coefficientwise on the canonical (minimal-level) form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Union

from .errors import DomainError, InvalidArgument

Rational = Union[int, Fraction]

#: sentinel valuation of zero
INF = math.inf


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def require_prime(p: int) -> None:
    if not is_prime(p):
        raise InvalidArgument(f"{p} is not prime")


def vp(x: Rational, p: int):
    """Valuation of a rational at the prime p; math.inf for zero."""
    require_prime(p)
    x = Fraction(x)
    if x == 0:
        return INF

    def _vint(n: int) -> int:
        v = 0
        while n % p == 0:
            n //= p
            v += 1
        return v

    return _vint(abs(x.numerator)) - _vint(x.denominator)


@dataclass(frozen=True, slots=True)
class UltraNorm:
    """A norm value base**(-exp); exp may be a Fraction, and None means zero.

    Comparisons are exact exponent comparisons: larger exponent, smaller norm.
    """

    base: int
    exp: object  # int | Fraction | None (None encodes norm 0)

    def __post_init__(self):
        require_prime(self.base)
        if self.exp is not None and not isinstance(self.exp, (int, Fraction)):
            raise InvalidArgument(f"bad norm exponent {self.exp!r}")

    @classmethod
    def zero(cls, base: int) -> "UltraNorm":
        return cls(base, None)

    @classmethod
    def one(cls, base: int) -> "UltraNorm":
        return cls(base, 0)

    @property
    def is_zero(self) -> bool:
        return self.exp is None

    def _key(self):
        # sort key increasing with the norm value; zero norm is smallest
        return -INF if self.exp is None else -self.exp

    def __lt__(self, other: "UltraNorm") -> bool:
        self._check(other)
        return self._key() < other._key()

    def __le__(self, other: "UltraNorm") -> bool:
        self._check(other)
        return self == other or self < other

    def _check(self, other: "UltraNorm") -> None:
        if self.base != other.base:
            raise InvalidArgument("norms over different primes are not comparable")

    def __mul__(self, other: "UltraNorm") -> "UltraNorm":
        self._check(other)
        if self.is_zero or other.is_zero:
            return UltraNorm.zero(self.base)
        return UltraNorm(self.base, self.exp + other.exp)

    def root(self, q: int) -> "UltraNorm":
        """The q-th root of the norm value: divides the exponent by q."""
        if self.is_zero:
            return self
        e = Fraction(self.exp) / q
        if e.denominator == 1:
            e = int(e)
        return UltraNorm(self.base, e)

    def value(self) -> Fraction:
        """Exact rational value; only defined for integer exponents."""
        if self.is_zero:
            return Fraction(0)
        if isinstance(self.exp, Fraction) and self.exp.denominator != 1:
            raise DomainError("fractional-exponent norm has no rational value")
        e = int(self.exp)
        return Fraction(1, self.base**e) if e >= 0 else Fraction(self.base ** (-e))


def norm_max(norms: Iterable[UltraNorm], base: int) -> UltraNorm:
    best = UltraNorm.zero(base)
    for n in norms:
        if best.is_zero or (not n.is_zero and n.exp < best.exp):
            best = n
    return best


def padic_valuation(x: Rational, p: int) -> UltraNorm:
    """|x|_p as an UltraNorm: exponent v with |x|_p = p**(-v), v=inf for 0."""
    v = vp(x, p)
    return UltraNorm.zero(p) if v is INF else UltraNorm(p, v)


@dataclass(frozen=True, slots=True)
class FracClass:
    """An element of [0,1) with denominator a power of r: a class mod Z[1/r]/Z."""

    r: int
    value: Fraction

    def __post_init__(self):
        require_prime(self.r)
        if not (0 <= self.value < 1):
            raise DomainError(f"fractional part {self.value} not in [0,1)")
        if not _is_power_of(self.value.denominator, self.r):
            raise DomainError(
                f"denominator {self.value.denominator} is not a power of {self.r}"
            )


def _is_power_of(n: int, r: int) -> bool:
    while n % r == 0:
        n //= r
    return n == 1


def frac_part(x: Rational, r: int) -> FracClass:
    """Sum of the strictly negative-power digits of the r-adic expansion of x.

    Equivalently the unique y in [0,1) with denominator a power of r such
    that x - y is an r-adic integer.
    """
    require_prime(r)
    x = Fraction(x)
    if not _is_power_of(x.denominator, r):
        raise DomainError(f"{x} is not in Z[1/{r}]")
    d = x.denominator
    return FracClass(r, Fraction(x.numerator % d, d))


# ---------------------------------------------------------------------------
# Cyclotomic field elements
# ---------------------------------------------------------------------------


def _phi(r: int, level: int) -> int:
    return 1 if level == 0 else (r - 1) * r ** (level - 1)


def _reduce(r: int, level: int, raw: Mapping[int, Fraction]):
    """Fold arbitrary exponents into the canonical minimal-level power basis."""
    n = r**level
    work: dict[int, Fraction] = {}
    for k, c in raw.items():
        if c == 0:
            continue
        k %= n
        work[k] = work.get(k, Fraction(0)) + c
    if level == 0:
        c = work.get(0, Fraction(0))
        return 0, ({0: c} if c else {})
    phi = _phi(r, level)
    step = r ** (level - 1)
    out: dict[int, Fraction] = {}
    for k, c in work.items():
        if c == 0:
            continue
        if k < phi:
            out[k] = out.get(k, Fraction(0)) + c
        else:
            s = k - phi  # k = (r-1)*step + s with 0 <= s < step
            for j in range(r - 1):
                e = j * step + s
                out[e] = out.get(e, Fraction(0)) - c
    out = {k: c for k, c in out.items() if c != 0}
    while level > 0:
        if not out:
            level = 0
            break
        if all(k % r == 0 for k in out):
            out = {k // r: c for k, c in out.items()}
            level -= 1
        else:
            break
    return level, out


@dataclass(frozen=True, slots=True)
class Cyclotomic:
    """An element of Q(zeta_{r^level}) in reduced power-basis form.

    ``coeffs`` maps basis exponents to rational coefficients; the level is
    minimal, so equality is plain structural equality.
    """

    r: int
    level: int
    coeffs: tuple  # tuple[(exp, Fraction), ...] sorted by exp

    @classmethod
    def make(cls, r: int, level: int, raw: Mapping[int, Fraction]) -> "Cyclotomic":
        require_prime(r)
        lvl, out = _reduce(r, level, raw)
        return cls(r, lvl, tuple(sorted(out.items())))

    @classmethod
    def rational(cls, r: int, q: Rational) -> "Cyclotomic":
        return cls.make(r, 0, {0: Fraction(q)})

    @classmethod
    def zero(cls, r: int) -> "Cyclotomic":
        return cls.rational(r, 0)

    @classmethod
    def one(cls, r: int) -> "Cyclotomic":
        return cls.rational(r, 1)

    @classmethod
    def root(cls, r: int, level: int, exp: int = 1) -> "Cyclotomic":
        """zeta_{r^level}**exp, reduced."""
        return cls.make(r, level, {exp: Fraction(1)})

    # -- predicates ---------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def is_rational(self) -> bool:
        return self.level == 0

    def to_fraction(self) -> Fraction:
        if not self.is_rational:
            raise DomainError(f"{self} is not rational")
        return self.coeffs[0][1] if self.coeffs else Fraction(0)

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "Cyclotomic":
        if isinstance(other, Cyclotomic):
            if other.r != self.r and self.level > 0 and other.level > 0:
                raise InvalidArgument(
                    f"mixed root primes {self.r} and {other.r}"
                )
            return other
        if isinstance(other, (int, Fraction)):
            return Cyclotomic.rational(self.r, other)
        return NotImplemented  # type: ignore[return-value]

    def _common(self, other: "Cyclotomic"):
        r = self.r if self.level > 0 or other.level == 0 else other.r
        lvl = max(self.level, other.level)
        return r, lvl

    def _lifted(self, r: int, lvl: int) -> dict[int, Fraction]:
        scale = r ** (lvl - self.level)
        return {k * scale: c for k, c in self.coeffs}

    def __add__(self, other) -> "Cyclotomic":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        r, lvl = self._common(other)
        raw = self._lifted(r, lvl)
        for k, c in other._lifted(r, lvl).items():
            raw[k] = raw.get(k, Fraction(0)) + c
        return Cyclotomic.make(r, lvl, raw)

    __radd__ = __add__

    def __neg__(self) -> "Cyclotomic":
        return Cyclotomic(self.r, self.level, tuple((k, -c) for k, c in self.coeffs))

    def __sub__(self, other) -> "Cyclotomic":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Cyclotomic":
        return (-self) + other

    def __mul__(self, other) -> "Cyclotomic":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        r, lvl = self._common(other)
        a = self._lifted(r, lvl)
        b = other._lifted(r, lvl)
        n = r**lvl
        raw: dict[int, Fraction] = {}
        for k1, c1 in a.items():
            for k2, c2 in b.items():
                e = (k1 + k2) % n
                raw[e] = raw.get(e, Fraction(0)) + c1 * c2
        return Cyclotomic.make(r, lvl, raw)

    __rmul__ = __mul__

    def __pow__(self, e: int) -> "Cyclotomic":
        if e < 0:
            return self.inverse() ** (-e)
        acc = Cyclotomic.one(self.r)
        base = self
        while e:
            if e & 1:
                acc = acc * base
            base = base * base
            e >>= 1
        return acc

    def galois(self, t: int) -> "Cyclotomic":
        """The automorphism zeta -> zeta**t (t coprime to r)."""
        if self.level == 0:
            return self
        n = self.r**self.level
        if math.gcd(t, n) != 1:
            raise InvalidArgument(f"{t} is not a unit mod {n}")
        return Cyclotomic.make(
            self.r, self.level, {(k * t) % n: c for k, c in self.coeffs}
        )

    def inverse(self) -> "Cyclotomic":
        if self.is_zero:
            raise InvalidArgument("division by zero in the cyclotomic field")
        if self.level == 0:
            return Cyclotomic.rational(self.r, 1 / self.to_fraction())
        n = self.r**self.level
        prod = Cyclotomic.one(self.r)
        for t in range(2, n):
            if t % self.r != 0:
                prod = prod * self.galois(t)
        norm = self * prod
        return prod * (1 / norm.to_fraction())

    def __truediv__(self, other) -> "Cyclotomic":
        other = self._coerce(other)
        return self * other.inverse()

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            return self.is_rational and self.to_fraction() == other
        if not isinstance(other, Cyclotomic):
            return NotImplemented
        if self.level == 0 and other.level == 0:
            return self.coeffs == other.coeffs
        return (
            self.r == other.r
            and self.level == other.level
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        if self.level == 0:
            return hash(self.coeffs)
        return hash((self.r, self.level, self.coeffs))

    def __repr__(self):
        if self.is_zero:
            return "Cyc(0)"
        parts = []
        for k, c in self.coeffs:
            if k == 0:
                parts.append(f"{c}")
            else:
                parts.append(f"{c}*z{self.r}^{self.level}[{k}]")
        return "Cyc(" + " + ".join(parts) + ")"


def cyc_mul(a: Cyclotomic, b: Cyclotomic) -> Cyclotomic:
    """Exact product in Q(zeta); raises on mismatched root primes."""
    return a * b


def root_of_unity(e: FracClass) -> Cyclotomic:
    """The root of unity exp-map: a/r^M in lowest terms goes to zeta_{r^M}^a.

    A group homomorphism from (Z[1/r]/Z, +) to the r-power roots of unity.
    """
    a, d = e.value.numerator, e.value.denominator
    if a == 0:
        return Cyclotomic.one(e.r)
    level = 0
    while d > 1:
        d //= e.r
        level += 1
    return Cyclotomic.root(e.r, level, a)


def simplify_coeff(c):
    """Demote a rational-valued Cyclotomic to a plain Fraction."""
    if isinstance(c, Cyclotomic) and c.is_rational:
        return c.to_fraction()
    return c
