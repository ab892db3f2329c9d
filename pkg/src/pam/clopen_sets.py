"""Clopen balls of a compact ultrametric ball G = r^(-m0) Z_r and their ring.

A ball at level n is {x : |x - center|_r <= r^(-n)}; two balls are nested or
disjoint, never partially overlapping, so every ring element has a canonical
form: a sorted list of pairwise disjoint balls in which no complete family of
r siblings survives (such a family is merged into its parent).

Points are restricted to Z[1/r], where membership and distance are decidable
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import DomainError, InvalidArgument
from .padic_core import require_prime, vp


def _vr(x: Fraction, r: int):
    return vp(x, r)


def check_point(x, r: int) -> Fraction:
    """Validate an exactly-representable point: denominator a power of r."""
    x = Fraction(x)
    d = x.denominator
    while d % r == 0:
        d //= r
    if d != 1:
        raise DomainError(f"point {x} is not in Z[1/{r}]")
    return x


@dataclass(frozen=True, slots=True, order=True)
class Ball:
    """A clopen ball; ordering is by (level, center) within one ambient."""

    r: int
    m0: int
    level: int
    center: Fraction

    def __post_init__(self):
        require_prime(self.r)
        if self.m0 < 0:
            raise InvalidArgument("ambient scale m0 must be >= 0")
        if self.level < -self.m0:
            raise InvalidArgument(
                f"level {self.level} below the ambient ball level {-self.m0}"
            )
        k = self.center * self.r**self.m0
        if k.denominator != 1 or not (0 <= k < self.r ** (self.level + self.m0)):
            raise InvalidArgument(f"non-canonical center {self.center}")

    @classmethod
    def around(cls, r: int, m0: int, level: int, point) -> "Ball":
        """The level-`level` ball containing `point`, canonical center."""
        x = check_point(point, r)
        if _vr(x, r) < -m0:
            raise DomainError(f"point {x} outside the ambient ball")
        k = x * r**m0  # an integer by the valuation check
        c = Fraction(int(k) % r ** (level + m0), r**m0)
        return cls(r, m0, level, c)

    @classmethod
    def whole(cls, r: int, m0: int = 0) -> "Ball":
        return cls(r, m0, -m0, Fraction(0))

    def contains_point(self, x) -> bool:
        x = check_point(x, self.r)
        return _vr(x - self.center, self.r) >= self.level

    def contains_ball(self, other: "Ball") -> bool:
        self._same_ambient(other)
        return other.level >= self.level and self.contains_point(other.center)

    def meets(self, other: "Ball") -> bool:
        return self.contains_ball(other) or other.contains_ball(self)

    def _same_ambient(self, other: "Ball") -> None:
        if (self.r, self.m0) != (other.r, other.m0):
            raise InvalidArgument("mixed ambient balls")

    def children(self) -> list["Ball"]:
        step = Fraction(self.r) ** self.level
        return [
            Ball(self.r, self.m0, self.level + 1, self.center + j * step)
            for j in range(self.r)
        ]

    def parent(self) -> "Ball":
        if self.level <= -self.m0:
            raise InvalidArgument("the ambient ball has no parent")
        return Ball.around(self.r, self.m0, self.level - 1, self.center)

    def subdivide(self, level: int) -> list["Ball"]:
        """All level-`level` balls whose union is this ball."""
        if level < self.level:
            raise InvalidArgument(
                f"target level {level} is below ball level {self.level}"
            )
        step = Fraction(self.r) ** self.level
        return [
            Ball(self.r, self.m0, level, self.center + j * step)
            for j in range(self.r ** (level - self.level))
        ]

    def translate(self, t) -> "Ball":
        """The ball shifted by t (stays inside the ambient group ball)."""
        return Ball.around(self.r, self.m0, self.level, self.center + Fraction(t))

    def haar_mass(self) -> Fraction:
        """Mass under the unit translation-invariant measure on G."""
        return Fraction(1, self.r ** (self.level + self.m0))


def ball_contains(b: Ball, x) -> bool:
    """Membership of an exactly-representable point in a ball."""
    return b.contains_point(x)


@dataclass(frozen=True, slots=True)
class ClopenSet:
    """A ring element in canonical form: disjoint balls, complete sibling
    families merged, sorted by (level, center)."""

    r: int
    m0: int
    balls: tuple

    @classmethod
    def empty(cls, r: int, m0: int = 0) -> "ClopenSet":
        return cls(r, m0, ())

    @classmethod
    def whole(cls, r: int, m0: int = 0) -> "ClopenSet":
        return cls(r, m0, (Ball.whole(r, m0),))

    @classmethod
    def of(cls, balls: Iterable[Ball], r: int | None = None, m0: int | None = None) -> "ClopenSet":
        return canonicalize(list(balls), r=r, m0=m0)

    @property
    def is_empty(self) -> bool:
        return not self.balls

    def contains_point(self, x) -> bool:
        return any(b.contains_point(x) for b in self.balls)

    def covers_ball(self, b: Ball) -> bool:
        return any(ball.contains_ball(b) for ball in self.balls)

    def max_level(self) -> int:
        return max((b.level for b in self.balls), default=-self.m0)

    def union(self, other: "ClopenSet") -> "ClopenSet":
        self._same_ambient(other)
        return canonicalize(list(self.balls) + list(other.balls), r=self.r, m0=self.m0)

    def intersect(self, other: "ClopenSet") -> "ClopenSet":
        self._same_ambient(other)
        out = []
        for a in self.balls:
            for b in other.balls:
                if a.contains_ball(b):
                    out.append(b)
                elif b.contains_ball(a):
                    out.append(a)
        return canonicalize(out, r=self.r, m0=self.m0)

    def difference(self, other: "ClopenSet") -> "ClopenSet":
        self._same_ambient(other)
        out = []
        for a in self.balls:
            pieces = [a]
            for b in other.balls:
                pieces = [p for piece in pieces for p in _ball_minus_ball(piece, b)]
            out.extend(pieces)
        return canonicalize(out, r=self.r, m0=self.m0)

    def complement(self) -> "ClopenSet":
        return ClopenSet.whole(self.r, self.m0).difference(self)

    def _same_ambient(self, other: "ClopenSet") -> None:
        if (self.r, self.m0) != (other.r, other.m0):
            raise InvalidArgument("mixed ambients in set algebra")

    def __iter__(self):
        return iter(self.balls)


def _ball_minus_ball(a: Ball, b: Ball) -> list[Ball]:
    """a \\ b as a list of disjoint balls (ultrametric tree subtraction)."""
    if b.contains_ball(a):
        return []
    if not a.contains_ball(b):
        return [a]
    out = []
    cur = a
    while cur.level < b.level:
        for child in cur.children():
            if child.contains_point(b.center):
                keep = child
            else:
                out.append(child)
        cur = keep
    return out


def canonicalize(balls: Sequence[Ball], r: int | None = None, m0: int | None = None) -> ClopenSet:
    """Canonical form: absorb nested balls, merge complete sibling families."""
    balls = list(balls)
    if not balls:
        if r is None or m0 is None:
            raise InvalidArgument("empty set needs an explicit ambient (r, m0)")
        return ClopenSet(r, m0, ())
    r0, m00 = balls[0].r, balls[0].m0
    if r is not None and (r0, m00) != (r, m0):
        raise InvalidArgument("balls do not match the requested ambient")
    for b in balls:
        if (b.r, b.m0) != (r0, m00):
            raise InvalidArgument("mixed ambients among balls")
    # absorb nested balls into the outermost ones
    kept: list[Ball] = []
    for b in sorted(set(balls), key=lambda b: (b.level, b.center)):
        if not any(k.contains_ball(b) for k in kept):
            kept.append(b)
    # merge complete sibling families upward until a fixed point
    while True:
        by_parent: dict[Ball, list[Ball]] = {}
        for b in kept:
            if b.level > -m00:
                by_parent.setdefault(b.parent(), []).append(b)
        merged = False
        for parent, kids in by_parent.items():
            if len(kids) == r0:
                kept = [b for b in kept if b not in kids] + [parent]
                merged = True
        if not merged:
            break
    return ClopenSet(r0, m00, tuple(sorted(kept, key=lambda b: (b.level, b.center))))


def set_algebra(a: ClopenSet, b: ClopenSet, op: str) -> ClopenSet:
    """Exact Boolean-ring operations; complement is relative to G."""
    if op == "union":
        return a.union(b)
    if op == "intersect":
        return a.intersect(b)
    if op == "difference":
        return a.difference(b)
    if op == "complement":
        return a.complement()
    raise InvalidArgument(f"unknown set operation {op!r}")


def refine(s: ClopenSet, level: int) -> list[Ball]:
    """The level-`level` balls whose disjoint union is s."""
    if not s.is_empty and level < s.max_level():
        raise InvalidArgument(f"refinement level {level} below an existing level")
    out = []
    for b in s.balls:
        out.extend(b.subdivide(level))
    return sorted(out, key=lambda b: b.center)


def all_balls(r: int, m0: int, max_level: int) -> list[Ball]:
    """Every ball of G with level between -m0 and max_level."""
    out = []
    g = Ball.whole(r, m0)
    for lvl in range(-m0, max_level + 1):
        out.extend(g.subdivide(lvl))
    return out


@dataclass(frozen=True, slots=True)
class LocallyConstantFn:
    """A function constant on the level-`level` atoms listed in `values`.

    Atoms missing from `values` are outside the domain.  Values may be
    rationals, measure values, or cyclotomics; the container is agnostic.
    """

    level: int
    values: tuple  # tuple[(Ball, value), ...] sorted by atom

    def __post_init__(self):
        seen = set()
        for atom, _ in self.values:
            if atom.level != self.level:
                raise InvalidArgument("atom level differs from the function level")
            if atom in seen:
                raise InvalidArgument(f"duplicate atom {atom}")
            seen.add(atom)

    @classmethod
    def from_pairs(cls, level: int, pairs) -> "LocallyConstantFn":
        return cls(level, tuple(sorted(pairs, key=lambda kv: (kv[0].level, kv[0].center))))

    @classmethod
    def constant(cls, domain: ClopenSet, value, level: int | None = None) -> "LocallyConstantFn":
        lvl = domain.max_level() if level is None else level
        return cls.from_pairs(lvl, [(a, value) for a in refine(domain, lvl)])

    @property
    def ambient(self):
        if not self.values:
            raise InvalidArgument("empty function has no ambient")
        b = self.values[0][0]
        return b.r, b.m0

    def domain(self) -> ClopenSet:
        r, m0 = self.ambient
        return canonicalize([a for a, _ in self.values], r=r, m0=m0)

    def as_dict(self) -> dict:
        return dict(self.values)

    def value_at(self, x):
        r, m0 = self.ambient
        atom = Ball.around(r, m0, self.level, x)
        table = self.as_dict()
        if atom not in table:
            raise DomainError(f"point {x} outside the function domain")
        return table[atom]

    def value_on(self, b: Ball):
        """Value on a ball at level >= the function level."""
        if b.level < self.level:
            raise InvalidArgument("ball is coarser than the function level")
        return self.value_at(b.center)

    def refine_to(self, level: int) -> "LocallyConstantFn":
        if level < self.level:
            raise InvalidArgument("cannot coarsen a locally constant function")
        if level == self.level:
            return self
        pairs = []
        for atom, v in self.values:
            for child in atom.subdivide(level):
                pairs.append((child, v))
        return LocallyConstantFn.from_pairs(level, pairs)

    def _aligned(self, other: "LocallyConstantFn"):
        lvl = max(self.level, other.level)
        a, b = self.refine_to(lvl), other.refine_to(lvl)
        da, db = a.as_dict(), b.as_dict()
        if set(da) != set(db):
            raise InvalidArgument("functions live on different domains")
        return lvl, da, db

    def __add__(self, other: "LocallyConstantFn") -> "LocallyConstantFn":
        lvl, da, db = self._aligned(other)
        return LocallyConstantFn.from_pairs(lvl, [(a, da[a] + db[a]) for a in da])

    def __sub__(self, other: "LocallyConstantFn") -> "LocallyConstantFn":
        lvl, da, db = self._aligned(other)
        return LocallyConstantFn.from_pairs(lvl, [(a, da[a] - db[a]) for a in da])

    def __mul__(self, other):
        if isinstance(other, LocallyConstantFn):
            lvl, da, db = self._aligned(other)
            return LocallyConstantFn.from_pairs(lvl, [(a, da[a] * db[a]) for a in da])
        return LocallyConstantFn.from_pairs(
            self.level, [(a, v * other) for a, v in self.values]
        )

    def map_values(self, fn) -> "LocallyConstantFn":
        return LocallyConstantFn.from_pairs(self.level, [(a, fn(v)) for a, v in self.values])


def indicator(domain_set: ClopenSet, ambient: ClopenSet | None = None, level: int | None = None,
              one=Fraction(1), zero=Fraction(0)) -> LocallyConstantFn:
    """Ch_A on the ambient (default: the whole ball G) at a given level."""
    r, m0 = domain_set.r, domain_set.m0
    amb = ambient if ambient is not None else ClopenSet.whole(r, m0)
    lvl = max(domain_set.max_level(), amb.max_level(), -m0 if level is None else level)
    pairs = []
    for atom in refine(amb, lvl):
        pairs.append((atom, one if domain_set.covers_ball(atom) else zero))
    return LocallyConstantFn.from_pairs(lvl, pairs)


@dataclass(frozen=True, slots=True)
class ProductFn:
    """A locally constant function on a product G x H, given on atom pairs."""

    level_left: int
    level_right: int
    values: tuple  # tuple[((Ball, Ball), value), ...]

    @classmethod
    def from_dict(cls, ll: int, lr: int, table: dict) -> "ProductFn":
        items = tuple(
            sorted(
                table.items(),
                key=lambda kv: (kv[0][0].level, kv[0][0].center, kv[0][1].level, kv[0][1].center),
            )
        )
        return cls(ll, lr, items)

    def as_dict(self) -> dict:
        return dict(self.values)

    def refine_to(self, ll: int, lr: int) -> "ProductFn":
        if ll < self.level_left or lr < self.level_right:
            raise InvalidArgument("cannot coarsen a product function")
        table = {}
        for (a, b), v in self.values:
            for ca in a.subdivide(ll):
                for cb in b.subdivide(lr):
                    table[(ca, cb)] = v
        return ProductFn.from_dict(ll, lr, table)
