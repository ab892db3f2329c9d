"""Finite probability spaces with K-valued masses, orthogonal stochastic
measures and exact stochastic integrals.

The probability space is a product of independent two-outcome factors.  A
random variable is stored as a multilinear polynomial in the factor
coordinates s_k (the square of a two-outcome coordinate is an affine
expression in the coordinate, so products reduce), which gives exact
pointwise equality tests and exact expectations: monomials over independent
factors factorize into first moments.  Enumeration of outcome tuples is kept
only as the brute-force oracle and is capped.

Orthogonal increments are realized by coin factors with values +-1 and
masses 1/2 (norm 1 whenever p != 2); each increment of the stochastic
measure is c_k times its own coordinate, where c_k^2 is the structure
measure of the increment's atom, so orthogonality comes from independence
and zero means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iproduct
from typing import Callable, Iterable, Sequence

from .clopen_sets import Ball, ClopenSet, LocallyConstantFn, ProductFn, refine
from .errors import (
    DivisionByZeroAtom,
    DomainError,
    InvalidArgument,
    NonSquareAtom,
    RefineRequired,
    UnsupportedPrime,
)
from .measures import (
    AtomicMeasure,
    Decomposition,
    DensityMeasure,
    Measure,
    MeasureValue,
    from_decomposition,
    integrate,
)
from .padic_core import Cyclotomic, padic_valuation, require_prime, simplify_coeff

ENUMERATION_CAP = 2**20


@dataclass(frozen=True, slots=True)
class Factor:
    """An independent two-outcome coordinate s with exact masses."""

    outcomes: tuple  # (Fraction, Fraction), distinct values of s
    masses: tuple  # (Fraction, Fraction)

    def __post_init__(self):
        a, b = self.outcomes
        if a == b:
            raise InvalidArgument("factor outcomes must be distinct")
        if sum(self.masses) != 1:
            raise InvalidArgument("factor masses must sum to one")

    @classmethod
    def coin(cls) -> "Factor":
        return cls((Fraction(1), Fraction(-1)), (Fraction(1, 2), Fraction(1, 2)))

    def mean(self) -> Fraction:
        a, b = self.outcomes
        qa, qb = self.masses
        return a * qa + b * qb

    def second_moment(self) -> Fraction:
        a, b = self.outcomes
        qa, qb = self.masses
        return a * a * qa + b * b * qb

    def square_reduction(self) -> tuple:
        """s^2 = e + f s with f = a + b and e = -ab (Vieta)."""
        a, b = self.outcomes
        return -a * b, a + b


@dataclass(frozen=True, slots=True)
class FiniteProbSpace:
    """A product of independent factors with |P({omega})|_p <= 1 and total
    mass one; the subset norm of P is then exactly one."""

    p: int
    factors: tuple

    def __post_init__(self):
        require_prime(self.p)
        for k, f in enumerate(self.factors):
            for q in f.masses:
                n = padic_valuation(q, self.p)
                if not n.is_zero and n.exp < 0:
                    raise InvalidArgument(
                        f"factor {k} mass {q} has norm above one at p={self.p}"
                    )

    def outcome_mass(self, assignment: Sequence[int]) -> Fraction:
        total = Fraction(1)
        for f, i in zip(self.factors, assignment):
            total *= f.masses[i]
        return total


def _cadd(a, b):
    return simplify_coeff(a + b)


def _cmul(a, b):
    return simplify_coeff(a * b)


@dataclass(frozen=True, slots=True)
class RandomVariable:
    """A multilinear polynomial in the factor coordinates of a space.

    ``terms`` maps sorted factor-index tuples to nonzero coefficients
    (rationals, or cyclotomics for character-valued variables).
    """

    space: FiniteProbSpace
    terms: tuple  # tuple[(tuple[int, ...], coeff), ...] sorted by monomial

    @classmethod
    def build(cls, space: FiniteProbSpace, raw: dict) -> "RandomVariable":
        clean = {}
        for mono, c in raw.items():
            c = simplify_coeff(c)
            if isinstance(c, Cyclotomic):
                if c.is_zero:
                    continue
            elif c == 0:
                continue
            mono = tuple(sorted(mono))
            if len(set(mono)) != len(mono):
                raise InvalidArgument("monomials must be multilinear")
            for k in mono:
                if not (0 <= k < len(space.factors)):
                    raise InvalidArgument(f"factor index {k} out of range")
            clean[mono] = c
        return cls(space, tuple(sorted(clean.items(), key=lambda kv: kv[0])))

    @classmethod
    def constant(cls, space: FiniteProbSpace, c) -> "RandomVariable":
        return cls.build(space, {(): c})

    @classmethod
    def coordinate(cls, space: FiniteProbSpace, k: int, scale=Fraction(1)) -> "RandomVariable":
        return cls.build(space, {(k,): scale})

    # -- ring operations ------------------------------------------------------

    def _check(self, other: "RandomVariable"):
        if self.space != other.space:
            raise InvalidArgument("random variables live on different spaces")

    def __add__(self, other):
        if isinstance(other, (int, Fraction, Cyclotomic)):
            other = RandomVariable.constant(self.space, other)
        self._check(other)
        raw = dict(self.terms)
        for mono, c in other.terms:
            raw[mono] = _cadd(raw[mono], c) if mono in raw else c
        return RandomVariable.build(self.space, raw)

    __radd__ = __add__

    def __neg__(self):
        return RandomVariable.build(self.space, {m: -c for m, c in self.terms})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction, Cyclotomic)):
            other = RandomVariable.constant(self.space, other)
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, Cyclotomic)):
            return RandomVariable.build(
                self.space, {m: _cmul(c, other) for m, c in self.terms}
            )
        self._check(other)
        raw: dict = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                for mono, extra in _mono_mul(self.space, m1, m2):
                    c = _cmul(_cmul(c1, c2), extra)
                    raw[mono] = _cadd(raw[mono], c) if mono in raw else c
        return RandomVariable.build(self.space, raw)

    __rmul__ = __mul__

    # -- analysis --------------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def touched(self) -> tuple:
        out = set()
        for mono, _ in self.terms:
            out.update(mono)
        return tuple(sorted(out))

    def expectation(self):
        """Exact mean: monomials factorize into per-factor first moments."""
        total = Fraction(0)
        for mono, c in self.terms:
            scale = Fraction(1)
            for k in mono:
                scale *= self.space.factors[k].mean()
                if scale == 0:
                    break
            if scale != 0:
                total = _cadd(total, _cmul(c, scale))
        return simplify_coeff(total)

    def value_at(self, assignment: dict):
        """Evaluate at outcome indices {factor: 0 or 1} for touched factors."""
        total = Fraction(0)
        for mono, c in self.terms:
            scale = Fraction(1)
            for k in mono:
                if k not in assignment:
                    raise InvalidArgument(f"assignment misses factor {k}")
                scale *= self.space.factors[k].outcomes[assignment[k]]
            total = _cadd(total, _cmul(c, scale))
        return simplify_coeff(total)

    def table(self) -> dict:
        """Brute-force table over the touched factors (the oracle path)."""
        ks = self.touched()
        if 2 ** len(ks) > ENUMERATION_CAP:
            raise InvalidArgument("outcome enumeration exceeds the cap")
        out = {}
        for bits in iproduct((0, 1), repeat=len(ks)):
            assignment = dict(zip(ks, bits))
            out[bits] = self.value_at(assignment)
        return out

    def brute_expectation(self):
        """Oracle: enumerate outcomes of touched factors, weight by masses."""
        ks = self.touched()
        if 2 ** len(ks) > ENUMERATION_CAP:
            raise InvalidArgument("outcome enumeration exceeds the cap")
        total = Fraction(0)
        for bits in iproduct((0, 1), repeat=len(ks)):
            assignment = dict(zip(ks, bits))
            mass = Fraction(1)
            for k, i in assignment.items():
                mass *= self.space.factors[k].masses[i]
            total = _cadd(total, _cmul(self.value_at(assignment), mass))
        return simplify_coeff(total)


def _mono_mul(space: FiniteProbSpace, m1: tuple, m2: tuple):
    """Product of two multilinear monomials as multilinear (monomial, coeff)
    pairs, using s^2 = e + f s per repeated factor."""
    common = set(m1) & set(m2)
    base = tuple(sorted(set(m1) ^ set(m2)))
    parts = [(base, Fraction(1))]
    for k in common:
        e, f = space.factors[k].square_reduction()
        new = []
        for mono, co in parts:
            if e != 0:
                new.append((mono, co * e))
            if f != 0:
                new.append((tuple(sorted(mono + (k,))), co * f))
        parts = new
    return parts


def expectation(xi: RandomVariable):
    return xi.expectation()


# ---------------------------------------------------------------------------
# orthogonal stochastic measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Increment:
    """One increment site: a ball at the atom level, or an exact point."""

    ball: object  # Ball | None
    point: object  # Fraction | None
    c: Fraction
    factor: int

    def in_set(self, a: ClopenSet):
        """True/False membership, or raise when a ball site is split."""
        if self.point is not None:
            return a.contains_point(self.point)
        covered = a.covers_ball(self.ball)
        if covered:
            return True
        if any(self.ball.contains_ball(b) and self.ball != b for b in a.balls):
            raise RefineRequired(
                f"set splits the increment ball {self.ball}; rebuild at a deeper level"
            )
        return False


@dataclass(frozen=True, slots=True)
class OrthStochMeasure:
    """An additive family of K-valued random variables indexed by clopen
    sets, orthogonal across disjoint sets, with a structure measure."""

    space: FiniteProbSpace
    r: int
    m0: int
    p: int
    atom_level: object  # int | None (None when all sites are points)
    increments: tuple
    structure: Measure

    def ambient(self) -> ClopenSet:
        return ClopenSet.whole(self.r, self.m0)

    def eval_set(self, a: ClopenSet) -> RandomVariable:
        if (a.r, a.m0) != (self.r, self.m0):
            raise InvalidArgument("set lives on a different ambient ball")
        raw: dict = {}
        for inc in self.increments:
            if inc.c != 0 and inc.in_set(a):
                raw[(inc.factor,)] = raw.get((inc.factor,), Fraction(0)) + inc.c
        return RandomVariable.build(self.space, raw)

    def eval_whole(self) -> RandomVariable:
        return self.eval_set(self.ambient())


def _exact_sqrt(x: Fraction):
    if x < 0:
        return None
    ns, ds = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if ns * ns != x.numerator or ds * ds != x.denominator:
        return None
    return Fraction(ns, ds)


def build_orthogonal_measure(
    mu: Measure, level: int | None = None, factor_template: Factor | None = None
) -> OrthStochMeasure:
    """Construct increments c_k s_k with c_k^2 the structure mass per atom.

    Every atom mass of mu must be the square of a rational.  For an
    invariant-measure structure this means even levels (masses r^(-2m)).
    The default coin factors need p != 2; callers at p = 2 must supply a
    factor template with zero mean, unit second moment and p-integral masses.
    """
    if factor_template is None:
        if mu.p == 2:
            raise UnsupportedPrime(
                "no default factor has subset norm one at p=2; supply a custom "
                "two-outcome factor with zero mean and unit second moment"
            )
        factor_template = Factor.coin()
    if factor_template.mean() != 0:
        raise InvalidArgument("factor template must have zero mean")
    if factor_template.second_moment() != 1:
        raise InvalidArgument("factor template must have unit second moment")

    dec = mu.decompose()
    if mu.shape != ():
        raise InvalidArgument("structure measures must be scalar-valued")
    sites: list = []
    if dec.density:
        if level is None:
            raise InvalidArgument("a density structure measure needs an atom level")
        if level < dec.level:
            raise InvalidArgument("atom level is coarser than the density level")
        for atom in refine(ClopenSet.whole(mu.r, mu.m0), level):
            # the density part only: point masses get their own increments
            d = dec.density.get(Ball.around(mu.r, mu.m0, dec.level, atom.center))
            mass = d.to_fraction() * atom.haar_mass() if d is not None else Fraction(0)
            sites.append(("ball", atom, mass))
    for pt, m in sorted(dec.atoms.items()):
        mass = m.to_fraction()
        sites.append(("point", pt, mass))

    incs = []
    factors = []
    for idx, (kind, site, mass) in enumerate(sites):
        c = _exact_sqrt(mass)
        if c is None:
            raise NonSquareAtom(f"atom {site} has non-square mass {mass}")
        factors.append(factor_template)
        incs.append(
            Increment(
                ball=site if kind == "ball" else None,
                point=site if kind == "point" else None,
                c=c,
                factor=idx,
            )
        )
    space = FiniteProbSpace(mu.p, tuple(factors))
    return OrthStochMeasure(
        space=space,
        r=mu.r,
        m0=mu.m0,
        p=mu.p,
        atom_level=level if dec.density else None,
        increments=tuple(incs),
        structure=mu,
    )


def verify_m_conditions(
    xi: OrthStochMeasure, max_level: int | None = None, balls: Sequence[Ball] | None = None
) -> dict:
    """Exhaustive check of the orthogonal-measure axioms on ball pairs.

    Verifies the empty-set value, pointwise additivity over disjoint pairs,
    the second-moment identity against the structure measure, and
    orthogonality across disjoint pairs.  Exact; failures are named.
    """
    if balls is None:
        if max_level is None:
            max_level = xi.atom_level if xi.atom_level is not None else 1
        if xi.atom_level is not None and max_level > xi.atom_level:
            raise InvalidArgument("max level exceeds the increment atom level")
        balls = []
        g = Ball.whole(xi.r, xi.m0)
        for lvl in range(-xi.m0, max_level + 1):
            balls.extend(g.subdivide(lvl))
    report = {
        "empty-set-vanishes": True,
        "additive-on-disjoint-pairs": True,
        "second-moment-is-structure-measure": True,
        "orthogonal-on-disjoint-pairs": True,
        "failures": [],
    }

    def fail(which, detail):
        report[which] = False
        report["failures"].append(f"{which}: {detail}")

    empty = xi.eval_set(ClopenSet.empty(xi.r, xi.m0))
    if not empty.is_zero:
        fail("empty-set-vanishes", "value on the empty set is not zero")

    sets = [ClopenSet(xi.r, xi.m0, (b,)) for b in balls]
    for i, a in enumerate(sets):
        xa = xi.eval_set(a)
        for b_set in sets[i:]:
            inter = a.intersect(b_set)
            xb = xi.eval_set(b_set)
            lhs = (xa * xb).expectation()
            rhs = xi.structure.eval_set(inter).to_fraction()
            if lhs != rhs:
                fail(
                    "second-moment-is-structure-measure",
                    f"pair {a.balls} {b_set.balls}: {lhs} != {rhs}",
                )
            if inter.is_empty:
                if lhs != 0:
                    fail("orthogonal-on-disjoint-pairs", f"pair {a.balls} {b_set.balls}")
                union = a.union(b_set)
                if xi.eval_set(union) != xa + xb:
                    fail("additive-on-disjoint-pairs", f"pair {a.balls} {b_set.balls}")
    report["passed"] = not report["failures"]
    return report


# ---------------------------------------------------------------------------
# stochastic integrals
# ---------------------------------------------------------------------------


def _site_value(f: LocallyConstantFn, inc: Increment):
    if inc.point is not None:
        return f.value_at(inc.point)
    if f.level > inc.ball.level:
        raise RefineRequired(
            "integrand is finer than the increment atoms; rebuild the "
            "stochastic measure at a deeper level"
        )
    return f.value_at(inc.ball.center)


def stochastic_integral(f: LocallyConstantFn, xi: OrthStochMeasure) -> RandomVariable:
    """Sum of f(site) c_k s_k; K-linear in f by construction."""
    raw: dict = {}
    for inc in xi.increments:
        v = _site_value(f, inc)
        coeff = _cmul(v, inc.c)
        if inc.c != 0:
            raw[(inc.factor,)] = _cadd(raw.get((inc.factor,), Fraction(0)), coeff)
    return RandomVariable.build(xi.space, raw)


def isometry_identity_check(
    f: LocallyConstantFn, g: LocallyConstantFn, xi: OrthStochMeasure
) -> tuple:
    """Mean of the product of two stochastic integrals against the integral
    of the pointwise product by the structure measure; exact equality."""
    lhs = (stochastic_integral(f, xi) * stochastic_integral(g, xi)).expectation()
    rhs = integrate(f * g, xi.structure)
    rhs = rhs.to_fraction() if isinstance(rhs, MeasureValue) else rhs
    return lhs, rhs, lhs == rhs


def weighted_measure(xi: OrthStochMeasure, g: LocallyConstantFn) -> tuple:
    """The reweighted stochastic measure rho(A) = integral of Ch_A g dxi and
    its structure measure, the density g^2 against xi's structure."""
    incs = []
    for inc in xi.increments:
        v = _site_value(g, inc)
        if isinstance(v, Cyclotomic):
            raise InvalidArgument("weights must be scalar rationals")
        incs.append(Increment(inc.ball, inc.point, inc.c * v, inc.factor))
    dec = xi.structure.decompose()
    lvl = max(dec.level, g.level)
    density = {}
    for atom, d in dec.density.items():
        for child in atom.subdivide(lvl):
            w = g.value_at(child.center)
            val = d.scale(w * w)
            if not val.is_zero:
                density[child] = val
    atoms = {}
    for pt, m in dec.atoms.items():
        w = g.value_at(pt)
        val = m.scale(w * w)
        if not val.is_zero:
            atoms[pt] = val
    nu = from_decomposition(xi.r, xi.m0, xi.p, (), Decomposition(lvl, density, atoms))
    rho = OrthStochMeasure(
        space=xi.space,
        r=xi.r,
        m0=xi.m0,
        p=xi.p,
        atom_level=xi.atom_level,
        increments=tuple(incs),
        structure=nu,
    )
    return rho, nu


def invert_weighted(rho: OrthStochMeasure, g: LocallyConstantFn, a: ClopenSet) -> RandomVariable:
    """Recover xi(A) from the reweighted measure: integrate Ch_A / g d(rho).

    Refuses with a named atom wherever g vanishes on A: such an atom is null
    for rho's structure measure and carries no invertible information.
    """
    raw: dict = {}
    for inc in rho.increments:
        if not inc.in_set(a):
            continue
        w = _site_value(g, inc)
        if w == 0:
            site = inc.ball if inc.ball is not None else inc.point
            raise DivisionByZeroAtom(f"weight vanishes on atom {site}")
        coeff = inc.c / w
        if coeff != 0:
            raw[(inc.factor,)] = _cadd(raw.get((inc.factor,), Fraction(0)), coeff)
    return RandomVariable.build(rho.space, raw)


def stochastic_fubini(
    z: LocallyConstantFn,
    g: ProductFn,
    xi: OrthStochMeasure,
    h: Measure,
) -> tuple:
    """Integration order swap between a scalar measure on T and a stochastic
    measure on G: both sides are computed as finite sums of random variables
    and compared pointwise on the whole outcome space."""
    dec = h.decompose()
    lt = max(z.level, g.level_left, dec.level)
    if xi.atom_level is not None and g.level_right > xi.atom_level:
        raise RefineRequired("product weight is finer than the increment atoms")
    z = z.refine_to(lt)
    g = g.refine_to(lt, g.level_right)
    table = g.as_dict()
    t_atoms = sorted({a for (a, _) in table}, key=lambda b: (b.level, b.center))

    def g_fn_at(t_atom) -> LocallyConstantFn:
        pairs = [(b, v) for (a, b), v in table.items() if a == t_atom]
        return LocallyConstantFn.from_pairs(g.level_right, pairs)

    lhs = RandomVariable.constant(xi.space, Fraction(0))
    for t_atom in t_atoms:
        inner = stochastic_integral(g_fn_at(t_atom), xi)
        weight = z.value_at(t_atom.center) * h.eval_ball(t_atom).to_fraction()
        lhs = lhs + inner * weight

    # q(y) = integral over T of z(t) g(t, y) h(dt), per increment site
    raw: dict = {}
    for inc in xi.increments:
        q = Fraction(0)
        for t_atom in t_atoms:
            gy = _site_value(g_fn_at(t_atom), inc)
            q += z.value_at(t_atom.center) * gy * h.eval_ball(t_atom).to_fraction()
        coeff = q * inc.c
        if coeff != 0:
            raw[(inc.factor,)] = _cadd(raw.get((inc.factor,), Fraction(0)), coeff)
    rhs = RandomVariable.build(xi.space, raw)
    return lhs, rhs, lhs == rhs
