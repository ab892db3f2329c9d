"""Finitely additive measures on the ball ring with exact norms and integrals.

Measures are intensional (translation-invariant, density, atomic, or sums),
so they are defined on balls of every level, and each one exposes a canonical
decomposition

    mu = (density at one working level against the unit invariant measure)
         + (finitely many point masses),

from which evaluation, the subset supremum norm and the pointwise weight are
computed by finite reductions:

  * the sup of u(mu(B)) over ring subsets B of A reduces to the maximum of
    u(density) over working-level atoms meeting A together with u(mass) over
    point masses in A.  Unions never exceed single pieces by the strong
    triangle inequality, a single piece is isolated by a small ball because
    the ring separates points, and refining below the working level keeps the
    norm constant because |r^(-k)|_p = 1 when gcd(r, p) = 1.  The reduction
    is unit-tested against brute-force subset enumeration.

  * the pointwise weight (the infimum of subset norms over balls containing
    the point) is the stationary value of the descending ball chain, reached
    at the working level once every other point mass has been excluded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .clopen_sets import Ball, ClopenSet, LocallyConstantFn, ProductFn, check_point, refine
from .errors import DomainError, InvalidArgument
from .padic_core import UltraNorm, norm_max, padic_valuation, require_prime, vp

SCALAR = ()


@dataclass(frozen=True, slots=True)
class MeasureValue:
    """A scalar, vector or square-matrix value with exact rational entries.

    The seminorm u is the max-entry p-adic norm; for scalars it is |.|_p.
    """

    p: int
    shape: tuple  # (), (n,), or (n, n)
    entries: tuple  # flattened Fractions, row-major for matrices

    def __post_init__(self):
        require_prime(self.p)
        n = 1
        for d in self.shape:
            n *= d
        if len(self.entries) != n:
            raise InvalidArgument("entry count does not match the shape")

    @classmethod
    def scalar(cls, p: int, x) -> "MeasureValue":
        return cls(p, SCALAR, (Fraction(x),))

    @classmethod
    def vector(cls, p: int, xs: Sequence) -> "MeasureValue":
        xs = tuple(Fraction(x) for x in xs)
        return cls(p, (len(xs),), xs)

    @classmethod
    def matrix(cls, p: int, rows: Sequence[Sequence]) -> "MeasureValue":
        n = len(rows)
        flat = []
        for row in rows:
            if len(row) != n:
                raise InvalidArgument("matrix must be square")
            flat.extend(Fraction(x) for x in row)
        return cls(p, (n, n), tuple(flat))

    @classmethod
    def zero(cls, p: int, shape: tuple) -> "MeasureValue":
        n = 1
        for d in shape:
            n *= d
        return cls(p, shape, (Fraction(0),) * n)

    @property
    def is_zero(self) -> bool:
        return all(e == 0 for e in self.entries)

    def to_fraction(self) -> Fraction:
        if self.shape != SCALAR:
            raise InvalidArgument("not a scalar value")
        return self.entries[0]

    def rows(self):
        n = self.shape[0]
        return [list(self.entries[i * n : (i + 1) * n]) for i in range(n)]

    def _check(self, other: "MeasureValue"):
        if self.p != other.p:
            raise InvalidArgument("mixed value primes")

    def __add__(self, other: "MeasureValue") -> "MeasureValue":
        self._check(other)
        if self.shape != other.shape:
            raise InvalidArgument("shape mismatch in value addition")
        return MeasureValue(
            self.p, self.shape, tuple(a + b for a, b in zip(self.entries, other.entries))
        )

    def __sub__(self, other: "MeasureValue") -> "MeasureValue":
        return self + (-other)

    def __neg__(self) -> "MeasureValue":
        return MeasureValue(self.p, self.shape, tuple(-a for a in self.entries))

    def scale(self, c) -> "MeasureValue":
        c = Fraction(c)
        return MeasureValue(self.p, self.shape, tuple(c * a for a in self.entries))

    def __mul__(self, other: "MeasureValue") -> "MeasureValue":
        """Shape-dispatched product: scalars scale, matrices multiply."""
        self._check(other)
        if self.shape == SCALAR:
            return other.scale(self.entries[0])
        if other.shape == SCALAR:
            return self.scale(other.entries[0])
        if len(self.shape) == 2 and self.shape == other.shape:
            n = self.shape[0]
            a, b = self.rows(), other.rows()
            out = [
                [sum((a[i][k] * b[k][j] for k in range(n)), Fraction(0)) for j in range(n)]
                for i in range(n)
            ]
            return MeasureValue.matrix(self.p, out)
        raise InvalidArgument(f"no product for shapes {self.shape} and {other.shape}")

    def unorm(self) -> UltraNorm:
        """Max-entry non-archimedean seminorm."""
        return norm_max((padic_valuation(e, self.p) for e in self.entries), self.p)


def as_value(x, p: int) -> MeasureValue:
    """Promote a rational to a scalar MeasureValue; pass values through."""
    if isinstance(x, MeasureValue):
        return x
    return MeasureValue.scalar(p, x)


# ---------------------------------------------------------------------------
# measure kinds
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Decomposition:
    """Canonical (working level, sparse density, point masses) form."""

    level: int
    density: dict  # Ball -> MeasureValue, zero atoms omitted
    atoms: dict  # Fraction point -> MeasureValue


class Measure:
    """Common base: a K-, K^n- or Mat_n(K)-valued finitely additive measure
    on the ball ring of G = r^(-m0) Z_r."""

    r: int
    m0: int
    p: int
    shape: tuple

    def decompose(self) -> Decomposition:
        raise NotImplementedError

    # -- shared derived operations ------------------------------------------

    def ambient(self) -> ClopenSet:
        return ClopenSet.whole(self.r, self.m0)

    def _check_set(self, a: ClopenSet) -> None:
        if (a.r, a.m0) != (self.r, self.m0):
            raise InvalidArgument("set lives on a different ambient ball")

    def eval_set(self, a: ClopenSet) -> MeasureValue:
        self._check_set(a)
        dec = self.decompose()
        total = MeasureValue.zero(self.p, self.shape)
        for atom, d in dec.density.items():
            for b in a.balls:
                if b.contains_ball(atom):
                    total = total + d.scale(atom.haar_mass())
                elif atom.contains_ball(b):
                    total = total + d.scale(b.haar_mass())
        for pt, m in dec.atoms.items():
            if a.contains_point(pt):
                total = total + m
        return total

    def eval_ball(self, b: Ball) -> MeasureValue:
        return self.eval_set(ClopenSet(self.r, self.m0, (b,)))

    def ball_norm(self, a: ClopenSet) -> UltraNorm:
        """Exact sup of u(mu(B)) over ring subsets B of A (finite reduction)."""
        self._check_set(a)
        dec = self.decompose()
        norms = []
        for atom, d in dec.density.items():
            if any(b.meets(atom) for b in a.balls):
                norms.append(d.unorm())
        for pt, m in dec.atoms.items():
            if a.contains_point(pt):
                norms.append(m.unorm())
        return norm_max(norms, self.p)

    def n_at(self, x) -> UltraNorm:
        """The canonical weight: stationary value of the descending ball chain."""
        x = check_point(x, self.r)
        if vp(x, self.r) < -self.m0:
            raise DomainError(f"point {x} outside the ambient ball")
        dec = self.decompose()
        atom = Ball.around(self.r, self.m0, dec.level, x)
        norms = []
        d = dec.density.get(atom)
        if d is not None:
            norms.append(d.unorm())
        m = dec.atoms.get(x)
        if m is not None:
            norms.append(m.unorm())
        return norm_max(norms, self.p)

    def total_norm(self) -> UltraNorm:
        """Norm of the whole space; checked against the sup of the weight."""
        g = self.ambient()
        via_subsets = self.ball_norm(g)
        dec = self.decompose()
        candidates = [atom.center for atom in dec.density] + list(dec.atoms)
        via_weight = norm_max((self.n_at(x) for x in candidates), self.p)
        if via_subsets != via_weight:
            raise AssertionError("subset norm and weight supremum disagree")
        return via_subsets

    def support_level(self) -> int:
        """A level at which every point mass sits in its own atom."""
        dec = self.decompose()
        lvl = dec.level
        pts = list(dec.atoms)
        for i, x in enumerate(pts):
            for y in pts[i + 1 :]:
                lvl = max(lvl, vp(x - y, self.r) + 1)
        return lvl


@dataclass(frozen=True, slots=True)
class HaarMeasure(Measure):
    """The translation-invariant measure with a prescribed total mass.

    Exists only when gcd(r, p) = 1; every level-n ball has mass
    total * r^(-(n+m0)).
    """

    r: int
    m0: int
    p: int
    total: MeasureValue

    def __post_init__(self):
        require_prime(self.r)
        require_prime(self.p)
        if math.gcd(self.r, self.p) != 1:
            raise InvalidArgument(
                "translation-invariant measure needs gcd(r, p) = 1"
            )
        if self.total.p != self.p:
            raise InvalidArgument("total mass has the wrong value prime")

    @property
    def shape(self):
        return self.total.shape

    @classmethod
    def unit(cls, r: int, p: int, m0: int = 0) -> "HaarMeasure":
        return cls(r, m0, p, MeasureValue.scalar(p, 1))

    def decompose(self) -> Decomposition:
        g = Ball.whole(self.r, self.m0)
        # density against the unit invariant measure is the constant total
        return Decomposition(-self.m0, {g: self.total}, {})


@dataclass(frozen=True, slots=True)
class DensityMeasure(Measure):
    """f d(haar): a locally constant density against the unit invariant
    measure on G; the density level is the working level."""

    r: int
    m0: int
    p: int
    fn: LocallyConstantFn

    def __post_init__(self):
        require_prime(self.r)
        require_prime(self.p)
        if math.gcd(self.r, self.p) != 1:
            raise InvalidArgument("density measure needs gcd(r, p) = 1")
        fr, fm0 = self.fn.ambient
        if (fr, fm0) != (self.r, self.m0):
            raise InvalidArgument("density lives on a different ambient")

    @property
    def shape(self):
        for _, v in self.fn.values:
            return as_value(v, self.p).shape
        return SCALAR

    @classmethod
    def from_scalars(cls, r: int, p: int, level: int, table: dict, m0: int = 0) -> "DensityMeasure":
        """Density from {atom-ball or point-in-atom: rational} entries."""
        pairs = []
        for atom in refine(ClopenSet.whole(r, m0), level):
            v = table.get(atom, table.get(atom.center, Fraction(0)))
            pairs.append((atom, MeasureValue.scalar(p, v)))
        return cls(r, m0, p, LocallyConstantFn.from_pairs(level, pairs))

    def decompose(self) -> Decomposition:
        density = {}
        for atom, v in self.fn.values:
            mv = as_value(v, self.p)
            if not mv.is_zero:
                density[atom] = mv
        return Decomposition(self.fn.level, density, {})


@dataclass(frozen=True, slots=True)
class AtomicMeasure(Measure):
    """Finitely many exact point masses."""

    r: int
    m0: int
    p: int
    shape: tuple
    atoms: tuple  # tuple[(Fraction point, MeasureValue), ...] sorted by point

    def __post_init__(self):
        require_prime(self.r)
        require_prime(self.p)
        seen = set()
        for pt, m in self.atoms:
            check_point(pt, self.r)
            if vp(pt, self.r) < -self.m0:
                raise DomainError(f"atom {pt} outside the ambient ball")
            if pt in seen:
                raise InvalidArgument(f"duplicate atom at {pt}")
            seen.add(pt)
            if m.shape != self.shape or m.p != self.p:
                raise InvalidArgument("atom mass has a wrong shape or prime")

    @classmethod
    def of(cls, r: int, p: int, masses: dict, m0: int = 0, shape: tuple = SCALAR) -> "AtomicMeasure":
        pairs = []
        for pt, m in masses.items():
            pairs.append((Fraction(pt), as_value(m, p)))
        if pairs:
            shape = pairs[0][1].shape
        return cls(r, m0, p, shape, tuple(sorted(pairs, key=lambda kv: kv[0])))

    def decompose(self) -> Decomposition:
        return Decomposition(
            -self.m0, {}, {pt: m for pt, m in self.atoms if not m.is_zero}
        )


@dataclass(frozen=True, slots=True)
class SumMeasure(Measure):
    """A finite sum of measures on the same ambient with the same values."""

    r: int
    m0: int
    p: int
    shape: tuple
    components: tuple

    def __post_init__(self):
        for c in self.components:
            if (c.r, c.m0, c.p) != (self.r, self.m0, self.p) or c.shape != self.shape:
                raise InvalidArgument("sum components disagree on ambient or values")

    @classmethod
    def of(cls, components: Sequence[Measure]) -> Measure:
        components = tuple(components)
        if not components:
            raise InvalidArgument("empty sum")
        if len(components) == 1:
            return components[0]
        c0 = components[0]
        return cls(c0.r, c0.m0, c0.p, c0.shape, components)

    def decompose(self) -> Decomposition:
        decs = [c.decompose() for c in self.components]
        level = max(d.level for d in decs)
        density: dict = {}
        atoms: dict = {}
        for d in decs:
            for atom, v in d.density.items():
                for child in atom.subdivide(level):
                    density[child] = density.get(child, MeasureValue.zero(self.p, self.shape)) + v
            for pt, m in d.atoms.items():
                atoms[pt] = atoms.get(pt, MeasureValue.zero(self.p, self.shape)) + m
        density = {a: v for a, v in density.items() if not v.is_zero}
        atoms = {x: m for x, m in atoms.items() if not m.is_zero}
        return Decomposition(level, density, atoms)


def from_decomposition(r: int, m0: int, p: int, shape: tuple, dec: Decomposition) -> Measure:
    """Materialize a decomposition back into measure objects."""
    parts: list[Measure] = []
    if dec.density:
        pairs = []
        for atom in refine(ClopenSet.whole(r, m0), dec.level):
            pairs.append((atom, dec.density.get(atom, MeasureValue.zero(p, shape))))
        parts.append(DensityMeasure(r, m0, p, LocallyConstantFn.from_pairs(dec.level, pairs)))
    if dec.atoms:
        parts.append(
            AtomicMeasure(
                r, m0, p, shape, tuple(sorted(dec.atoms.items(), key=lambda kv: kv[0]))
            )
        )
    if not parts:
        parts.append(AtomicMeasure(r, m0, p, shape, ()))
    return SumMeasure.of(parts)


# ---------------------------------------------------------------------------
# module-level operation surface
# ---------------------------------------------------------------------------


def measure_eval(mu: Measure, a: ClopenSet) -> MeasureValue:
    return mu.eval_set(a)


def ball_norm(mu: Measure, a: ClopenSet) -> UltraNorm:
    return mu.ball_norm(a)


def n_mu(mu: Measure, x) -> UltraNorm:
    return mu.n_at(x)


def total_norm(mu: Measure) -> UltraNorm:
    return mu.total_norm()


def integrate(f: LocallyConstantFn, mu: Measure):
    """Sum of value(atom) * mu(atom) over the common refinement.

    Returns a MeasureValue; a cyclotomic-valued f against a scalar measure
    returns a Cyclotomic instead.
    """
    dec = mu.decompose()
    lvl = max(f.level, dec.level)
    f = f.refine_to(lvl)
    total = None
    for atom, v in f.values:
        total = _acc(total, _mul_value(v, mu.eval_ball(atom), mu.p))
    if total is None:
        total = MeasureValue.zero(mu.p, mu.shape)
    return total


def _mul_value(fv, mv: MeasureValue, p: int):
    from .padic_core import Cyclotomic

    if isinstance(fv, MeasureValue):
        return fv * mv
    if isinstance(fv, Cyclotomic):
        return fv * mv.to_fraction()
    return mv.scale(fv)


def _acc(total, piece):
    return piece if total is None else total + piece


def lq_norm(f: LocallyConstantFn, mu: Measure, q: int = 1) -> UltraNorm:
    """[ sup_x u(f(x))^q N_mu(x) ]^(1/q) with an exact, possibly fractional,
    exponent."""
    if q < 1:
        raise InvalidArgument("q must be a positive integer")
    dec = mu.decompose()
    lvl = max(f.level, dec.level)
    f = f.refine_to(lvl)
    best = UltraNorm.zero(mu.p)
    for atom, v in f.values:
        uf = as_value(v, mu.p).unorm()
        if uf.is_zero:
            continue
        ufq = UltraNorm(mu.p, uf.exp * q)
        # the weight supremum over the atom: density there and masses inside
        natoms = [n for n in [_density_norm(dec, atom, mu.p)] if n is not None]
        natoms += [m.unorm() for pt, m in dec.atoms.items() if atom.contains_point(pt)]
        n = norm_max(natoms, mu.p)
        best = norm_max([best, ufq * n], mu.p)
    return best.root(q)


def _density_norm(dec: Decomposition, b: Ball, p: int):
    if b.level >= dec.level:
        key = Ball.around(b.r, b.m0, dec.level, b.center)
        d = dec.density.get(key)
        return None if d is None else d.unorm()
    norms = [d.unorm() for atom, d in dec.density.items() if b.contains_ball(atom)]
    return norm_max(norms, p) if norms else None


def integrability_report(f: LocallyConstantFn, mu: Measure, k_max: int = 6) -> dict:
    """Per-atom integrability criteria at the working level.

    For each threshold p^(-k) the report lists the atoms where
    u(f) * N_mu >= p^(-k); the listed set is always a finite union of balls
    and is contained in {N_mu >= delta} for the reported delta > 0.
    """
    dec = mu.decompose()
    lvl = max(f.level, dec.level)
    f = f.refine_to(lvl)
    rows = []
    for atom, v in f.values:
        uf = as_value(v, mu.p).unorm()
        natoms = [n for n in [_density_norm(dec, atom, mu.p)] if n is not None]
        natoms += [m.unorm() for pt, m in dec.atoms.items() if atom.contains_point(pt)]
        n = norm_max(natoms, mu.p)
        rows.append((atom, uf, n, uf * n))
    levels = {}
    for k in range(k_max + 1):
        eps = UltraNorm(mu.p, k)
        hit = [(atom, n) for atom, _, n, prod in rows if not prod.is_zero and eps <= prod]
        delta = None
        if hit:
            delta = min((n for _, n in hit))
        levels[k] = {
            "atoms": [atom for atom, _ in hit],
            "delta_exp": None if delta is None else delta.exp,
        }
        if delta is not None and delta.is_zero:
            raise AssertionError("threshold set met an atom with zero weight")
    return {
        "level": lvl,
        "locally_constant": True,
        "integrable": True,
        "thresholds": levels,
    }


def weight_level_set(mu: Measure, k: int) -> ClopenSet:
    """{x : N_mu(x) >= p^(-k)} as a finite union of working-level balls."""
    dec = mu.decompose()
    lvl = mu.support_level()
    eps = UltraNorm(mu.p, k)
    out = []
    for atom in refine(mu.ambient(), lvl):
        n = mu.ball_norm(ClopenSet(mu.r, mu.m0, (atom,)))
        if not n.is_zero and eps <= n:
            out.append(atom)
    return ClopenSet.of(out, r=mu.r, m0=mu.m0) if out else ClopenSet.empty(mu.r, mu.m0)


# ---------------------------------------------------------------------------
# products
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ProductMeasure:
    """mu x nu on the product ring, evaluated on finite unions of rectangles."""

    left: Measure
    right: Measure

    def __post_init__(self):
        if self.left.p != self.right.p:
            raise InvalidArgument("product factors have different value primes")
        if self.left.shape != SCALAR or self.right.shape != SCALAR:
            raise InvalidArgument(
                "product measures need scalar values (the max-entry seminorm "
                "is not multiplicative on matrices)"
            )

    def eval_rectangle(self, a: ClopenSet, b: ClopenSet) -> MeasureValue:
        return self.left.eval_set(a) * self.right.eval_set(b)

    def eval_rectangles(self, rects: Sequence[tuple]) -> MeasureValue:
        """Additive evaluation of a finite union of rectangles."""
        p = self.left.p
        if not rects:
            return MeasureValue.zero(p, SCALAR)
        ll = max(a.max_level() for a, _ in rects)
        lr = max(b.max_level() for _, b in rects)
        cells = set()
        for a, b in rects:
            for ca in refine(a, ll):
                for cb in refine(b, lr):
                    cells.add((ca, cb))
        total = MeasureValue.zero(p, SCALAR)
        for ca, cb in cells:
            total = total + self.left.eval_ball(ca) * self.right.eval_ball(cb)
        return total

    def n_at(self, x, y) -> UltraNorm:
        """Stationary rectangle-chain weight computed from the product's own
        decomposition parts (density x density, density x mass, ...)."""
        dl, dr = self.left.decompose(), self.right.decompose()
        p = self.left.p
        ax = Ball.around(self.left.r, self.left.m0, dl.level, check_point(x, self.left.r))
        ay = Ball.around(self.right.r, self.right.m0, dr.level, check_point(y, self.right.r))
        lx = [n for n in [None if dl.density.get(ax) is None else dl.density[ax].unorm()] if n]
        if Fraction(x) in dl.atoms:
            lx.append(dl.atoms[Fraction(x)].unorm())
        ly = [n for n in [None if dr.density.get(ay) is None else dr.density[ay].unorm()] if n]
        if Fraction(y) in dr.atoms:
            ly.append(dr.atoms[Fraction(y)].unorm())
        combos = [a * b for a in lx for b in ly]
        return norm_max(combos, p)


def product_measure(mu: Measure, nu: Measure) -> ProductMeasure:
    return ProductMeasure(mu, nu)


def product_n_identity_check(mu: Measure, nu: Measure, x, y) -> tuple:
    """The product-weight identity at an exactly representable point pair:
    the rectangle-chain weight against the product of the factor weights."""
    prod = ProductMeasure(mu, nu)
    lhs = prod.n_at(x, y)
    rhs = mu.n_at(x) * nu.n_at(y)
    return lhs, rhs, lhs == rhs


def fubini_check(f: ProductFn, mu: Measure, nu: Measure) -> tuple:
    """Both iterated integrals and the product integral of a locally constant
    function on G x H; returns (iterated_lr, iterated_rl, all_equal)."""
    dl, dr = mu.decompose(), nu.decompose()
    ll = max(f.level_left, dl.level)
    lr = max(f.level_right, dr.level)
    f = f.refine_to(ll, lr)
    table = f.as_dict()
    p = mu.p
    prod = MeasureValue.zero(p, SCALAR)
    for (a, b), v in table.items():
        prod = prod + _mul_value(v, mu.eval_ball(a) * nu.eval_ball(b), p)
    # integrate over x first, then y
    by_y: dict = {}
    for (a, b), v in table.items():
        by_y.setdefault(b, []).append((a, v))
    it_lr = MeasureValue.zero(p, SCALAR)
    for b, items in by_y.items():
        inner = MeasureValue.zero(p, SCALAR)
        for a, v in items:
            inner = inner + _mul_value(v, mu.eval_ball(a), p)
        it_lr = it_lr + inner * nu.eval_ball(b)
    # integrate over y first, then x
    by_x: dict = {}
    for (a, b), v in table.items():
        by_x.setdefault(a, []).append((b, v))
    it_rl = MeasureValue.zero(p, SCALAR)
    for a, items in by_x.items():
        inner = MeasureValue.zero(p, SCALAR)
        for b, v in items:
            inner = inner + _mul_value(v, nu.eval_ball(b), p)
        it_rl = it_rl + inner * mu.eval_ball(a)
    ok = it_lr == it_rl == prod
    return it_lr, it_rl, ok


# ---------------------------------------------------------------------------
# pushforward of values
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class LinearValueMap:
    """A K-linear map between value spaces, as a matrix over flat entries."""

    p: int
    in_shape: tuple
    out_shape: tuple
    rows: tuple  # tuple[tuple[Fraction, ...], ...]

    @classmethod
    def identity(cls, p: int, shape: tuple) -> "LinearValueMap":
        n = _flat_size(shape)
        rows = tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))
        return cls(p, shape, shape, rows)

    @classmethod
    def scaling(cls, p: int, shape: tuple, c) -> "LinearValueMap":
        n = _flat_size(shape)
        c = Fraction(c)
        rows = tuple(tuple(c if i == j else Fraction(0) for j in range(n)) for i in range(n))
        return cls(p, shape, shape, rows)

    @classmethod
    def trace(cls, p: int, n: int) -> "LinearValueMap":
        row = tuple(Fraction(int(i == j)) for i in range(n) for j in range(n))
        return cls(p, (n, n), SCALAR, (row,))

    def apply(self, v: MeasureValue) -> MeasureValue:
        if v.shape != self.in_shape or v.p != self.p:
            raise InvalidArgument("value does not match the map's input shape")
        out = tuple(
            sum((r * e for r, e in zip(row, v.entries)), Fraction(0)) for row in self.rows
        )
        return MeasureValue(self.p, self.out_shape, out)

    def op_norm(self) -> UltraNorm:
        """Operator norm for max-entry norms: the max entry of the matrix."""
        return norm_max(
            (padic_valuation(e, self.p) for row in self.rows for e in row), self.p
        )


def _flat_size(shape: tuple) -> int:
    n = 1
    for d in shape:
        n *= d
    return n


def pushforward_values(mu: Measure, f_map: LinearValueMap) -> Measure:
    """The measure A -> F(mu(A))."""
    if f_map.in_shape != mu.shape or f_map.p != mu.p:
        raise InvalidArgument("map input shape does not match the measure values")
    dec = mu.decompose()
    out = Decomposition(
        dec.level,
        {a: f_map.apply(v) for a, v in dec.density.items()},
        {x: f_map.apply(m) for x, m in dec.atoms.items()},
    )
    out = Decomposition(
        out.level,
        {a: v for a, v in out.density.items() if not v.is_zero},
        {x: m for x, m in out.atoms.items() if not m.is_zero},
    )
    return from_decomposition(mu.r, mu.m0, mu.p, f_map.out_shape, out)


def pushforward_intertwining_check(mu: Measure, f_map: LinearValueMap, f: LocallyConstantFn) -> tuple:
    """F(integral of a scalar f against mu) versus the integral of f against
    the pushforward; exact equality for every locally constant scalar f."""
    nu = pushforward_values(mu, f_map)
    lhs = f_map.apply(integrate(f, mu))
    rhs = integrate(f, nu)
    return lhs, rhs, lhs == rhs


# ---------------------------------------------------------------------------
# convolution on the additive group G
# ---------------------------------------------------------------------------


def convolve(mu: Measure, nu: Measure) -> Measure:
    """The convolution product: (mu * nu)(A) integrates Ch_A(x + y).

    Computed at the common working level as a cyclic convolution of density
    vectors indexed by G / (level-L lattice), plus the shifted and purely
    atomic parts.  The total masses multiply.
    """
    if (mu.r, mu.m0, mu.p) != (nu.r, nu.m0, nu.p):
        raise InvalidArgument("convolution needs one common ambient group")
    if mu.shape != nu.shape:
        raise InvalidArgument("convolution factors have different value shapes")
    r, m0, p = mu.r, mu.m0, mu.p
    dl, dr = mu.decompose(), nu.decompose()
    lvl = max(dl.level, dr.level)
    dld = _density_at(dl, lvl)
    drd = _density_at(dr, lvl)
    shape = mu.shape
    unit = Fraction(1, r ** (lvl + m0))

    density: dict = {}
    atoms: dict = {}

    def add_density(point, v: MeasureValue):
        b = Ball.around(r, m0, lvl, point)
        density[b] = density.get(b, MeasureValue.zero(p, shape)) + v

    # density (x) density: cyclic convolution on G / (level-lvl lattice);
    # one factor of the invariant atom mass stays with the product
    for a1, v1 in dld.items():
        for a2, v2 in drd.items():
            add_density(a1.center + a2.center, (v1 * v2).scale(unit))
    # density (x) point masses: translated densities (translation maps the
    # level-lvl partition to itself)
    for pt, m in dr.atoms.items():
        for a1, v1 in dld.items():
            add_density(a1.center + pt, v1 * m)
    for pt, m in dl.atoms.items():
        for a2, v2 in drd.items():
            add_density(pt + a2.center, m * v2)
    # point (x) point: group shift of exact points
    for x1, m1 in dl.atoms.items():
        for x2, m2 in dr.atoms.items():
            s = x1 + x2
            atoms[s] = atoms.get(s, MeasureValue.zero(p, shape)) + m1 * m2

    dec = Decomposition(
        lvl,
        {a: v for a, v in density.items() if not v.is_zero},
        {x: m for x, m in atoms.items() if not m.is_zero},
    )
    return from_decomposition(r, m0, p, shape, dec)


def _density_at(dec: Decomposition, lvl: int) -> dict:
    out = {}
    for atom, v in dec.density.items():
        for child in atom.subdivide(lvl):
            out[child] = v
    return out
