"""Additive characters with exact root-of-unity values, characteristic
functionals, synthesis of stationary families from finite frequency data,
covariance, and exact recovery of masses and increments.

The rank-one additive character used throughout is

    chi_s(x) = root_of_unity(frac_part(s * x))

with values among the r-power roots of unity; it is locally constant of
level -ord_r(s), a homomorphism in x, and bilinear in (s, x).  Character
values live in Q(zeta_{r^M}) so every identity here is an exact equality of
canonical coefficient vectors.

Recovery solves square character systems over the cyclotomic field with
division-free forward elimination (exact zero pivot tests) and exact
division in the back substitution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .clopen_sets import Ball, ClopenSet, check_point, refine
from .errors import DomainError, InvalidArgument, TimesDegenerate
from .measures import AtomicMeasure, Measure, MeasureValue
from .padic_core import Cyclotomic, frac_part, require_prime, root_of_unity, simplify_coeff, vp
from .stochastic import (
    Factor,
    OrthStochMeasure,
    RandomVariable,
    build_orthogonal_measure,
    verify_m_conditions,
)


def character_eval(s, x, r: int, p: int) -> Cyclotomic:
    """chi_s(x): the additive character of the time/frequency group.

    Requires gcd(r, p) = 1 and s*x in Z[1/r]; the value is a root of unity
    of order r^m with m the depth of the fractional part.
    """
    require_prime(r)
    require_prime(p)
    if math.gcd(r, p) != 1:
        raise InvalidArgument("character needs gcd(r, p) = 1")
    s, x = Fraction(s), Fraction(x)
    return root_of_unity(frac_part(s * x, r))


def character_level(s, r: int) -> int:
    """The constancy level of x -> chi_s(x): balls of this level are mapped
    to single values."""
    s = Fraction(s)
    if s == 0:
        return 0
    return max(0, -vp(s, r))


def char_functional(mu: Measure, s) -> Cyclotomic:
    """The exact finite character sum integrating chi_s against mu."""
    if mu.shape != ():
        raise InvalidArgument("characteristic functional needs a scalar measure")
    s = Fraction(s)
    dec = mu.decompose()
    lvl = max(dec.level, character_level(s, mu.r), -mu.m0)
    total = Cyclotomic.zero(mu.r)
    for atom, d in dec.density.items():
        for cell in atom.subdivide(lvl):
            chi = character_eval(s, cell.center, mu.r, mu.p)
            total = total + chi * (d.to_fraction() * cell.haar_mass())
    for pt, m in dec.atoms.items():
        total = total + character_eval(s, pt, mu.r, mu.p) * m.to_fraction()
    return total


# ---------------------------------------------------------------------------
# exact linear algebra over the cyclotomic field
# ---------------------------------------------------------------------------


def solve_cyclotomic(matrix: Sequence[Sequence[Cyclotomic]], rhs: Sequence[Cyclotomic]):
    """Solve a square system exactly; raises TimesDegenerate when singular.

    Forward elimination is division-free (cross-multiplied rows with exact
    nonzero pivot tests); back substitution divides once per variable.
    """
    n = len(matrix)
    if any(len(row) != n for row in matrix) or len(rhs) != n:
        raise InvalidArgument("system must be square")
    a = [list(row) for row in matrix]
    b = list(rhs)
    for col in range(n):
        pivot = None
        for row in range(col, n):
            if not a[row][col].is_zero:
                pivot = row
                break
        if pivot is None:
            raise TimesDegenerate("character matrix is singular for these times")
        a[col], a[pivot] = a[pivot], a[col]
        b[col], b[pivot] = b[pivot], b[col]
        for row in range(col + 1, n):
            if a[row][col].is_zero:
                continue
            factor = a[row][col]
            lead = a[col][col]
            for j in range(col, n):
                a[row][j] = a[row][j] * lead - a[col][j] * factor
            b[row] = b[row] * lead - b[col] * factor
    out = [None] * n
    for col in range(n - 1, -1, -1):
        acc = b[col]
        for j in range(col + 1, n):
            acc = acc - a[col][j] * out[j]
        out[col] = acc / a[col][col]
    return out


# ---------------------------------------------------------------------------
# spectral data
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class SpectralSpec:
    """Finite frequency data: distinct exact frequencies with square masses."""

    r: int
    p: int
    frequencies: tuple  # tuple[Fraction, ...]
    masses: tuple  # tuple[Fraction, ...]

    def __post_init__(self):
        require_prime(self.r)
        require_prime(self.p)
        if math.gcd(self.r, self.p) != 1:
            raise InvalidArgument("spectral data needs gcd(r, p) = 1")
        if len(self.frequencies) != len(set(self.frequencies)):
            raise InvalidArgument("frequencies must be pairwise distinct")
        if len(self.frequencies) != len(self.masses):
            raise InvalidArgument("frequency and mass counts differ")
        for y in self.frequencies:
            check_point(y, self.r)
        for m in self.masses:
            if m == 0:
                raise InvalidArgument("masses must be nonzero")

    @classmethod
    def of(cls, r: int, p: int, pairs) -> "SpectralSpec":
        freqs, masses = [], []
        for y, m in pairs:
            freqs.append(Fraction(y))
            masses.append(Fraction(m))
        return cls(r, p, tuple(freqs), tuple(masses))

    def ambient_scale(self) -> int:
        m0 = 0
        for y in self.frequencies:
            if y != 0:
                m0 = max(m0, -vp(y, self.r))
        return m0

    def structure_measure(self) -> AtomicMeasure:
        return AtomicMeasure.of(
            self.r,
            self.p,
            dict(zip(self.frequencies, self.masses)),
            m0=self.ambient_scale(),
        )

    def separating_level(self) -> int:
        """A ball level at which every frequency sits in its own ball."""
        lvl = 1
        ys = self.frequencies
        for i, a in enumerate(ys):
            for b in ys[i + 1 :]:
                lvl = max(lvl, vp(a - b, self.r) + 1)
        return lvl


@dataclass(frozen=True, slots=True)
class StationaryProcess:
    """The family t -> sum_k chi(t y_k) xi_k with exact cyclotomic samples."""

    spec: SpectralSpec
    xi: OrthStochMeasure
    times: tuple

    def sample(self, t) -> RandomVariable:
        t = Fraction(t)
        raw = {}
        for inc in self.xi.increments:
            chi = character_eval(t, inc.point, self.spec.r, self.spec.p)
            raw[(inc.factor,)] = simplify_coeff(chi * inc.c)
        return RandomVariable.build(self.xi.space, raw)

    def covariance(self, t, q) -> Cyclotomic:
        """M(eta(t) eta(q)); depends only on t + q for this synthesis."""
        val = (self.sample(t) * self.sample(q)).expectation()
        return val if isinstance(val, Cyclotomic) else Cyclotomic.rational(self.spec.r, val)


def synthesize(spec: SpectralSpec, times=(), factor_template: Factor | None = None) -> StationaryProcess:
    """Build the orthogonal increments over the atomic structure measure and
    the character-synthesized family; every sample has mean zero."""
    xi = build_orthogonal_measure(spec.structure_measure(), factor_template=factor_template)
    return StationaryProcess(spec, xi, tuple(Fraction(t) for t in times))


def covariance(proc: StationaryProcess, t, q) -> Cyclotomic:
    return proc.covariance(t, q)


# ---------------------------------------------------------------------------
# recovery
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class RecoveryResult:
    candidates: tuple
    times: tuple
    masses: dict  # candidate frequency -> Fraction
    consistent: bool
    mismatches: tuple

    def mass_of(self, y) -> Fraction:
        return self.masses[Fraction(y)]


def auto_times(candidates: Sequence[Fraction], r: int) -> tuple:
    """Times i/r^M, one per candidate, that make the character matrix a
    Vandermonde matrix in distinct roots of unity (hence invertible)."""
    m = 1
    cands = [Fraction(y) for y in candidates]
    for i, a in enumerate(cands):
        for b in cands[i + 1 :]:
            m = max(m, vp(a - b, r) + 1)
    return tuple(Fraction(i, r**m) for i in range(len(cands)))


def spectral_recover(
    proc: StationaryProcess, candidates: Sequence, times="auto"
) -> RecoveryResult:
    """Solve the exact character system for the candidate masses.

    The covariance at times (t_i, 0) equals the character matrix applied to
    the mass vector; with auto times the matrix is Vandermonde in distinct
    roots of unity.  Frequencies absent from the source recover mass zero.
    A probe time is re-checked against the covariance to detect candidate
    sets that cannot explain the source.
    """
    r, p = proc.spec.r, proc.spec.p
    cands = tuple(Fraction(y) for y in candidates)
    if len(cands) != len(set(cands)):
        raise InvalidArgument("candidate frequencies must be distinct")
    ts = auto_times(cands, r) if times == "auto" else tuple(Fraction(t) for t in times)
    if len(ts) != len(cands):
        raise InvalidArgument("need exactly one time per candidate")
    matrix = [[character_eval(t, y, r, p) for y in cands] for t in ts]
    rhs = [proc.covariance(t, 0) for t in ts]
    sol = solve_cyclotomic(matrix, rhs)
    masses = {}
    mismatches = []
    for y, m in zip(cands, sol):
        if not m.is_rational:
            mismatches.append(f"candidate {y}: non-rational mass")
            masses[y] = m
        else:
            masses[y] = m.to_fraction()
    # probe times beyond the solving grid must reproduce the covariance
    denom = max([1] + [Fraction(t).denominator for t in ts])
    probes = [Fraction(len(ts), denom), Fraction(1, denom * r)]
    for t in probes:
        want = proc.covariance(t, 0)
        got = Cyclotomic.zero(r)
        for y in cands:
            m = masses[y]
            if isinstance(m, Fraction):
                got = got + character_eval(t, y, r, p) * m
        if got != want:
            mismatches.append(f"probe time {t}: covariance mismatch")
    return RecoveryResult(
        candidates=cands,
        times=ts,
        masses=masses,
        consistent=not mismatches,
        mismatches=tuple(mismatches),
    )


def recover_increment_combination(
    proc: StationaryProcess, result: RecoveryResult, a: ClopenSet
) -> RandomVariable:
    """xi(A) as an exact combination of samples: solve for coefficients
    alpha with sum_i alpha_i chi(t_i y_k) = Ch_A(y_k) over the candidates,
    then return sum_i alpha_i eta(t_i)."""
    r, p = proc.spec.r, proc.spec.p
    cands, ts = result.candidates, result.times
    matrix = [[character_eval(t, y, r, p) for t in ts] for y in cands]
    rhs = [
        Cyclotomic.rational(r, 1 if a.contains_point(y) else 0) for y in cands
    ]
    alphas = solve_cyclotomic(matrix, rhs)
    out = RandomVariable.constant(proc.xi.space, Fraction(0))
    for alpha, t in zip(alphas, ts):
        out = out + proc.sample(t) * alpha
    return out


def verify_recovered_increments(
    proc: StationaryProcess, result: RecoveryResult, max_extra_level: int = 0
) -> dict:
    """Check that the recovered set function is an orthogonal stochastic
    measure with the spectral structure measure, on candidate-separating
    balls."""
    spec = proc.spec
    m0 = spec.ambient_scale()
    lvl = spec.separating_level() + max_extra_level
    mu = spec.structure_measure()
    balls = []
    g = Ball.whole(spec.r, m0)
    for level in range(-m0, lvl + 1):
        balls.extend(g.subdivide(level))
    sets = [ClopenSet(spec.r, m0, (b,)) for b in balls]
    report = {
        "matches-synthesizing-increments": True,
        "second-moment-is-structure-measure": True,
        "failures": [],
    }
    recovered = {}
    for s in sets:
        recovered[s] = recover_increment_combination(proc, result, s)
        if recovered[s] != proc.xi.eval_set(s):
            report["matches-synthesizing-increments"] = False
            report["failures"].append(f"set {s.balls}: increments differ")
    for i, s in enumerate(sets):
        for s2 in sets[i:]:
            lhs = (recovered[s] * recovered[s2]).expectation()
            rhs = mu.eval_set(s.intersect(s2)).to_fraction()
            if lhs != rhs:
                report["second-moment-is-structure-measure"] = False
                report["failures"].append(f"pair {s.balls} {s2.balls}")
    report["passed"] = not report["failures"]
    return report
