import random
from fractions import Fraction

import pytest

from pam.errors import (
    DivisionByZeroAtom,
    InvalidArgument,
    NonSquareAtom,
    RefineRequired,
    UnsupportedPrime,
)
from pam.clopen_sets import (
    Ball,
    ClopenSet,
    LocallyConstantFn,
    ProductFn,
    all_balls,
    indicator,
    refine,
)
from pam.measures import AtomicMeasure, DensityMeasure, HaarMeasure, integrate, lq_norm
from pam.padic_core import UltraNorm, padic_valuation
from pam.stochastic import (
    Factor,
    FiniteProbSpace,
    OrthStochMeasure,
    RandomVariable,
    build_orthogonal_measure,
    expectation,
    invert_weighted,
    isometry_identity_check,
    stochastic_fubini,
    stochastic_integral,
    verify_m_conditions,
    weighted_measure,
)


def coin_space(p, n):
    return FiniteProbSpace(p, (Factor.coin(),) * n)


def haar_xi(r=3, p=5, level=2):
    return build_orthogonal_measure(HaarMeasure.unit(r, p), level)


def rand_fn(rng, r, level, lo=-5, hi=5):
    return LocallyConstantFn.from_pairs(
        level,
        [
            (atom, Fraction(rng.randint(lo, hi), rng.randint(1, 4)))
            for atom in refine(ClopenSet.whole(r), level)
        ],
    )


# ---------------------------------------------------------------------------
# expectations
# ---------------------------------------------------------------------------


def test_expectation_examples():
    sp = coin_space(5, 1)
    s = RandomVariable.coordinate(sp, 0)
    assert expectation(s) == 0
    assert expectation(RandomVariable.constant(sp, Fraction(7, 2))) == Fraction(7, 2)
    assert expectation(s * s) == 1


def test_expectation_matches_brute_force():
    rng = random.Random(101)
    sp = coin_space(5, 6)
    for _ in range(50):
        rv = RandomVariable.constant(sp, Fraction(rng.randint(-3, 3)))
        for _ in range(4):
            k = rng.randrange(6)
            rv = rv * RandomVariable.coordinate(sp, k, Fraction(rng.randint(-2, 2), 1)) + Fraction(
                rng.randint(-2, 2)
            )
        assert rv.expectation() == rv.brute_expectation()


def test_custom_factor_moments():
    # a two-outcome factor for p=2: outcomes 2 and -1/2 with masses 1/5, 4/5
    f = Factor((Fraction(2), Fraction(-1, 2)), (Fraction(1, 5), Fraction(4, 5)))
    assert f.mean() == 0
    assert f.second_moment() == 1
    sp = FiniteProbSpace(2, (f, f))
    s0 = RandomVariable.coordinate(sp, 0)
    s1 = RandomVariable.coordinate(sp, 1)
    assert expectation(s0 * s0) == 1
    assert expectation(s0 * s1) == 0
    assert (s0 * s0 * s0).expectation() == (s0 * s0 * s0).brute_expectation()


def test_space_rejects_large_mass_norm():
    with pytest.raises(InvalidArgument):
        FiniteProbSpace(2, (Factor.coin(),))  # |1/2|_2 = 2 > 1


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def test_build_from_invariant_measure_even_level():
    xi = haar_xi()
    assert all(inc.c == Fraction(1, 3) for inc in xi.increments)
    assert len(xi.increments) == 9
    a = ClopenSet.of([Ball.around(3, 0, 1, 0)])
    # brute-force second moment over the 2^9 outcome table, three active
    got = (xi.eval_set(a) * xi.eval_set(a)).brute_expectation()
    assert got == Fraction(1, 3)
    b = ClopenSet.of([Ball.around(3, 0, 1, 1)])
    assert (xi.eval_set(a) * xi.eval_set(b)).brute_expectation() == 0


def test_build_rejects_non_square_masses():
    with pytest.raises(NonSquareAtom):
        build_orthogonal_measure(HaarMeasure.unit(3, 5), 1)  # masses 1/3
    with pytest.raises(NonSquareAtom):
        build_orthogonal_measure(AtomicMeasure.of(3, 5, {0: -1}))


def test_build_rejects_p2_without_custom_factor():
    with pytest.raises(UnsupportedPrime):
        build_orthogonal_measure(HaarMeasure.unit(3, 2), 2)


def test_build_p2_with_custom_factor():
    f = Factor((Fraction(2), Fraction(-1, 2)), (Fraction(1, 5), Fraction(4, 5)))
    xi = build_orthogonal_measure(HaarMeasure.unit(3, 2), 2, factor_template=f)
    rep = verify_m_conditions(xi, 2)
    assert rep["passed"], rep["failures"]


def test_build_atomic_sites():
    mu = AtomicMeasure.of(3, 5, {0: Fraction(1, 4), 2: Fraction(9)})
    xi = build_orthogonal_measure(mu)
    assert {inc.c for inc in xi.increments} == {Fraction(1, 2), Fraction(3)}
    rep = verify_m_conditions(xi, 2)
    assert rep["passed"], rep["failures"]


# ---------------------------------------------------------------------------
# axioms
# ---------------------------------------------------------------------------


def test_m_conditions_pass_for_constructions():
    for r, p, lvl in [(3, 5, 2), (2, 3, 2), (5, 3, 2), (3, 5, 0)]:
        xi = build_orthogonal_measure(HaarMeasure.unit(r, p), lvl)
        rep = verify_m_conditions(xi, lvl)
        assert rep["passed"], (r, p, rep["failures"])


def test_m_conditions_catch_tampered_increment():
    xi = haar_xi()
    incs = list(xi.increments)
    bad = incs[4]
    incs[4] = type(bad)(bad.ball, bad.point, bad.c + 1, bad.factor)
    tampered = OrthStochMeasure(
        space=xi.space,
        r=xi.r,
        m0=xi.m0,
        p=xi.p,
        atom_level=xi.atom_level,
        increments=tuple(incs),
        structure=xi.structure,
    )
    rep = verify_m_conditions(tampered, 2)
    assert not rep["passed"]
    assert not rep["second-moment-is-structure-measure"]


def test_structure_measure_additivity_recovered():
    xi = haar_xi()
    balls = all_balls(3, 0, 2)
    for a in balls:
        for b in balls:
            if a.meets(b):
                continue
            sa, sb = ClopenSet.of([a]), ClopenSet.of([b])
            u = sa.union(sb)
            lhs = (xi.eval_set(u) * xi.eval_set(u)).expectation()
            rhs = (xi.eval_set(sa) * xi.eval_set(sa)).expectation() + (
                xi.eval_set(sb) * xi.eval_set(sb)
            ).expectation()
            assert lhs == rhs


# ---------------------------------------------------------------------------
# stochastic integrals
# ---------------------------------------------------------------------------


def test_integral_examples():
    xi = haar_xi()
    g = ClopenSet.whole(3)
    c = LocallyConstantFn.constant(g, Fraction(4), 0)
    assert stochastic_integral(c, xi) == xi.eval_whole() * Fraction(4)
    a = ClopenSet.of([Ball.around(3, 0, 1, 2)])
    assert stochastic_integral(indicator(a), xi) == xi.eval_set(a)


def test_integral_512_outcome_example():
    xi = haar_xi()
    f = LocallyConstantFn.from_pairs(
        1,
        [
            (atom, Fraction(3) if atom.center == 0 else Fraction(1))
            for atom in refine(ClopenSet.whole(3), 1)
        ],
    )
    eta = stochastic_integral(f, xi)
    assert len(eta.table()) == 512
    assert expectation(eta) == 0
    assert eta.brute_expectation() == 0


def test_integral_linear():
    rng = random.Random(103)
    xi = haar_xi()
    for _ in range(25):
        f, g = rand_fn(rng, 3, 2), rand_fn(rng, 3, 1)
        a, b = Fraction(rng.randint(-4, 4)), Fraction(rng.randint(-4, 4))
        combo = f * a + g.refine_to(2) * b
        lhs = stochastic_integral(combo, xi)
        rhs = stochastic_integral(f, xi) * a + stochastic_integral(g, xi) * b
        assert lhs == rhs


def test_integral_refine_required():
    xi = build_orthogonal_measure(HaarMeasure.unit(3, 5), 0)
    fine = rand_fn(random.Random(1), 3, 1)
    with pytest.raises(RefineRequired):
        stochastic_integral(fine, xi)
    with pytest.raises(RefineRequired):
        xi.eval_set(ClopenSet.of([Ball.around(3, 0, 1, 0)]))


def test_isometry_identity_examples():
    xi = haar_xi()
    one = indicator(ClopenSet.whole(3))
    lhs, rhs, ok = isometry_identity_check(one, one, xi)
    assert ok and lhs == 1
    a = indicator(ClopenSet.of([Ball.around(3, 0, 1, 0)]))
    b = indicator(ClopenSet.of([Ball.around(3, 0, 1, 1)]))
    lhs, rhs, ok = isometry_identity_check(a, b, xi)
    assert ok and lhs == 0


def test_isometry_identity_random_pairs():
    rng = random.Random(107)
    for r, p in [(3, 5), (5, 3), (2, 3)]:
        xi = build_orthogonal_measure(HaarMeasure.unit(r, p), 2)
        for _ in range(60):
            f = rand_fn(rng, r, rng.randint(0, 2))
            g = rand_fn(rng, r, rng.randint(0, 2))
            lhs, rhs, ok = isometry_identity_check(f, g, xi)
            assert ok, (r, p, lhs, rhs)


def test_mean_square_contraction():
    # |M[(I(f)-I(g))^2]|_p <= (sup |f-g|^2 N) exactly
    rng = random.Random(109)
    xi = haar_xi()
    for _ in range(40):
        f, g = rand_fn(rng, 3, 2), rand_fn(rng, 3, 2)
        d = stochastic_integral(f, xi) - stochastic_integral(g, xi)
        m = (d * d).expectation()
        bound = lq_norm(f - g, xi.structure, 2)
        assert padic_valuation(m, 5) <= bound * bound


# ---------------------------------------------------------------------------
# weighted measures and inversion
# ---------------------------------------------------------------------------


def test_weighted_trivial_weight():
    xi = haar_xi()
    one = LocallyConstantFn.constant(ClopenSet.whole(3), Fraction(1), 0)
    rho, nu = weighted_measure(xi, one)
    for b in all_balls(3, 0, 2):
        s = ClopenSet.of([b])
        assert rho.eval_set(s) == xi.eval_set(s)
        assert nu.eval_ball(b) == xi.structure.eval_ball(b)


def test_weighted_second_moment():
    xi = haar_xi()
    atoms = refine(ClopenSet.whole(3), 2)
    g = LocallyConstantFn.from_pairs(
        2, [(a, Fraction(2) if a.center == 0 else Fraction(1)) for a in atoms]
    )
    rho, nu = weighted_measure(xi, g)
    for a in atoms:
        s = ClopenSet.of([a])
        got = (rho.eval_set(s) * rho.eval_set(s)).brute_expectation()
        w = g.value_at(a.center)
        assert got == w * w * xi.structure.eval_ball(a).to_fraction()
        assert got == nu.eval_ball(a).to_fraction()


def test_weighted_integral_identity():
    # integral of f d(rho) equals integral of f g d(xi), pointwise
    rng = random.Random(113)
    xi = haar_xi()
    for _ in range(25):
        g = rand_fn(rng, 3, 1)
        rho, _ = weighted_measure(xi, g)
        f = rand_fn(rng, 3, 2)
        assert stochastic_integral(f, rho) == stochastic_integral(f * g, xi)


def test_inversion_roundtrip():
    rng = random.Random(127)
    xi = haar_xi()
    # nowhere-zero weight
    g = LocallyConstantFn.from_pairs(
        1,
        [
            (a, Fraction(rng.choice([1, 2, 3, -1, -2]), rng.choice([1, 2])))
            for a in refine(ClopenSet.whole(3), 1)
        ],
    )
    rho, _ = weighted_measure(xi, g)
    for b in all_balls(3, 0, 2):
        s = ClopenSet.of([b])
        assert invert_weighted(rho, g, s) == xi.eval_set(s)


def test_inversion_refuses_zero_weight():
    xi = haar_xi()
    atoms = refine(ClopenSet.whole(3), 1)
    g = LocallyConstantFn.from_pairs(
        1, [(a, Fraction(0) if a.center == 0 else Fraction(1)) for a in atoms]
    )
    rho, _ = weighted_measure(xi, g)
    with pytest.raises(DivisionByZeroAtom):
        invert_weighted(rho, g, ClopenSet.whole(3))
    # away from the zero atom the inversion still works
    ok_set = ClopenSet.of([Ball.around(3, 0, 1, 1)])
    assert invert_weighted(rho, g, ok_set) == xi.eval_set(ok_set)


# ---------------------------------------------------------------------------
# order swap with a scalar measure on T
# ---------------------------------------------------------------------------


def _product_fn(rng, r, lt, lg, separable=False):
    t_atoms = refine(ClopenSet.whole(r), lt)
    y_atoms = refine(ClopenSet.whole(r), lg)
    if separable:
        zt = {a: Fraction(rng.randint(-3, 3)) for a in t_atoms}
        zy = {b: Fraction(rng.randint(-3, 3)) for b in y_atoms}
        return ProductFn.from_dict(lt, lg, {(a, b): zt[a] * zy[b] for a in t_atoms for b in y_atoms})
    return ProductFn.from_dict(
        lt, lg, {(a, b): Fraction(rng.randint(-3, 3)) for a in t_atoms for b in y_atoms}
    )


def test_fubini_zero_and_separable():
    rng = random.Random(131)
    xi = haar_xi()
    h = HaarMeasure.unit(3, 5)
    zero = LocallyConstantFn.constant(ClopenSet.whole(3), Fraction(0), 0)
    g = _product_fn(rng, 3, 1, 1)
    lhs, rhs, ok = stochastic_fubini(zero, g, xi, h)
    assert ok and lhs.is_zero and rhs.is_zero
    # separable weight factorizes into a scalar integral times one integral
    z = rand_fn(rng, 3, 1)
    gsep = _product_fn(rng, 3, 1, 1, separable=True)
    lhs, rhs, ok = stochastic_fubini(z, gsep, xi, h)
    assert ok


def test_fubini_random_pairs():
    rng = random.Random(137)
    xi = haar_xi()
    h = HaarMeasure.unit(3, 5)
    for _ in range(50):
        z = rand_fn(rng, 3, rng.randint(0, 1))
        g = _product_fn(rng, 3, rng.randint(0, 1), rng.randint(0, 1))
        lhs, rhs, ok = stochastic_fubini(z, g, xi, h)
        assert ok


def test_fubini_with_nonuniform_t_measure():
    rng = random.Random(139)
    xi = haar_xi()
    h = DensityMeasure.from_scalars(
        3, 5, 1, {a: Fraction(rng.randint(-3, 3)) for a in refine(ClopenSet.whole(3), 1)}
    )
    for _ in range(20):
        z = rand_fn(rng, 3, 1)
        g = _product_fn(rng, 3, 1, 1)
        lhs, rhs, ok = stochastic_fubini(z, g, xi, h)
        assert ok


def test_measurable_kernel_table():
    # the map (t-atom, outcome) -> value of the inner integral is total
    rng = random.Random(149)
    xi = build_orthogonal_measure(HaarMeasure.unit(3, 5), 0)
    g = _product_fn(rng, 3, 1, 0)
    table = g.as_dict()
    for t_atom in refine(ClopenSet.whole(3), 1):
        pairs = [(b, v) for (a, b), v in table.items() if a == t_atom]
        inner = stochastic_integral(LocallyConstantFn.from_pairs(0, pairs), xi)
        tab = inner.table()
        assert len(tab) in (1, 2)  # one increment touched at level 0
        for v in tab.values():
            assert isinstance(v, Fraction)
