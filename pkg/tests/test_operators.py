import random
from fractions import Fraction

import pytest

from pam.errors import InvalidArgument
from pam.clopen_sets import Ball, ClopenSet, all_balls, canonicalize
from pam.measures import HaarMeasure, MeasureValue, measure_eval
from pam.operators import FinMatrix, FinVector, op_norm, pairing, rank_one, trace, trace_measure
from pam.padic_core import UltraNorm, padic_valuation


def _rand_vec(rng, p, size=5):
    return FinVector.of(
        p, {rng.randrange(8): Fraction(rng.randint(-9, 9), rng.randint(1, 6)) for _ in range(size)}
    )


def test_pairing_examples():
    p = 5
    e1 = FinVector.of(p, {1: 1})
    e2 = FinVector.of(p, {2: 1})
    assert pairing(e1, e1) == 1
    assert pairing(e1, e2) == 0
    a = FinVector.of(p, [1, 2])
    b = FinVector.of(p, [3, 4])
    assert pairing(a, b) == 11


def test_rank_one_examples():
    p = 5
    e1 = FinVector.of(p, {1: 1})
    e2 = FinVector.of(p, {2: 1})
    assert rank_one(e1, e2).as_dict() == {(1, 2): Fraction(1)}
    assert rank_one(FinVector.of(p, {}), e2).as_dict() == {}
    got = rank_one(FinVector.of(p, [1, 2]), FinVector.of(p, [3, 4]))
    assert got.as_dict() == {
        (0, 0): 3,
        (0, 1): 4,
        (1, 0): 6,
        (1, 1): 8,
    }


def test_trace_examples():
    p = 5
    assert trace(FinMatrix.identity(p, 5)) == 5
    assert trace(FinMatrix.of(p, {})) == 0
    assert trace(rank_one(FinVector.of(p, [1, 2]), FinVector.of(p, [3, 4]))) == 11


def test_trace_equals_pairing_1000_random_pairs():
    rng = random.Random(71)
    for _ in range(1000):
        p = rng.choice([2, 3, 5])
        a, b = _rand_vec(rng, p), _rand_vec(rng, p)
        assert trace(rank_one(a, b)) == pairing(a, b)
        # symmetry through the transposed factorization
        assert pairing(a, b) == trace(rank_one(b, a))


def test_trace_linear():
    rng = random.Random(73)
    for _ in range(200):
        p = rng.choice([2, 3, 5])
        f = rank_one(_rand_vec(rng, p), _rand_vec(rng, p))
        h = rank_one(_rand_vec(rng, p), _rand_vec(rng, p))
        x, y = Fraction(rng.randint(-5, 5)), Fraction(rng.randint(-5, 5))
        assert trace(f.scale(x) + h.scale(y)) == x * trace(f) + y * trace(h)


def test_trace_bounded_by_op_norm():
    rng = random.Random(79)
    for _ in range(500):
        p = rng.choice([2, 3, 5])
        f = rank_one(_rand_vec(rng, p), _rand_vec(rng, p))
        assert padic_valuation(trace(f), p) <= op_norm(f)


def test_transpose_involution():
    rng = random.Random(83)
    for _ in range(100):
        f = rank_one(_rand_vec(rng, 3), _rand_vec(rng, 3))
        assert f.transpose().transpose() == f


def test_op_norm_examples():
    assert op_norm(FinMatrix.identity(3, 3)) == UltraNorm(3, 0)
    assert op_norm(FinMatrix.of(3, {})).is_zero
    f = FinMatrix.of(2, {(0, 0): 4, (0, 1): Fraction(1, 2)})
    assert op_norm(f) == UltraNorm(2, -1)  # |1/2|_2 = 2


def test_trace_measure_examples():
    p = 5
    diag = HaarMeasure(3, 0, p, MeasureValue.matrix(p, [[1, 0], [0, 2]]))
    tr = trace_measure(diag)
    assert measure_eval(tr, ClopenSet.whole(3)).to_fraction() == 3
    zero_diag = HaarMeasure(3, 0, p, MeasureValue.matrix(p, [[0, 7], [4, 0]]))
    trz = trace_measure(zero_diag)
    assert measure_eval(trz, ClopenSet.whole(3)).is_zero
    # rank-one valued measure: trace recovers the pairing as density
    a, b = FinVector.of(p, [1, 2]), FinVector.of(p, [3, 4])
    f = rank_one(a, b)
    rows = [[f.as_dict().get((i, j), Fraction(0)) for j in range(2)] for i in range(2)]
    mu = HaarMeasure(3, 0, p, MeasureValue.matrix(p, rows))
    got = trace_measure(mu)
    assert measure_eval(got, ClopenSet.whole(3)).to_fraction() == pairing(a, b)


def test_trace_measure_additive_and_bounded():
    rng = random.Random(89)
    p = 5
    mu = HaarMeasure(3, 0, p, MeasureValue.matrix(p, [[1, 5], [Fraction(2, 5), 3]]))
    tr = trace_measure(mu)
    balls = all_balls(3, 0, 3)
    for _ in range(100):
        a, b = rng.sample(balls, 2)
        if a.meets(b):
            continue
        ab = canonicalize([a, b], r=3, m0=0)
        assert measure_eval(tr, ab) == tr.eval_ball(a) + tr.eval_ball(b)
    for a in balls:
        assert tr.eval_ball(a).unorm() <= mu.eval_ball(a).unorm()


def test_trace_measure_rejects_scalar():
    with pytest.raises(InvalidArgument):
        trace_measure(HaarMeasure.unit(3, 5))
