from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from distortkit.exceptions import InvalidInputError
from distortkit.vectors import (EXACT, FLOAT, BlockSequence, Segment, SparseVector, concat,
                                is_successive, loads_vector, lp_norm, min_pointwise,
                                pointwise_product, project, sqrt_pointwise, support,
                                supported_after, dumps_vector)


def e(i, mode=FLOAT):
    return SparseVector.basis(i, mode)


def test_support_examples():
    assert support(SparseVector.zero()).indices() == ()
    assert support(e(3)).indices() == (3,)
    assert support(SparseVector.from_dense([0, 2, 0, 5])).indices() == (1, 3)


def test_no_zero_stored_and_sorted():
    x = SparseVector({5: 1, 2: 0, 1: -3})
    assert x.indices == (1, 5)
    assert not SparseVector({0: 0})


@pytest.mark.parametrize("bad", [{-1: 1.0}, {1.5: 1.0}, {True: 1.0}, {0: float("nan")}])
def test_rejects_bad_entries(bad):
    with pytest.raises(InvalidInputError):
        SparseVector(bad)


def test_is_successive():
    assert is_successive(e(1), e(2))
    assert not is_successive(e(2), e(1))
    assert not is_successive(e(1) + e(3), e(3) + e(5))
    with pytest.raises(InvalidInputError):
        is_successive(SparseVector.zero(), e(1))


def test_supported_after_uses_positions():
    # index i is the (i+1)-th coordinate
    assert supported_after(e(4), 4)
    assert not supported_after(e(3), 4)


def test_project_examples():
    x = e(1) + e(2) + e(3)
    assert project(Segment.of([1, 2]), x) == e(1) + e(2)
    assert project(Segment.empty(), x) == SparseVector.zero()
    assert project(Segment.interval(0, 100), x) == x


def test_pointwise_product_examples():
    assert pointwise_product(e(1), e(2)) == SparseVector.zero()
    assert pointwise_product(e(1), e(1)) == e(1)
    assert pointwise_product(SparseVector({0: 2.0}), SparseVector({0: 3.0})) == SparseVector({0: 6.0})


def test_lp_norm_examples():
    for p in (1, 2, 3.5, float("inf")):
        assert lp_norm(e(1), p) == 1
    assert lp_norm(e(1) + e(2), 1) == 2
    assert lp_norm(e(1) + e(2), 2) == pytest.approx(2 ** 0.5)
    with pytest.raises(InvalidInputError):
        lp_norm(e(1), 0.5)


def test_min_and_sqrt():
    f, g = SparseVector({0: 1.0}), SparseVector({1: 1.0})
    assert min_pointwise(f, g) == SparseVector.zero()
    assert min_pointwise(f, f) == f
    assert sqrt_pointwise(SparseVector({0: 4.0})) == SparseVector({0: 2.0})
    with pytest.raises(InvalidInputError):
        min_pointwise(SparseVector({0: -1.0}), f)
    with pytest.raises(InvalidInputError):
        sqrt_pointwise(SparseVector({0: -1.0}))


def test_block_sequence_rules():
    BlockSequence((e(0), e(2) + e(3), e(5)))
    with pytest.raises(InvalidInputError):
        BlockSequence((e(2), e(1)))
    with pytest.raises(InvalidInputError):
        BlockSequence((e(0), SparseVector.zero()))
    bs = BlockSequence((e(0), e(1)))
    assert bs.combine([Fraction(1, 2), 3]) == SparseVector({0: 0.5, 1: 3.0})


def test_json_round_trip_and_errors():
    x = SparseVector({0: Fraction(1, 3), 4: Fraction(-2)}, EXACT)
    assert loads_vector(dumps_vector(x)) == x
    y = SparseVector({2: 0.25})
    assert loads_vector(dumps_vector(y)) == y
    for bad in ['{"mode":"float","coords":[[1,1],[0,1]]}', '{"mode":"exact","coords":[[0,1,0]]}',
                '{"coords":3}', "[1", '{"mode":"weird","coords":[]}']:
        with pytest.raises(InvalidInputError):
            loads_vector(bad)


def test_concat_requires_successive():
    assert concat([e(0), e(1)]) == e(0) + e(1)
    with pytest.raises(InvalidInputError):
        concat([e(1), e(0)])


fractions = st.fractions(min_value=-5, max_value=5, max_denominator=7)
exact_vectors = st.dictionaries(st.integers(0, 15), fractions, max_size=8).map(
    lambda d: SparseVector(d, EXACT))
unit_nonneg = st.lists(st.fractions(0, 5, max_denominator=9), min_size=1, max_size=8).filter(
    lambda xs: sum(xs) > 0).map(lambda xs: SparseVector(
        {i: v / sum(xs) for i, v in enumerate(xs)}, EXACT))


@given(exact_vectors, st.sets(st.integers(0, 15)))
def test_projection_idempotent_and_complementary(x, E):
    seg = Segment.of(E)
    px = project(seg, x)
    assert project(seg, px) == px
    assert px + project(seg.invert(), x) == x


@given(unit_nonneg, unit_nonneg)
def test_min_identity_exact(f, g):
    lhs = lp_norm(f - g, 1)
    assert lhs == lp_norm(f, 1) + lp_norm(g, 1) - 2 * lp_norm(min_pointwise(f, g), 1)


@given(unit_nonneg, unit_nonneg)
def test_sqrt_distance_bound(f, g):
    f, g = f.to_float(), g.to_float()
    rf, rg = sqrt_pointwise(f), sqrt_pointwise(g)
    sq = float(lp_norm(rf - rg, 2)) ** 2 if rf != rg else 0.0
    assert float(lp_norm(f - g, 1)) >= sq - 1e-12
    assert abs(sq - (2 - 2 * float(rf.dot(rg)))) < 1e-12
