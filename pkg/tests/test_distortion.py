import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from distortkit.constructions import LacunaritySchedule, make_ak, make_delta, make_dm, make_gamma
from distortkit.distortion import (BlockSubspace, RenormSpec, asymptotic_distance, cross_action,
                                   distortion_search, distortion_witness, estimate_FG, eval_renorm,
                                   holder_cut_check, is_delta_norming, lemma2_probe, min_identity,
                                   modulus_profile, orthogonality_probe, product_sqrt_bound,
                                   rows_to_csv, seq_distortion_suite)
from distortkit.exceptions import InfeasibleConstructionError, InvalidInputError
from distortkit.spaces import SpaceParams, calibrate
from distortkit.vectors import Segment, SparseVector

from oracles import l2_closed_form_ratio

L2 = SpaceParams.parse("lp:2")


def e(i):
    return SparseVector.basis(i)


@pytest.fixture(scope="module")
def t2():
    sp = SpaceParams.parse("t2")
    return sp.with_calibration(calibrate(sp, budget=8))


def test_eval_renorm_examples():
    assert eval_renorm(RenormSpec((e(1),), "epsilon", 1.0, L2), e(1)) == 2
    assert eval_renorm(RenormSpec((e(1),), "epsilon", 1.0, L2), e(2)) == 1
    assert eval_renorm(RenormSpec((e(1),), "epsilon", 0.5, L2), e(1)) == 3
    assert eval_renorm(RenormSpec((e(1),), "tau", 0.5, L2), e(1)) == 1.5
    assert eval_renorm(RenormSpec((e(1),), "gamma", 2.0, L2), e(1)) == 0.25
    with pytest.raises(InvalidInputError):
        RenormSpec((), "epsilon", 1.0, L2)
    with pytest.raises(InvalidInputError):
        RenormSpec((e(1),), "epsilon", 0.0, L2)


def test_delta_norming_examples():
    assert is_delta_norming([e(1)], [e(1)], 1.0, L2) == (True, None)
    ok, w = is_delta_norming([e(1)], [e(2)], 0.1, L2)
    assert not ok and w == e(2)
    xs = [SparseVector({0: 1.0, 1: 2.0}), SparseVector({3: -1.0})]
    assert is_delta_norming([L2.norming_functional(x) for x in xs], xs, 1.0, L2)[0]


def test_witness_examples():
    spec = RenormSpec((e(0),), "epsilon", 1 / 16, L2)
    rep = distortion_witness(e(0), e(1), spec, delta=0.25)
    assert rep.a_large and rep.b_bounded and rep.ratio >= (0.25 * 16) / 2
    assert rep.ratio <= rep.exploratory_upper
    assert distortion_witness(e(0), e(0), spec).ratio == 1
    with pytest.raises(InvalidInputError):
        distortion_witness(e(0) * 2, e(1), spec)


def test_witness_schlumprecht_family():
    sched = LacunaritySchedule(1e-3)
    ak, al = make_ak(2, sched), make_ak(5, sched)
    S = SpaceParams.parse("s")
    spec = RenormSpec((ak.v,), "epsilon", 0.5, S)
    a = ak.u * (1 / S.norm(ak.u))
    b = al.u * (1 / S.norm(al.u))
    rep = distortion_witness(a, b, spec)
    assert rep.ratio >= 1 and rep.ratio <= rep.exploratory_upper


def test_search_examples():
    same = RenormSpec(tuple(L2.norming_functional(SparseVector({0: math.cos(t), 1: math.sin(t)}))
                            for t in np.linspace(0, math.pi, 400)), "tau", 1.0, L2)
    sub = BlockSubspace.normalized([e(0), e(1)], L2)
    r = distortion_search(same, sub)
    assert r.ratio == pytest.approx(1, abs=1e-4)
    r = distortion_search(RenormSpec((e(0),), "epsilon", 0.1, L2), BlockSubspace.normalized([e(4)], L2))
    assert r.ratio == 1
    spec = RenormSpec((e(0),), "epsilon", 0.1, L2)
    r = distortion_search(spec, sub)
    ratio, mx, mn = l2_closed_form_ratio(0.1, 4000)
    assert r.ratio == pytest.approx(ratio, abs=1e-3)
    with pytest.raises(InvalidInputError):
        distortion_search(spec, sub, budget=0)


def test_search_high_dimension_is_seeded():
    sub = BlockSubspace.normalized([e(i) for i in range(5)], L2)
    spec = RenormSpec((e(0), e(3)), "epsilon", 0.5, L2)
    a = distortion_search(spec, sub, budget=64, seed=3)
    b = distortion_search(spec, sub, budget=64, seed=3)
    assert a == b and not a.exhaustive
    assert a.ratio <= 3 + 1e-9


def test_asymptotic_distance_examples(t2):
    assert asymptotic_distance([e(1)], BlockSubspace.normalized([e(1)], L2))[0] == 0
    assert asymptotic_distance([e(1)], BlockSubspace.normalized([e(2)], L2))[0] == pytest.approx(1)
    c = make_delta(t2, 4, 2)
    d, _ = asymptotic_distance([c.z], BlockSubspace.normalized(c.blocks, t2))
    assert d < 1e-9
    with pytest.raises(InvalidInputError):
        asymptotic_distance([], BlockSubspace.normalized([e(1)], L2))


def test_estimate_fg_examples():
    for n in (1, 2, 4):
        f = estimate_FG(SpaceParams.parse("lp:1"), n, 0, budget=16)
        assert f.F == pytest.approx(1) and f.G == pytest.approx(1)
        f = estimate_FG(L2, n, 0, budget=16)
        assert f.F == pytest.approx(1, abs=1e-9) and f.G == pytest.approx(1, abs=1e-9)
    t = estimate_FG(SpaceParams.parse("t"), 2, 4, budget=16)
    assert t.F >= 1 and t.G >= 1
    prev = 1.0
    for n in (1, 2, 3):
        f = estimate_FG(SpaceParams.parse("t2"), n, 4, budget=8, seed=2)
        assert f.F >= prev - 1e-12
        prev = f.F
    with pytest.raises(InvalidInputError):
        estimate_FG(L2, 2, 0, budget=0)


def test_holder_examples():
    lhs, rhs, ok = holder_cut_check([1.0], 9, 2.0, parts=[9])
    assert lhs == pytest.approx(rhs) and ok
    m, N = 4, 12
    lhs, rhs, ok = holder_cut_check([m ** -0.5] * m, N, 2.0, parts=[N // m] * m)
    assert abs(lhs - rhs) < 1e-12 and ok
    b = SparseVector.indicator(range(6))
    xs = [SparseVector({0: 0.5, 1: 0.5}), SparseVector({2: 0.5, 5: 0.5})]
    assert holder_cut_check(xs, b, 2.0).passed
    with pytest.raises(InvalidInputError):
        holder_cut_check([1.0, 1.0], 4, 2.0, parts=[2, 2])
    with pytest.raises(InvalidInputError):
        holder_cut_check([0.5, 0.5], b, 2.0, parts=[Segment.of([0, 1]), Segment.of([1, 2])])


def test_orthogonality_examples():
    t = make_dm(2, 0, 3)
    assert orthogonality_probe(t, t)[:2] == pytest.approx((1.0, 0.0))
    t2_ = make_dm(2, 10, 3)
    p, d, ok = orthogonality_probe(t, t2_)
    assert p == 0 and d == pytest.approx(2) and ok
    f = SparseVector({0: 0.5, 1: 0.5})
    g = SparseVector({1: 0.5, 2: 0.5})
    p, d, ok = orthogonality_probe(f, g)
    assert p == pytest.approx(0.5) and d == pytest.approx(1) and ok
    with pytest.raises(InvalidInputError):
        orthogonality_probe(SparseVector({0: -1.0}), f)


def test_cross_action_examples():
    sched = LacunaritySchedule(1e-3)
    row = [make_ak(2, sched)]
    m = cross_action(row, row)
    assert m.matched[0] == pytest.approx(1, abs=1e-9)
    with pytest.raises(InvalidInputError):
        cross_action(row, [])
    vals = [cross_action(row, [make_ak(l, sched)]).entries[0][0] for l in (3, 4, 5)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_lemma2_examples(t2):
    g = make_gamma(t2, 2, (2, 3))
    prof = lemma2_probe([g], t2, (0.3, 0.1, 0.03))
    assert prof.subsets > 0
    assert all(b <= a for a, b in zip(prof.observed_y, prof.observed_y[1:]))
    assert all(b <= a for a, b in zip(prof.observed_ystar, prof.observed_ystar[1:]))


def test_modulus_profile_l2_close_to_exact():
    sp = L2.with_calibration(calibrate(L2, budget=4))
    prof = modulus_profile(sp, (0.3, 0.1, 0.03))
    for t, v in prof.delta[1::20]:
        exact = 1 - math.sqrt(1 - (t / 2) ** 2)
        assert v >= exact - 1e-9 and v - exact < 0.02
    for curve in (prof.alpha1, prof.alpha2, prof.alpha3, prof.alpha):
        assert all(c >= 0 for c in curve)
        # eps grid is decreasing, so the curves are nonincreasing along it
        assert all(b <= a + 1e-12 for a, b in zip(curve, curve[1:]))


def test_seq_suite_examples(t2):
    one = seq_distortion_suite(t2, (1,), 1)
    assert one.table[0][0] >= t2.C ** -2 - 1e-9
    two = seq_distortion_suite(t2, (1, 2), 2)
    assert two.off_diagonal_smaller and all(two.self_pairing_ok) and two.below_base
    with pytest.raises(InfeasibleConstructionError):
        seq_distortion_suite(t2, (2, 2), 2)


def test_csv_is_deterministic():
    rows = [{"a": 0.1 + 0.2, "b": 1}, {"a": 1 / 3, "b": 2}]
    assert rows_to_csv(rows) == rows_to_csv(rows)
    assert rows_to_csv(rows).splitlines()[1] == "0.30000000000000004,1"


unit = st.lists(st.floats(0, 1), min_size=1, max_size=8).filter(lambda v: sum(v) > 1e-6).map(
    lambda v: SparseVector({i: x / sum(v) for i, x in enumerate(v)}))


@given(unit, unit)
def test_orthogonality_bound_property(f, g):
    assert orthogonality_probe(f, g)[2]
    lhs, rhs = min_identity(f, g)
    assert float(lhs) == pytest.approx(float(rhs), abs=1e-12)


@given(unit, unit, unit, unit)
def test_product_sqrt_bound_property(u, v, u2, v2):
    assert product_sqrt_bound(u, v, u2, v2)[2]


@given(st.lists(st.floats(0.01, 1), min_size=1, max_size=6), st.data())
def test_holder_property(ws, data):
    q = 2.0
    norms = [w / math.sqrt(sum(x * x for x in ws)) for w in ws]
    sizes = data.draw(st.lists(st.integers(0, 5), min_size=len(ws), max_size=len(ws)))
    N = sum(sizes) + data.draw(st.integers(0, 3))
    if N == 0:
        return
    assert holder_cut_check(norms, N, 2.0, q, parts=sizes).passed
