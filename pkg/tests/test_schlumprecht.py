import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distortkit import schlumprecht as sch
from distortkit.exceptions import InvalidInputError
from distortkit.schlumprecht import (Leaf, Node, SNormCache, flat_norms, functional_eval, level_k_action,
                                     phi, s_norm, s_norm_bounds, s_norming_functional,
                                     tree_from_json, validate_in_B)
from distortkit.vectors import SparseVector

from oracles import naive_level_k, naive_s


def flat(n, start=0):
    return SparseVector.indicator(range(start, start + n))


def test_phi_examples():
    assert phi(0) == 0 and phi(1) == 1 and phi(3) == 2
    with pytest.raises(InvalidInputError):
        phi(-1)
    xs = np.linspace(0, 50, 201)
    ys = [phi(x) for x in xs]
    assert all(b > a for a, b in zip(ys, ys[1:]))
    assert all(ys[i - 1] + ys[i + 1] <= 2 * ys[i] + 1e-12 for i in range(1, 200))


def test_s_norm_examples():
    assert s_norm(SparseVector.basis(5)) == 1
    assert s_norm(flat(3, 1)) == pytest.approx(1.5, abs=1e-12)
    assert s_norm(flat(4, 1)) == pytest.approx(4 / math.log2(5), abs=1e-12)
    assert s_norm(SparseVector.zero()) == 0


def test_flat_norms_match_oracle():
    F = flat_norms(8)
    for n in range(1, 7):
        assert F[n] == pytest.approx(naive_s([1] * n), abs=1e-12)
        assert F[n] == pytest.approx(n / phi(n), abs=1e-12)


def test_norming_functional_examples():
    v = s_norming_functional(flat(3, 1))
    assert isinstance(v, Node) and v.arity == 3
    assert functional_eval(v, flat(3, 1)) == pytest.approx(1.5)
    assert s_norming_functional(SparseVector.basis(7)) == Leaf(7, 1)
    v = s_norming_functional(SparseVector({0: 2.0}))
    assert v == Leaf(0, 1) and functional_eval(v, SparseVector({0: 2.0})) == 2
    with pytest.raises(InvalidInputError):
        s_norming_functional(SparseVector.zero())


def test_functional_eval_examples():
    e1 = SparseVector.basis(1)
    assert functional_eval(Leaf(1, 1), e1) == 1
    assert functional_eval(Leaf(1, -1), e1) == -1
    v = Node((Leaf(1), Leaf(2)))
    assert functional_eval(v, e1 + SparseVector.basis(2)) == pytest.approx(2 / phi(2))


def test_validate_in_B_examples():
    assert validate_in_B(Leaf(0, 1))
    assert not validate_in_B(Node((Leaf(2), Leaf(1))))
    assert validate_in_B(Node((Node((Leaf(0), Leaf(1))), Leaf(3))))
    assert not validate_in_B(Node((Node((Leaf(0), Leaf(3))), Leaf(2))))


def test_tree_json_round_trip():
    v = Node((Node((Leaf(0), Leaf(1, -1))), Leaf(3)))
    assert tree_from_json(v.to_json()) == v
    with pytest.raises(InvalidInputError):
        tree_from_json({"leaf": [0, 2]})


def test_level_k_examples():
    x = flat(4, 1)
    assert level_k_action(x, 1) == pytest.approx(s_norm(x))
    assert level_k_action(SparseVector.zero(), 3) == 0
    assert level_k_action(x, 2) == pytest.approx(naive_level_k([1] * 4, 2), abs=1e-12)
    assert level_k_action(x, 2) == pytest.approx(1.59229, abs=1e-5)
    with pytest.raises(InvalidInputError):
        level_k_action(x, 0)


def test_tie_break_prefers_sup_branch():
    # e_0 alone: the sup branch gives 1 and no node can beat it
    assert s_norming_functional(SparseVector({0: 1.0, 1: 1e-9})) == Leaf(0, 1)


def test_cache_intervals_agree_with_direct():
    rng = np.random.default_rng(3)
    x = SparseVector.from_dense(list(rng.standard_normal(9)), start=2)
    cache = SNormCache(x)
    for a, b in [(2, 10), (3, 7), (5, 5)]:
        sub = SparseVector({i: v for i, v in x.items() if a <= i <= b})
        assert cache.norm(a, b) == pytest.approx(s_norm(sub), abs=1e-12)


def test_large_support_bracket_tight_on_flat_and_valid():
    x = flat(1000)
    b = s_norm_bounds(x)
    assert b.tight and b.lower == pytest.approx(1000 / phi(1000), rel=1e-12)
    y = SparseVector({i: (1.0 if i < 400 else 0.25) for i in range(900)})
    b = s_norm_bounds(y)
    assert b.lower <= b.upper
    assert functional_eval(b.tree, y) == pytest.approx(b.lower, rel=1e-12)
    assert validate_in_B(b.tree)


def test_bracket_agrees_with_exact_on_medium_runs():
    # two runs, small enough for the exact table
    x = SparseVector({i: (1.0 if i < 60 else 0.3) for i in range(150)})
    exact = s_norm(x)
    b = s_norm_bounds(x, exact_limit=10)
    assert b.lower <= exact + 1e-12 <= b.upper + 2e-12
    assert b.lower == pytest.approx(exact, abs=1e-9)


coeffs = st.lists(st.floats(-4, 4, allow_nan=False).filter(lambda v: abs(v) > 1e-3),
                  min_size=1, max_size=10)


@given(coeffs, st.integers(0, 30))
def test_sandwich_and_norming(vals, start):
    x = SparseVector.from_dense(vals, start=start)
    n = s_norm(x)
    assert float(max(abs(v) for v in vals)) <= n + 1e-12
    assert n <= sum(abs(v) for v in vals) + 1e-12
    v = s_norming_functional(x)
    assert validate_in_B(v)
    assert functional_eval(v, x) == pytest.approx(n, abs=1e-9)
    assert max(abs(c) for c in v.realize().values) <= 1 + 1e-12
    for k in (1, 2, 3):
        assert level_k_action(x, k) <= n + 1e-12


@given(coeffs, st.data())
def test_unconditional_and_monotone(vals, data):
    x = SparseVector.from_dense(vals)
    signs = data.draw(st.lists(st.sampled_from([-1, 1]), min_size=len(vals), max_size=len(vals)))
    shrink = data.draw(st.lists(st.floats(0, 1), min_size=len(vals), max_size=len(vals)))
    flipped = SparseVector.from_dense([s * v for s, v in zip(signs, vals)])
    assert s_norm(flipped) == s_norm(x)
    smaller = SparseVector.from_dense([c * v for c, v in zip(shrink, vals)])
    assert s_norm(smaller) <= s_norm(x) + 1e-12


@given(st.lists(st.floats(0.01, 3), min_size=1, max_size=5))
def test_gapped_families_never_help(vals):
    from oracles import naive_s as ns
    assert ns(vals, gaps=True) == pytest.approx(ns(vals), abs=1e-12)


@settings(max_examples=25)
@given(st.lists(st.tuples(st.integers(1, 40), st.floats(0.05, 1)), min_size=1, max_size=5))
def test_run_shortcut_matches_dp(runs):
    vals = [v for length, v in runs for _ in range(length)]
    if len(vals) <= 48:
        vals = vals * (49 // len(vals) + 1)
    x = SparseVector(dict(enumerate(vals)))
    fast = s_norm_bounds(x, with_tree=False)
    dp = SNormCache(x).norm()
    assert fast.lower <= dp * (1 + 1e-12) and fast.upper >= dp * (1 - 1e-12)
    assert s_norm(x) == pytest.approx(dp, rel=1e-12)
