"""Schlumprecht's norm, its norming set B, and the level-k functional families.

``||x||_S`` is the sup of ``|v(x)|`` over the smallest set ``B`` that contains
``+-e_i`` and is closed under ``(v_1 + ... + v_n) / phi(n)`` for successive
``v_i``.  Since the definition only sees the order of coordinates, the norm
depends on the sequence of nonzero coefficients alone, and the evaluation
runs over the compressed support.

Evaluation is an interval-partition dynamic program (exact, ``O(s^4)`` in the
support size ``s``).  Above ``exact_limit`` coordinates the program is
replaced by a certified bracket: a run-structured lower bound that comes with
an explicit functional, and a layer-cake upper bound.  The bracket closes on
flat vectors, which covers every l1-average built in
:mod:`distortkit.constructions`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from ._kernels import maxplus_conv, s_table, split_table
from .exceptions import InvalidInputError
from .vectors import FLOAT, SparseVector

#: supports up to this size are evaluated by the exact interval DP
EXACT_LIMIT = 320
#: bracket width accepted as "exact" for large supports
BRACKET_TOL = 1e-12
#: ties in the argmax are resolved within this relative slack
TIE_TOL = 1e-12


def phi(x: float) -> float:
    """``log2(x + 1)``."""
    if x < 0:
        raise InvalidInputError(f"phi is defined for x >= 0, got {x}")
    return math.log2(x + 1)


@lru_cache(maxsize=8)
def _phi_table(n: int) -> np.ndarray:
    return np.log2(np.arange(n + 1, dtype=float) + 1.0)


def phi_table(n: int) -> np.ndarray:
    """``phi(0..n)`` as an array (rounded up to a power of two for caching)."""
    size = 1 << max(4, (n + 1).bit_length())
    return _phi_table(size)


_flat_cache = np.array([0.0, 1.0])


def flat_norms(m: int) -> np.ndarray:
    """``F[l] = ||e_1 + ... + e_l||_S`` for ``l = 0..m``.

    Computed by induction: if ``F`` is concave on ``1..l-1`` then the best
    ``n``-part split of a flat run is the balanced one, so ``F[l]`` needs one
    pass over ``n``.  Concavity of the extended table is re-checked at every
    step, which keeps the induction honest.
    """
    global _flat_cache
    F = _flat_cache
    if m < len(F):
        return F[: m + 1]
    F = np.concatenate([F, np.zeros(m + 1 - len(F))])
    ph = phi_table(m)
    for L in range(len(_flat_cache), m + 1):
        n = np.arange(2, L + 1)
        q, r = np.divmod(L, n)
        sums = r * F[q + 1] + (n - r) * F[q]
        F[L] = max(1.0, float(np.max(sums / ph[n])))
        if L >= 3 and F[L] - F[L - 1] > F[L - 1] - F[L - 2] + 1e-12:
            raise ArithmeticError(f"flat norms lost concavity at length {L}")
    _flat_cache = F
    return F[: m + 1]


# -- functional trees --------------------------------------------------------

@dataclass(frozen=True)
class Leaf:
    """Signed unit functional ``sign * e*_index``."""

    index: int
    sign: int = 1

    @property
    def min_index(self) -> int:
        return self.index

    @property
    def max_index(self) -> int:
        return self.index

    def realize(self) -> SparseVector:
        return SparseVector({self.index: float(self.sign)}, FLOAT)

    def to_json(self) -> dict:
        return {"leaf": [self.index, self.sign]}

    def depth(self) -> int:
        return 0


@dataclass(frozen=True)
class Node:
    """``(v_1 + ... + v_n) / phi(n)`` over successive children."""

    children: tuple = field(default_factory=tuple)

    @property
    def arity(self) -> int:
        return len(self.children)

    @property
    def min_index(self) -> int:
        return self.children[0].min_index

    @property
    def max_index(self) -> int:
        return self.children[-1].max_index

    @cached_property
    def _realized(self) -> SparseVector:
        idx: list[int] = []
        val: list[float] = []
        scale = 1.0 / phi(len(self.children))
        for child in self.children:
            r = child.realize()
            idx.extend(r.indices)
            val.extend(v * scale for v in r.values)
        if len(set(idx)) != len(idx) or idx != sorted(idx):
            return _sum_overlapping(self.children, scale)
        return SparseVector._raw(idx, val, FLOAT)

    def realize(self) -> SparseVector:
        return self._realized

    def to_json(self) -> dict:
        return {"node": [c.to_json() for c in self.children]}

    def depth(self) -> int:
        return 1 + max(c.depth() for c in self.children)


FunctionalTree = Leaf | Node


def _sum_overlapping(children, scale) -> SparseVector:
    # only reached for trees that fail validate_in_B
    total = SparseVector.zero(FLOAT)
    for c in children:
        total = total + c.realize()
    return total * scale


def tree_from_json(obj) -> FunctionalTree:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise InvalidInputError(f"bad functional tree node {obj!r}")
    if "leaf" in obj:
        i, sign = obj["leaf"]
        if sign not in (1, -1) or not isinstance(i, int) or i < 0:
            raise InvalidInputError(f"bad leaf {obj!r}")
        return Leaf(i, sign)
    if "node" in obj:
        kids = obj["node"]
        if not isinstance(kids, list) or not kids:
            raise InvalidInputError("node needs at least one child")
        return Node(tuple(tree_from_json(k) for k in kids))
    raise InvalidInputError(f"bad functional tree node {obj!r}")


def functional_eval(v: FunctionalTree, x: SparseVector) -> float:
    """Pairing of the realized functional with ``x``."""
    return float(v.realize().dot(x))


def validate_in_B(v: FunctionalTree) -> bool:
    """Structural membership in B: unit leaves and successive children."""
    if isinstance(v, Leaf):
        return v.sign in (1, -1) and v.index >= 0
    if not isinstance(v, Node) or not v.children:
        return False
    if not all(validate_in_B(c) for c in v.children):
        return False
    return all(a.max_index < b.min_index for a, b in zip(v.children, v.children[1:]))


def flat_tree(indices: Sequence[int], signs: Sequence[int] | None = None) -> FunctionalTree:
    """All-leaves node over ``indices`` (a single leaf when there is one)."""
    signs = signs if signs is not None else [1] * len(indices)
    leaves = tuple(Leaf(i, s) for i, s in zip(indices, signs))
    return leaves[0] if len(leaves) == 1 else Node(leaves)


# -- exact interval DP -------------------------------------------------------

class SNormCache:
    """Sealed table of S-norms of every interval projection of one vector.

    ``norm(a, b)`` answers for index intervals ``[a, b]``.  The argmax record
    is the winning arity per interval; partitions are recovered on demand.
    Tables are built once in ``__init__`` and never mutated, so concurrent
    readers are safe.
    """

    def __init__(self, x: SparseVector):
        x = x.to_float()
        self.vector = x
        self.indices = np.array(x.indices, dtype=np.int64)
        self._signs = [1 if v > 0 else -1 for v in x.values]
        self.weights = np.abs(np.array(x.values, dtype=float))
        s = len(self.indices)
        if s:
            self._phi = phi_table(s + 1)
            self.table, self.best_n = s_table(self.weights, self._phi)
        else:
            self._phi = phi_table(1)
            self.table = np.zeros((0, 0))
            self.best_n = np.zeros((0, 0), dtype=np.int64)

    @property
    def size(self) -> int:
        return len(self.indices)

    def _positions(self, a: int, b: int) -> tuple[int, int]:
        lo = int(np.searchsorted(self.indices, a, side="left"))
        hi = int(np.searchsorted(self.indices, b, side="right")) - 1
        return lo, hi

    def norm(self, a: int | None = None, b: int | None = None) -> float:
        if self.size == 0:
            return 0.0
        lo, hi = (0, self.size - 1) if a is None else self._positions(a, b)
        if lo > hi:
            return 0.0
        return float(self.table[lo, hi])

    def best_parts_sum(self, k: int, lo: int = 0, hi: int | None = None) -> float:
        """Max of ``sum_i ||E_i x||`` over at most ``k`` successive intervals."""
        hi = self.size - 1 if hi is None else hi
        if self.size == 0 or lo > hi:
            return 0.0
        k = min(k, hi - lo + 1)
        suffix = split_table(self.table, lo, hi, k)
        return float(suffix[k, lo])

    def partition(self, lo: int, hi: int, n: int) -> list[tuple[int, int]]:
        """Lexicographically earliest optimal ``n``-part partition of ``[lo, hi]``."""
        suffix = split_table(self.table, lo, hi, n)
        out = []
        e = lo
        for j in range(n, 0, -1):
            target = suffix[j, e]
            slack = TIE_TOL * max(1.0, abs(target))
            for f in range(e, hi - j + 2):
                rest = suffix[j - 1, f + 1]
                if rest >= 0.0 and self.table[e, f] + rest >= target - slack:
                    out.append((e, f))
                    e = f + 1
                    break
            else:  # pragma: no cover - the DP guarantees a split exists
                raise ArithmeticError("partition reconstruction failed")
        return out

    def tree(self, lo: int = 0, hi: int | None = None) -> FunctionalTree:
        hi = self.size - 1 if hi is None else hi
        if self.size == 0 or lo > hi:
            raise InvalidInputError("no norming functional for the zero vector")
        n = int(self.best_n[lo, hi])
        if n == 1:
            seg = self.weights[lo: hi + 1]
            p = lo + int(np.argmax(seg))
            return Leaf(int(self.indices[p]), self._signs[p])
        return Node(tuple(self.tree(a, b) for a, b in self.partition(lo, hi, n)))


# -- bracket for large supports ---------------------------------------------

@dataclass(frozen=True)
class NormBounds:
    lower: float
    upper: float
    tree: FunctionalTree | None

    @property
    def tight(self) -> bool:
        return self.upper - self.lower <= BRACKET_TOL * max(1.0, self.upper)


def _runs(weights: np.ndarray) -> list[tuple[int, int, float]]:
    out = []
    start = 0
    for i in range(1, len(weights) + 1):
        if i == len(weights) or weights[i] != weights[start]:
            out.append((start, i - start, float(weights[start])))
            start = i
    return out


def _depth_one(weights: np.ndarray) -> tuple[float, np.ndarray]:
    order = np.argsort(-weights, kind="stable")
    sums = np.cumsum(weights[order])
    ph = phi_table(len(weights))[1: len(weights) + 1]
    vals = sums / ph
    k = int(np.argmax(vals)) + 1
    return float(vals[k - 1]), np.sort(order[:k])


def _layer_cake_upper(weights: np.ndarray) -> float:
    levels = np.unique(weights)[::-1]
    F = flat_norms(len(weights))
    total = 0.0
    for i, h in enumerate(levels):
        nxt = levels[i + 1] if i + 1 < len(levels) else 0.0
        count = int(np.count_nonzero(weights >= h))
        total += (h - nxt) * F[count]
    return total


class _RunProgram:
    """Lower bound over trees whose cuts respect the run structure.

    Inside a run, children are balanced flat pieces (optimal among pure
    pieces because flat norms are concave); across runs, children are whole
    run groups evaluated recursively.  Every value is realized by an explicit
    tree, so the result is a valid lower bound.
    """

    NEG = -1e300

    def __init__(self, runs):
        self.runs = runs
        self.total = sum(L for _, L, _ in runs)
        self.F = flat_norms(self.total)
        self.Fpad = np.append(self.F, 0.0)
        self.ph = phi_table(self.total + 1)
        self.memo: dict = {}

    def balanced_row(self, L: int) -> np.ndarray:
        """``balanced(L, j)`` for ``j = 0..L``."""
        j = np.arange(1, L + 1)
        q, r = np.divmod(L, j)
        F = self.Fpad
        return np.concatenate([[0.0], r * F[q + 1] + (j - r) * F[q]])

    def balanced(self, T: int, j: int) -> float:
        if j == 0:
            return 0.0 if T >= 0 else self.NEG
        q, r = divmod(T, j)
        if q == 0:
            return self.NEG
        return (r * self.F[q + 1] if r else 0.0) + (j - r) * self.F[q]

    def solve(self, r1: int, r2: int):
        key = (r1, r2)
        if key in self.memo:
            return self.memo[key]
        cvals = [self.runs[r][2] for r in range(r1, r2 + 1)]
        best = (max(cvals), ("leaf", r1 + int(np.argmax(cvals))))
        if r2 > r1:
            for sub in ((r1 + 1, r2), (r1, r2 - 1)):
                val = self.solve(*sub)[0]
                if val > best[0] * (1 + TIE_TOL):
                    best = (val, ("sub", sub))
        tot = sum(self.runs[r][1] for r in range(r1, r2 + 1))
        NEG = self.NEG
        layers = [np.full(tot + 1, NEG)]
        layers[0][0] = 0.0
        choices = []
        for r in range(r1, r2 + 1):
            k = r - r1
            L, c = self.runs[r][1], self.runs[r][2]
            prev = layers[k]
            adds = c * self.balanced_row(L)
            cur, arg = maxplus_conv(prev, adds, NEG)
            choice = np.zeros((tot + 1, 2), dtype=np.int64)
            choice[:, 1] = arg
            for s_ in range(r1, r):
                if s_ == r1 and r == r2:
                    continue
                val = self.solve(s_, r)[0]
                base = layers[s_ - r1]
                cand = np.full(tot + 1, NEG)
                cand[1:] = base[:-1] + val
                better = cand > cur
                cur = np.where(better, cand, cur)
                choice[better] = (1, s_)
            layers.append(cur)
            choices.append(choice)
        final = layers[-1]
        if tot >= 2:
            ratios = np.where(final[2:] > NEG / 2, final[2:] / self.ph[2: tot + 1], NEG)
            n = 2 + int(np.argmax(ratios))
            if ratios[n - 2] > best[0] * (1 + TIE_TOL):
                best = (float(ratios[n - 2]), ("node", n, choices))
        self.memo[key] = best
        return best

    def tree(self, r1: int, r2: int, indices, signs) -> FunctionalTree:
        val, how = self.solve(r1, r2)
        kind = how[0]
        if kind == "leaf":
            start = self.runs[how[1]][0]
            return Leaf(int(indices[start]), signs[start])
        if kind == "sub":
            return self.tree(*how[1], indices, signs)
        _, n, choices = how
        kids: list = []
        r = r2
        while r >= r1:
            k = r - r1
            tag, arg = choices[k][n]
            if tag == 0:
                j = int(arg)
                start, L, _ = self.runs[r]
                q, rem = divmod(L, j) if j else (0, 0)
                pieces = []
                pos = start
                for t in range(j):
                    ln = q + 1 if t < rem else q
                    pieces.append(flat_tree([int(i) for i in indices[pos: pos + ln]],
                                            signs[pos: pos + ln]))
                    pos += ln
                kids = pieces + kids
                n -= j
                r -= 1
            else:
                s_ = int(arg)
                kids = [self.tree(s_, r, indices, signs)] + kids
                n -= 1
                r = s_ - 1
        return Node(tuple(kids))


#: run programs are only attempted below this many runs
MAX_RUNS = 12
#: exact-range supports above this size try the run bracket first
RUN_SHORTCUT = 48


def s_norm_bounds(x: SparseVector, exact_limit: int = EXACT_LIMIT,
                  with_tree: bool = True) -> NormBounds:
    """Certified ``lower <= ||x||_S <= upper`` with a functional attaining ``lower``.

    ``with_tree=False`` skips building the functional (``tree`` is then None).
    """
    x = x.to_float()
    if not x:
        return NormBounds(0.0, 0.0, None)
    if len(x) <= exact_limit:
        # a closed run bracket is exact and far cheaper than the DP; it is
        # skipped when a functional is wanted so the DP tie-break decides it
        if not with_tree and len(x) > RUN_SHORTCUT:
            b = _bracket(x, False)
            if b.tight:
                return b
        cache = SNormCache(x)
        val = cache.norm()
        return NormBounds(val, val, cache.tree() if with_tree else None)
    return _bracket(x, with_tree)


def _bracket(x: SparseVector, with_tree: bool) -> NormBounds:
    w = np.abs(np.array(x.values, dtype=float))
    idx = np.array(x.indices, dtype=np.int64)
    signs = [1 if v > 0 else -1 for v in x.values]
    lower, chosen = _depth_one(w)
    tree = flat_tree([int(idx[i]) for i in chosen], [signs[i] for i in chosen]) if with_tree else None
    runs = _runs(w)
    if len(runs) <= MAX_RUNS:
        prog = _RunProgram(runs)
        val = prog.solve(0, len(runs) - 1)[0]
        if val > lower * (1 + TIE_TOL):
            lower = val
            tree = prog.tree(0, len(runs) - 1, idx, signs) if with_tree else None
    upper = max(float(_layer_cake_upper(w)), lower)
    return NormBounds(float(lower), upper, tree)


def s_norm(x: SparseVector, exact_limit: int = EXACT_LIMIT) -> float:
    """Schlumprecht norm of a finitely supported vector.

    Raises :class:`InvalidInputError` when the support exceeds ``exact_limit``
    and the certified bracket does not close; use :func:`s_norm_bounds` then.
    """
    b = s_norm_bounds(x, exact_limit, with_tree=False)
    if not b.tight:
        raise InvalidInputError(
            f"support {len(x)} exceeds exact_limit={exact_limit} and the bracket "
            f"[{b.lower:.12g}, {b.upper:.12g}] is open; use s_norm_bounds")
    return b.lower


def s_norming_functional(x: SparseVector, exact_limit: int = EXACT_LIMIT) -> FunctionalTree:
    """Element of B attaining ``||x||_S``; leaves carry the coefficient signs."""
    if not x:
        raise InvalidInputError("the zero vector has no norming functional")
    b = s_norm_bounds(x, exact_limit)
    if not b.tight:
        raise InvalidInputError(
            f"support {len(x)} too large for an exact norming functional; "
            f"raise exact_limit (bracket [{b.lower:.12g}, {b.upper:.12g}])")
    return b.tree


def level_k_action(x: SparseVector, k: int, cache: SNormCache | None = None) -> float:
    """``sup { |v(x)| : v in A*_k }``.

    ``A*_k`` collects ``(v_1 + ... + v_k) / phi(k)`` with successive ``v_i`` in
    the unit ball of ``S*``, so the sup is the best ``k``-interval split of
    ``x`` measured in the S-norm, divided by ``phi(k)``.
    """
    if k < 1:
        raise InvalidInputError(f"level must be >= 1, got {k}")
    if not x:
        return 0.0
    if cache is None:
        if len(x) > EXACT_LIMIT:
            raise InvalidInputError(f"support {len(x)} exceeds exact_limit={EXACT_LIMIT}")
        cache = SNormCache(x)
    return cache.best_parts_sum(k) / phi(k)
