"""Tsirelson's space T and its p-convexification T^(p).

``T(x) = max(||x||_inf, 1/2 sup sum_j T(E_j x))`` where the sup runs over
admissible families ``E_1 < ... < E_k`` with ``k <= min E_1``.  Coordinates
are 1-based in that condition: the vector index ``i`` sits at position
``i + 1``.

Float vectors go through the compiled table in :mod:`distortkit._kernels`;
exact vectors run the same recursion on ``Fraction`` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._kernels import split_table, t_table
from .exceptions import InvalidInputError
from .vectors import EXACT, FLOAT, Segment, SparseVector

TIE_TOL = 1e-12


@dataclass(frozen=True)
class AdmissibleFamily:
    """Successive index sets ``E_1 < ... < E_k`` with ``k <= min E_1 + 1``."""

    sets: tuple[Segment, ...]

    def __post_init__(self):
        sets = tuple(self.sets)
        object.__setattr__(self, "sets", sets)
        if not sets or any(len(E) == 0 for E in sets):
            raise InvalidInputError("admissible families need nonempty sets")
        bounds = [(min(E.indices()), max(E.indices())) for E in sets]
        for (_, hi), (lo, _) in zip(bounds, bounds[1:]):
            if hi >= lo:
                raise InvalidInputError("sets of an admissible family must be successive")
        if len(sets) > bounds[0][0] + 1:
            raise InvalidInputError(
                f"{len(sets)} sets but the first starts at position {bounds[0][0] + 1}")

    @staticmethod
    def is_admissible(sets: Sequence[Segment]) -> bool:
        try:
            AdmissibleFamily(tuple(sets))
        except InvalidInputError:
            return False
        return True


# -- tables -------------------------------------------------------------------

def _t_tables_exact(w: list, pos: list[int]):
    """Same recursion as the compiled kernel, on arbitrary numbers."""
    s = len(w)
    zero = Fraction(0)
    norm = [[zero] * s for _ in range(s)]
    fam = [[None] * s for _ in range(s)]
    for a in range(s - 1, -1, -1):
        parts: dict = {}
        top = zero
        l1 = zero
        for b in range(a, s):
            top = max(top, w[b])
            l1 += w[b]
            L = b - a + 1
            k = min(pos[a], L)
            layers = min(pos[a], L)
            for j in range(1, layers):
                acc = None
                for e in range(a + j - 1, b):
                    prev = parts.get((j - 1, e)) if j > 1 else norm[a][e]
                    if prev is None:
                        continue
                    cand = prev + norm[e + 1][b]
                    if acc is None or cand > acc:
                        acc = cand
                parts[(j, b)] = acc
            if k == L:
                fam[a][b] = l1 if L >= 2 else None
            elif k >= 2:
                fam[a][b] = parts[(k - 1, b)]
            best = top
            for c in range(a, b + 1):
                if fam[c][b] is not None and fam[c][b] / 2 > best:
                    best = fam[c][b] / 2
            norm[a][b] = best
            parts[(0, b)] = best
    return norm, fam


def _suffix_exact(norm, a, b, n):
    suffix = [[None] * (b + 2) for _ in range(n + 1)]
    suffix[0][b + 1] = 0
    for j in range(1, n + 1):
        for e in range(b, a - 1, -1):
            acc = None
            for f in range(e, b + 1):
                rest = suffix[j - 1][f + 1]
                if rest is None:
                    continue
                cand = norm[e][f] + rest
                if acc is None or cand > acc:
                    acc = cand
            suffix[j][e] = acc
    return suffix


class TNormCache:
    """Sealed table of T-norms of all interval projections of one vector."""

    def __init__(self, x: SparseVector):
        self.vector = x
        self.mode = x.mode
        self.indices = list(x.indices)
        self._signs = [1 if v > 0 else -1 for v in x.values]
        pos = [i + 1 for i in self.indices]
        if self.mode == EXACT:
            self.weights = [abs(Fraction(v)) for v in x.values]
            self.table, self.fam = _t_tables_exact(self.weights, pos)
        else:
            self.weights = np.abs(np.array(x.values, dtype=float))
            if len(self.weights):
                self.table, self.fam = t_table(self.weights, np.array(pos, dtype=np.int64))
            else:
                self.table = self.fam = np.zeros((0, 0))

    @property
    def size(self) -> int:
        return len(self.indices)

    def norm(self):
        if self.size == 0:
            return Fraction(0) if self.mode == EXACT else 0.0
        v = self.table[0][self.size - 1]
        return v if self.mode == EXACT else float(v)

    def _fam(self, c, b):
        v = self.fam[c][b]
        if self.mode == EXACT:
            return v
        return None if v < 0 else float(v)

    def _suffix(self, a, b, n):
        if self.mode == EXACT:
            return _suffix_exact(self.table, a, b, n)
        raw = split_table(self.table, a, b, n)
        return [[None if v < 0 else float(v) for v in row] for row in raw]

    def _ge(self, lhs, rhs) -> bool:
        if self.mode == EXACT:
            return lhs >= rhs
        return lhs >= rhs - TIE_TOL * max(1.0, abs(rhs))

    def functional(self, a: int = 0, b: int | None = None) -> dict[int, object]:
        """Coefficients of a norming functional of the projection onto ``[a, b]``.

        Ties go to the admissible-family branch, then the leftmost first set,
        then the fewest sets, then the lexicographically earliest partition.
        """
        b = self.size - 1 if b is None else b
        target = self.table[a][b]
        half = Fraction(1, 2) if self.mode == EXACT else 0.5
        for c in range(a, b + 1):
            f = self._fam(c, b)
            if f is None or not self._ge(f * half, target):
                continue
            L = b - c + 1
            kmax = min(self.indices[c] + 1, L)
            suffix = self._suffix(c, b, kmax)
            for k in range(2, kmax + 1):
                if suffix[k][c] is not None and self._ge(suffix[k][c], f):
                    break
            out: dict[int, object] = {}
            for lo, hi in self._partition(suffix, c, b, k):
                for i, v in self.functional(lo, hi).items():
                    out[i] = v * half
            return out
        seg = self.weights[a: b + 1]
        p = a + max(range(len(seg)), key=lambda i: (seg[i], -i))
        one = Fraction(1) if self.mode == EXACT else 1.0
        return {self.indices[p]: one * self._signs[p]}

    def _partition(self, suffix, lo, hi, n):
        out = []
        e = lo
        for j in range(n, 0, -1):
            target = suffix[j][e]
            for f in range(e, hi - j + 2):
                rest = suffix[j - 1][f + 1]
                if rest is not None and self._ge(self.table[e][f] + rest, target):
                    out.append((e, f))
                    e = f + 1
                    break
            else:  # pragma: no cover
                raise ArithmeticError("partition reconstruction failed")
        return out


# -- public API ---------------------------------------------------------------

def _fast_path(x: SparseVector):
    """All-singleton case: when the support fits after its first position."""
    if len(x) <= x.min_index() + 1:
        vals = [abs(v) for v in x.values]
        half = Fraction(1, 2) if x.mode == EXACT else 0.5
        return max(max(vals), sum(vals) * half)
    return None


def t_norm(x: SparseVector):
    """Tsirelson norm; exact vectors give a ``Fraction``."""
    if not x:
        return Fraction(0) if x.mode == EXACT else 0.0
    fast = _fast_path(x)
    if fast is not None:
        return fast
    return TNormCache(x).norm()


def t_norming_functional(x: SparseVector) -> SparseVector:
    """Dual vector ``g`` in the unit ball of ``T*`` with ``g(x) = T(x)``."""
    if not x:
        raise InvalidInputError("the zero vector has no norming functional")
    return SparseVector(TNormCache(x).functional(), x.mode)


def _check_p(p) -> float:
    if isinstance(p, bool) or not isinstance(p, (int, float, Fraction)) or not (1 < p < math.inf):
        raise InvalidInputError(f"convexification exponent must be a finite p > 1, got {p}")
    return float(p)


def tp_norm(x: SparseVector, p: float = 2.0) -> float:
    """``T(|x|^p)^(1/p)``."""
    p = _check_p(p)
    xf = x.to_float()
    return float(t_norm(xf.map_values(lambda v: abs(v) ** p))) ** (1.0 / p)


def tp_norming_functional(x: SparseVector, p: float = 2.0) -> SparseVector:
    """Norming functional of ``x`` in ``T^(p)``.

    With ``g`` norming ``|x|^p`` in ``T``, the coefficients
    ``sign(x_i) g_i |x_i|^(p-1) / T(|x|^p)^(1-1/p)`` pair to ``||x||`` with
    ``x``, and Holder's inequality weighted by ``g`` bounds the dual norm by 1.
    """
    p = _check_p(p)
    if not x:
        raise InvalidInputError("the zero vector has no norming functional")
    xf = x.to_float()
    w = xf.map_values(lambda v: abs(v) ** p)
    g = t_norming_functional(w)
    scale = float(t_norm(w)) ** (1.0 - 1.0 / p)
    out = {}
    for i, gi in g.items():
        xi = xf[i]
        out[i] = math.copysign(1.0, xi) * gi * abs(xi) ** (p - 1.0) / scale
    return SparseVector(out, FLOAT)
