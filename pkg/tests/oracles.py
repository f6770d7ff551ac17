"""Slow reference implementations used only by the tests.

Both norms are evaluated straight from their defining recursions with no
memo tables, each part being recursed into afresh.  Families are the
compositions of the support into consecutive runs: by lattice monotonicity
(tested on its own) gaps and uncovered coordinates never help.
:func:`interval_families` enumerates the gapped families for spot checks.
"""

import itertools
import math
from fractions import Fraction


def phi(x):
    return math.log2(x + 1)


def interval_families(lo, hi, n):
    """All ``n`` successive nonempty intervals inside ``[lo, hi)``, gaps allowed."""
    # choose 2n endpoints a1 <= b1 < a2 <= b2 < ... ; encode b_i as b_i + 1 exclusive
    for pts in itertools.combinations_with_replacement(range(lo, hi + 1), 2 * n):
        ok = True
        fam = []
        for j in range(n):
            a, b = pts[2 * j], pts[2 * j + 1]
            if b <= a or (j and a < fam[-1][1]):
                ok = False
                break
            fam.append((a, b))
        if ok:
            yield fam


def compositions(lo, hi, n):
    """Cuts of ``[lo, hi)`` into ``n`` consecutive nonempty runs."""
    for cuts in itertools.combinations(range(lo + 1, hi), n - 1):
        b = (lo,) + cuts + (hi,)
        yield [(b[i], b[i + 1]) for i in range(n)]


def naive_s(w, gaps=False):
    """Schlumprecht norm of the coefficient list ``w`` (positions are irrelevant)."""
    w = [abs(float(v)) for v in w]
    if not w:
        return 0.0
    best = max(w)
    L = len(w)
    for n in range(2, L + 1):
        fams = interval_families(0, L, n) if gaps else compositions(0, L, n)
        for fam in fams:
            if all(b - a < L for a, b in fam):
                best = max(best, sum(naive_s(w[a:b], gaps) for a, b in fam) / phi(n))
    return best


def naive_level_k(w, k):
    w = [abs(float(v)) for v in w]
    if k == 1:
        return naive_s(w)
    best = 0.0
    for fam in compositions(0, len(w), k):
        best = max(best, sum(naive_s(w[a:b]) for a, b in fam))
    return best / phi(k)


def naive_t(coords):
    """Tsirelson norm of ``{position: value}`` with 1-based positions, in Fractions.

    The admissible sets are arbitrary successive subsets of the support, cut
    here into successive intervals of the sorted support list.
    """
    items = sorted((p, abs(Fraction(v))) for p, v in coords.items() if v)
    if not items:
        return Fraction(0)
    best = max(v for _, v in items)
    L = len(items)
    for c in range(L):
        for n in range(2, min(items[c][0], L - c) + 1):
            for fam in compositions(c, L, n):
                if fam[0] == (0, L):  # pragma: no cover
                    continue
                val = sum(naive_t(dict(items[a:b])) for a, b in fam) / 2
                best = max(best, val)
    return best


def l2_closed_form_ratio(eps, steps):
    """Max/min of ``1 + |c_1|/eps`` on a grid of the unit circle."""
    vals = [1 + abs(math.cos(math.pi * j / steps)) / eps for j in range(steps)]
    return max(vals) / min(vals), max(vals), min(vals)
