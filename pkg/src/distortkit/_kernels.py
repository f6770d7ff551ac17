"""Compiled interval-partition kernels.

All kernels work on the compressed support: ``w[0..s-1]`` are the absolute
values of the nonzero coefficients in index order.  Tables are indexed by
inclusive position intervals ``[a, b]``.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def s_table(w, phi_tab):
    """Schlumprecht norms of every sub-interval of ``w``.

    Returns ``(norm, best_n)`` where ``norm[a, b]`` is the S-norm of the
    restriction to positions ``a..b`` and ``best_n[a, b]`` is the arity of
    the winning node (``1`` meaning the sup-norm branch won).

    ``phi_tab[n] = log2(n + 1)``.  Ties keep the earlier candidate (sup branch,
    then smaller ``n``) unless beaten by more than ``1e-12`` relatively.
    """
    s = w.shape[0]
    norm = np.zeros((s, s))
    best_n = np.ones((s, s), dtype=np.int64)
    # parts[j, b]: best sum of j+1 covering parts of [a, b] for the current a
    parts = np.full((s + 1, s), -1.0)
    for a in range(s - 1, -1, -1):
        for j in range(s + 1):
            for b in range(s):
                parts[j, b] = -1.0
        top = 0.0
        for b in range(a, s):
            if w[b] > top:
                top = w[b]
            L = b - a + 1
            best = top
            arity = 1
            for j in range(1, L):
                # j+1 parts; last part is [e+1, b], the first j parts cover [a, e]
                acc = -1.0
                for e in range(a + j - 1, b):
                    prev = parts[j - 1, e] if j > 1 else norm[a, e]
                    if prev < 0.0:
                        continue
                    cand = prev + norm[e + 1, b]
                    if cand > acc:
                        acc = cand
                parts[j, b] = acc
                val = acc / phi_tab[j + 1]
                if val > best * (1.0 + 1e-12):
                    best = val
                    arity = j + 1
            norm[a, b] = best
            best_n[a, b] = arity
            parts[0, b] = best
    return norm, best_n


@njit(cache=True)
def split_table(norm, a, b, n):
    """``suffix[j, e]``: best sum of ``j`` covering parts of ``[e, b]``.

    Used to recover the lexicographically earliest optimal ``n``-partition of
    ``[a, b]`` by a forward scan.
    """
    suffix = np.full((n + 1, b + 2), -1.0)
    suffix[0, b + 1] = 0.0
    for j in range(1, n + 1):
        for e in range(b, a - 1, -1):
            acc = -1.0
            for f in range(e, b + 1):
                rest = suffix[j - 1, f + 1]
                if rest < 0.0:
                    continue
                cand = norm[e, f] + rest
                if cand > acc:
                    acc = cand
            suffix[j, e] = acc
    return suffix



@njit(cache=True)
def t_table(w, pos):
    """Tsirelson norms of every sub-interval of ``w``.

    ``pos[i]`` is the 1-based coordinate of ``w[i]``.  Returns ``(norm, fam)``
    where ``fam[c, b]`` is the best sum over admissible families whose first
    set starts at position ``c`` and which cover ``[c, b]`` (``-1`` if none
    with two or more sets exists); ``norm[a, b]`` is
    ``max(max w, max_{c >= a} fam[c, b] / 2)``.

    A family starting at ``c`` may use up to ``pos[c]`` sets and more sets
    never hurt, so ``fam[c, b]`` takes ``min(pos[c], b - c + 1)`` of them.
    When that is the whole length the family is all singletons.
    """
    s = w.shape[0]
    norm = np.zeros((s, s))
    fam = np.full((s, s), -1.0)
    parts = np.full((s + 1, s), -1.0)
    for a in range(s - 1, -1, -1):
        need_parts = pos[a] < s - a
        if need_parts:
            for j in range(s + 1):
                for b in range(s):
                    parts[j, b] = -1.0
        top = 0.0
        l1 = 0.0
        for b in range(a, s):
            if w[b] > top:
                top = w[b]
            l1 += w[b]
            L = b - a + 1
            k = pos[a] if pos[a] < L else L
            if k == L:
                if L >= 2:
                    fam[a, b] = l1
            elif need_parts:
                for j in range(1, k):
                    acc = -1.0
                    for e in range(a + j - 1, b):
                        prev = parts[j - 1, e] if j > 1 else norm[a, e]
                        if prev < 0.0:
                            continue
                        cand = prev + norm[e + 1, b]
                        if cand > acc:
                            acc = cand
                    parts[j, b] = acc
                if k >= 2:
                    fam[a, b] = parts[k - 1, b]
            if need_parts and k == L:
                # keep the layers complete for longer intervals
                for j in range(1, L):
                    acc = -1.0
                    for e in range(a + j - 1, b):
                        prev = parts[j - 1, e] if j > 1 else norm[a, e]
                        if prev < 0.0:
                            continue
                        cand = prev + norm[e + 1, b]
                        if cand > acc:
                            acc = cand
                    parts[j, b] = acc
            best = top
            for c in range(a, b + 1):
                cand = 0.5 * fam[c, b]
                if cand > best:
                    best = cand
            norm[a, b] = best
            if need_parts:
                parts[0, b] = best
    return norm, fam


@njit(cache=True)
def maxplus_conv(prev, add, neg):
    """``out[n] = max_j prev[n - j] + add[j]`` with the winning ``j``.

    Entries at or below ``neg / 2`` count as infeasible.
    """
    m = prev.shape[0]
    out = np.full(m, neg)
    arg = np.zeros(m, dtype=np.int64)
    half = neg / 2
    for j in range(add.shape[0]):
        aj = add[j]
        if aj <= half:
            continue
        for n in range(j, m):
            pv = prev[n - j]
            if pv <= half:
                continue
            cand = pv + aj
            if cand > out[n]:
                out[n] = cand
                arg[n] = j
    return out, arg
