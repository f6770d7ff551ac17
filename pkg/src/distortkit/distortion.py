"""Equivalent norms built from functional families, and the probes that
measure how far they distort the base norm on finite block subspaces.

Witness pairs give rigorous lower bounds for a distortion ratio.  Everything
labelled *search* or *estimate* is exploratory: a sampled or gridded
optimum, never a certified supremum.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import schlumprecht as sch
from .constructions import AkVector, Couple, GammaCouple, make_gamma, LacunaritySchedule
from .exceptions import InfeasibleConstructionError, InvalidInputError
from .spaces import SpaceParams, _random_block
from .vectors import (FLOAT, BlockSequence, Segment, SparseVector, lp_norm, min_pointwise,
                      pointwise_product, project, sqrt_pointwise)

FORMS = ("epsilon", "tau", "gamma")
UNIT_TOL = 1e-6


def _as_dual(f) -> SparseVector:
    if isinstance(f, SparseVector):
        return f.to_float()
    if hasattr(f, "realize"):
        return f.realize()
    raise InvalidInputError(f"cannot read {type(f).__name__} as a dual vector")


# -- renormings -----------------------------------------------------------------

@dataclass(frozen=True)
class RenormSpec:
    """One of three equivalent norms over a finite family ``A*``.

    * ``epsilon``: ``||x|| + (1/eps) sup |a*(x)|``
    * ``tau``: ``sup |a*(x)| + tau ||x||``
    * ``gamma``: ``C^-2 sup |a*(x)|`` (``param`` is ``C``)
    """

    family: tuple
    form: str
    param: float
    space: SpaceParams

    def __post_init__(self):
        fam = tuple(_as_dual(f) for f in self.family)
        object.__setattr__(self, "family", fam)
        if not fam:
            raise InvalidInputError("the functional family must be nonempty")
        if self.form not in FORMS:
            raise InvalidInputError(f"unknown renorm form {self.form!r}")
        if not (self.param > 0 and math.isfinite(self.param)):
            raise InvalidInputError(f"renorm parameter must be positive, got {self.param}")

    @property
    def tag(self) -> str:
        return f"{self.form}={self.param:g}@{self.space.tag}/|A*|={len(self.family)}"

    def sup_action(self, x: SparseVector) -> float:
        return max(abs(float(f.dot(x))) for f in self.family)

    def dual_bound(self) -> float:
        """``M``: the largest upper bound on the dual norms of the family."""
        return max(self.space.dual_norm_bounds(f).upper for f in self.family)

    def equivalence(self) -> tuple[float, float]:
        """``(a, b)`` with ``a ||x|| <= |x| <= b ||x||`` for every ``x``."""
        M = self.dual_bound()
        if self.form == "epsilon":
            return 1.0, 1.0 + M / self.param
        if self.form == "tau":
            return self.param, M + self.param
        return 0.0, M / self.param ** 2


def eval_renorm(spec: RenormSpec, x: SparseVector) -> float:
    sup = spec.sup_action(x)
    if spec.form == "gamma":
        return sup / spec.param ** 2
    base = spec.space.norm(x) if x else 0.0
    if spec.form == "epsilon":
        return base + sup / spec.param
    return sup + spec.param * base


def is_delta_norming(family: Sequence, vectors: Sequence[SparseVector], delta: float,
                     space: SpaceParams) -> tuple[bool, SparseVector | None]:
    """Does ``sup |a*(a)| >= delta ||a||`` hold for every ``a``?  Returns the first violator."""
    fam = [_as_dual(f) for f in family]
    for a in vectors:
        sup = max((abs(float(f.dot(a))) for f in fam), default=0.0)
        if sup < delta * space.norm(a) - 1e-12:
            return False, a
    return True, None


@dataclass(frozen=True)
class DistortionReport:
    spec: str
    a: SparseVector
    b: SparseVector
    norm_a: float
    norm_b: float
    renorm_a: float
    renorm_b: float
    ratio: float
    exploratory_upper: float
    delta: float | None = None
    b_bounded: bool | None = None
    a_large: bool | None = None

    def row(self) -> dict:
        return {"spec": self.spec, "norm_a": self.norm_a, "norm_b": self.norm_b,
                "renorm_a": self.renorm_a, "renorm_b": self.renorm_b, "ratio": self.ratio,
                "exploratory_upper": self.exploratory_upper, "delta": self.delta,
                "b_bounded": self.b_bounded, "a_large": self.a_large}


def distortion_witness(a: SparseVector, b: SparseVector, spec: RenormSpec,
                       delta: float | None = None) -> DistortionReport:
    """Ratio ``|a| / |b|`` for unit vectors ``a``, ``b`` of the base norm.

    With ``delta`` supplied (epsilon form) the report flags ``|b| <= 2`` and
    ``|a| >= delta/eps``; when both hold the ratio is at least ``delta/(2 eps)``.
    ``exploratory_upper`` is the equivalence-constant bound on any such ratio.
    """
    na, nb = spec.space.norm(a), spec.space.norm(b)
    if abs(na - 1) > UNIT_TOL or abs(nb - 1) > UNIT_TOL:
        raise InvalidInputError(f"witnesses must be unit vectors, got norms {na:.9g}, {nb:.9g}")
    ra, rb = eval_renorm(spec, a), eval_renorm(spec, b)
    lo, hi = spec.equivalence()
    upper = hi / lo if lo > 0 else math.inf
    ratio = ra / rb if rb > 0 else math.inf
    b_ok = a_ok = None
    if delta is not None:
        if spec.form != "epsilon":
            raise InvalidInputError("delta flags apply to the epsilon form")
        b_ok = rb <= 2 + 1e-12
        a_ok = ra >= delta / spec.param - 1e-12
    return DistortionReport(spec.tag, a, b, na, nb, ra, rb, ratio, upper, delta, b_ok, a_ok)


# -- block subspaces and sphere search --------------------------------------------

@dataclass(frozen=True)
class BlockSubspace:
    blocks: BlockSequence
    space: SpaceParams

    def __post_init__(self):
        if not isinstance(self.blocks, BlockSequence):
            object.__setattr__(self, "blocks", BlockSequence(tuple(self.blocks)))
        for b in self.blocks:
            self.space.check(b)
            nb = self.space.norm(b)
            if abs(nb - 1) > UNIT_TOL:
                raise InvalidInputError(f"block has norm {nb:.9g}, expected 1")

    @property
    def dimension(self) -> int:
        return len(self.blocks)

    def combine(self, c: Sequence[float]) -> SparseVector:
        return self.blocks.combine([float(v) for v in c])

    @classmethod
    def normalized(cls, blocks: Iterable[SparseVector], space: SpaceParams) -> "BlockSubspace":
        return cls(BlockSequence(tuple(b * (1.0 / space.norm(b)) for b in blocks)), space)


@dataclass(frozen=True)
class SearchResult:
    """Exploratory extremes of ``|x| / ||x||`` over a block subspace."""

    ratio: float
    max_value: float
    min_value: float
    argmax: tuple
    argmin: tuple
    evaluations: int
    exhaustive: bool


def _sphere_grid(d: int, budget: int, resolution: float) -> list[tuple[float, ...]]:
    """Directions covering half the sphere (``x`` and ``-x`` give the same ratio)."""
    if d == 2:
        M = min(budget, max(2, math.ceil(math.pi / resolution)))
        return [(math.cos(math.pi * j / M), math.sin(math.pi * j / M)) for j in range(M)]
    side = max(2, int(math.sqrt(budget / 2)))
    side = min(side, max(2, math.ceil(math.pi / resolution)))
    pts = []
    for i in range(side + 1):
        th = math.pi / 2 * i / side
        for j in range(2 * side):
            ps = math.pi * j / side
            pts.append((math.cos(th), math.sin(th) * math.cos(ps), math.sin(th) * math.sin(ps)))
            if i == 0:
                break
    return pts


def _pattern_search(f: Callable, c0, step: float, max_evals: int, floor: float = 1e-7):
    c = np.array(c0, dtype=float)
    best = f(c)
    evals = 1
    h = step
    while h > floor and evals < max_evals:
        improved = False
        for i in range(len(c)):
            for s in (1.0, -1.0):
                trial = c.copy()
                trial[i] += s * h
                val = f(trial)
                evals += 1
                if val < best - 1e-15:
                    best, c, improved = val, trial, True
                    break
            if evals >= max_evals:
                break
        if not improved:
            h /= 2
    return c, best, evals


def distortion_search(spec: RenormSpec, sub: BlockSubspace, budget: int = 4096, seed: int = 0,
                      resolution: float = 1e-3, descent_evals: int = 200) -> SearchResult:
    """Largest and smallest ``|x|`` over unit vectors of the span of ``sub``.

    Dimensions up to three use a deterministic grid of directions; larger
    ones sample ``budget`` seeded Gaussian directions.  Both ends are then
    polished by a pattern search.
    """
    if budget < 1:
        raise InvalidInputError("budget must be at least 1")
    d = sub.dimension
    if d < 1:
        raise InvalidInputError("subspace has no blocks")

    def ratio(c) -> float:
        x = sub.combine(c)
        nx = spec.space.norm(x) if x else 0.0
        return eval_renorm(spec, x) / nx if nx > 0 else math.nan

    if d == 1:
        v = ratio((1.0,))
        return SearchResult(1.0, v, v, (1.0,), (1.0,), 1, True)
    if d <= 3:
        pts = _sphere_grid(d, budget, resolution)
        exhaustive = True
    else:
        rng = np.random.default_rng(seed)
        pts = [tuple(g) for g in rng.standard_normal((budget, d))]
        exhaustive = False
    vals = [ratio(c) for c in pts]
    good = [i for i, v in enumerate(vals) if not math.isnan(v)]
    imax = max(good, key=lambda i: (vals[i], -i))
    imin = min(good, key=lambda i: (vals[i], i))
    step = resolution if exhaustive else 0.1

    def neg(c):
        v = ratio(c)
        return math.inf if math.isnan(v) else -v

    def pos(c):
        v = ratio(c)
        return math.inf if math.isnan(v) else v

    cmax, vmax, e1 = _pattern_search(neg, pts[imax], step, descent_evals)
    cmin, vmin, e2 = _pattern_search(pos, pts[imin], step, descent_evals)
    vmax = max(-vmax, vals[imax])
    vmin = min(vmin, vals[imin])

    def unit(c):
        c = np.asarray(c, dtype=float)
        return tuple(float(v) for v in c / spec.space.norm(sub.combine(c)))

    return SearchResult(vmax / vmin, vmax, vmin, unit(cmax), unit(cmin),
                        len(pts) + e1 + e2, exhaustive)


def asymptotic_distance(generator, sub: BlockSubspace, budget: int = 2000) -> tuple[float, SparseVector]:
    """Smallest base-norm distance from a generated vector to the span of ``sub``.

    ``generator`` is an iterable of vectors, or a callable returning one.  The
    distance to the span is convex in the coefficients; the search starts from
    the Euclidean projection and from zero.  Returns ``(distance, nearest member)``.
    """
    members = list(generator() if callable(generator) else generator)
    if not members:
        raise InvalidInputError("the generator produced no vectors")
    space = sub.space
    d = sub.dimension
    best, arg = math.inf, None
    for a in members:
        a = a.to_float()

        def dist(c, a=a):
            r = a - sub.combine(c)
            return space.norm(r) if r else 0.0

        starts = [np.zeros(d), _least_squares(a, sub)]
        scale = max(1.0, float(np.max(np.abs(starts[1]))))
        local = math.inf
        for s in starts:
            _, v, _ = _pattern_search(dist, s, 0.25 * scale, budget // 2, 1e-10)
            local = min(local, v)
            if local == 0:
                break
        if local < best:
            best, arg = local, a
    return best, arg


def _least_squares(a: SparseVector, sub: BlockSubspace) -> np.ndarray:
    idx = sorted(set(a.indices).union(*(b.indices for b in sub.blocks)))
    pos = {i: k for k, i in enumerate(idx)}
    A = np.zeros((len(idx), sub.dimension))
    for j, b in enumerate(sub.blocks):
        for i, v in b.items():
            A[pos[i], j] = float(v)
    y = np.zeros(len(idx))
    for i, v in a.items():
        y[pos[i]] = float(v)
    return np.linalg.lstsq(A, y, rcond=None)[0]


# -- constants F and G ------------------------------------------------------------

@dataclass(frozen=True)
class FGEstimate:
    n: int
    F: float
    G: float
    space: str
    trunc: int
    after_k: int
    F_witness: dict = field(default_factory=dict)
    G_witness: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"n": self.n, "F": self.F, "G": self.G, "space": self.space, "trunc": self.trunc,
                "after_k": self.after_k, "F_witness": self.F_witness, "G_witness": self.G_witness}


def estimate_FG(space: SpaceParams, n: int, after_k: int = 0, budget: int = 64, seed: int = 0,
                max_len: int = 4) -> FGEstimate:
    """Lower estimates for the smallest constants in the upper p-estimate and its dual.

    ``F`` compares ``||y_1 + ... + y_n||`` with ``(sum ||y_i||^p)^(1/p)`` and
    ``G`` compares the dual norm of ``x*_1 + ... + x*_n`` with
    ``(sum ||x*_i||^q)^(1/q)``.  Sample ``t`` draws its blocks from its own
    seeded stream, so the families for ``n`` extend those for ``n - 1``; every
    prefix is scored, which makes the estimates nondecreasing in ``n``.  Both
    start at 1, the value for a family with one block.
    """
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    if budget < 1:
        raise InvalidInputError("budget must be at least 1")
    p, q = space.p, space.q
    F, G = 1.0, 1.0
    Fw: dict = {"n": 1}
    Gw: dict = {"n": 1}
    for t in range(budget):
        rng = np.random.default_rng([seed, t])
        blocks, weights = [], []
        start = after_k
        for _ in range(n):
            y = SparseVector({start: 1.0}) if t == 0 else _random_block(rng, start, max_len)
            blocks.append(y * (1.0 / space.norm(y)))
            weights.append(1.0 if t == 0 else float(rng.random()) + 0.05)
            start = y.max_index() + 1
        if blocks[-1].max_index() >= space.trunc:
            raise InvalidInputError("sample exceeds the truncation bound")
        total = SparseVector.zero(FLOAT)
        dual = SparseVector.zero(FLOAT)
        probe = SparseVector.zero(FLOAT)
        for j, (y, w) in enumerate(zip(blocks, weights)):
            total = total + y * w
            dual = dual + space.norming_functional(y) * w
            probe = probe + y * (w ** (q - 1) if math.isfinite(q) else (1.0 if w == max(weights[:j + 1]) else 0.0))
            ws = weights[: j + 1]
            fr = space.norm(total) / float(np.sum(np.array(ws) ** p) ** (1 / p))
            if fr > F + 1e-12:
                F, Fw = fr, {"n": j + 1, "sample": t, "weights": ws}
            denom = max(ws) if math.isinf(q) else float(np.sum(np.array(ws) ** q) ** (1 / q))
            lower = space.dual_norm_bounds(dual, probes=4, seed=seed + t).lower
            if probe:
                lower = max(lower, abs(float(dual.dot(probe))) / space.norm(probe))
            gr = lower / denom
            if gr > G + 1e-12:
                G, Gw = gr, {"n": j + 1, "sample": t, "weights": ws}
    return FGEstimate(n, F, G, space.tag, space.trunc, after_k, Fw, Gw)


@dataclass(frozen=True)
class HolderCut:
    lhs: float
    rhs: float
    passed: bool

    def __iter__(self):
        yield self.lhs
        yield self.rhs
        yield self.passed


def holder_cut_check(xstars: Sequence, b: SparseVector | int, p: float, q: float | None = None,
                     parts: Sequence[Segment | int] | None = None) -> HolderCut:
    """``sum ||x*_j|| |A_j|^(1/p) <= N^(1/p)`` when ``sum ||x*_j||^q <= 1``.

    ``xstars`` holds dual blocks (their l_q norms are used) or the norms
    themselves.  ``b`` is the l_p^N vector, or just ``N``.  The parts ``A_j``
    default to ``supp b`` cut by the supports of the dual blocks; explicit
    parts may be index sets or sizes and must be disjoint with total at most
    ``N``.
    """
    if p < 1:
        raise InvalidInputError("need p >= 1")
    q = (math.inf if p == 1 else p / (p - 1)) if q is None else q
    norms = [float(lp_norm(x, q)) if isinstance(x, SparseVector) else float(x) for x in xstars]
    if any(v < 0 for v in norms):
        raise InvalidInputError("dual norms must be nonnegative")
    total_q = max(norms, default=0.0) if math.isinf(q) else sum(v ** q for v in norms)
    if total_q > 1 + 1e-12:
        raise InvalidInputError(f"dual masses exceed the unit ball: {total_q:.12g}")
    N = b if isinstance(b, int) else len(b)
    if parts is None:
        if isinstance(b, int) or not all(isinstance(x, SparseVector) for x in xstars):
            raise InvalidInputError("parts are needed unless b and the dual blocks are vectors")
        supp = set(b.indices)
        sizes = [len(supp.intersection(x.indices)) for x in xstars]
    else:
        if len(parts) != len(norms):
            raise InvalidInputError("one part per dual block is required")
        sizes = []
        seen: set = set()
        for A in parts:
            if isinstance(A, int):
                if A < 0:
                    raise InvalidInputError("part sizes must be nonnegative")
                sizes.append(A)
                continue
            idx = set(A.indices())
            if seen & idx:
                raise InvalidInputError("parts must be disjoint")
            if not isinstance(b, int) and not idx <= set(b.indices):
                raise InvalidInputError("parts must lie in the support of b")
            seen |= idx
            sizes.append(len(idx))
    if sum(sizes) > N:
        raise InvalidInputError(f"parts hold {sum(sizes)} indices but N = {N}")
    lhs = sum(v * s ** (1 / p) for v, s in zip(norms, sizes))
    rhs = N ** (1 / p)
    return HolderCut(lhs, rhs, lhs <= rhs + 1e-9)


# -- identities for nonnegative unit vectors ----------------------------------------

def _unit_nonnegative(*vs: SparseVector) -> None:
    for v in vs:
        if not v.is_nonnegative():
            raise InvalidInputError("inputs must be nonnegative")
        if abs(float(lp_norm(v, 1)) - 1) > 1e-9:
            raise InvalidInputError("inputs must have unit l1 norm")


def _product_of(t) -> SparseVector:
    return t.t if hasattr(t, "t") and isinstance(t.t, SparseVector) else t


def min_identity(f: SparseVector, g: SparseVector) -> tuple:
    """``(||f - g||_1, 2(1 - ||min(f, g)||_1))``; the two agree."""
    _unit_nonnegative(f, g)
    lhs = lp_norm(f - g, 1) if f != g else 0
    return lhs, 2 * (1 - lp_norm(min_pointwise(f, g), 1))


def orthogonality_probe(t, t2) -> tuple[float, float, bool]:
    """``(sqrt(t).sqrt(t'), ||t - t'||_1, ||t - t'||_1 >= 2 - 2 sqrt(t).sqrt(t'))``."""
    a, b = _product_of(t).to_float(), _product_of(t2).to_float()
    _unit_nonnegative(a, b)
    pairing = float(sqrt_pointwise(a).dot(sqrt_pointwise(b)))
    dist = float(lp_norm(a - b, 1)) if a != b else 0.0
    return pairing, dist, dist >= 2 - 2 * pairing - 1e-9


def product_sqrt_bound(u: SparseVector, v: SparseVector, u2: SparseVector,
                       v2: SparseVector) -> tuple[float, float, bool]:
    """``sqrt(uv).sqrt(u'v') <= sqrt(u.v') sqrt(u'.v)`` for nonnegative vectors."""
    for x in (u, v, u2, v2):
        if not x.is_nonnegative():
            raise InvalidInputError("inputs must be nonnegative")
    lhs = float(sqrt_pointwise(pointwise_product(u, v)).dot(sqrt_pointwise(pointwise_product(u2, v2))))
    rhs = math.sqrt(float(u.dot(v2))) * math.sqrt(float(u2.dot(v)))
    return lhs, rhs, lhs <= rhs * (1 + 1e-12) + 1e-12


# -- cross actions ------------------------------------------------------------------

def _member_pair(m) -> tuple[SparseVector, SparseVector]:
    if isinstance(m, AkVector):
        return m.u, m.v.realize()
    if isinstance(m, Couple):
        return m.z, m.zstar
    if isinstance(m, GammaCouple):
        return m.y, m.ystar
    if isinstance(m, tuple) and len(m) == 2:
        return m[0], _as_dual(m[1])
    raise InvalidInputError(f"cannot read {type(m).__name__} as a (vector, dual) member")


@dataclass(frozen=True)
class ActionMatrix:
    """``entries[i][j] = |x*_i(x_j)|`` for duals of row members and vectors of columns.

    ``sup_entries[j]`` is the supremum over the whole set ``A*_k`` (when the
    rows are ``A_k`` members in S) and ``matched`` the diagonal pairings of
    the row family with itself.
    """

    row_tag: int
    col_tag: int
    entries: tuple[tuple[float, ...], ...]
    matched: tuple[float, ...]
    sup_entries: tuple | None = None
    sigma: float | None = None
    seed: int | None = None

    @property
    def max_entry(self) -> float:
        return max(max(r) for r in self.entries)

    def to_json(self) -> dict:
        return {"row_tag": self.row_tag, "col_tag": self.col_tag,
                "entries": [list(r) for r in self.entries], "matched": list(self.matched),
                "sup_entries": list(self.sup_entries) if self.sup_entries is not None else None,
                "sigma": self.sigma, "seed": self.seed}


def cross_action(fam_k: Sequence, fam_l: Sequence, k: int | None = None, l: int | None = None,
                 sigma: float | None = None, seed: int | None = None) -> ActionMatrix:
    if not fam_k or not fam_l:
        raise InvalidInputError("both families must be nonempty")
    rows = [_member_pair(m) for m in fam_k]
    cols = [_member_pair(m) for m in fam_l]
    k = k if k is not None else getattr(fam_k[0], "k", 0)
    l = l if l is not None else getattr(fam_l[0], "k", 0)
    entries = tuple(tuple(abs(float(f.dot(x))) for x, _ in cols) for _, f in rows)
    matched = tuple(float(f.dot(x)) for x, f in rows)
    sups = None
    if all(isinstance(m, AkVector) for m in fam_k) and k:
        sups = tuple(sch.level_k_action(x, k) if len(x) <= sch.EXACT_LIMIT else None
                     for x, _ in cols)
    return ActionMatrix(k, l, entries, matched, sups, sigma, seed)


# -- moduli and the splitting probe ------------------------------------------------

@dataclass(frozen=True)
class ModulusProfile:
    """Empirical moduli and the alpha cascade on a grid of ``eps``.

    ``delta``/``delta_star`` list ``(t, value)`` pairs of the convexity
    modulus of the space and of its dual measured on 2-dimensional sections.
    ``observed_y``/``observed_ystar`` are the largest ``||Ey||``, ``||Ey*||``
    seen with ``||E yy*||_1 < eps``.
    """

    space: str
    eps: tuple[float, ...]
    C: float
    p: float
    delta: tuple = ()
    delta_star: tuple = ()
    alpha1: tuple = ()
    alpha2: tuple = ()
    alpha3: tuple = ()
    alpha: tuple = ()
    observed_y: tuple = ()
    observed_ystar: tuple = ()
    subsets: int = 0

    def to_json(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}

    def alpha_at(self, e: float) -> float:
        """Cascade value at ``e``, computed from the measured moduli."""
        return _alpha_cascade(self.delta, self.delta_star, self.C, self.p, e)


def _section_records(norm2: Callable[[float, float], float], steps: int):
    """``(||x - y||, 1 - ||(x + y)/2||)`` for ``x, y = f +- e`` in a 2-d section."""
    out = []
    for j in range(1, steps):
        th = math.pi / 2 * j / steps
        c1, c2 = math.cos(th), math.sin(th)
        s = norm2(c1, c2)
        out.append((2 * norm2(0.0, c2 / s), 1 - norm2(c1 / s, 0.0)))
    return out


def _modulus_curve(records, ts) -> tuple:
    curve = []
    for t in ts:
        vals = [v for sep, v in records if sep >= t - 1e-12]
        curve.append((t, max(0.0, min(vals)) if vals else 1.0))
    # enforce monotonicity of the empirical infimum
    out, run = [], 0.0
    for t, v in curve:
        run = max(run, v)
        out.append((t, run))
    return tuple(out)


def _inverse(curve, e: float) -> float:
    """``sup {t : delta(t) < e}`` on the sampled curve (2 when the curve stays below)."""
    best = 0.0
    for t, v in curve:
        if v < e:
            best = t
    return best if best < curve[-1][0] else 2.0


def _alpha_cascade(delta, delta_star, C, p, e):
    q = math.inf if p == 1 else p / (p - 1)
    r = min(1 / p, 0.0 if math.isinf(q) else 1 / q)

    def a1(x):
        return 0.5 * max(_inverse(delta, x), _inverse(delta_star, x))

    def a2(x):
        return C * (a1(x) + x ** r)

    def a3(x):
        return C * (a2(x) + x ** r)

    return a1(e), a2(e), a3(e), a3(e ** (1 / 3))


def modulus_profile(space: SpaceParams, eps: Sequence[float], C: float | None = None,
                    sections: Sequence[tuple[SparseVector, SparseVector]] | None = None,
                    steps: int = 400, t_points: int = 200) -> ModulusProfile:
    """Measure the convexity moduli of ``space`` and its dual on 2-d sections.

    Each section is spanned by two disjoint unit blocks ``b_1``, ``b_2``.  Its
    dual is spanned by their norming functionals, normed by duality against
    a fine grid of the section itself.
    """
    C = space.C if C is None else C
    if C is None:
        raise InvalidInputError("a measured constant C is needed (calibrate the space)")
    if sections is None:
        sections = [(SparseVector({8: 1.0}), SparseVector({9: 1.0})),
                    (SparseVector({8: 1.0, 9: 0.5}), SparseVector({10: 1.0, 11: 1.0, 12: 1.0}))]
    recs, recs_star = [], []
    for b1, b2 in sections:
        b1 = b1 * (1.0 / space.norm(b1))
        b2 = b2 * (1.0 / space.norm(b2))
        f1, f2 = space.norming_functional(b1), space.norming_functional(b2)
        memo: dict = {}

        def norm2(c1, c2, b1=b1, b2=b2, memo=memo):
            key = (round(c1, 14), round(c2, 14))
            if key not in memo:
                x = b1 * c1 + b2 * c2 if c1 and c2 else (b1 * c1 if c1 else b2 * c2)
                memo[key] = space.norm(x)
            return memo[key]

        grid = [(math.cos(2 * math.pi * j / steps), math.sin(2 * math.pi * j / steps))
                for j in range(steps)]
        pts = [(a1 / norm2(a1, a2), a2 / norm2(a1, a2)) for a1, a2 in grid]
        a11, a22 = float(f1.dot(b1)), float(f2.dot(b2))

        def dual2(c1, c2, pts=pts, a11=a11, a22=a22):
            return max(abs(c1 * a11 * u + c2 * a22 * v) for u, v in pts)

        recs += _section_records(norm2, steps)
        recs_star += _section_records(dual2, steps // 4)
    ts = tuple(2 * i / t_points for i in range(t_points + 1))
    delta = _modulus_curve(recs, ts)
    delta_star = _modulus_curve(recs_star, ts)
    cas = [_alpha_cascade(delta, delta_star, C, space.p, e) for e in eps]
    return ModulusProfile(space.tag, tuple(eps), C, space.p, delta, delta_star,
                          tuple(c[0] for c in cas), tuple(c[1] for c in cas),
                          tuple(c[2] for c in cas), tuple(c[3] for c in cas))


def _subsets(support: Sequence[int], seed: int, exact_limit: int = 12, samples: int = 4096):
    s = len(support)
    if s <= exact_limit:
        for mask in range(1 << s):
            yield [support[i] for i in range(s) if mask >> i & 1]
        return
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        keep = rng.random(s) < 0.5
        yield [i for i, k in zip(support, keep) if k]


def lemma2_probe(couples: Sequence, space: SpaceParams, eps: Sequence[float] = (0.3, 0.1, 0.03),
                 seed: int = 0, profile: ModulusProfile | None = None) -> ModulusProfile:
    """Largest ``||Ey||`` and ``||Ey*||`` among subsets ``E`` with ``||E yy*||_1 < eps``.

    All subsets of the product support are tried when it has at most 12
    points, otherwise ``2^12`` seeded random ones.  The dual side records the
    upper end of the dual-norm bracket.  Buckets are nested, so the maxima
    are nonincreasing as ``eps`` decreases.
    """
    eps = tuple(sorted(eps, reverse=True))
    obs_y = [0.0] * len(eps)
    obs_s = [0.0] * len(eps)
    count = 0
    for c in couples:
        y, ys = _member_pair(c)
        t = pointwise_product(y, ys)
        support = list(t.indices)
        for E in _subsets(support, seed):
            count += 1
            seg = Segment.of(E)
            mass = float(lp_norm(project(seg, t), 1)) if E else 0.0
            ey = project(seg, y)
            es = project(seg, ys)
            ny = space.norm(ey) if ey else 0.0
            ns = space.dual_norm_bounds(es, probes=2, seed=seed).upper if es else 0.0
            for i, e in enumerate(eps):
                if mass < e:
                    obs_y[i] = max(obs_y[i], ny)
                    obs_s[i] = max(obs_s[i], ns)
    base = profile or ModulusProfile(space.tag, eps, space.C or 1.0, space.p)
    if profile is not None and tuple(profile.eps) != eps:
        cas = [profile.alpha_at(e) for e in eps]
        base = ModulusProfile(profile.space, eps, profile.C, profile.p, profile.delta,
                              profile.delta_star, *(tuple(c[i] for c in cas) for i in range(4)))
    return ModulusProfile(base.space, eps, base.C, base.p, base.delta, base.delta_star,
                          base.alpha1, base.alpha2, base.alpha3, base.alpha,
                          tuple(obs_y), tuple(obs_s), count)


# -- sequential distortion ------------------------------------------------------------

@dataclass(frozen=True)
class SeqReport:
    """Witness norms ``table[k][j] = |z_k|_j`` for the norms ``|.|_j`` of the schedule."""

    space: str
    schedule: tuple[int, ...]
    C: float
    table: tuple[tuple[float, ...], ...]
    self_pairing_ok: tuple[bool, ...]
    bound_shape: tuple[tuple, ...]
    below_base: bool
    eps_measured: tuple[float, ...]
    sigma: float
    seed: int

    @property
    def off_diagonal_smaller(self) -> bool:
        n = len(self.table)
        return all(self.table[k][j] < self.table[k][k] for k in range(n) for j in range(n) if j != k)

    def to_json(self) -> dict:
        return {"space": self.space, "schedule": list(self.schedule), "C": self.C,
                "table": [list(r) for r in self.table], "self_pairing_ok": list(self.self_pairing_ok),
                "bound_shape": [list(r) for r in self.bound_shape], "below_base": self.below_base,
                "eps_measured": list(self.eps_measured), "sigma": self.sigma, "seed": self.seed}


def gamma_family(space: SpaceParams, m: int, sigma: float, count: int = 2, start: int = 0,
                 budget: int = 64) -> list[GammaCouple]:
    """``count`` couples of ``Gamma_m`` whose members lie in ``Delta_2, ..., Delta_(m+1)``.

    Couple ``c`` starts ``c`` positions after ``start``, so family members
    overlap and cross pairings are genuine.
    """
    sizes = tuple(i + 2 for i in range(m))
    sched = LacunaritySchedule(sigma)
    return [make_gamma(space, m, sizes, sched, budget, start + c) for c in range(count)]


def seq_distortion_suite(space: SpaceParams, schedule: Sequence[int], count: int | None = None,
                         budget: int = 64, sigma: float = 1e-3, seed: int = 0,
                         family_size: int = 2, samples: int = 16,
                         profile: ModulusProfile | None = None) -> SeqReport:
    """Build ``|y|_k = C^-2 sup |z*(y)|`` over stored ``Gamma_(m_k)`` dual families.

    The witness for norm ``k`` is the first couple of its family.  The
    schedule must increase strictly (``L(m) = m + 1`` is the measured
    stand-in).  ``eps_measured[k]`` is the largest action of family ``k`` on
    the witnesses of the other families.
    """
    schedule = tuple(int(m) for m in schedule)
    count = len(schedule) if count is None else count
    if count < 1 or len(schedule) < count:
        raise InvalidInputError(f"need a schedule with at least {count} entries")
    schedule = schedule[:count]
    for a, b in zip(schedule, schedule[1:]):
        if b < a + 1:
            raise InfeasibleConstructionError(f"schedule {schedule} violates m_(k+1) >= L(m_k)",
                                              inequality="m_(k+1) >= L(m_k)", measured=b)
    if space.C is None:
        raise InvalidInputError("a calibrated space is needed (C unknown)")
    C = space.C
    start = space.threshold(max(schedule))
    fams = [gamma_family(space, m, sigma, family_size, start, budget) for m in schedule]
    specs = [RenormSpec(tuple(g.ystar for g in fam), "gamma", C, space) for fam in fams]
    wit = [fam[0].y for fam in fams]
    table = tuple(tuple(eval_renorm(specs[j], wit[k]) for j in range(count)) for k in range(count))
    self_ok = tuple(table[k][k] >= C ** -2 - 1e-9 for k in range(count))
    shape = []
    for k in range(count):
        for j in range(count):
            if j == k:
                continue
            a = profile.alpha_at(2.0 ** -(min(j, k) + 1))[3] if profile is not None else math.nan
            rhs = 2 * C ** 4 * a * table[k][k]
            shape.append((k + 1, j + 1, table[k][j], rhs, table[k][j] <= rhs if a == a else None))
    rng = np.random.default_rng(seed)
    below = True
    for spec in specs:
        M = spec.dual_bound()
        if M > C ** 2 + 1e-9:
            continue
        for _ in range(samples):
            y = SparseVector.from_dense(list(rng.standard_normal(12)), start=start)
            below &= eval_renorm(spec, y) <= space.norm(y) + 1e-9
    eps_m = tuple(max((eval_renorm(specs[k], wit[j]) * C ** 2 for j in range(count) if j != k),
                      default=0.0) for k in range(count))
    return SeqReport(space.tag, schedule, C, table, self_ok, tuple(shape), below, eps_m, sigma, seed)


# -- emission ---------------------------------------------------------------------------

def rows_to_csv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def gnuplot_script(csv_name: str, x: str, ys: Sequence[str], columns: Sequence[str],
                   title: str = "") -> str:
    """Plain gnuplot script plotting columns of a CSV file against ``x``."""
    col = {c: i + 1 for i, c in enumerate(columns)}
    plots = ", ".join(f"'{csv_name}' using {col[x]}:{col[y]} with linespoints title '{y}'"
                      for y in ys)
    return (f"set datafile separator ','\nset key autotitle columnhead\n"
            f"set title '{title}'\nset xlabel '{x}'\nplot {plots}\n")


def dumps_report(obj) -> str:
    data = obj.to_json() if hasattr(obj, "to_json") else obj
    return json.dumps(data, sort_keys=True, indent=1, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, SparseVector):
        from .vectors import vector_to_json
        return vector_to_json(o)
    if isinstance(o, float) and not math.isfinite(o):
        return repr(o)
    raise TypeError(type(o).__name__)
