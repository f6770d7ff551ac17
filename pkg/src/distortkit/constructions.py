"""l1-averages, rapidly increasing sequences, A_k vectors and the couples
``Delta_m`` / ``Gamma_k`` transferred into an asymptotically-l_p space.

Each builder verifies its defining inequalities and returns a frozen record
carrying the measurements.  Every record serializes to a JSON bundle, and
:func:`verify_bundle` re-runs the checks from the stored vectors alone.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Sequence

import numpy as np

from . import schlumprecht as sch
from .exceptions import InfeasibleConstructionError, InvalidInputError, NotFoundError
from .spaces import NormInterval, SpaceParams
from .vectors import (FLOAT, BlockSequence, SparseVector, concat, lp_norm,
                      pointwise_product, vector_from_json, vector_to_json)

S_SPACE = SpaceParams("S")
CHECK_TOL = 1e-9


# -- equivalence verifier -----------------------------------------------------

@dataclass(frozen=True)
class EquivalenceCertificate:
    """Result of :func:`verify_lp_equivalence`.

    ``d`` and ``D`` are the smallest and largest norm values seen, so ``d`` is
    an upper bound for the true minimum over the sphere and ``D`` a lower
    bound for the true maximum.  ``d_lower`` is a certified lower bound for
    the norm at every evaluated point, and ``D_bound`` the triangle-inequality
    bound valid on the whole sphere.
    """

    d: float
    D: float
    d_lower: float
    D_bound: float
    points: int
    argmin: tuple
    argmax: tuple

    def __iter__(self):
        yield self.d
        yield self.D

    def to_json(self) -> dict:
        return {"d": self.d, "D": self.D, "d_lower": self.d_lower,
                "D_bound": self.D_bound, "points": self.points,
                "argmin": list(self.argmin), "argmax": list(self.argmax)}


def _compositions(total: int, parts: int) -> Iterable[tuple[int, ...]]:
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 2 - prev)
        yield tuple(out)


def _grid(n: int, M: int, max_points: int, rng) -> list[tuple[float, ...]]:
    pts: set[tuple[float, ...]] = set()
    if comb(M + n - 1, n - 1) <= max_points:
        for k in _compositions(M, n):
            if any(k):
                pts.add(tuple(v / M for v in k))
    else:
        while len(pts) < max_points:
            cuts = np.sort(rng.integers(0, M + 1, size=n - 1))
            k = np.diff(np.concatenate([[0], cuts, [M]]))
            if k.any():
                pts.add(tuple(float(v) / M for v in k))
    # face barycenters catch symmetric minima that miss the grid
    if n <= 10:
        for size in range(1, n + 1):
            for face in itertools.combinations(range(n), size):
                pts.add(tuple(1.0 / size if i in face else 0.0 for i in range(n)))
    return sorted(pts)


def verify_lp_equivalence(blocks: Sequence[SparseVector] | BlockSequence, p: float = 1.0,
                          grid_resolution: float = 1 / 64, space: SpaceParams = S_SPACE,
                          max_points: int = 4096, descent_steps: int = 40,
                          seed: int = 0) -> EquivalenceCertificate:
    """Extremes of ``||sum c_i x_i||`` over the nonnegative unit sphere of l_p^n.

    The simplex grid of the given resolution is enumerated exhaustively when
    it has at most ``max_points`` points and sampled with ``seed`` otherwise.
    Coordinate moves then refine the best minimum and maximum.
    """
    blocks = list(blocks.blocks if isinstance(blocks, BlockSequence) else blocks)
    if not blocks:
        raise InvalidInputError("verify_lp_equivalence needs at least one block")
    BlockSequence(tuple(blocks))
    if not (p >= 1) or not (0 < grid_resolution <= 1):
        raise InvalidInputError("need p >= 1 and 0 < grid_resolution <= 1")
    n = len(blocks)
    M = max(1, round(1 / grid_resolution))
    rng = np.random.default_rng(seed)
    blocks = [b.to_float() for b in blocks]
    memo: dict[tuple, NormInterval] = {}

    def sphere(c):
        c = np.asarray(c, dtype=float)
        nrm = float(np.sum(c ** p) ** (1 / p))
        return tuple(float(v) for v in c / nrm)

    def evaluate(c) -> NormInterval:
        key = tuple(round(v, 15) for v in c)
        if key not in memo:
            y = concat(b * ci for b, ci in zip(blocks, c) if ci != 0)
            memo[key] = space.norm_bounds(y)
        return memo[key]

    pts = [sphere(c) for c in _grid(n, M, max_points, rng)]
    vals = [evaluate(c) for c in pts]
    i_min = min(range(len(pts)), key=lambda i: (vals[i].upper, i))
    i_max = max(range(len(pts)), key=lambda i: (vals[i].lower, -i))
    cmin, cmax = pts[i_min], pts[i_max]
    if n > 1:
        cmin = _descend(cmin, lambda c: evaluate(sphere(c)).upper, 1.0, M, descent_steps, p)
        cmax = _descend(cmax, lambda c: -evaluate(sphere(c)).lower, 1.0, M, descent_steps, p)
    evaluated = list(memo.values())
    d = min(v.upper for v in evaluated)
    D = max(v.lower for v in evaluated)
    norms = [space.norm_bounds(b).upper for b in blocks]
    D_bound = max(norms) * n ** (1 - 1 / p)
    return EquivalenceCertificate(d, D, min(v.lower for v in evaluated), D_bound,
                                  len(memo), sphere(cmin), sphere(cmax))


def _descend(c, f, scale, M, steps, p):
    c = list(c)
    best = f(c)
    h = scale / M
    n = len(c)
    used = 0
    while h > scale / M / 64 and used < steps:
        improved = False
        for i in range(n):
            for j in range(n):
                if i == j or c[j] < h or used >= steps:
                    continue
                trial = list(c)
                trial[i] += h
                trial[j] -= h
                used += 1
                val = f(trial)
                if val < best - 1e-15:
                    best, c, improved = val, trial, True
        if not improved:
            h /= 2
    return tuple(c)


# -- l1-averages ----------------------------------------------------------------

@dataclass(frozen=True)
class L1Average:
    """``u = (x_1 + ... + x_n) / n`` with ``||u||_S = 1``.

    ``d`` is the certified lower l1-constant of the parts relative to their
    largest norm: ``d * max||x_i|| * sum|c_i| <= ||sum c_i x_i||`` on the
    evaluated grid.  For parts of equal norm this is the lower constant of the
    normalized parts, and ``d >= 1/2`` is the 2-equivalence requirement.
    """

    u: SparseVector
    n: int
    parts: BlockSequence
    d: float
    norm_u: NormInterval
    certificate: EquivalenceCertificate
    r: int | None = None

    @property
    def support_size(self) -> int:
        return len(self.u)

    def to_json(self) -> dict:
        return {"u": vector_to_json(self.u), "n": self.n, "r": self.r,
                "parts": [vector_to_json(x) for x in self.parts],
                "d": self.d, "norm_u": [self.norm_u.lower, self.norm_u.upper],
                "certificate": self.certificate.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "L1Average":
        c = obj["certificate"]
        cert = EquivalenceCertificate(c["d"], c["D"], c["d_lower"], c["D_bound"], c["points"],
                                      tuple(c["argmin"]), tuple(c["argmax"]))
        return cls(vector_from_json(obj["u"]), obj["n"],
                   BlockSequence(tuple(vector_from_json(x) for x in obj["parts"])),
                   obj["d"], NormInterval(*obj["norm_u"]), cert, obj.get("r"))


def flat_block(start: int, r: int) -> SparseVector:
    """Normalized flat block ``(phi(r)/r) * 1_[start, start + r)``."""
    return SparseVector.indicator(range(start, start + r), FLOAT, sch.phi(r) / r)


def certify_average(parts: Sequence[SparseVector], tol: float = CHECK_TOL,
                    grid_resolution: float = 1 / 64, max_points: int = 4096,
                    r: int | None = None, seed: int = 0) -> L1Average:
    """Rescale successive blocks into an l1-average and certify it."""
    parts = [x.to_float() for x in parts]
    if not parts:
        raise InvalidInputError("an l1-average needs n >= 1 parts")
    BlockSequence(tuple(parts))
    n = len(parts)
    total = concat(parts)
    lam = n / S_SPACE.norm_bounds(total).upper
    parts = [x * lam for x in parts]
    u = concat(parts) * (1.0 / n)
    norm_u = S_SPACE.norm_bounds(u)
    if not (abs(norm_u.lower - 1) <= 1e-6 and abs(norm_u.upper - 1) <= 1e-6):
        raise InfeasibleConstructionError(
            f"||u||_S bracket [{norm_u.lower:.9g}, {norm_u.upper:.9g}] is not within 1e-6 of 1",
            inequality="||u||_S = 1", measured=norm_u.upper)
    cert = verify_lp_equivalence(parts, 1.0, grid_resolution, S_SPACE, max_points, seed=seed)
    top = max(S_SPACE.norm_bounds(x).upper for x in parts)
    d = cert.d_lower / top
    if d < 0.5 - tol:
        raise InfeasibleConstructionError(
            f"verified lower constant d = {d:.9g} < 1/2 (not 2-equivalent to the l1^{n} basis)",
            inequality="d >= 1/2", measured=d)
    return L1Average(u, n, BlockSequence(tuple(parts)), d, norm_u, cert, r)


def default_width(n: int) -> int:
    """Smallest width with ``phi(r)/phi(nr) > 1/2`` strictly, i.e. ``r = n - 1``."""
    return max(1, n - 1)


def make_l1_average(n: int, start: int = 0, r: int | None = None, tolerance: float = CHECK_TOL,
                    grid_resolution: float = 1 / 64, max_points: int = 4096) -> L1Average:
    """Average of ``n`` flat blocks of length ``r`` supported in ``[start, start + nr)``."""
    if n < 1:
        raise InvalidInputError(f"average size must be >= 1, got {n}")
    r = default_width(n) if r is None else r
    if r < 1 or start < 0:
        raise InvalidInputError(f"need r >= 1 and start >= 0, got r={r}, start={start}")
    parts = [flat_block(start + i * r, r) for i in range(n)]
    return certify_average(parts, tolerance, grid_resolution, max_points, r)


def split_average(u: SparseVector, m: int, **kw) -> L1Average:
    """Certify ``u >= 0`` as an l1^m-average by cutting its support in ``m`` runs."""
    idx = u.indices
    if m < 1 or len(idx) < m:
        raise InfeasibleConstructionError(
            f"support of size {len(idx)} cannot carry {m} nonzero parts",
            inequality="|supp u| >= m", measured=len(idx))
    q, rem = divmod(len(idx), m)
    parts, pos = [], 0
    for i in range(m):
        ln = q + (1 if i < rem else 0)
        keep = idx[pos: pos + ln]
        parts.append(SparseVector._raw(keep, tuple(u[j] for j in keep), FLOAT))
        pos += ln
    return certify_average(parts, **kw)


# -- RIS and A_k ------------------------------------------------------------------

@dataclass(frozen=True)
class LacunaritySchedule:
    """Right-hand sides of the growth conditions are multiplied by ``sigma``."""

    sigma: float
    sizes: tuple[int, ...] | None = None
    widths: tuple[int, ...] | None = None

    def __post_init__(self):
        if not (0 < self.sigma <= 1):
            raise InvalidInputError(f"sigma must lie in (0, 1], got {self.sigma}")
        for name in ("sizes", "widths"):
            vals = getattr(self, name)
            if vals is not None:
                vals = tuple(int(v) for v in vals)
                if any(v < 1 for v in vals):
                    raise InvalidInputError(f"{name} must be positive")
                object.__setattr__(self, name, vals)

    def first(self, n1: int, k: int) -> tuple[float, float]:
        """``(phi(n_1/4), sigma * 36 k^2)``."""
        return sch.phi(n1 / 4), self.sigma * 36 * k * k

    def later(self, nj: int, prev_support: int) -> tuple[float, float]:
        """``(phi(n_j)^(1/2), sigma * 2 |supp u_(j-1)|)``."""
        return math.sqrt(sch.phi(nj)), self.sigma * 2 * prev_support

    def min_first(self, k: int) -> float:
        e = self.sigma * 36 * k * k
        return math.inf if e > 1000 else max(1.0, math.ceil(4 * (2.0 ** e - 1) - 1e-9))

    def min_later(self, prev_support: int) -> float:
        e = (self.sigma * 2 * prev_support) ** 2
        return math.inf if e > 1000 else max(1.0, math.ceil(2.0 ** e - 1 - 1e-9))

    def to_json(self) -> dict:
        return {"sigma": self.sigma, "sizes": list(self.sizes) if self.sizes else None,
                "widths": list(self.widths) if self.widths else None}

    @classmethod
    def from_json(cls, obj: dict) -> "LacunaritySchedule":
        return cls(obj["sigma"], tuple(obj["sizes"]) if obj.get("sizes") else None,
                   tuple(obj["widths"]) if obj.get("widths") else None)


FIRST_INEQ = "phi(n_1/4) >= sigma*36k^2"
LATER_INEQ = "phi(n_j)^(1/2) >= sigma*2|supp(u_(j-1))|"


def lacunarity_certificate(sizes: Sequence[int], supports: Sequence[int],
                           schedule: LacunaritySchedule) -> list[dict]:
    k = len(sizes)
    rows = []
    lhs, rhs = schedule.first(sizes[0], k)
    rows.append({"inequality": FIRST_INEQ, "j": 1, "lhs": lhs, "rhs": rhs, "pass": lhs >= rhs})
    for j in range(1, k):
        lhs, rhs = schedule.later(sizes[j], supports[j - 1])
        rows.append({"inequality": LATER_INEQ, "j": j + 1, "lhs": lhs, "rhs": rhs,
                     "pass": lhs >= rhs})
    return rows


@dataclass(frozen=True)
class RISequence:
    averages: tuple[L1Average, ...]
    schedule: LacunaritySchedule
    certificate: tuple = ()

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(a.n for a in self.averages)

    @property
    def k(self) -> int:
        return len(self.averages)

    def to_json(self) -> dict:
        return {"averages": [a.to_json() for a in self.averages],
                "schedule": self.schedule.to_json(), "certificate": list(self.certificate)}

    @classmethod
    def from_json(cls, obj: dict) -> "RISequence":
        return cls(tuple(L1Average.from_json(a) for a in obj["averages"]),
                   LacunaritySchedule.from_json(obj["schedule"]), tuple(obj["certificate"]))


def _fail_row(rows):
    for row in rows:
        if not row["pass"]:
            raise InfeasibleConstructionError(
                f"lacunarity condition {row['inequality']} fails at j={row['j']}: "
                f"{row['lhs']:.6g} < {row['rhs']:.6g}",
                inequality=row["inequality"], measured=row["lhs"])


def make_ris(k: int, schedule: LacunaritySchedule, start: int = 0,
             trunc: int = 1_000_000, **avg_kw) -> RISequence:
    """``k`` successive flat l1-averages with sizes obeying the scaled conditions.

    Sizes come from ``schedule.sizes`` when given, otherwise each one is the
    smallest that satisfies its condition.  Widths default to ``n - 1``.
    """
    if k < 1:
        raise InvalidInputError(f"RIS length must be >= 1, got {k}")
    if schedule.sizes is not None and len(schedule.sizes) < k:
        raise InvalidInputError(f"schedule lists {len(schedule.sizes)} sizes, need {k}")
    averages: list[L1Average] = []
    sizes: list[int] = []
    cursor = start
    for j in range(k):
        if schedule.sizes is not None:
            n = schedule.sizes[j]
        else:
            need = schedule.min_first(k) if j == 0 else schedule.min_later(len(averages[-1].u))
            ineq = FIRST_INEQ if j == 0 else LATER_INEQ
            if not math.isfinite(need) or cursor + need > trunc:
                raise InfeasibleConstructionError(
                    f"{ineq} forces n_{j + 1} >= {need:.6g}, beyond truncation {trunc}",
                    inequality=ineq, measured=need)
            n = int(need)
        r = schedule.widths[j] if schedule.widths is not None else default_width(n)
        if cursor + n * r > trunc:
            raise InfeasibleConstructionError(
                f"average {j + 1} needs indices up to {cursor + n * r - 1}, beyond truncation {trunc}",
                inequality="support within truncation", measured=cursor + n * r)
        sizes.append(n)
        if schedule.sizes is not None:
            rows = lacunarity_certificate(sizes, [len(a.u) for a in averages] + [n * r], schedule)
            _fail_row(rows[-1:] if j else rows[:1])
        averages.append(make_l1_average(n, cursor, r, **avg_kw))
        cursor += n * r
    rows = lacunarity_certificate(sizes, [len(a.u) for a in averages], schedule)
    _fail_row(rows)
    return RISequence(tuple(averages), schedule, tuple(rows))


@dataclass(frozen=True)
class AkVector:
    """``u = (phi(k)/k) sum u_i`` over a RIS, with its matched dual.

    ``v = (v_1 + ... + v_k) / phi(k)`` with ``v_i`` norming ``u_i``, so ``v(u)``
    telescopes to one.
    """

    u: SparseVector
    k: int
    ris: RISequence
    duals: tuple
    v: object
    norm: NormInterval

    @property
    def pairing(self) -> float:
        return sch.functional_eval(self.v, self.u)

    def to_json(self) -> dict:
        return {"u": vector_to_json(self.u), "k": self.k, "ris": self.ris.to_json(),
                "duals": [t.to_json() for t in self.duals], "v": self.v.to_json(),
                "norm": [self.norm.lower, self.norm.upper]}

    @classmethod
    def from_json(cls, obj: dict) -> "AkVector":
        return cls(vector_from_json(obj["u"]), obj["k"], RISequence.from_json(obj["ris"]),
                   tuple(sch.tree_from_json(t) for t in obj["duals"]),
                   sch.tree_from_json(obj["v"]), NormInterval(*obj["norm"]))


def make_ak(k: int, schedule: LacunaritySchedule, start: int = 0, **kw) -> AkVector:
    if k < 1:
        raise InvalidInputError(f"A_k needs k >= 1, got {k}")
    ris = make_ris(k, schedule, start, **kw)
    scale = sch.phi(k) / k
    u = concat(a.u for a in ris.averages) * scale
    duals = tuple(sch.s_norming_functional(a.u) for a in ris.averages)
    v = duals[0] if k == 1 else sch.Node(duals)
    return AkVector(u, k, ris, duals, v, S_SPACE.norm_bounds(u))


# -- products and transfer ---------------------------------------------------------

@dataclass(frozen=True)
class ProductVector:
    """``t = uv`` for an l1^m-average ``u`` and a functional ``v`` in ``B``."""

    t: SparseVector
    average: L1Average
    v: object
    m: int

    @property
    def u(self) -> SparseVector:
        return self.average.u

    @property
    def v_vector(self) -> SparseVector:
        return self.v.realize()

    def to_json(self) -> dict:
        return {"t": vector_to_json(self.t), "average": self.average.to_json(),
                "v": self.v.to_json(), "m": self.m}

    @classmethod
    def from_json(cls, obj: dict) -> "ProductVector":
        return cls(vector_from_json(obj["t"]), L1Average.from_json(obj["average"]),
                   sch.tree_from_json(obj["v"]), obj["m"])


def _product(avg: L1Average, m: int) -> ProductVector:
    v = sch.s_norming_functional(avg.u)
    t = pointwise_product(avg.u, v.realize())
    return ProductVector(t, avg, v, m)


def make_dm(m: int, start: int = 0, r: int | None = None, **kw) -> ProductVector:
    """Product ``uv`` of a flat average and its norming functional."""
    if m < 1:
        raise InvalidInputError(f"average size must be >= 1, got {m}")
    pv = _product(make_l1_average(m, start, r, **kw), m)
    mass = float(lp_norm(pv.t, 1))
    if abs(mass - 1) > CHECK_TOL or any(x < 0 for x in pv.t.values):
        raise InfeasibleConstructionError(f"||uv||_1 = {mass!r} is not 1",
                                          inequality="||uv||_1 = 1", measured=mass)
    return pv


@dataclass(frozen=True)
class TransferResult:
    J: tuple[int, ...]
    product: ProductVector
    defect: float
    tried: int


def _similarity(hs: Sequence[SparseVector]) -> float:
    """Spread of the averaged profile: 0 for flat, larger when uneven."""
    avg = concat_sum(hs) * (1.0 / len(hs))
    vals = np.array(avg.values)
    return float(vals.max() / vals.min() - 1.0)


def concat_sum(vs: Sequence[SparseVector]) -> SparseVector:
    try:
        return concat(vs)
    except InvalidInputError:
        total = SparseVector.zero(FLOAT)
        for v in vs:
            total = total + v
        return total


def transfer_search(h: Sequence[SparseVector], m: int, eps: float, budget: int = 64,
                    **avg_kw) -> TransferResult:
    """Find an interval ``J`` and an l1^m-average ``u`` with ``||uv - avg_J h||_1 < eps``.

    Candidates are index intervals, longest first and flattest first within a
    length.  For each, ``u`` is the normalized flat profile on the support of
    the averaged ``h`` and, failing that, the averaged profile itself; ``v``
    is the norming tree of ``u``.
    """
    if not h:
        raise InvalidInputError("transfer_search needs at least one vector")
    if m < 1 or eps <= 0 or budget < 1:
        raise InvalidInputError("need m >= 1, eps > 0 and budget >= 1")
    for x in h:
        if not x or any(v < 0 for v in x.values):
            raise InvalidInputError("inputs must be nonzero and nonnegative")
        if abs(float(lp_norm(x, 1)) - 1) > 1e-9:
            raise InvalidInputError("inputs must have unit l1 mass")
    BlockSequence(tuple(h))
    K = len(h)
    cands = []
    for length in range(K, 0, -1):
        row = [(_similarity(h[a: a + length]), a) for a in range(K - length + 1)]
        cands.extend((length, a) for _, a in sorted(row))
    tried = 0
    for length, a in cands:
        if tried >= budget:
            break
        tried += 1
        target = concat(h[a: a + length]) * (1.0 / length)
        if len(target) < m:
            continue
        flat = SparseVector.indicator(target.indices, FLOAT)
        for profile in (flat, target):
            try:
                avg = split_average(profile, m, **avg_kw)
            except InfeasibleConstructionError:
                continue
            prod = _product(avg, m)
            defect = float(lp_norm(prod.t - target, 1))
            if defect < eps:
                return TransferResult(tuple(range(a, a + length)), prod, defect, tried)
            if profile is target:
                break
    raise NotFoundError(f"no witness with defect < {eps} among {tried} candidates "
                        f"(K={K}, m={m})")


# -- couples in the target space ---------------------------------------------------

def _dual_exponent(p: float) -> float:
    return math.inf if p == 1 else p / (p - 1)


@dataclass(frozen=True)
class Couple:
    """``z = N^(-1/p) sum z_j``, ``z* = N^(-1/q) sum z*_j`` over the chosen ``J``."""

    z: SparseVector
    zstar: SparseVector
    N: int
    m: int
    p: float
    blocks: tuple[SparseVector, ...]
    dual_blocks: tuple[SparseVector, ...]
    witness: ProductVector
    defect: float
    norm_z: float
    dual_norm: NormInterval
    C: float
    space: str

    @property
    def product(self) -> SparseVector:
        return pointwise_product(self.z, self.zstar)

    @property
    def pairing(self) -> float:
        return float(self.zstar.dot(self.z))

    @property
    def in_range(self) -> bool:
        lo, hi = 1 / self.C - 1e-9, self.C + 1e-9
        return lo <= self.norm_z <= hi and lo <= self.dual_norm.lower and self.dual_norm.upper <= hi

    def to_json(self) -> dict:
        return {"kind": "delta", "z": vector_to_json(self.z), "zstar": vector_to_json(self.zstar),
                "N": self.N, "m": self.m, "p": self.p, "space": self.space, "C": self.C,
                "blocks": [vector_to_json(b) for b in self.blocks],
                "dual_blocks": [vector_to_json(b) for b in self.dual_blocks],
                "witness": self.witness.to_json(), "defect": self.defect,
                "norm_z": self.norm_z, "dual_norm": [self.dual_norm.lower, self.dual_norm.upper]}

    @classmethod
    def from_json(cls, obj: dict) -> "Couple":
        return cls(vector_from_json(obj["z"]), vector_from_json(obj["zstar"]), obj["N"], obj["m"],
                   obj["p"], tuple(vector_from_json(b) for b in obj["blocks"]),
                   tuple(vector_from_json(b) for b in obj["dual_blocks"]),
                   ProductVector.from_json(obj["witness"]), obj["defect"], obj["norm_z"],
                   NormInterval(*obj["dual_norm"]), obj["C"], obj["space"])


def _target_space(space: SpaceParams) -> None:
    if space.kind not in ("Tp", "lp"):
        raise InvalidInputError(f"couples live in T^(p) or l_p, not {space.kind}")


def unit_blocks(space: SpaceParams, count: int, start: int, width: int = 1) -> list[SparseVector]:
    """Successive flat blocks of the given width, normalized in ``space``."""
    out = []
    for j in range(count):
        b = SparseVector.indicator(range(start + j * width, start + (j + 1) * width), FLOAT)
        out.append(b * (1.0 / space.norm(b)))
    return out


def make_delta(space: SpaceParams, N: int, m: int, start: int = 0, budget: int = 64,
               width: int = 1, **avg_kw) -> Couple:
    """Couple in ``Delta_m`` built from ``N`` unit blocks supported after ``P(N)``."""
    _target_space(space)
    if N < 1 or m < 1:
        raise InvalidInputError(f"need N >= 1 and m >= 1, got N={N}, m={m}")
    start = max(start, space.threshold(N))
    zs = unit_blocks(space, N, start, width)
    space.check(zs[-1])
    zstars = [space.norming_functional(z) for z in zs]
    hs = [pointwise_product(z, zs_) for z, zs_ in zip(zs, zstars)]
    res = transfer_search(hs, m, 1.0 / m, budget, **avg_kw)
    return assemble_couple(space, [zs[j] for j in res.J], [zstars[j] for j in res.J],
                           res.product, m)


def assemble_couple(space: SpaceParams, zs, zstars, witness: ProductVector, m: int) -> Couple:
    n = len(zs)
    p, q = space.p, _dual_exponent(space.p)
    z = concat(zs) * (n ** (-1.0 / p))
    zstar = concat(zstars) * (1.0 if math.isinf(q) else n ** (-1.0 / q))
    target = pointwise_product(z, zstar)
    defect = float(lp_norm(witness.t - target, 1))
    if not defect < 1.0 / m:
        raise InfeasibleConstructionError(f"defect {defect:.6g} >= 1/m = {1 / m:.6g}",
                                          inequality="||uv - zz*||_1 < 1/m", measured=defect)
    C = space.C if space.C is not None else 1.0
    return Couple(z, zstar, n, m, p, tuple(zs), tuple(zstars), witness, defect,
                  space.norm(z), space.dual_norm_bounds(zstar), C, space.tag)


@dataclass(frozen=True)
class GammaCouple:
    """``y = k^(-1/p) sum z_i``, ``y* = k^(-1/q) sum z*_i`` over Delta couples."""

    y: SparseVector
    ystar: SparseVector
    k: int
    members: tuple[Couple, ...]
    schedule: LacunaritySchedule
    certificate: tuple
    norm_y: float
    dual_norm: NormInterval
    C: float
    p: float
    space: str

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(c.m for c in self.members)

    @property
    def defects(self) -> tuple[float, ...]:
        return tuple(c.defect for c in self.members)

    @property
    def product(self) -> SparseVector:
        return pointwise_product(self.y, self.ystar)

    @property
    def pairing(self) -> float:
        return float(self.ystar.dot(self.y))

    @property
    def in_range(self) -> bool:
        lo, hi = self.C ** -2 - 1e-9, self.C ** 2 + 1e-9
        return lo <= self.norm_y <= hi and lo <= self.dual_norm.lower and self.dual_norm.upper <= hi

    def to_json(self) -> dict:
        return {"kind": "gamma", "y": vector_to_json(self.y), "ystar": vector_to_json(self.ystar),
                "k": self.k, "members": [c.to_json() for c in self.members],
                "schedule": self.schedule.to_json(), "certificate": list(self.certificate),
                "norm_y": self.norm_y, "dual_norm": [self.dual_norm.lower, self.dual_norm.upper],
                "C": self.C, "p": self.p, "space": self.space}

    @classmethod
    def from_json(cls, obj: dict) -> "GammaCouple":
        return cls(vector_from_json(obj["y"]), vector_from_json(obj["ystar"]), obj["k"],
                   tuple(Couple.from_json(c) for c in obj["members"]),
                   LacunaritySchedule.from_json(obj["schedule"]), tuple(obj["certificate"]),
                   obj["norm_y"], NormInterval(*obj["dual_norm"]), obj["C"], obj["p"],
                   obj["space"])


def make_gamma(space: SpaceParams, k: int, sizes: Sequence[int] | None = None,
               schedule: LacunaritySchedule | None = None, budget: int = 64,
               start: int = 0, **avg_kw) -> GammaCouple:
    """Successive ``Delta_(m_i)`` couples whose witnesses form a RIS.

    Couple ``i`` uses ``N_i = m_i * (m_i - 1)`` unit vectors (``N_i = 1`` for
    ``m_i = 1``), which is what a flat l1^(m_i)-average with strict margin needs.
    """
    _target_space(space)
    if k < 1:
        raise InvalidInputError(f"Gamma_k needs k >= 1, got {k}")
    schedule = schedule or LacunaritySchedule(1e-3)
    if sizes is None:
        sizes = schedule.sizes
    if sizes is None or len(sizes) < k:
        raise InvalidInputError(f"need {k} sizes m_1..m_k")
    sizes = [int(m) for m in sizes[:k]]
    cursor = max(start, space.threshold(k))
    members: list[Couple] = []
    for i, m in enumerate(sizes):
        N = m * default_width(m)
        if members:
            lhs, rhs = schedule.later(m, len(members[-1].witness.u))
            if lhs < rhs:
                raise InfeasibleConstructionError(
                    f"lacunarity condition {LATER_INEQ} fails at j={i + 1}: {lhs:.6g} < {rhs:.6g}",
                    inequality=LATER_INEQ, measured=lhs)
        couple = make_delta(space, N, m, cursor, budget, **avg_kw)
        members.append(couple)
        cursor = couple.z.max_index() + 1
    rows = lacunarity_certificate(sizes, [len(c.witness.u) for c in members], schedule)
    _fail_row(rows)
    return assemble_gamma(space, members, schedule, tuple(rows))


def assemble_gamma(space: SpaceParams, members: Sequence[Couple], schedule, rows) -> GammaCouple:
    k = len(members)
    p, q = space.p, _dual_exponent(space.p)
    y = concat(c.z for c in members) * (k ** (-1.0 / p))
    ystar = concat(c.zstar for c in members) * (1.0 if math.isinf(q) else k ** (-1.0 / q))
    C = space.C if space.C is not None else 1.0
    return GammaCouple(y, ystar, k, tuple(members), schedule, rows, space.norm(y),
                       space.dual_norm_bounds(ystar), C, p, space.tag)


# -- bundles --------------------------------------------------------------------

def couple_checks(z: SparseVector, zstar: SparseVector, witnesses, tol: float = CHECK_TOL) -> dict:
    """The defining identities shared by Delta and Gamma couples."""
    prod = pointwise_product(z, zstar)
    mass = float(lp_norm(prod, 1))
    checks = {
        "product_nonnegative": all(v >= 0 for v in prod.values),
        "product_unit_l1": abs(mass - 1) <= tol,
        "pairing_one": abs(float(zstar.dot(z)) - 1) <= tol,
    }
    for i, (t, target, m) in enumerate(witnesses):
        checks[f"defect_{i + 1}"] = float(lp_norm(t - target, 1)) < 1.0 / m
    return checks


def average_checks(avg: L1Average, tol: float = CHECK_TOL) -> dict:
    u = concat(avg.parts) * (1.0 / avg.n)
    nb = S_SPACE.norm_bounds(avg.u)
    cert = verify_lp_equivalence(list(avg.parts), 1.0, max_points=avg.certificate.points + 64)
    top = max(S_SPACE.norm_bounds(x).upper for x in avg.parts)
    return {"mean_of_parts": u.allclose(avg.u, 1e-12),
            "unit_norm": abs(nb.lower - 1) <= 1e-6 and abs(nb.upper - 1) <= 1e-6,
            "two_equivalent": cert.d_lower / top >= 0.5 - tol}


def bundle(obj, kind: str, params: dict | None = None) -> dict:
    """JSON bundle with the stored record and the outcome of its checks."""
    out = {"kind": kind, "params": params or {}, "record": obj.to_json()}
    out["checks"] = run_checks(kind, obj)
    return out


_LOADERS = {"average": L1Average, "ris": RISequence, "ak": AkVector, "dm": ProductVector,
            "delta": Couple, "gamma": GammaCouple}


def load_record(b: dict):
    kind = b.get("kind")
    if kind not in _LOADERS:
        raise InvalidInputError(f"unknown bundle kind {kind!r}")
    return _LOADERS[kind].from_json(b["record"])


def run_checks(kind: str, obj) -> dict:
    if kind == "average":
        return average_checks(obj)
    if kind == "ris":
        checks = {}
        for j, a in enumerate(obj.averages):
            checks.update({f"avg{j + 1}_{k}": v for k, v in average_checks(a).items()})
        rows = lacunarity_certificate(obj.sizes, [len(a.u) for a in obj.averages], obj.schedule)
        checks["lacunarity"] = all(r["pass"] for r in rows)
        checks["successive"] = all(a.u.max_index() < b.u.min_index()
                                   for a, b in zip(obj.averages, obj.averages[1:]))
        return checks
    if kind == "ak":
        checks = run_checks("ris", obj.ris)
        scale = sch.phi(obj.k) / obj.k
        checks["scaled_sum"] = (concat(a.u for a in obj.ris.averages) * scale).allclose(obj.u, 1e-12)
        checks["dual_in_B"] = sch.validate_in_B(obj.v)
        checks["matched_pairing"] = abs(obj.pairing - 1) <= CHECK_TOL
        return checks
    if kind == "dm":
        checks = average_checks(obj.average)
        checks["v_in_B"] = sch.validate_in_B(obj.v)
        checks["product"] = pointwise_product(obj.u, obj.v_vector).allclose(obj.t, 1e-12)
        checks["nonnegative"] = all(x >= 0 for x in obj.t.values)
        checks["v_linf_le_2"] = max(abs(x) for x in obj.v_vector.values) <= 2
        checks["unit_l1"] = abs(float(lp_norm(obj.t, 1)) - 1) <= CHECK_TOL
        return checks
    if kind == "delta":
        return _delta_checks(obj)
    if kind == "gamma":
        checks = couple_checks(obj.y, obj.ystar, [])
        for i, c in enumerate(obj.members):
            checks.update({f"member{i + 1}_{k}": v for k, v in _delta_checks(c).items()})
        rows = lacunarity_certificate(obj.sizes, [len(c.witness.u) for c in obj.members],
                                      obj.schedule)
        checks["lacunarity"] = all(r["pass"] for r in rows)
        k, p = obj.k, obj.p
        q = _dual_exponent(p)
        y = concat(c.z for c in obj.members) * (k ** (-1.0 / p))
        ys = concat(c.zstar for c in obj.members) * (1.0 if math.isinf(q) else k ** (-1.0 / q))
        checks["scaling"] = y.allclose(obj.y, 1e-12) and ys.allclose(obj.ystar, 1e-12)
        return checks
    raise InvalidInputError(f"unknown bundle kind {kind!r}")


def _delta_checks(c: Couple) -> dict:
    checks = couple_checks(c.z, c.zstar, [(c.witness.t, c.product, c.m)])
    n = len(c.blocks)
    q = _dual_exponent(c.p)
    z = concat(c.blocks) * (n ** (-1.0 / c.p))
    zs = concat(c.dual_blocks) * (1.0 if math.isinf(q) else n ** (-1.0 / q))
    checks["scaling"] = z.allclose(c.z, 1e-12) and zs.allclose(c.zstar, 1e-12)
    checks["witness_in_B"] = sch.validate_in_B(c.witness.v)
    checks.update({f"witness_{k}": v for k, v in average_checks(c.witness.average).items()})
    return checks


def verify_bundle(b: dict) -> tuple[bool, dict]:
    """Re-run the checks of a bundle; ``True`` when they reproduce the stored outcome."""
    obj = load_record(b)
    fresh = run_checks(b["kind"], obj)
    return fresh == b.get("checks"), fresh
