"""Uniform access to the sequence spaces used by the constructions.

A :class:`SpaceParams` names one of ``S`` (Schlumprecht), ``T`` (Tsirelson),
``Tp`` (the p-convexified Tsirelson space) or ``lp`` (an l_p oracle whose
constants are known exactly).  It carries the asymptotic-l_p constant ``C``
and the threshold table ``P``, both coming from a :class:`CalibrationTable`
rather than being assumed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import schlumprecht as sch
from . import tsirelson as ts
from .exceptions import InvalidInputError
from .vectors import FLOAT, SparseVector, lp_norm

KINDS = ("S", "T", "Tp", "lp")


@dataclass(frozen=True)
class NormInterval:
    lower: float
    upper: float

    @property
    def value(self) -> float:
        """Point estimate: the upper end, so minima stay upper bounds."""
        return self.upper

    @property
    def exact(self) -> bool:
        return self.upper - self.lower <= 1e-12 * max(1.0, self.upper)


@dataclass(frozen=True)
class SpaceParams:
    kind: str
    p: float = 1.0
    trunc: int = 1_000_000
    C: float | None = None
    P: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown space kind {self.kind!r}")
        if not (self.p >= 1 and math.isfinite(self.p)):
            raise InvalidInputError(f"exponent must be finite and >= 1, got {self.p}")
        if self.kind in ("S", "T") and self.p != 1:
            raise InvalidInputError(f"{self.kind} takes no exponent")
        if self.kind == "Tp" and self.p <= 1:
            raise InvalidInputError(f"T^(p) needs p > 1, got {self.p}")
        if self.trunc < 1:
            raise InvalidInputError("truncation bound must be positive")

    @classmethod
    def parse(cls, tag: str, trunc: int = 1_000_000) -> "SpaceParams":
        """``s``, ``t``, ``t2``, ``tp:<p>`` or ``lp:<p>``."""
        t = tag.strip().lower()
        try:
            if t == "s":
                return cls("S", trunc=trunc)
            if t == "t":
                return cls("T", trunc=trunc)
            if t == "t2":
                return cls("Tp", 2.0, trunc=trunc)
            if t.startswith("tp:"):
                return cls("Tp", float(t[3:]), trunc=trunc)
            if t.startswith("lp:"):
                return cls("lp", float(t[3:]), trunc=trunc, C=1.0)
        except ValueError as exc:
            raise InvalidInputError(f"bad space tag {tag!r}") from exc
        raise InvalidInputError(f"bad space tag {tag!r}")

    @property
    def tag(self) -> str:
        if self.kind in ("S", "T"):
            return self.kind.lower()
        return f"{self.kind.lower()}:{self.p:g}"

    @property
    def q(self) -> float:
        return math.inf if self.p == 1 else self.p / (self.p - 1)

    def with_calibration(self, table: "CalibrationTable") -> "SpaceParams":
        return replace(self, C=table.C, P=tuple(tuple(r) for r in table.P))

    def threshold(self, n: int) -> int:
        """``P(n)``: blocks supported after it behave like l_p with constant ``C``."""
        if self.kind == "lp":
            return 0
        for m, pm in self.P:
            if m == n:
                return pm
        return n

    # -- norms and functionals --

    def check(self, x: SparseVector) -> None:
        if x and x.max_index() >= self.trunc:
            raise InvalidInputError(
                f"support reaches index {x.max_index()} beyond truncation {self.trunc}")

    def norm_bounds(self, x: SparseVector) -> NormInterval:
        self.check(x)
        if self.kind == "S":
            b = sch.s_norm_bounds(x, with_tree=False)
            return NormInterval(b.lower, b.upper)
        v = self.norm(x)
        return NormInterval(v, v)

    def norm(self, x: SparseVector) -> float:
        self.check(x)
        if self.kind == "S":
            return sch.s_norm(x)
        if self.kind == "T":
            return float(ts.t_norm(x))
        if self.kind == "Tp":
            return ts.tp_norm(x, self.p)
        return float(lp_norm(x, self.p))

    def norming_functional(self, x: SparseVector) -> SparseVector:
        """Dual vector of dual norm at most one that pairs to ``||x||`` with ``x``."""
        self.check(x)
        if not x:
            raise InvalidInputError("the zero vector has no norming functional")
        if self.kind == "S":
            return sch.s_norming_functional(x).realize()
        if self.kind == "T":
            return ts.t_norming_functional(x.to_float())
        if self.kind == "Tp":
            return ts.tp_norming_functional(x, self.p)
        xf = x.to_float()
        nrm = float(lp_norm(xf, self.p))
        if self.p == 1:
            return xf.map_values(lambda v: math.copysign(1.0, v))
        return xf.map_values(lambda v: math.copysign(abs(v / nrm) ** (self.p - 1), v))

    def dual_norm_bounds(self, f: SparseVector, probes: int = 16, seed: int = 0) -> NormInterval:
        """Bracket for the dual norm of ``f``.

        The lower end is the best ratio ``|f(y)| / ||y||`` over a handful of
        probe vectors; the upper end uses ``||y|| >= ||y||_inf`` and, when the
        support of ``f`` forms an admissible block, ``||y|| >= 2^(-1/p) ||y||_p``.
        """
        if not f:
            return NormInterval(0.0, 0.0)
        f = f.to_float()
        if self.kind == "lp":
            v = float(lp_norm(f, self.q))
            return NormInterval(v, v)
        upper = float(lp_norm(f, 1))
        if self.kind in ("T", "Tp") and len(f) <= f.min_index() + 1:
            upper = min(upper, 2.0 ** (1.0 / self.p) * float(lp_norm(f, self.q)))
        lower = 0.0
        for y in self._probes(f, probes, seed):
            ny = self.norm(y)
            if ny > 0:
                lower = max(lower, abs(float(f.dot(y))) / ny)
        return NormInterval(lower, max(lower, upper))

    def _probes(self, f: SparseVector, count: int, seed: int):
        q = self.q
        yield f.map_values(lambda v: math.copysign(1.0, v))
        if math.isfinite(q):
            yield f.map_values(lambda v: math.copysign(abs(v) ** (q - 1), v))
        i = max(f.items(), key=lambda kv: abs(kv[1]))[0]
        yield SparseVector({i: 1.0})
        rng = np.random.default_rng(seed)
        for _ in range(count):
            yield f.map_values(lambda v: v * rng.random())


# -- calibration --------------------------------------------------------------

@dataclass
class CalibrationTable:
    """Measured constants of an asymptotic-l_p space.

    ``C`` is the largest observed violation ratio of the two-sided p-estimate
    for blocks supported after ``P(n)``; ``witnesses`` record the blocks that
    produced it.
    """

    space: str
    p: float
    C: float
    P: list = field(default_factory=list)
    witnesses: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"space": self.space, "p": self.p, "C": self.C,
                "P": [list(r) for r in self.P], "witnesses": self.witnesses}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, obj: dict) -> "CalibrationTable":
        try:
            return cls(obj["space"], float(obj["p"]), float(obj["C"]),
                       [tuple(r) for r in obj["P"]], list(obj.get("witnesses", [])))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed calibration table: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "CalibrationTable":
        return cls.from_json(json.loads(Path(path).read_text()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())


def _random_block(rng, start: int, max_len: int) -> SparseVector:
    length = int(rng.integers(1, max_len + 1))
    vals = rng.random(length) + 0.05
    vals *= rng.choice([-1.0, 1.0], size=length)
    return SparseVector.from_dense(list(vals), start=start)


def estimate_An_constants(space: SpaceParams, n: int, N: int, budget: int = 64,
                          seed: int = 0, max_len: int = 4):
    """Certified lower bound for the constant ``C`` of property ``A_n`` after ``N``.

    Samples ``budget`` families of ``n`` successive normalized blocks whose
    positions exceed ``N`` (the first family is unit vectors) and compares
    ``||sum y_i||`` with ``n^(1/p)``.  The norming functionals of the blocks
    have dual norm one, and the bracket for the dual norm of their sum gives
    the same comparison against ``n^(1/q)``.  Returns ``(C_lower, witness)``.
    """
    if n < 1 or N < 0:
        raise InvalidInputError("need n >= 1 and N >= 0")
    if budget < 1:
        raise InvalidInputError("budget must be at least 1")
    rng = np.random.default_rng(seed)
    q = space.q
    dual_scale = 1.0 if math.isinf(q) else n ** (1.0 / q)
    worst, witness = 1.0, None
    for t in range(budget):
        blocks = []
        start = N
        for _ in range(n):
            y = SparseVector({start: 1.0}) if t == 0 else _random_block(rng, start, max_len)
            y = y * (1.0 / space.norm(y))
            blocks.append(y)
            start = y.max_index() + 1 + (0 if t == 0 else int(rng.integers(0, 3)))
        if blocks[-1].max_index() >= space.trunc:
            raise InvalidInputError("sample exceeds the truncation bound")
        total = SparseVector.zero(FLOAT)
        dual = SparseVector.zero(FLOAT)
        for y in blocks:
            total = total + y
            dual = dual + space.norming_functional(y)
        ratio = space.norm(total) / n ** (1.0 / space.p)
        db = space.dual_norm_bounds(dual, probes=4, seed=seed + t)
        dual_lo, dual_hi = db.lower / dual_scale, db.upper / dual_scale
        viol = max(ratio, 1.0 / ratio, dual_lo, 1.0 / dual_hi)
        if viol > worst + 1e-12 or witness is None:
            worst = max(worst, viol)
            witness = {"n": n, "N": N, "ratio": ratio, "dual_ratio": [dual_lo, dual_hi],
                       "blocks": [[list(b.indices), list(b.values)] for b in blocks]}
    return worst, witness


def calibrate(space: SpaceParams, ns=(2, 3, 4), budget: int = 32, seed: int = 0) -> CalibrationTable:
    """Measure ``C`` with the threshold ``P(n) = n`` for each ``n`` in ``ns``."""
    C = 1.0
    P, witnesses = [], []
    for n in ns:
        c, w = estimate_An_constants(space, n, n, budget, seed + n)
        C = max(C, c)
        P.append((n, n))
        witnesses.append({"n": n, "N": n, "ratio": round(w["ratio"], 12),
                          "dual_ratio": [round(v, 12) for v in w["dual_ratio"]]})
    return CalibrationTable(space.tag, space.p, round(C, 12), P, witnesses)
