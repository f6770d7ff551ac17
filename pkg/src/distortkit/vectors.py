"""Finitely supported vectors over the naturals.

Everything in the package (vectors of S, T, T^(p), l_p and their duals) is
carried by :class:`SparseVector`.  A dual vector is just another sparse
vector; the pairing is :meth:`SparseVector.dot`.

Two arithmetic modes exist.  ``"exact"`` stores :class:`fractions.Fraction`
coefficients, ``"float"`` stores Python floats.  Mixing modes in a binary
operation promotes to float.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral, Rational, Real
from typing import Iterable, Iterator, Mapping, Sequence

from .exceptions import InvalidInputError

EXACT = "exact"
FLOAT = "float"
MODES = (EXACT, FLOAT)

#: comparison tolerance used for float-mode checks
FLOAT_TOL = 1e-9


def _coerce(value, mode):
    if mode == EXACT:
        if isinstance(value, float):
            if not math.isfinite(value):
                raise InvalidInputError(f"non-finite coefficient {value!r}")
            return Fraction(value)
        if isinstance(value, Rational):
            return Fraction(value)
        raise InvalidInputError(f"cannot store {value!r} exactly")
    value = float(value)
    if not math.isfinite(value):
        raise InvalidInputError(f"non-finite coefficient {value!r}")
    return value


class SparseVector:
    """Immutable finitely supported coefficient sequence.

    Indices are 0-based naturals, kept strictly increasing; zero coefficients
    are never stored, so an empty vector is the zero vector.
    """

    __slots__ = ("_idx", "_val", "_mode", "_hash")

    def __init__(self, entries: Mapping[int, object] | Iterable[tuple[int, object]] = (),
                 mode: str = FLOAT):
        if mode not in MODES:
            raise InvalidInputError(f"unknown mode {mode!r}")
        items = entries.items() if isinstance(entries, Mapping) else entries
        acc: dict[int, object] = {}
        for i, v in items:
            if isinstance(i, bool) or not isinstance(i, Integral) or i < 0:
                raise InvalidInputError(f"index must be a natural number, got {i!r}")
            i = int(i)
            if i in acc:
                raise InvalidInputError(f"duplicate index {i}")
            acc[i] = _coerce(v, mode)
        keys = sorted(k for k, v in acc.items() if v != 0)
        self._idx = tuple(keys)
        self._val = tuple(acc[k] for k in keys)
        self._mode = mode
        self._hash = None

    @classmethod
    def _raw(cls, idx, val, mode):
        # trusted constructor: idx sorted, val nonzero, already coerced
        obj = object.__new__(cls)
        obj._idx = tuple(idx)
        obj._val = tuple(val)
        obj._mode = mode
        obj._hash = None
        return obj

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, mode: str = FLOAT) -> "SparseVector":
        return cls((), mode)

    @classmethod
    def basis(cls, i: int, mode: str = FLOAT, coeff=1) -> "SparseVector":
        return cls({i: coeff}, mode)

    @classmethod
    def from_dense(cls, values: Sequence, start: int = 0, mode: str = FLOAT) -> "SparseVector":
        return cls(((start + k, v) for k, v in enumerate(values)), mode)

    @classmethod
    def indicator(cls, indices: Iterable[int], mode: str = FLOAT, coeff=1) -> "SparseVector":
        return cls(((i, coeff) for i in indices), mode)

    # -- accessors --------------------------------------------------------
    @property
    def mode(self) -> str:
        return self._mode

    @property
    def indices(self) -> tuple[int, ...]:
        return self._idx

    @property
    def values(self) -> tuple:
        return self._val

    def items(self) -> Iterator[tuple[int, object]]:
        return zip(self._idx, self._val)

    def __len__(self) -> int:
        return len(self._idx)

    def __bool__(self) -> bool:
        return bool(self._idx)

    def __getitem__(self, i: int):
        lo, hi = 0, len(self._idx)
        while lo < hi:
            mid = (lo + hi) // 2
            if self._idx[mid] < i:
                lo = mid + 1
            else:
                hi = mid
        if lo < len(self._idx) and self._idx[lo] == i:
            return self._val[lo]
        return Fraction(0) if self._mode == EXACT else 0.0

    def min_index(self) -> int:
        if not self._idx:
            raise InvalidInputError("zero vector has no support")
        return self._idx[0]

    def max_index(self) -> int:
        if not self._idx:
            raise InvalidInputError("zero vector has no support")
        return self._idx[-1]

    def is_nonnegative(self) -> bool:
        return all(v > 0 for v in self._val)

    # -- conversions ------------------------------------------------------
    def to_float(self) -> "SparseVector":
        if self._mode == FLOAT:
            return self
        return SparseVector._raw(self._idx, (float(v) for v in self._val), FLOAT)

    def to_exact(self) -> "SparseVector":
        if self._mode == EXACT:
            return self
        return SparseVector._raw(self._idx, (Fraction(v) for v in self._val), EXACT)

    def as_dict(self) -> dict[int, object]:
        return dict(zip(self._idx, self._val))

    # -- algebra ----------------------------------------------------------
    def _binary(self, other: "SparseVector", sign: int) -> "SparseVector":
        mode = self._mode if self._mode == other._mode else FLOAT
        a = self if mode == self._mode else self.to_float()
        b = other if mode == other._mode else other.to_float()
        acc = dict(zip(a._idx, a._val))
        for i, v in zip(b._idx, b._val):
            acc[i] = acc.get(i, 0) + sign * v
        keys = sorted(k for k, v in acc.items() if v != 0)
        return SparseVector._raw(keys, (acc[k] for k in keys), mode)

    def __add__(self, other: "SparseVector") -> "SparseVector":
        return self._binary(other, 1)

    def __sub__(self, other: "SparseVector") -> "SparseVector":
        return self._binary(other, -1)

    def __neg__(self) -> "SparseVector":
        return SparseVector._raw(self._idx, (-v for v in self._val), self._mode)

    def __mul__(self, scalar) -> "SparseVector":
        if isinstance(scalar, SparseVector):
            return NotImplemented
        if self._mode == EXACT and isinstance(scalar, Rational):
            c = Fraction(scalar)
            mode = EXACT
        else:
            c = float(scalar)
            mode = FLOAT
        src = self if mode == self._mode else self.to_float()
        if c == 0:
            return SparseVector.zero(mode)
        return SparseVector._raw(src._idx, (c * v for v in src._val), mode)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "SparseVector":
        if self._mode == EXACT and isinstance(scalar, Rational):
            return self * (1 / Fraction(scalar))
        return self * (1.0 / float(scalar))

    def __abs__(self) -> "SparseVector":
        return SparseVector._raw(self._idx, (abs(v) for v in self._val), self._mode)

    def dot(self, other: "SparseVector"):
        """Pairing ``sum_i self_i * other_i``."""
        if len(other) < len(self):
            small, large = other, self
        else:
            small, large = self, other
        big = dict(zip(large._idx, large._val))
        total = Fraction(0) if (self._mode == EXACT and other._mode == EXACT) else 0.0
        for i, v in zip(small._idx, small._val):
            w = big.get(i)
            if w is not None:
                total += v * w
        return total

    def map_values(self, fn) -> "SparseVector":
        """Apply ``fn`` to every stored coefficient (result coerced to this mode)."""
        return SparseVector(((i, fn(v)) for i, v in self.items()), self._mode)

    def shift(self, offset: int) -> "SparseVector":
        if self._idx and self._idx[0] + offset < 0:
            raise InvalidInputError("shift moves support below index 0")
        return SparseVector._raw((i + offset for i in self._idx), self._val, self._mode)

    # -- comparisons ------------------------------------------------------
    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return self._idx == other._idx and self._val == other._val

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._idx, self._val))
        return self._hash

    def allclose(self, other: "SparseVector", tol: float = FLOAT_TOL) -> bool:
        return lp_norm(self - other, math.inf) <= tol

    def __repr__(self) -> str:
        body = ", ".join(f"{i}: {v}" for i, v in self.items())
        return f"SparseVector({{{body}}}, mode={self._mode!r})"


@dataclass(frozen=True)
class Segment:
    """A finite subset of the naturals, or the complement of one.

    Interval form stores ``lo <= hi`` (inclusive).  Set form stores a sorted
    tuple of indices.  ``complement=True`` denotes N minus the described set.
    """

    members: tuple[int, ...] | None = None
    lo: int | None = None
    hi: int | None = None
    complement: bool = False

    def __post_init__(self):
        if self.members is None:
            if self.lo is None or self.hi is None:
                raise InvalidInputError("segment needs members or lo/hi")
            if self.lo < 0 or self.lo > self.hi:
                raise InvalidInputError(f"bad interval [{self.lo}, {self.hi}]")
        else:
            m = tuple(sorted(set(self.members)))
            if m and m[0] < 0:
                raise InvalidInputError("negative index in segment")
            object.__setattr__(self, "members", m)

    @classmethod
    def interval(cls, lo: int, hi: int) -> "Segment":
        return cls(lo=lo, hi=hi)

    @classmethod
    def of(cls, indices: Iterable[int]) -> "Segment":
        return cls(members=tuple(indices))

    @classmethod
    def empty(cls) -> "Segment":
        return cls(members=())

    def __contains__(self, i: int) -> bool:
        if self.members is None:
            inside = self.lo <= i <= self.hi
        else:
            inside = i in self._member_set
        return inside != self.complement

    @property
    def _member_set(self) -> frozenset:
        return frozenset(self.members)

    def indices(self) -> tuple[int, ...]:
        if self.complement:
            raise InvalidInputError("complement segment is infinite")
        if self.members is None:
            return tuple(range(self.lo, self.hi + 1))
        return self.members

    def invert(self) -> "Segment":
        return Segment(self.members, self.lo, self.hi, not self.complement)

    def __len__(self) -> int:
        return len(self.indices())


@dataclass(frozen=True)
class BlockSequence:
    """Successive nonzero blocks."""

    blocks: tuple[SparseVector, ...]

    def __post_init__(self):
        blocks = tuple(self.blocks)
        object.__setattr__(self, "blocks", blocks)
        for b in blocks:
            if not b:
                raise InvalidInputError("block sequence contains a zero block")
        for a, b in zip(blocks, blocks[1:]):
            if not is_successive(a, b):
                raise InvalidInputError(
                    f"blocks not successive: max {a.max_index()} >= min {b.min_index()}")

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __getitem__(self, k):
        return self.blocks[k]

    def combine(self, coeffs: Sequence) -> SparseVector:
        """``sum_i coeffs[i] * blocks[i]``."""
        if len(coeffs) != len(self.blocks):
            raise InvalidInputError("coefficient count does not match block count")
        exact = (all(b.mode == EXACT for b in self.blocks)
                 and all(isinstance(c, Rational) for c in coeffs))
        mode = EXACT if exact else FLOAT
        out_idx: list[int] = []
        out_val: list = []
        for c, b in zip(coeffs, self.blocks):
            if c == 0:
                continue
            scaled = b * c if exact else b.to_float() * float(c)
            out_idx.extend(scaled.indices)
            out_val.extend(scaled.values)
        return SparseVector._raw(out_idx, out_val, mode)


# -- free functions --------------------------------------------------------

def support(x: SparseVector) -> Segment:
    return Segment.of(x.indices)


def is_successive(x: SparseVector, y: SparseVector) -> bool:
    """``max supp(x) < min supp(y)``."""
    if not x or not y:
        raise InvalidInputError("successiveness is undefined for the zero vector")
    return x.max_index() < y.min_index()


def supported_after(x: SparseVector, k: int) -> bool:
    """Every coordinate position exceeds ``k``; index ``i`` sits at position ``i + 1``."""
    return not x or x.min_index() + 1 > k


def project(E: Segment, x: SparseVector) -> SparseVector:
    """Restriction ``E x`` of ``x`` to the index set ``E``."""
    keep = [(i, v) for i, v in x.items() if i in E]
    return SparseVector._raw((i for i, _ in keep), (v for _, v in keep), x.mode)


def project_interval(x: SparseVector, lo: int, hi: int) -> SparseVector:
    return project(Segment.interval(lo, hi), x)


def pointwise_product(u: SparseVector, v: SparseVector) -> SparseVector:
    """``(uv)_i = u_i v_i``."""
    mode = EXACT if (u.mode == EXACT and v.mode == EXACT) else FLOAT
    other = v.as_dict()
    idx, val = [], []
    for i, a in u.items():
        b = other.get(i)
        if b is not None:
            idx.append(i)
            val.append(a * b if mode == EXACT else float(a) * float(b))
    keep = [(i, w) for i, w in zip(idx, val) if w != 0]
    return SparseVector._raw((i for i, _ in keep), (w for _, w in keep), mode)


def lp_norm(x: SparseVector, p: float = 2.0):
    """Standard l_p norm of the coefficient sequence, ``p`` in ``[1, inf]``.

    Exact-mode vectors give an exact :class:`Fraction` for ``p`` in ``{1, inf}``.
    """
    if not isinstance(p, Real) or p < 1:
        raise InvalidInputError(f"l_p norm needs p >= 1, got {p!r}")
    if not x:
        return Fraction(0) if x.mode == EXACT else 0.0
    if p == math.inf:
        return max(abs(v) for v in x.values)
    if p == 1:
        return sum(abs(v) for v in x.values)
    vals = [abs(float(v)) for v in x.values]
    top = max(vals)
    return top * math.fsum((v / top) ** p for v in vals) ** (1.0 / p)


def _require_nonnegative(*vecs: SparseVector) -> None:
    for vec in vecs:
        if any(v < 0 for v in vec.values):
            raise InvalidInputError("operation requires a nonnegative vector")


def min_pointwise(f: SparseVector, g: SparseVector) -> SparseVector:
    _require_nonnegative(f, g)
    mode = EXACT if (f.mode == EXACT and g.mode == EXACT) else FLOAT
    gd = g.as_dict()
    items = [(i, min(a, gd[i])) for i, a in f.items() if i in gd]
    return SparseVector(items, mode)


def sqrt_pointwise(f: SparseVector) -> SparseVector:
    _require_nonnegative(f)
    return SparseVector._raw(f.indices, (math.sqrt(v) for v in f.values), FLOAT)


def concat(blocks: Iterable[SparseVector]) -> SparseVector:
    """Sum of successive blocks (cheaper than repeated addition)."""
    blocks = [b for b in blocks if b]
    if not blocks:
        return SparseVector.zero()
    BlockSequence(tuple(blocks))
    mode = EXACT if all(b.mode == EXACT for b in blocks) else FLOAT
    idx, val = [], []
    for b in blocks:
        idx.extend(b.indices)
        val.extend(b.values if mode == b.mode else (float(v) for v in b.values))
    return SparseVector._raw(idx, val, mode)


# -- JSON ------------------------------------------------------------------

def vector_to_json(x: SparseVector) -> dict:
    if x.mode == EXACT:
        coords = [[i, v.numerator, v.denominator] for i, v in x.items()]
    else:
        coords = [[i, v] for i, v in x.items()]
    return {"mode": x.mode, "coords": coords}


def vector_from_json(obj: Mapping) -> SparseVector:
    """Parse the vector file format; raises :class:`InvalidInputError`."""
    if not isinstance(obj, Mapping):
        raise InvalidInputError("vector document must be an object")
    mode = obj.get("mode", FLOAT)
    if mode not in MODES:
        raise InvalidInputError(f"unknown mode {mode!r}")
    coords = obj.get("coords")
    if not isinstance(coords, list):
        raise InvalidInputError("'coords' must be a list")
    items = []
    last = -1
    for row in coords:
        if not isinstance(row, list) or not row:
            raise InvalidInputError(f"bad coordinate row {row!r}")
        i = row[0]
        if not isinstance(i, int) or isinstance(i, bool) or i <= last:
            raise InvalidInputError("indices must be strictly increasing naturals")
        last = i
        if mode == EXACT:
            if len(row) != 3 or not all(isinstance(t, int) for t in row[1:]) or row[2] == 0:
                raise InvalidInputError(f"exact row must be [index, num, den], got {row!r}")
            items.append((i, Fraction(row[1], row[2])))
        else:
            if len(row) != 2 or not isinstance(row[1], (int, float)):
                raise InvalidInputError(f"float row must be [index, value], got {row!r}")
            items.append((i, row[1]))
    return SparseVector(items, mode)


def dumps_vector(x: SparseVector) -> str:
    return json.dumps(vector_to_json(x))


def loads_vector(text: str) -> SparseVector:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"malformed JSON: {exc}") from exc
    return vector_from_json(obj)
