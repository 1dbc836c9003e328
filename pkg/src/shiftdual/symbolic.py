"""Shift-space primitives: alphabet, points, cylinder tables, kernels.

Everything downstream works on one-sided shifts over a finite alphabet
``{0, ..., d-1}``.  Two orientations exist, "future" and "past", but the
data layout is the same for both: coordinate 1 is the leading coordinate
(the current symbol of a future point, the most recent symbol of a past
point), and appending a symbol to either kind of point makes that symbol
the new coordinate 1.

Points are stored as a finite prefix plus a constant tail, which keeps
every evaluation of a finite-depth function exact.  Depth-k tables are
indexed lexicographically with coordinate 1 most significant, so the flat
view of a table lists words in ``itertools.product`` order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

FUTURE = "future"
PAST = "past"

_SIDES = (FUTURE, PAST)


class ShiftDualError(Exception):
    """Base class for errors raised by this package."""


def _check_side(side: str) -> str:
    if side not in _SIDES:
        raise ValueError(f"side must be 'future' or 'past', got {side!r}")
    return side


def other_side(side: str) -> str:
    return PAST if _check_side(side) == FUTURE else FUTURE


@dataclass(frozen=True)
class AprioriMeasure:
    """Strictly positive probability weights on the alphabet."""

    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.weights) < 2:
            raise ValueError("alphabet needs at least two symbols")
        if any(w <= 0.0 for w in self.weights):
            raise ValueError("weights must be strictly positive")
        mass = math.fsum(self.weights)
        if abs(mass - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 within 1e-12, got {mass!r}")

    @property
    def d(self) -> int:
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @staticmethod
    def uniform(d: int) -> "AprioriMeasure":
        return AprioriMeasure(tuple(1.0 / d for _ in range(d)))


@dataclass(frozen=True)
class Word:
    """A finite block of symbols in coordinate order, tagged with a side.

    ``symbols[0]`` is coordinate 1.  For a future word that is the earliest
    symbol read; for a past word it is the most recent one.
    """

    symbols: tuple[int, ...]
    side: str = FUTURE

    def __post_init__(self) -> None:
        _check_side(self.side)
        if any((not isinstance(s, int)) or s < 0 for s in self.symbols):
            raise ValueError("symbols must be nonnegative integers")

    def __len__(self) -> int:
        return len(self.symbols)

    def reversed(self) -> "Word":
        return Word(self.symbols[::-1], self.side)

    def mirrored(self) -> "Word":
        """Same block read from the opposite orientation."""
        return Word(self.symbols[::-1], other_side(self.side))

    def index(self, d: int) -> int:
        return word_index(self.symbols, d)


@dataclass(frozen=True)
class Point:
    """A shift-space point: finite prefix then a constant tail symbol."""

    prefix: tuple[int, ...]
    tail: int
    side: str = FUTURE

    def __post_init__(self) -> None:
        _check_side(self.side)
        if self.tail < 0:
            raise ValueError("tail symbol must be nonnegative")
        if any(s < 0 for s in self.prefix):
            raise ValueError("prefix symbols must be nonnegative")

    def coord(self, i: int) -> int:
        """1-based coordinate access."""
        if i < 1:
            raise IndexError("coordinates are 1-based")
        return self.prefix[i - 1] if i <= len(self.prefix) else self.tail

    def first(self, n: int) -> tuple[int, ...]:
        if n <= len(self.prefix):
            return self.prefix[:n]
        return self.prefix + (self.tail,) * (n - len(self.prefix))

    def shift(self, j: int = 1) -> "Point":
        """Drop the leading j coordinates (the one-sided shift, either side)."""
        return Point(self.prefix[j:], self.tail, self.side)

    def push(self, symbol: int) -> "Point":
        """New point whose coordinate 1 is ``symbol``; old coordinates move up."""
        return Point((symbol,) + self.prefix, self.tail, self.side)

    def prepend_block(self, symbols: Sequence[int]) -> "Point":
        """Install ``symbols`` as coordinates 1..n in the given order."""
        return Point(tuple(symbols) + self.prefix, self.tail, self.side)


def constant_point(symbol: int, side: str) -> Point:
    return Point((), symbol, side)


def past_after_consuming(past: Point, future_block: Sequence[int]) -> Point:
    """Past point after the two-sided shift consumes ``future_block``.

    The block is given in future coordinate order, so its first entry is
    consumed first and ends up deepest; the last entry consumed becomes the
    most recent past coordinate.
    """
    if past.side != PAST:
        raise ValueError("expected a past point")
    return past.prepend_block(tuple(future_block)[::-1])


def word_index(symbols: Sequence[int], d: int) -> int:
    """Lexicographic index with coordinate 1 most significant."""
    idx = 0
    for s in symbols:
        if not 0 <= s < d:
            raise ValueError(f"symbol {s} outside alphabet of size {d}")
        idx = idx * d + s
    return idx


def index_word(index: int, d: int, depth: int) -> tuple[int, ...]:
    if not 0 <= index < d**depth:
        raise ValueError("index out of range")
    out = []
    for _ in range(depth):
        index, r = divmod(index, d)
        out.append(r)
    return tuple(reversed(out))


def all_words(d: int, depth: int) -> Iterator[tuple[int, ...]]:
    """All depth-``depth`` words in lexicographic (flat table) order."""
    return itertools.product(range(d), repeat=depth)


def _as_table(values, d: int, depth: int) -> np.ndarray:
    arr = np.asarray(values)
    want = (d,) * depth
    if arr.shape == (d**depth,):
        arr = arr.reshape(want)
    if arr.shape != want:
        raise ValueError(f"table shape {arr.shape} incompatible with d={d}, depth={depth}")
    if np.iscomplexobj(arr):
        return arr.astype(np.complex128, copy=True)
    return arr.astype(np.float64, copy=True)


class CylinderFunction:
    """A function of finitely many coordinates, stored as a depth-k table.

    :param side: which shift the function lives on.
    :param depth: number of leading coordinates it reads.
    :param table: array of shape ``(d,)*depth`` (or flat of length d**depth),
        axis j indexing coordinate j+1.
    :param d: alphabet size (needed explicitly so depth-0 constants embed).
    """

    __slots__ = ("side", "depth", "d", "table")

    def __init__(self, side: str, depth: int, table, d: int):
        self.side = _check_side(side)
        if depth < 0:
            raise ValueError("depth must be >= 0")
        self.depth = depth
        self.d = int(d)
        if self.d < 2:
            raise ValueError("alphabet needs at least two symbols")
        self.table = _as_table(table, self.d, depth)

    # -- constructors -------------------------------------------------

    @staticmethod
    def constant(side: str, value, d: int) -> "CylinderFunction":
        return CylinderFunction(side, 0, np.asarray(value), d)

    @staticmethod
    def from_callable(side: str, depth: int, fn: Callable[[tuple[int, ...]], complex],
                      d: int) -> "CylinderFunction":
        flat = [fn(w) for w in all_words(d, depth)]
        return CylinderFunction(side, depth, np.asarray(flat), d)

    # -- evaluation ---------------------------------------------------

    def value_at(self, word: Sequence[int]) -> complex | float:
        w = tuple(word)
        if len(w) < self.depth:
            raise ValueError(f"need at least {self.depth} symbols, got {len(w)}")
        return self.table[w[: self.depth]] if self.depth else self.table[()]

    def evaluate(self, point: Point) -> complex | float:
        if point.side != self.side:
            raise ValueError(f"point side {point.side!r} does not match {self.side!r}")
        return self.value_at(point.first(self.depth))

    # -- structural ops -----------------------------------------------

    def embed(self, depth: int) -> "CylinderFunction":
        """Same function as a depth-``depth`` table (depth may only grow)."""
        if depth < self.depth:
            raise ValueError("cannot embed into smaller depth")
        if depth == self.depth:
            return self
        shape = self.table.shape + (1,) * (depth - self.depth)
        big = np.broadcast_to(self.table.reshape(shape), (self.d,) * depth)
        return CylinderFunction(self.side, depth, np.array(big), self.d)

    def slice_leading(self, symbol: int) -> "CylinderFunction":
        """The function w -> f(symbol, w) of depth-1 fewer coordinates."""
        if self.depth == 0:
            raise ValueError("depth-0 function has no leading coordinate")
        return CylinderFunction(self.side, self.depth - 1, self.table[symbol], self.d)

    def compose_shift(self) -> "CylinderFunction":
        """f after one shift: reads coordinates 2..depth+1."""
        big = np.broadcast_to(self.table[np.newaxis, ...], (self.d,) * (self.depth + 1))
        return CylinderFunction(self.side, self.depth + 1, np.array(big), self.d)

    def flat(self) -> np.ndarray:
        """Lexicographic flat view (coordinate 1 most significant)."""
        return self.table.reshape(-1)

    # -- pointwise algebra ---------------------------------------------

    def _binary(self, other, op) -> "CylinderFunction":
        if isinstance(other, CylinderFunction):
            if other.side != self.side or other.d != self.d:
                raise ValueError("operands live on different shifts")
            depth = max(self.depth, other.depth)
            a = self.embed(depth).table
            b = other.embed(depth).table
            return CylinderFunction(self.side, depth, op(a, b), self.d)
        return CylinderFunction(self.side, self.depth, op(self.table, other), self.d)

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    def __radd__(self, other):
        return self._binary(other, lambda a, b: b + a)

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def __mul__(self, other):
        return self._binary(other, lambda a, b: a * b)

    def __rmul__(self, other):
        return self._binary(other, lambda a, b: b * a)

    def __neg__(self):
        return CylinderFunction(self.side, self.depth, -self.table, self.d)

    def exp(self) -> "CylinderFunction":
        return CylinderFunction(self.side, self.depth, np.exp(self.table), self.d)

    def conj(self) -> "CylinderFunction":
        return CylinderFunction(self.side, self.depth, np.conj(self.table), self.d)

    def real_part(self) -> "CylinderFunction":
        return CylinderFunction(self.side, self.depth, np.real(self.table), self.d)

    def is_real(self) -> bool:
        return not np.iscomplexobj(self.table)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.table))) if self.table.size else 0.0

    def __repr__(self) -> str:
        return f"CylinderFunction(side={self.side!r}, depth={self.depth}, d={self.d})"


class KernelTable:
    """A function of finitely many past and future coordinates.

    Stored as an array of shape ``(d,)*past_depth + (d,)*future_depth``;
    the leading axes index past coordinates 1..p, the trailing axes future
    coordinates 1..q.  Depth (0, 0) is allowed and denotes a constant
    (in particular the identically-zero kernel of shallow potentials).
    """

    __slots__ = ("past_depth", "future_depth", "d", "table")

    def __init__(self, past_depth: int, future_depth: int, table, d: int):
        if past_depth < 0 or future_depth < 0:
            raise ValueError("depths must be >= 0")
        self.past_depth = past_depth
        self.future_depth = future_depth
        self.d = int(d)
        self.table = _as_table(table, self.d, past_depth + future_depth)

    def value_at(self, past_word: Sequence[int], future_word: Sequence[int]):
        y = tuple(past_word)[: self.past_depth]
        x = tuple(future_word)[: self.future_depth]
        if len(y) < self.past_depth or len(x) < self.future_depth:
            raise ValueError("words shorter than kernel depths")
        idx = y + x
        return self.table[idx] if idx else self.table[()]

    def value(self, past: Point, future: Point) -> complex | float:
        if past.side != PAST or future.side != FUTURE:
            raise ValueError("expected (past, future) points")
        return self.value_at(past.first(self.past_depth), future.first(self.future_depth))

    def column(self, future: Point) -> CylinderFunction:
        """The past-side function y -> K(y | x) at a frozen future point x."""
        if future.side != FUTURE:
            raise ValueError("expected a future point")
        j = word_index(future.first(self.future_depth), self.d)
        flat = self.table.reshape(self.d**self.past_depth, self.d**self.future_depth)
        return CylinderFunction(PAST, self.past_depth, flat[:, j].copy(), self.d)

    def row(self, past: Point) -> CylinderFunction:
        """The future-side function x -> K(y | x) at a frozen past point y."""
        if past.side != PAST:
            raise ValueError("expected a past point")
        i = word_index(past.first(self.past_depth), self.d)
        flat = self.table.reshape(self.d**self.past_depth, self.d**self.future_depth)
        return CylinderFunction(FUTURE, self.future_depth, flat[i, :].copy(), self.d)

    def __neg__(self) -> "KernelTable":
        return KernelTable(self.past_depth, self.future_depth, -self.table, self.d)

    def exp(self) -> "KernelTable":
        return KernelTable(self.past_depth, self.future_depth, np.exp(self.table), self.d)

    def real_part(self) -> "KernelTable":
        return KernelTable(self.past_depth, self.future_depth, np.real(self.table), self.d)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.table))) if self.table.size else 0.0

    def __repr__(self) -> str:
        return (f"KernelTable(past_depth={self.past_depth}, "
                f"future_depth={self.future_depth}, d={self.d})")


# -- exact Holder seminorms ------------------------------------------------


def _group_diameters(flat: np.ndarray, groups: int) -> float:
    """Max diameter of the value set within each of ``groups`` equal blocks."""
    x = flat.reshape(groups, -1)
    if x.shape[1] < 2:
        return 0.0
    diffs = np.abs(x[:, :, None] - x[:, None, :])
    return float(diffs.max())


def variation(f: CylinderFunction, n: int) -> float:
    """Largest |f(u) - f(v)| over word pairs agreeing on the first n symbols."""
    if n >= f.depth:
        return 0.0
    return _group_diameters(f.flat(), f.d**n)


def holder_seminorm(f: CylinderFunction, theta: float, include_n0: bool = True) -> float:
    """Exact theta-Holder seminorm of a finite-depth table.

    The supremum of ``variation(f, n) / theta**n`` runs over n >= 0 when
    ``include_n0`` (sup over arbitrary pairs at n = 0) and over n >= 1
    otherwise; variations vanish for n >= depth either way, so the maximum
    is finite and exact.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    start = 0 if include_n0 else 1
    best = 0.0
    for n in range(start, f.depth):
        best = max(best, variation(f, n) / theta**n)
    return best


def kernel_variation(kernel: KernelTable, n: int) -> float:
    """Largest kernel gap over pairs agreeing on n past and n future symbols."""
    p, q, d = kernel.past_depth, kernel.future_depth, kernel.d
    if n >= max(p, q):
        return 0.0
    gp, gq = min(n, p), min(n, q)
    x = kernel.table.reshape(d**gp, d ** (p - gp), d**gq, d ** (q - gq))
    x = np.transpose(x, (0, 2, 1, 3)).reshape(d**gp * d**gq, -1)
    return _group_diameters(x, x.shape[0])


def kernel_holder_seminorm(kernel: KernelTable, theta: float,
                           include_n0: bool = True) -> float:
    """Exact two-sided Holder seminorm of a kernel table."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    start = 0 if include_n0 else 1
    best = 0.0
    for n in range(start, max(kernel.past_depth, kernel.future_depth)):
        best = max(best, kernel_variation(kernel, n) / theta**n)
    return best


def birkhoff_sum(f: CylinderFunction, point: Point, n: int) -> complex | float:
    """Sum of f along the first n shift iterates of ``point`` (j = 0..n-1)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    total = 0.0 + 0.0j if np.iscomplexobj(f.table) else 0.0
    for j in range(n):
        total += f.evaluate(point.shift(j))
    return total
