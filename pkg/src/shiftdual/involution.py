"""Dual potential and transfer kernel for depth-k potentials.

Given a future-side potential A of depth k, the classical telescoping
construction produces a past-side potential A* of depth k and a kernel W
of depth (k-1, k-1) such that on the two-sided extension

    A*(y) = A(y_1 . x) + W(shifted y | y_1 . x) - W(y | x)

for every past point y and future point x, where ``y_1 . x`` prepends the
most recent past symbol to x.  Because A reads k coordinates, all sums here
are finite and the identity holds exactly (up to roundoff); no limits are
involved.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .symbolic import (
    FUTURE,
    PAST,
    CylinderFunction,
    KernelTable,
    Point,
    Word,
    all_words,
    birkhoff_sum,
    constant_point,
    holder_seminorm,
    kernel_holder_seminorm,
    past_after_consuming,
)

__all__ = [
    "DualTriple",
    "InvolutionCheck",
    "NormBoundCheck",
    "sinai_dual",
    "involution_check",
    "cocycle_residual",
    "truncate_potential",
    "kernel_norm_bounds",
]


@dataclass(frozen=True)
class DualTriple:
    """A potential, its dual, the connecting kernel, and the reference symbol."""

    potential: CylinderFunction
    dual: CylinderFunction
    kernel: KernelTable
    reference_symbol: int = 0

    def __post_init__(self) -> None:
        if self.potential.side != FUTURE or self.dual.side != PAST:
            raise ValueError("potential must be future-side, dual past-side")
        if self.potential.depth != self.dual.depth:
            raise ValueError("potential and dual must have equal depth")

    @property
    def depth(self) -> int:
        return self.potential.depth

    @property
    def d(self) -> int:
        return self.potential.d

    @property
    def reference_point(self) -> Point:
        return constant_point(self.reference_symbol, FUTURE)


def sinai_dual(potential: CylinderFunction, reference_symbol: int = 0) -> DualTriple:
    """Build the dual potential and kernel of a depth-k future potential.

    With z the constant reference point,

        W(y | x)  = sum_{j=1}^{k-1} [ A(y_j..y_1 x) - A(y_j..y_1 z) ]
        A*(y)     = A(y_1 z) + sum_{j=2}^{k} [ A(y_j..y_1 z) - A(y_j..y_2 z) ]

    Both right-hand sides read at most k - 1 coordinates of x and k of y,
    so the results are exact cylinder tables of depth (k-1, k-1) and k.
    For k <= 1 the kernel is identically zero.
    """
    A = potential
    if A.side != FUTURE:
        raise ValueError("potential must live on the future shift")
    d, k = A.d, A.depth
    if not 0 <= reference_symbol < d:
        raise ValueError("reference symbol outside alphabet")
    z = constant_point(reference_symbol, FUTURE)

    kw = max(k - 1, 0)
    W = np.zeros((d,) * (2 * kw), dtype=A.table.dtype)
    for y in all_words(d, kw):
        for x in all_words(d, kw):
            acc = 0.0
            for j in range(1, k):
                head = y[:j][::-1]  # (y_j, ..., y_1)
                px = Point(head + x, reference_symbol, FUTURE)
                pz = Point(head, reference_symbol, FUTURE)
                acc = acc + A.evaluate(px) - A.evaluate(pz)
            if 2 * kw:
                W[y + x] = acc

    dual = np.zeros((d,) * k, dtype=A.table.dtype)
    for y in all_words(d, k):
        if k == 0:
            dual[()] = A.table[()]
            break
        val = A.evaluate(z.push(y[0]))
        for j in range(2, k + 1):
            val = val + A.evaluate(Point(y[:j][::-1], reference_symbol, FUTURE))
            val = val - A.evaluate(Point(y[1:j][::-1], reference_symbol, FUTURE))
        dual[y] = val

    return DualTriple(
        potential=A,
        dual=CylinderFunction(PAST, k, dual, d),
        kernel=KernelTable(kw, kw, W, d),
        reference_symbol=reference_symbol,
    )


@dataclass(frozen=True)
class InvolutionCheck:
    """Exhaustive residuals of the defining identity of a dual triple."""

    residual: float
    tail_gap: float

    def within(self, tol: float) -> bool:
        return self.residual <= tol and self.tail_gap <= tol


def involution_check(triple: DualTriple) -> InvolutionCheck:
    """Max residual of A*(y) = A(y_1.x) + W(sy | y_1.x) - W(y | x).

    Sweeps all depth-k past words y and depth-(k-1) future words x.  Every
    term reads at most k - 1 coordinates of x beyond what the sweep fixes,
    so the identity cannot depend on the tail; ``tail_gap`` certifies that
    by re-evaluating with a different constant tail.
    """
    A, Astar, W = triple.potential, triple.dual, triple.kernel
    d, k = triple.d, triple.depth
    tails = (triple.reference_symbol, d - 1 if d - 1 != triple.reference_symbol else 0)

    worst = 0.0
    tail_gap = 0.0
    for y in all_words(d, k):
        ypt = Point(y, triple.reference_symbol, PAST)
        target = Astar.evaluate(ypt)
        per_tail = []
        for t in tails:
            for xw in all_words(d, max(k - 1, 0)):
                x = Point(xw, t, FUTURE)
                x1 = x.push(y[0]) if k else x
                got = A.evaluate(x1) + W.value(ypt.shift(1), x1) - W.value(ypt, x)
                per_tail.append(got)
                worst = max(worst, abs(target - got))
        half = len(per_tail) // 2
        for a, b in zip(per_tail[:half], per_tail[half:]):
            tail_gap = max(tail_gap, abs(a - b))
    return InvolutionCheck(residual=worst, tail_gap=tail_gap)


def cocycle_residual(triple: DualTriple, block: Word, past: Point, future: Point) -> float:
    """Residual of the n-step transport identity along a future block.

    For w of length n, with yw the past point after the two-sided shift
    consumes w and ``w . x`` the future point starting with w:

        A^n(w . x) = W(yw | x) - W(y | w . x) + (A*)^n(yw)

    where both Birkhoff sums run over n shift steps.  Exact for cylinder
    potentials, so the residual is pure roundoff.
    """
    if block.side != FUTURE:
        raise ValueError("block must be a future word")
    if past.side != PAST or future.side != FUTURE:
        raise ValueError("expected (past, future) points")
    n = len(block)
    wx = future.prepend_block(block.symbols)
    yw = past_after_consuming(past, block.symbols)
    lhs = birkhoff_sum(triple.potential, wx, n)
    rhs = (triple.kernel.value(yw, future)
           - triple.kernel.value(past, wx)
           + birkhoff_sum(triple.dual, yw, n))
    return float(abs(lhs - rhs))


def truncate_potential(evaluator: Callable[[Point], complex], d: int, depth: int,
                       holder_constant: float, theta: float,
                       reference_symbol: int = 0) -> tuple[CylinderFunction, float]:
    """Depth-k cylinder approximation of a black-box future potential.

    Each word is evaluated at its representative point (word then constant
    reference tail).  If the potential is theta-Holder with constant
    ``holder_constant``, every point of the cylinder is within theta**depth
    of its representative, so the returned error bound is
    ``holder_constant * theta**depth``.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if holder_constant < 0.0:
        raise ValueError("holder constant must be >= 0")
    flat = [evaluator(Point(w, reference_symbol, FUTURE)) for w in all_words(d, depth)]
    table = CylinderFunction(FUTURE, depth, np.asarray(flat), d)
    return table, holder_constant * theta**depth


@dataclass(frozen=True)
class NormBoundCheck:
    """One seminorm inequality: measured left side and allowed right side."""

    name: str
    measured: float
    allowed: float

    @property
    def passed(self) -> bool:
        return self.measured <= self.allowed


def kernel_norm_bounds(triple: DualTriple, theta: float,
                       include_n0: bool = True) -> tuple[NormBoundCheck, NormBoundCheck]:
    """Holder-seminorm control of the construction, as measured/allowed pairs.

    The kernel seminorm is bounded by 3*theta/(1-theta) times the potential
    seminorm, and the dual seminorm by 2/(1-theta) times it.  Both bounds
    hold exactly for the finite tables built here.
    """
    a = holder_seminorm(triple.potential, theta, include_n0)
    w = kernel_holder_seminorm(triple.kernel, theta, include_n0)
    s = holder_seminorm(triple.dual, theta, include_n0)
    return (
        NormBoundCheck("kernel-holder-bound", w, 3.0 * theta / (1.0 - theta) * a),
        NormBoundCheck("dual-holder-bound", s, 2.0 / (1.0 - theta) * a),
    )
