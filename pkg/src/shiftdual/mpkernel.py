"""Arbitrary-precision mirror of the table calculus (internal).

Level-n functionals of an eigenvalue lambda amplify any eigenvector error
along other eigendirections by roughly (rho/|lambda|)^n, so float64 break
down after a handful of levels whenever lambda is not the leading
eigenvalue.  This module mirrors just enough of the table calculus in
mpmath to evaluate those functionals: exact conversion of float64 tables,
the dual/kernel construction, transfer application, eigenpair refinement
by Rayleigh-quotient iteration, and the level-n sums themselves with an
exact head/boundary split.

Working precision is chosen per computation from the certified constants;
nothing here is part of the public API.
"""

from __future__ import annotations

import math
from typing import Sequence

import mpmath as mp
import numpy as np

from .symbolic import (
    FUTURE,
    PAST,
    AprioriMeasure,
    CylinderFunction,
    Point,
    ShiftDualError,
    all_words,
    constant_point,
    word_index,
)
from .involution import DualTriple

DPS_CAP = 4000


def choose_dps(tol: float, n_upper: int, amplification: float) -> int:
    """Working digits so that level-n sums keep ``tol`` headroom.

    ``amplification`` is the per-level contamination growth (rho/|lambda|,
    clamped at 1); levels up to ``n_upper`` are planned.  A flat margin
    covers conversion, refinement, and summation roundoff.
    """
    amp = max(amplification, 1.0)
    dps = 30 + math.ceil(max(0.0, -math.log10(tol))) \
        + math.ceil((n_upper + 5) * math.log10(amp))
    if dps > DPS_CAP:
        raise ShiftDualError(
            f"needed working precision ({dps} digits) exceeds the cap {DPS_CAP}; "
            "the requested tolerance/level combination is out of budget")
    return dps


def to_mpc(z) -> mp.mpc:
    zc = complex(z)
    return mp.mpc(mp.mpf(zc.real), mp.mpf(zc.imag))


class MPTable:
    """Flat arbitrary-precision cylinder table (side kept implicitly)."""

    __slots__ = ("depth", "d", "flat")

    def __init__(self, depth: int, d: int, flat: list):
        if len(flat) != d**depth:
            raise ValueError("flat length does not match depth")
        self.depth = depth
        self.d = d
        self.flat = flat

    @staticmethod
    def from_cylinder(cf: CylinderFunction) -> "MPTable":
        return MPTable(cf.depth, cf.d, [to_mpc(v) for v in cf.flat()])

    def value_at(self, word: Sequence[int]):
        w = tuple(word)[: self.depth]
        if len(w) < self.depth:
            raise ValueError("word shorter than table depth")
        return self.flat[word_index(w, self.d)]

    def evaluate(self, point: Point):
        return self.value_at(point.first(self.depth))


class MPKernel:
    """Arbitrary-precision two-sided kernel table."""

    __slots__ = ("past_depth", "future_depth", "d", "rows")

    def __init__(self, past_depth: int, future_depth: int, d: int, rows: list):
        self.past_depth = past_depth
        self.future_depth = future_depth
        self.d = d
        self.rows = rows  # rows[past_index][future_index]

    def value_at(self, past_word: Sequence[int], future_word: Sequence[int]):
        y = tuple(past_word)[: self.past_depth]
        x = tuple(future_word)[: self.future_depth]
        return self.rows[word_index(y, self.d)][word_index(x, self.d)]

    def value(self, past: Point, future: Point):
        return self.value_at(past.first(self.past_depth), future.first(self.future_depth))


def mp_birkhoff(table: MPTable, point: Point, n: int):
    total = mp.mpc(0)
    for j in range(n):
        total += table.evaluate(point.shift(j))
    return total


def mp_sinai(A: MPTable, reference_symbol: int) -> tuple[MPTable, MPKernel]:
    """Dual potential and kernel rebuilt in working precision (same sums)."""
    d, k = A.d, A.depth
    kw = max(k - 1, 0)

    rows = []
    for y in all_words(d, kw):
        row = []
        for x in all_words(d, kw):
            acc = mp.mpc(0)
            for j in range(1, k):
                head = y[:j][::-1]
                acc += A.evaluate(Point(head + x, reference_symbol, FUTURE))
                acc -= A.evaluate(Point(head, reference_symbol, FUTURE))
            row.append(acc)
        rows.append(row)
    kernel = MPKernel(kw, kw, d, rows)

    flat = []
    for y in all_words(d, k):
        if k == 0:
            flat.append(A.flat[0])
            break
        val = A.evaluate(Point((y[0],), reference_symbol, FUTURE))
        for j in range(2, k + 1):
            val += A.evaluate(Point(y[:j][::-1], reference_symbol, FUTURE))
            val -= A.evaluate(Point(y[1:j][::-1], reference_symbol, FUTURE))
        flat.append(val)
    return MPTable(k, d, flat), kernel


def mp_ruelle(weights, potential: MPTable, phi: MPTable) -> MPTable:
    """Transfer application in working precision (fixed summation order)."""
    d = potential.d
    work = max(potential.depth, phi.depth, 1)
    flat = []
    for w in all_words(d, work - 1):
        acc = mp.mpc(0)
        for a in range(d):
            aw = (a,) + w
            acc += weights[a] * mp.exp(potential.value_at(aw[: potential.depth])) \
                * phi.value_at(aw[: phi.depth])
        flat.append(acc)
    return MPTable(work - 1, d, flat)


def mp_koopman(potential: MPTable, phi: MPTable) -> MPTable:
    """Weighted composition exp(B) * (phi o shift) in working precision."""
    d = potential.d
    depth = max(potential.depth, phi.depth + 1)
    flat = []
    for w in all_words(d, depth):
        flat.append(mp.exp(potential.value_at(w[: potential.depth]))
                    * phi.value_at(w[1:][: phi.depth]))
    return MPTable(depth, d, flat)


def mp_transfer_matrix(weights, potential: MPTable, depth: int) -> mp.matrix:
    d = potential.d
    size = d**depth
    mat = mp.matrix(size, size)
    for i, w in enumerate(all_words(d, depth)):
        for a in range(d):
            j = a * d ** (depth - 1) + i // d
            aw = (a,) + w
            mat[i, j] += weights[a] * mp.exp(potential.value_at(aw[: potential.depth]))
    return mat


def _mat_apply(mat: mp.matrix, vec: list) -> list:
    n = mat.rows
    out = []
    for i in range(n):
        acc = mp.mpc(0)
        for j in range(n):
            m = mat[i, j]
            if m:
                acc += m * vec[j]
        out.append(acc)
    return out


def _residual(mat: mp.matrix, lam, vec: list) -> mp.mpf:
    mv = _mat_apply(mat, vec)
    return max(abs(mv[i] - lam * vec[i]) for i in range(len(vec)))


def refine_eigenpair(mat: mp.matrix, lam0, vec0: list, lead: int,
                     target: mp.mpf, max_steps: int = 80):
    """Rayleigh-quotient iteration for a simple eigenpair, mp precision.

    ``lead`` is the normalization index (that entry is pinned to 1), kept
    identical to the float64 normalization so scales match across engines.
    """
    n = mat.rows
    lam = to_mpc(lam0)
    vec = [to_mpc(v) for v in vec0]
    vec = [v / vec[lead] for v in vec]
    best = _residual(mat, lam, vec)
    for _ in range(max_steps):
        if best <= target:
            return lam, vec
        shifted = mp.matrix(mat)
        for i in range(n):
            shifted[i, i] -= lam
        rhs = mp.matrix(vec)
        try:
            sol = mp.lu_solve(shifted, rhs)
        except (ZeroDivisionError, ValueError):
            lam *= mp.mpc(1) + mp.mpf(10) ** (-mp.mp.dps // 2)
            continue
        new = [sol[i] for i in range(n)]
        pivot = new[lead]
        if pivot == 0:
            raise ShiftDualError("eigenpair refinement lost the normalization entry")
        new = [v / pivot for v in new]
        mv = _mat_apply(mat, new)
        num = mp.mpc(0)
        den = mp.mpc(0)
        for i in range(n):
            num += mp.conj(new[i]) * mv[i]
            den += mp.conj(new[i]) * new[i]
        lam_new = num / den
        res = max(abs(mv[i] - lam_new * new[i]) for i in range(n))
        if res < best:
            lam, vec, best = lam_new, new, res
        else:
            lam = lam_new
    if best <= target:
        return lam, vec
    raise ShiftDualError(
        f"eigenpair refinement stalled at residual {mp.nstr(best, 5)} "
        f"(target {mp.nstr(target, 5)})")


class PairingEngine:
    """Level-n functional evaluation for one distribution, one precision.

    Rebuilds the dual pair in mp from the exactly-converted potential,
    refines the eigenpair at the float64 normalization index, and exposes
    the level sums through an exact head/boundary split with cached
    normalized transfer iterates.  A brute-force enumeration of the
    defining sum is kept alongside as the independent route.
    """

    def __init__(self, measure: AprioriMeasure, triple: DualTriple,
                 lam_seed: complex, psi: CylinderFunction, base: Point, dps: int):
        if base.side != FUTURE:
            raise ValueError("base must be a future point")
        if psi.side != FUTURE:
            raise ValueError("the eigenfunction lives on the future side")
        self.dps = dps
        self.d = measure.d
        self.k = triple.depth
        self.ref = triple.reference_symbol
        self.base = base
        self.psi_depth = psi.depth
        with mp.workdps(dps):
            self.weights = [mp.mpf(w) for w in measure.weights]
            self.A = MPTable.from_cylinder(triple.potential)
            self.Astar, self.W = mp_sinai(self.A, self.ref)
            lead = int(np.argmax(np.abs(psi.flat())))
            matrix = mp_transfer_matrix(self.weights, self.A, psi.depth)
            norm = max(sum(abs(matrix[i, j]) for j in range(matrix.cols))
                       for i in range(matrix.rows))
            target = norm * mp.mpf(10) ** (-(dps - 8))
            self.lam, psi_flat = refine_eigenpair(
                matrix, lam_seed, list(psi.flat()), lead, target)
            # refinement pins entry ``lead`` to 1; restore the caller's scale
            # exactly (the level functionals are linear in the eigenfunction)
            scale = to_mpc(psi.flat()[lead])
            self.psi = MPTable(psi.depth, self.d, [v * scale for v in psi_flat])
        self._iterates: list[MPTable] = [self.psi]
        self._boundaries: dict = {}

    # -- cached pieces -------------------------------------------------

    def _psi_iterate(self, j: int) -> MPTable:
        """(lam^{-1} L)^j applied to the eigenfunction table."""
        with mp.workdps(self.dps):
            while len(self._iterates) <= j:
                nxt = mp_ruelle(self.weights, self.A, self._iterates[-1])
                nxt = MPTable(nxt.depth, nxt.d, [v / self.lam for v in nxt.flat])
                self._iterates.append(nxt)
        return self._iterates[j]

    def _base_key(self, base: Point):
        return (base.prefix, base.tail)

    def _boundary(self, base: Point, q: int) -> list:
        key = (self._base_key(base), q)
        got = self._boundaries.get(key)
        if got is None:
            with mp.workdps(self.dps):
                rows = []
                for u in all_words(self.d, q):
                    point = base.prepend_block(u)
                    wprod = mp.mpf(1)
                    for s in u:
                        wprod *= self.weights[s]
                    rows.append((wprod * mp.exp(mp_birkhoff(self.A, point, q)), point))
            got = rows
            self._boundaries[key] = got
        return got

    def _phi_mp(self, phi) -> MPTable:
        if isinstance(phi, MPTable):
            return phi
        if isinstance(phi, CylinderFunction):
            if phi.side != PAST:
                raise ValueError("test functions live on the past side")
            return MPTable.from_cylinder(phi)
        raise TypeError(f"unsupported test function type {type(phi)!r}")

    # -- level sums ------------------------------------------------------

    def level_value(self, n: int, phi, base: Point | None = None):
        """<level-n functional, phi> by the head/boundary split (mp exact)."""
        if n < 0:
            raise ValueError("level must be >= 0")
        phi = self._phi_mp(phi)
        base = self.base if base is None else base
        q = max(self.k - 1, phi.depth, 0)
        if n < q:
            return self.brute_value(n, phi, base)
        with mp.workdps(self.dps):
            boundary = self._boundary(base, q)
            inner = self._psi_iterate(n - q)
            lam_q = self.lam**q
            acc = mp.mpc(0)
            for idx, (weight, point) in enumerate(boundary):
                u = point.first(q)
                y = u[::-1]  # past coordinates after consuming u
                g = mp.exp(-self.W.value_at(y, base.first(self.W.future_depth))) \
                    * phi.value_at(y[: phi.depth])
                acc += weight * g * inner.evaluate(point)
            return acc / lam_q

    def brute_value(self, n: int, phi, base: Point | None = None):
        """Defining d^n-term sum, enumerated lexicographically (mp exact)."""
        phi = self._phi_mp(phi)
        base = self.base if base is None else base
        with mp.workdps(self.dps):
            acc = mp.mpc(0)
            for w in all_words(self.d, n):
                point = base.prepend_block(w)
                ypoint = Point(w[::-1], self.ref, PAST)
                wprod = mp.mpf(1)
                for s in w:
                    wprod *= self.weights[s]
                term = wprod * mp.exp(mp_birkhoff(self.A, point, n))
                term *= self.psi.evaluate(point)
                term *= mp.exp(-self.W.value(ypoint, base))
                term *= phi.evaluate(ypoint)
                acc += term
            return acc / self.lam**n

    # -- derived mp objects ----------------------------------------------

    def preimage_table(self, base: Point | None = None) -> MPTable:
        """exp(W(. | base)) as a past-side mp table of kernel depth."""
        base = self.base if base is None else base
        with mp.workdps(self.dps):
            p = self.W.past_depth
            xw = base.first(self.W.future_depth)
            flat = [mp.exp(self.W.value_at(y, xw)) for y in all_words(self.d, p)]
            return MPTable(p, self.d, flat)

    def weighted_slice(self, phi, symbol: int) -> MPTable:
        """exp(A*(. symbol)) * phi(. symbol): the one-symbol recursion weight."""
        phi = self._phi_mp(phi)
        with mp.workdps(self.dps):
            depth = max(self.k - 1, phi.depth - 1, 0)
            flat = []
            for y in all_words(self.d, depth):
                ya = (symbol,) + y
                flat.append(mp.exp(self.Astar.value_at(ya[: self.k]))
                            * phi.value_at(ya[: phi.depth]))
            return MPTable(depth, self.d, flat)

    def star_transfer(self, phi) -> MPTable:
        """Dual-side transfer image of a test function, in mp."""
        phi = self._phi_mp(phi)
        with mp.workdps(self.dps):
            return mp_ruelle(self.weights, self.Astar, phi)

    def star_koopman(self, cstar: CylinderFunction, phi) -> MPTable:
        """Dual-side weighted composition exp(C*) * (phi o shift), in mp."""
        phi = self._phi_mp(phi)
        with mp.workdps(self.dps):
            return mp_koopman(MPTable.from_cylinder(cstar), phi)

    def scale_table(self, table: CylinderFunction, phi) -> MPTable:
        """Pointwise product table * phi in mp (for lifted pairings)."""
        phi = self._phi_mp(phi)
        g = MPTable.from_cylinder(table)
        with mp.workdps(self.dps):
            depth = max(g.depth, phi.depth)
            flat = []
            for y in all_words(self.d, depth):
                flat.append(g.value_at(y[: g.depth]) * phi.value_at(y[: phi.depth]))
            return MPTable(depth, self.d, flat)

    def psi_value(self, point: Point):
        with mp.workdps(self.dps):
            return self.psi.evaluate(point)

    def lam_complex(self) -> complex:
        return complex(self.lam)
