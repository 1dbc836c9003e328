"""Weighted transfer and composition operators on cylinder tables.

The weighted transfer operator averages over one-symbol extensions,

    (L_A f)(x) = sum_a nu_a * exp(A(a.x)) * f(a.x),

and acts exactly on finite tables: if A reads k coordinates and f reads m,
the image reads max(k-1, m-1, 0).  The composition (Koopman-type) operator
U_B f = exp(B) * (f o shift) raises depth instead.  Both act on either
side; the dual potential drives the past-side transfer operator.

Finite-depth restrictions of L_A are the sparse row-shift matrices built by
``transfer_matrix``; their spectra, leading positive eigenpairs, and the
derived growth-rate sequences live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .involution import DualTriple
from .symbolic import (
    FUTURE,
    PAST,
    AprioriMeasure,
    CylinderFunction,
    ShiftDualError,
    all_words,
)

__all__ = [
    "StabilizationError",
    "TransferMatrix",
    "Spectrum",
    "RPFData",
    "GrowthData",
    "ruelle_apply",
    "koopman_apply",
    "transfer_matrix",
    "spectrum_of",
    "rpf_leading",
    "growth_sequence",
    "growth_symmetry",
]

SPECTRUM_BUDGET = 4096


class StabilizationError(ShiftDualError):
    """Growth-rate sequences did not stabilize within the computed range."""


def ruelle_apply(measure: AprioriMeasure, potential: CylinderFunction,
                 phi: CylinderFunction) -> CylinderFunction:
    """Apply the weighted transfer operator to a cylinder table, exactly."""
    if potential.side != phi.side:
        raise ValueError("potential and argument must live on the same side")
    if potential.d != measure.d or phi.d != measure.d:
        raise ValueError("alphabet sizes disagree")
    work = max(potential.depth, phi.depth, 1)
    a_emb = potential.embed(work).table
    p_emb = phi.embed(work).table
    out = None
    # explicit symbol loop: fixed summation order, no BLAS reduction involved
    for a, nu_a in enumerate(measure.weights):
        term = nu_a * np.exp(a_emb[a]) * p_emb[a]
        out = term if out is None else out + term
    return CylinderFunction(phi.side, work - 1, out, measure.d)


def koopman_apply(potential: CylinderFunction, phi: CylinderFunction) -> CylinderFunction:
    """Apply the weighted composition operator exp(B) * (phi o shift)."""
    if potential.side != phi.side:
        raise ValueError("potential and argument must live on the same side")
    return potential.exp() * phi.compose_shift()


@dataclass(frozen=True)
class TransferMatrix:
    """Matrix of the transfer operator on depth-``depth`` tables.

    Row index w, column index u: the entry is nonzero only when u extends
    w backwards by one symbol, u = (a, w_1..w_{depth-1}), and then equals
    nu_a * exp(A(a, w_1..w_{k-1})).
    """

    side: str
    depth: int
    d: int
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.d**self.depth

    def norm_inf(self) -> float:
        return float(np.max(np.sum(np.abs(self.matrix), axis=1)))


def transfer_matrix(measure: AprioriMeasure, potential: CylinderFunction,
                    depth: int) -> TransferMatrix:
    """Exact matrix of L_A acting on depth-``depth`` tables.

    Requires depth >= max(k-1, 1) so that depth-``depth`` tables are stable
    under the operator.
    """
    d, k = measure.d, potential.depth
    if potential.d != d:
        raise ValueError("alphabet sizes disagree")
    if depth < max(k - 1, 1):
        raise ValueError(f"depth must be >= {max(k - 1, 1)} for a depth-{k} potential")
    size = d**depth
    dtype = np.complex128 if np.iscomplexobj(potential.table) else np.float64
    mat = np.zeros((size, size), dtype=dtype)
    for i, w in enumerate(all_words(d, depth)):
        for a, nu_a in enumerate(measure.weights):
            j = a * d ** (depth - 1) + i // d
            mat[i, j] = nu_a * np.exp(potential.value_at((a,) + w[: k - 1] if k else (a,)))
    return TransferMatrix(side=potential.side, depth=depth, d=d, matrix=mat)


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of a transfer matrix, deterministically ordered.

    Eigenvalues are sorted by decreasing modulus, ties by increasing
    principal argument, then by original index.  Each eigenvector column is
    scaled so its entry of largest modulus (first such index) is exactly 1.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.eigenvalues.shape[0]

    def norm_inf(self) -> float:
        return float(np.max(np.sum(np.abs(self.matrix), axis=1)))

    def max_residual(self) -> float:
        """Largest infinity-norm eigen residual across the decomposition."""
        r = self.matrix @ self.eigenvectors - self.eigenvectors * self.eigenvalues
        return float(np.max(np.abs(r)))

    def geometric_multiplicity(self, value: complex, svd_cut: float = 1e-8) -> int:
        """dim ker(M - value*I), with singular values under the cut zeroed."""
        shifted = self.matrix - value * np.eye(self.size, dtype=self.matrix.dtype)
        sv = np.linalg.svd(shifted, compute_uv=False)
        cut = svd_cut * self.norm_inf()
        return int(np.sum(sv <= cut))

    def eigenpair(self, value: complex, match_tol: float = 1e-6) -> tuple[complex, np.ndarray]:
        """Closest computed eigenpair to ``value`` within ``match_tol``."""
        gaps = np.abs(self.eigenvalues - value)
        i = int(np.argmin(gaps))
        if gaps[i] > match_tol:
            raise ValueError(f"no eigenvalue within {match_tol} of {value}")
        return complex(self.eigenvalues[i]), self.eigenvectors[:, i].copy()


def spectrum_of(tm: TransferMatrix, budget: int = SPECTRUM_BUDGET) -> Spectrum:
    """Dense eigendecomposition of a transfer matrix (size capped)."""
    if tm.size > budget:
        raise ShiftDualError(f"matrix size {tm.size} exceeds the budget {budget}")
    vals, vecs = np.linalg.eig(tm.matrix)
    mods = np.abs(vals)
    args = np.angle(vals)
    order = np.lexsort((np.arange(vals.shape[0]), args, -mods))
    vals = vals[order]
    vecs = vecs[:, order]
    for i in range(vals.shape[0]):
        col = vecs[:, i]
        lead = int(np.argmax(np.abs(col)))
        vecs[:, i] = col / col[lead]
    return Spectrum(eigenvalues=vals, eigenvectors=vecs, matrix=tm.matrix.copy())


@dataclass(frozen=True)
class RPFData:
    """Leading positive eigenpair of a real-potential transfer matrix."""

    value: float
    eigenfunction: CylinderFunction
    residual: float
    iterations: int

    @property
    def ratio(self) -> float:
        """max/min of the strictly positive eigenfunction."""
        t = self.eigenfunction.table
        return float(np.max(t) / np.min(t))


def rpf_leading(measure: AprioriMeasure, potential: CylinderFunction,
                depth: int | None = None, tol: float = 1e-12,
                max_iter: int = 200_000) -> RPFData:
    """Power iteration for the leading eigenpair of a real potential.

    Starts from the all-ones table and iterates until the residual
    ||L h - lam h||_inf <= tol * lam.  The iterates stay strictly positive
    (the matrix is nonnegative with a positive diagonal block structure),
    and the returned eigenfunction has max entry 1.
    """
    if not potential.is_real():
        raise ValueError("leading-eigenpair iteration requires a real potential")
    if depth is None:
        depth = max(potential.depth - 1, 1)
    tm = transfer_matrix(measure, potential, depth)
    m = tm.matrix
    v = np.ones(tm.size, dtype=float)
    lam = 1.0
    resid = math.inf
    for it in range(1, max_iter + 1):
        w = m @ v
        lam = float(w @ v / (v @ v))
        resid = float(np.max(np.abs(w - lam * v)))
        peak = float(np.max(w))
        if peak <= 0.0:
            raise ShiftDualError("power iteration left the positive cone")
        v = w / peak
        if resid <= tol * lam:
            break
    else:
        raise ShiftDualError(
            f"power iteration did not reach residual {tol} * lam in {max_iter} steps")
    h = v / np.max(v)
    if np.min(h) <= 0.0:
        raise ShiftDualError("leading eigenfunction is not strictly positive")
    lam = float((m @ h) @ h / (h @ h))
    ef = CylinderFunction(potential.side, depth, h.reshape((measure.d,) * depth), measure.d)
    resid = float(np.max(np.abs(m @ h - lam * h)))
    return RPFData(value=lam, eigenfunction=ef, residual=resid, iterations=it)


@dataclass(frozen=True)
class GrowthData:
    """Root growth rates of partition sums on both sides of a dual pair.

    ``values[n-1]`` is the n-th root of the largest entry of the n-fold
    transfer image of the all-ones table for the real part of the
    potential; ``star_values`` is the dual-side analogue.  The
    ``limit_estimates`` are the successive max-entry ratios, which converge
    geometrically to the leading eigenvalue.
    """

    values: np.ndarray
    star_values: np.ndarray
    limit_estimates: np.ndarray
    star_limit_estimates: np.ndarray
    rpf: RPFData
    rpf_star: RPFData

    @property
    def n_max(self) -> int:
        return self.values.shape[0]

    def certified_tail_index(self, eps: float, side: str = FUTURE) -> int:
        """Smallest J with value_j <= leading + eps guaranteed for all j > J.

        Entrywise, the n-fold image of ones is at most ratio * lam^n times
        the eigenfunction max, so value_j <= lam * ratio^(1/j); the bound
        drops below lam + eps once j > ln(ratio)/ln(1 + eps/lam).  A small
        multiplicative inflation absorbs float error in the eigenpair.
        """
        if eps <= 0.0:
            raise ValueError("eps must be positive")
        data = self.rpf if side == FUTURE else self.rpf_star
        lam = data.value * (1.0 + 1e-9)
        ratio = data.ratio * (1.0 + 1e-9)
        if ratio <= 1.0 + 1e-15:
            return 0
        return int(math.ceil(math.log(ratio) / math.log1p(eps / lam)))

    def stabilization_index(self, eps: float) -> int:
        """Smallest n with both root sequences <= leading + eps from n on.

        The computed range must cover the certified tail index on both
        sides; otherwise the sequences cannot be pronounced stable and a
        loud error is raised.
        """
        lam = self.rpf.value
        j_cert = max(self.certified_tail_index(eps, FUTURE),
                     self.certified_tail_index(eps, PAST))
        if j_cert > self.n_max:
            raise StabilizationError(
                f"need the root sequences up to n = {j_cert} to certify the tail "
                f"at eps = {eps}, but only {self.n_max} values were computed")
        level = lam + eps
        last_bad = 0
        for j in range(1, self.n_max + 1):
            if self.values[j - 1] > level or self.star_values[j - 1] > level:
                last_bad = j
        if last_bad >= self.n_max:
            raise StabilizationError(
                f"root sequences still exceed leading + eps at n = {self.n_max}")
        return 0 if last_bad == 0 else last_bad + 1


def _root_sequence(measure: AprioriMeasure, potential: CylinderFunction,
                   n_max: int) -> tuple[np.ndarray, np.ndarray, RPFData]:
    rp = rpf_leading(measure, potential)
    depth = max(potential.depth - 1, 1)
    ones = CylinderFunction(potential.side, depth,
                            np.ones((measure.d,) * depth), measure.d)
    roots = np.empty(n_max)
    ests = np.empty(n_max)
    v = ones
    log_scale = 0.0
    for n in range(1, n_max + 1):
        v = ruelle_apply(measure, potential, v)
        peak = float(np.max(v.table.real))
        log_scale += math.log(peak)
        v = (1.0 / peak) * v
        roots[n - 1] = math.exp(log_scale / n)
        ests[n - 1] = peak
    return roots, ests, rp


def growth_sequence(measure: AprioriMeasure, triple: DualTriple,
                    n_max: int) -> GrowthData:
    """Root growth rates for the real parts of a potential and its dual."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    roots, ests, rp = _root_sequence(measure, triple.potential.real_part(), n_max)
    sroots, sests, srp = _root_sequence(measure, triple.dual.real_part(), n_max)
    return GrowthData(values=roots, star_values=sroots, limit_estimates=ests,
                      star_limit_estimates=sests, rpf=rp, rpf_star=srp)


def growth_symmetry(growth: GrowthData, triple: DualTriple) -> list[tuple[int, float, float]]:
    """Per-n gap between the two log root rates and its kernel-osc bound.

    Transporting an n-block between the two sides changes the Birkhoff sum
    by at most twice the sup of the real kernel, so
    |log value_n - log star_value_n| <= 2 ||Re W||_inf / n.
    """
    bound_scale = 2.0 * triple.kernel.real_part().sup_norm()
    out = []
    for n in range(1, growth.n_max + 1):
        gap = abs(math.log(growth.values[n - 1]) - math.log(growth.star_values[n - 1]))
        out.append((n, gap, bound_scale / n))
    return out
