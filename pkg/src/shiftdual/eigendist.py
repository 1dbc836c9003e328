"""Level-n eigendistribution approximants and their certified limits.

For an eigenvalue lambda of the weighted transfer operator with
eigenfunction psi, the level-n functional against a past-side test
function phi is the exact finite sum

    <D_{n,x'}, phi> = lam^{-n} * sum over n-blocks w of
        prod(nu_w) * psi(w.x') * e^{A^n(w.x')} * e^{-W(y_w | x')} * phi(y_w)

where y_w is the past point spelled by w (last symbol most recent, then
the constant reference tail).  When |lambda| > (rho + eps) * theta the
sequence converges geometrically with certified constants, uniformly in
the base point x'; the limit is an eigendistribution of the dual-side
transfer operator and its kernel transform recovers psi.

Everything here reports both the computed quantity and the certified
bound it is claimed to satisfy, so callers can assert rather than trust.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from .involution import DualTriple
from .mpkernel import MPTable, PairingEngine, choose_dps, mp_transfer_matrix, refine_eigenpair, to_mpc
from .operators import (
    GrowthData,
    growth_sequence,
    rpf_leading,
    ruelle_apply,
    spectrum_of,
    transfer_matrix,
)
from .symbolic import (
    FUTURE,
    PAST,
    AprioriMeasure,
    CylinderFunction,
    Point,
    ShiftDualError,
    constant_point,
    holder_seminorm,
)

__all__ = [
    "AdmissibilityError",
    "SimplicityError",
    "DistributionApproximant",
    "PairingResult",
    "eigendistribution",
    "multiplicity_pair",
]


class AdmissibilityError(ShiftDualError):
    """The eigenvalue lies outside the regime |lambda| > (rho + eps) * theta."""


class SimplicityError(ShiftDualError):
    """An operation that needs a simple eigenvalue met a degenerate one."""


@dataclass(frozen=True)
class PairingResult:
    """A certified limit value: the level used, the value, and the bound."""

    value: complex
    level: int
    bound: float
    constant: float
    rate: float
    trace: list = field(default_factory=list)


def _sup(cf: CylinderFunction) -> float:
    return cf.sup_norm()


class DistributionApproximant:
    """One eigenpair's family of level functionals, with certified bounds.

    Use :func:`eigendistribution` to build one; the constructor assumes the
    admissibility and stabilization work is already done.
    """

    def __init__(self, measure: AprioriMeasure, triple: DualTriple, theta: float,
                 lam: complex, psi: CylinderFunction, base: Point, eps: float,
                 growth: GrowthData, n0: int, include_n0: bool = True):
        self.measure = measure
        self.triple = triple
        self.theta = theta
        self.lam = complex(lam)
        self.psi = psi
        self.base = base
        self.eps = eps
        self.growth = growth
        self.n0 = n0
        self.include_n0 = include_n0
        self.rho = growth.rpf.value
        self._engines: dict[int, PairingEngine] = {}

    # -- certified constants --------------------------------------------

    @property
    def rho_plus(self) -> float:
        return self.rho + self.eps

    @property
    def rate(self) -> float:
        """Per-level contraction (rho + eps) * theta / |lambda|."""
        return self.rho_plus * self.theta / abs(self.lam)

    def _column_factor(self, base: Point | None) -> CylinderFunction:
        """exp(-W(. | base)) as a past-side table."""
        base = self.base if base is None else base
        return (-self.triple.kernel.column(base)).exp()

    def cauchy_constant(self, phi: CylinderFunction, base: Point | None = None) -> float:
        """Constant in front of rate^n bounding |<D_{n+1}> - <D_n>|.

        The varied factor in the level sums is e^{-W(. | base)} * phi, so
        its exact Holder seminorm drives the increment bound.
        """
        g = self._column_factor(base) * phi
        return (holder_seminorm(g, self.theta, self.include_n0)
                * _sup(self.psi) * self.rho_plus / abs(self.lam))

    def tail_constant(self, phi: CylinderFunction, base: Point | None = None) -> float:
        """Constant K with |<D, phi> - <D_n, phi>| <= K * rate^n for n >= n0."""
        return self.cauchy_constant(phi, base) * abs(self.lam) \
            / (abs(self.lam) - self.rho_plus * self.theta)

    def gap_constant(self, phi: CylinderFunction) -> float:
        """Constant bounding the gap between two base points at level n.

        Rewriting the level sums through the transport identity moves all
        base dependence into x -> psi(x) * e^{-W(ref_past | x)}, whose
        exact seminorm appears here; the dual-side partition mass supplies
        the (rho+eps)^n factor, hence the same overall rate.
        """
        row = self.triple.kernel.row(constant_point(self.triple.reference_symbol, PAST))
        f = self.psi * (-row).exp()
        return holder_seminorm(f, self.theta, self.include_n0) * _sup(phi)

    def uniform_bound(self, n: int, phi: CylinderFunction) -> float:
        """Size bound |<D_n, phi>| <= ||psi|| ||e^{-W}|| ((rho+eps)/|lam|)^n ||phi||.

        Valid for n >= n0; it can grow with n when |lambda| < rho.
        """
        w_sup = math.exp(float(np.max(-self.triple.kernel.real_part().table)))
        return (_sup(self.psi) * w_sup * (self.rho_plus / abs(self.lam)) ** n
                * _sup(phi))

    # -- engines ----------------------------------------------------------

    def _engine(self, n_upper: int, value_tol: float = 1e-20) -> PairingEngine:
        amp = max(self.rho_plus / abs(self.lam), 1.0)
        dps = choose_dps(value_tol, n_upper, amp)
        dps = ((dps + 39) // 40) * 40
        usable = [p for p in self._engines if p >= dps]
        if usable:
            return self._engines[min(usable)]
        engine = PairingEngine(self.measure, self.triple, self.lam, self.psi,
                               self.base, dps)
        self._engines[dps] = engine
        return engine

    # -- level evaluation --------------------------------------------------

    def pairing(self, n: int, phi: CylinderFunction, base: Point | None = None,
                brute: bool = False) -> complex:
        """<D_{n, base}, phi>, exact to working precision."""
        engine = self._engine(n_upper=n + 1)
        if brute:
            return complex(engine.brute_value(n, phi, base))
        return complex(engine.level_value(n, phi, base))

    def limit_pairing(self, phi: CylinderFunction, tol: float,
                      base: Point | None = None,
                      collect_trace: bool = False) -> PairingResult:
        """Limit value with certified absolute error at most ``tol``.

        Stops at the smallest level n >= n0 where the tail bound
        K(phi) * rate^n falls below ``tol``; the returned bound is that
        certificate (numerical error is kept far below it by the working
        precision choice).
        """
        if tol <= 0.0:
            raise ValueError("tol must be positive")
        K = self.tail_constant(phi, base)
        if K > 0.0 and self.rate > 0.0:
            extra = math.log(K / tol) / math.log(1.0 / self.rate) if K > tol else 0.0
            level = max(self.n0, math.ceil(extra))
        else:
            level = self.n0
        engine = self._engine(n_upper=level + 2, value_tol=min(tol * 1e-4, 1e-20))
        trace: list[tuple[int, complex, float]] = []
        if collect_trace:
            stride = max(1, (level - self.n0) // 200)
            for n in range(self.n0, level, stride):
                trace.append((n, complex(engine.level_value(n, phi, base)),
                              K * self.rate**n))
        value = engine.level_value(level, phi, base)
        bound = K * self.rate**level
        if collect_trace:
            trace.append((level, complex(value), bound))
        return PairingResult(value=complex(value), level=level, bound=bound,
                             constant=K, rate=self.rate, trace=trace)

    # -- identity checks ----------------------------------------------------

    def preimage_residual(self, n: int | None = None, base: Point | None = None) -> float:
        """|<D_n, e^{W(.|base)}> - psi(base)|, an exact identity at every n."""
        n = self.n0 if n is None else n
        engine = self._engine(n_upper=n + 1)
        base_pt = self.base if base is None else base
        table = engine.preimage_table(base_pt)
        with mp.workdps(engine.dps):
            got = engine.level_value(n, table, base_pt)
            want = engine.psi_value(base_pt)
            return float(abs(got - want))

    def kernel_transform(self, x: Point, tol: float) -> PairingResult:
        """The kernel transform of the limit functional, evaluated at x.

        Pairs the limit with e^{W(. | x)} while keeping the construction
        base fixed, so for x != base this is a genuine limit (only at
        x == base does it collapse to the exact identity).
        """
        probe = self._engine(n_upper=self.n0 + 1)
        phi_cf = self.triple.kernel.column(x).exp()
        K = self.tail_constant(phi_cf)
        if K > 0.0 and K > tol:
            level = max(self.n0, math.ceil(math.log(K / tol) / math.log(1.0 / self.rate)))
        else:
            level = self.n0
        engine = self._engine(n_upper=level + 2, value_tol=min(tol * 1e-4, 1e-20))
        table = engine.preimage_table(x)
        value = engine.level_value(level, table, self.base)
        return PairingResult(value=complex(value), level=level,
                             bound=K * self.rate**level, constant=K, rate=self.rate)

    def cauchy_increment(self, n: int, phi: CylinderFunction,
                         base: Point | None = None) -> tuple[float, float]:
        """(observed |<D_{n+1}> - <D_n>|, certified bound C' * rate^n)."""
        engine = self._engine(n_upper=n + 2)
        with mp.workdps(engine.dps):
            a = engine.level_value(n + 1, phi, base)
            b = engine.level_value(n, phi, base)
            observed = float(abs(a - b))
        return observed, self.cauchy_constant(phi, base) * self.rate**n

    def base_gap(self, n: int, phi: CylinderFunction, first: Point,
                 second: Point) -> tuple[float, float]:
        """(observed level-n gap between two bases, certified bound)."""
        engine = self._engine(n_upper=n + 1)
        with mp.workdps(engine.dps):
            a = engine.level_value(n, phi, first)
            b = engine.level_value(n, phi, second)
            observed = float(abs(a - b))
        return observed, self.gap_constant(phi) * self.rate**n

    def recurrence_residual(self, n: int, phi: CylinderFunction,
                            base: Point | None = None) -> float:
        """Residual of the one-step relation tying level n+1 to level n.

        <D_{n+1, x'}, phi> = lam^{-1} * sum_a nu_a <D_{n, a.x'}, phi_a>
        with phi_a(y) = e^{A*(y a)} phi(y a); exact up to working precision.
        """
        base_pt = self.base if base is None else base
        engine = self._engine(n_upper=n + 2)
        with mp.workdps(engine.dps):
            lhs = engine.level_value(n + 1, phi, base_pt)
            acc = mp.mpc(0)
            for a in range(self.measure.d):
                slice_a = engine.weighted_slice(phi, a)
                acc += engine.weights[a] * engine.level_value(n, slice_a, base_pt.push(a))
            rhs = acc / engine.lam
            return float(abs(lhs - rhs))

    def eigen_relation_residual(self, n: int, phi: CylinderFunction,
                                base: Point | None = None) -> float:
        """|<D_n, L_dual phi> - lam <D_n, phi>| at level n."""
        engine = self._engine(n_upper=n + 1)
        with mp.workdps(engine.dps):
            image = engine.star_transfer(phi)
            lhs = engine.level_value(n, image, base)
            rhs = engine.lam * engine.level_value(n, phi, base)
            return float(abs(lhs - rhs))

    def eigen_relation_level(self, phi: CylinderFunction, tol: float,
                             base: Point | None = None) -> tuple[int, float]:
        """Smallest certified level n with the eigen-relation residual <= tol.

        Both level functionals are within K * rate^n of the limit, where the
        limit satisfies the relation exactly, so the residual is bounded by
        (|lam| * K(phi) + K(L_dual phi)) * rate^n.
        """
        image = ruelle_apply(self.measure, self.triple.dual, phi)
        K = abs(self.lam) * self.tail_constant(phi, base) + self.tail_constant(image, base)
        if K <= 0.0 or K <= tol:
            return max(self.n0, 0), K * self.rate ** max(self.n0, 0)
        level = max(self.n0, math.ceil(math.log(K / tol) / math.log(1.0 / self.rate)))
        return level, K * self.rate**level

    # -- independent finite-depth route -------------------------------------

    def oracle_pairing(self, phi: CylinderFunction) -> complex:
        """Limit pairing via the dual transfer matrix's left eigenvector.

        At a simple eigenvalue the left eigenvector u of the dual-side
        transfer matrix spans the eigendistributions on depth-m tables, and
        p(x) = sum_v u_v e^{W(v|x)} is exactly a lambda-eigenfunction, so
        matching its scale against psi turns sum_v u_v phi(v) into the
        limit value.  Refuses degenerate eigenvalues.
        """
        m = max(self.triple.depth - 1, 1, phi.depth)
        tm = transfer_matrix(self.measure, self.triple.dual, m)
        spec = spectrum_of(tm)
        mult = spec.geometric_multiplicity(self.lam)
        if mult != 1:
            raise SimplicityError(
                f"eigenvalue {self.lam} has geometric multiplicity {mult} at depth {m}; "
                "the matrix route needs a simple eigenvalue (compare subspace "
                "dimensions with multiplicity_pair instead)")
        tspec = spectrum_of(type(tm)(side=tm.side, depth=tm.depth, d=tm.d,
                                     matrix=tm.matrix.T.copy()))
        lam_t, u = tspec.eigenpair(self.lam, match_tol=1e-6)

        engine = self._engine(n_upper=self.n0 + 1)
        with mp.workdps(engine.dps):
            lead = int(np.argmax(np.abs(u)))
            matrix = mp_transfer_matrix(engine.weights,
                                        MPTable.from_cylinder(self.triple.dual), m)
            mat_t = mp.matrix(matrix.cols, matrix.rows)
            for i in range(matrix.rows):
                for j in range(matrix.cols):
                    mat_t[j, i] = matrix[i, j]
            norm = max(sum(abs(mat_t[i, j]) for j in range(mat_t.cols))
                       for i in range(mat_t.rows))
            target = norm * mp.mpf(10) ** (-(engine.dps - 10))
            lam_mp, u_mp = refine_eigenpair(mat_t, lam_t, list(u), lead, target)

            from .symbolic import all_words  # local: avoid polluting module top

            d = self.measure.d
            xw = self.base.first(engine.W.future_depth)
            p_base = mp.mpc(0)
            size = mp.mpf(0)
            for i, v in enumerate(all_words(d, m)):
                col = mp.exp(engine.W.value_at(v[: engine.W.past_depth], xw))
                p_base += u_mp[i] * col
                size += abs(u_mp[i] * col)
            if abs(p_base) <= 1e-12 * size:
                raise ShiftDualError(
                    "the matrix-route eigenfunction vanishes at the base point; "
                    "choose a different base")
            scale = engine.psi_value(self.base) / p_base
            acc = mp.mpc(0)
            phi_mp = MPTable.from_cylinder(phi)
            for i, v in enumerate(all_words(d, m)):
                acc += u_mp[i] * phi_mp.value_at(v[: phi.depth])
            return complex(scale * acc)


def multiplicity_pair(measure: AprioriMeasure, triple: DualTriple, lam: complex,
                      depth: int) -> tuple[int, int]:
    """Geometric multiplicities of lam on both sides at a common depth.

    Returns (dim of the eigenfunction space of the potential-side matrix,
    dim of the eigendistribution space of the dual-side matrix transposed).
    The duality theorem predicts equality whenever |lam| > rho * theta.
    """
    spec_a = spectrum_of(transfer_matrix(measure, triple.potential, depth))
    tm = transfer_matrix(measure, triple.dual, depth)
    spec_s = spectrum_of(type(tm)(side=tm.side, depth=tm.depth, d=tm.d,
                                  matrix=tm.matrix.T.copy()))
    return spec_a.geometric_multiplicity(lam), spec_s.geometric_multiplicity(lam)


def eigendistribution(measure: AprioriMeasure, triple: DualTriple, theta: float,
                      lam: complex | None = None, eigen_index: int | None = None,
                      psi: CylinderFunction | None = None,
                      base: Point | None = None, eps: float | None = None,
                      match_tol: float = 1e-6, n_budget: int = 50_000,
                      include_n0: bool = True) -> DistributionApproximant:
    """Build the level-functional family for one admissible eigenvalue.

    The eigenvalue may be selected by value (``lam``, matched against the
    computed spectrum within ``match_tol``) or by sorted position
    (``eigen_index``); an explicit eigenfunction table may be supplied and
    is validated.  Admissibility |lambda| > (rho + eps) * theta is enforced
    (default eps is half the available margin (|lambda|/theta - rho)/2),
    and the growth sequences are computed out to the certified tail so the
    stabilization level is honest.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if (lam is None) == (eigen_index is None):
        raise ValueError("select the eigenvalue by value or by index, not both")
    A = triple.potential
    depth = max(A.depth - 1, 1)
    spec = spectrum_of(transfer_matrix(measure, A, depth))
    if eigen_index is not None:
        if not 0 <= eigen_index < spec.size:
            raise ValueError(f"eigen index {eigen_index} out of range")
        lam = complex(spec.eigenvalues[eigen_index])
        vec = spec.eigenvectors[:, eigen_index]
    else:
        lam, vec = spec.eigenpair(complex(lam), match_tol)
    if psi is None:
        psi = CylinderFunction(FUTURE, depth, vec.reshape((measure.d,) * depth),
                               measure.d)
    resid = (ruelle_apply(measure, A, psi) - lam * psi).sup_norm()
    if resid > 1e-10 * (1.0 + abs(lam)) * psi.sup_norm():
        raise ValueError(
            f"supplied eigenfunction has residual {resid:.3e}, too large for "
            f"eigenvalue {lam}")

    rho = rpf_leading(measure, A.real_part()).value
    if eps is None:
        margin = abs(lam) / theta - rho
        if margin <= 0.0:
            raise AdmissibilityError(
                f"|lambda| = {abs(lam):.6g} <= rho * theta = {rho * theta:.6g}; "
                "outside the duality regime")
        eps = margin / 2.0
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if abs(lam) <= (rho + eps) * theta:
        raise AdmissibilityError(
            f"|lambda| = {abs(lam):.6g} <= (rho + eps) * theta = "
            f"{(rho + eps) * theta:.6g}; outside the duality regime")

    rho_star = rpf_leading(measure, triple.dual.real_part())
    rho_fut = rpf_leading(measure, A.real_part())
    lam_hat = rho_fut.value * (1.0 + 1e-9)

    def cert(data) -> int:
        ratio = data.ratio * (1.0 + 1e-9)
        if ratio <= 1.0 + 1e-15:
            return 1
        return math.ceil(math.log(ratio) / math.log1p(eps / lam_hat))

    n_max = max(16, cert(rho_fut), cert(rho_star)) + 1
    if n_max > n_budget:
        raise ShiftDualError(
            f"certifying stabilization needs {n_max} growth values, over the "
            f"budget {n_budget}")
    growth = growth_sequence(measure, triple, n_max)
    n0 = growth.stabilization_index(eps)

    if base is None:
        base = constant_point(triple.reference_symbol, FUTURE)
    if base.side != FUTURE:
        raise ValueError("base must be a future point")

    return DistributionApproximant(measure, triple, theta, lam, psi, base, eps,
                                   growth, n0, include_n0)
