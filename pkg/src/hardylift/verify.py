"""Numerical checks of the continuity estimates for a lifted family.

For a radius ``0 < r < 1`` the two-variable kernel of an inner ``G`` is

    K(z, w) = G(w) G(r z)^* / (1 - r conj(z) w),    |z| = |w| = 1,

and ``F = K_t - K_s`` compares two members of the family.  Essential suprema
are realised as maxima over product grids of the circle.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError
from .hardy import ProjectionPath, projection_distance, projection_from_inner
from .lift import LiftResult, _map
from .series import (DEFAULT_GRID, TOL_INNER, MatrixLaurentSeries, certify_inner, evaluate,
                     op_norms, sample_grid, sup_norm_distance)

__all__ = [
    "KERNEL_GRID",
    "BOUND_SLACK",
    "CHAIN_SLACK",
    "REFINE_TOL",
    "ATOL",
    "kernel_constant",
    "sample_radius",
    "KernelDiff",
    "kernel_diff",
    "SectionCheck",
    "section_supremum_check",
    "BoundCheck",
    "kernel_bound_check",
    "PairRecord",
    "ContinuityReport",
    "main_theorem_check",
    "adjacent_pairs",
]

KERNEL_GRID = 256
BOUND_SLACK = 1.05
CHAIN_SLACK = 1.1
REFINE_TOL = 1e-3
# absolute floor for comparisons against bounds that vanish on identical projections
ATOL = 1e-12


def kernel_constant(n: int, r: float) -> float:
    """``sqrt(n / (1 - r^2))``, the constant in the kernel estimate."""
    if not 0 < r < 1:
        raise ParameterError(f"radius must lie in (0, 1), got {r}")
    return math.sqrt(n / (1 - r * r))


def sample_radius(series: MatrixLaurentSeries, r: float, J: int) -> np.ndarray:
    """Values at ``r e^{2 pi i j / J}`` for an analytic series."""
    scaled = MatrixLaurentSeries(series.coeffs * (r ** np.arange(series.lo, series.hi + 1))[:, None, None],
                                 series.lo)
    return sample_grid(scaled, J)


def _kernel_grid(gw_t, gz_t, gw_s, gz_s, r: float):
    """Operator and Hilbert-Schmidt norms of ``F`` on the product grid; axes are (z, w)."""
    Jz, Jw = gz_t.shape[0], gw_t.shape[0]
    z = np.exp(2j * np.pi * np.arange(Jz) / Jz)
    w = np.exp(2j * np.pi * np.arange(Jw) / Jw)
    denom = np.abs(1 - r * np.conj(z)[:, None] * w[None, :])
    # G_t(w) G_t(rz)^* - G_s(w) G_s(rz)^* as one product of stacked factors
    left = np.concatenate([gw_t, gw_s], axis=2)[None]
    right = np.concatenate([gz_t, -gz_s], axis=2).conj().swapaxes(1, 2)[:, None]
    f = left @ right
    hs = np.sqrt(np.sum(np.abs(f) ** 2, axis=(-2, -1)))
    return op_norms(f) / denom, hs / denom


@dataclass(frozen=True, eq=False)
class KernelDiff:
    """Grid samples of ``F = K_t - K_s``.

    ``g_t`` and ``g_s`` are kept so the grid can be refined.
    """

    r: float
    t_index: int
    s_index: int
    g_t: MatrixLaurentSeries
    g_s: MatrixLaurentSeries
    grid_norms: np.ndarray
    hs_norms: np.ndarray

    @property
    def shape(self) -> tuple:
        return self.grid_norms.shape

    @property
    def l2_section(self) -> float:
        """``sup_z ||F(z, .)||`` in ``L2(w)`` with the Hilbert-Schmidt norm pointwise."""
        if not self.hs_norms.size:
            return 0.0
        return float(np.sqrt(np.mean(self.hs_norms ** 2, axis=1)).max())

    def refined(self, jz: int | None = None, jw: int | None = None) -> "KernelDiff":
        Jz, Jw = self.shape
        return _diff(self.g_t, self.g_s, self.r, jz or Jz, jw or Jw, self.t_index, self.s_index)


def _diff(g_t, g_s, r, Jz, Jw, ti, si) -> KernelDiff:
    if g_t.lo == g_s.lo and np.array_equal(g_t.coeffs, g_s.coeffs):
        # identical members: F vanishes exactly, not up to cancellation error
        zero = np.zeros((Jz, Jw))
        return KernelDiff(r, ti, si, g_t, g_s, zero, zero.copy())
    op, hs = _kernel_grid(sample_grid(g_t, Jw), sample_radius(g_t, r, Jz),
                          sample_grid(g_s, Jw), sample_radius(g_s, r, Jz), r)
    return KernelDiff(r, ti, si, g_t, g_s, op, hs)


def kernel_diff(lift: LiftResult, t_index: int, s_index: int, r: float,
                J: int = KERNEL_GRID, Jz: int | None = None) -> KernelDiff:
    """Sample ``F`` on a ``Jz x J`` grid (``Jz`` defaults to ``J``)."""
    if not 0 < r < 1:
        raise ParameterError(f"radius must lie in (0, 1), got {r}")
    if min(J, Jz or J) < KERNEL_GRID:
        raise ParameterError(f"kernel grid must have at least {KERNEL_GRID} points per axis")
    g = lift.g_tilde
    return _diff(g[t_index], g[s_index], r, Jz or J, J, t_index, s_index)


@dataclass(frozen=True)
class SectionCheck:
    planar_max: float
    section_sup: float
    gap: float
    refined_max: float
    refine_shift: float
    passed: bool


def section_supremum_check(F: KernelDiff, refine: int = 4,
                           tol: float = REFINE_TOL) -> SectionCheck:
    """Planar maximum against the supremum of section maxima, plus z-refinement.

    On one grid the two maxima coincide, so the substance is the refinement:
    sampling ``z`` ``refine`` times more densely must move the planar maximum
    by less than ``tol`` relative.  ``refine=1`` skips it.
    """
    planar = float(F.grid_norms.max()) if F.grid_norms.size else 0.0
    section = float(F.grid_norms.max(axis=1).max()) if F.grid_norms.size else 0.0
    if refine > 1:
        fine = float(F.refined(jz=F.shape[0] * refine).grid_norms.max())
    else:
        fine = planar
    shift = abs(fine - planar) / fine if fine > ATOL else 0.0
    return SectionCheck(planar, section, abs(planar - section), fine, shift,
                        shift < tol and planar == section)


@dataclass(frozen=True)
class BoundCheck:
    sup_f: float
    bound: float
    margin: float
    ratio: float
    passed: bool


def kernel_bound_check(F: KernelDiff, delta_p: float, n: int,
                       slack: float = BOUND_SLACK) -> BoundCheck:
    """Test ``||F^*||_inf <= sqrt(n/(1-r^2)) ||p_t - p_s|| * slack`` on the grid.

    The grid operator norm is adjoint invariant, so ``||F^*||`` and ``||F||``
    share the same samples.
    """
    sup_f = float(F.grid_norms.max()) if F.grid_norms.size else 0.0
    bound = kernel_constant(n, F.r) * delta_p
    ratio = sup_f / bound if bound > 0 else (0.0 if sup_f == 0 else math.inf)
    return BoundCheck(sup_f, bound, bound * slack - sup_f, ratio, sup_f <= bound * slack + ATOL)


@dataclass(frozen=True)
class PairRecord:
    """All quantities of the inequality chain for one pair ``(t, s)`` and radius ``r``."""

    t_index: int
    s_index: int
    t: float
    s: float
    r: float
    delta_p: float
    sup_f: float
    sup_f_star: float
    section_sup: float
    section_gap: float
    refine_shift: float
    bound: float
    kernel_ratio: float
    l2_section: float
    l2_ratio: float
    interior: float
    eta: float
    sup_distance: float
    ceiling: float
    ceiling_measured: float
    kernel_pass: bool
    section_pass: bool
    chain_pass: bool
    chain_measured_pass: bool

    @property
    def passed(self) -> bool:
        return self.kernel_pass and self.section_pass and self.chain_pass

    def first_failure(self) -> str | None:
        if not self.kernel_pass:
            return (f"kernel bound: ||F*|| = {self.sup_f:.4e} > {self.bound:.4e} x slack "
                    f"(t={self.t:.6g}, s={self.s:.6g}, r={self.r})")
        if not self.section_pass:
            return (f"section supremum: refinement shift {self.refine_shift:.2e} "
                    f"(t={self.t:.6g}, s={self.s:.6g}, r={self.r})")
        if not self.chain_pass:
            return (f"theorem chain: sup distance {self.sup_distance:.4e} > ceiling "
                    f"{self.ceiling:.4e} (t={self.t:.6g}, s={self.s:.6g}, r={self.r})")
        return None


_CSV_FIELDS = [f for f in PairRecord.__dataclass_fields__]


@dataclass(eq=False)
class ContinuityReport:
    records: list
    inner_defects: list
    tol_inner: float
    slack_bound: float
    slack_chain: float
    adjacent_modulus: list = field(default_factory=list)
    t_grid: list = field(default_factory=list)

    @property
    def inner_pass(self) -> bool:
        return all(d <= self.tol_inner for d in self.inner_defects)

    @property
    def passed(self) -> bool:
        return self.inner_pass and all(rec.passed for rec in self.records)

    def summary(self) -> dict:
        recs = self.records
        return {
            "pairs": len(recs),
            "inner": self.inner_pass,
            "kernelBound": sum(r.kernel_pass for r in recs),
            "sectionSupremum": sum(r.section_pass for r in recs),
            "theoremChain": sum(r.chain_pass for r in recs),
            "theoremChainMeasured": sum(r.chain_measured_pass for r in recs),
            "maxKernelRatio": max((r.kernel_ratio for r in recs), default=0.0),
            "maxL2SectionRatio": max((r.l2_ratio for r in recs), default=0.0),
            "passed": self.passed,
        }

    def first_failure(self) -> str | None:
        if not self.inner_pass:
            j = int(np.argmax(self.inner_defects))
            return f"inner certificate: defect {self.inner_defects[j]:.3e} at t index {j}"
        for rec in self.records:
            msg = rec.first_failure()
            if msg:
                return msg
        return None

    def to_dict(self) -> dict:
        return {
            "summary": self.summary(),
            "slack": {"bound": self.slack_bound, "chain": self.slack_chain},
            "tolInner": self.tol_inner,
            "innerDefects": [float(d) for d in self.inner_defects],
            "records": [asdict(r) for r in self.records],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_CSV_FIELDS)
        for rec in self.records:
            w.writerow([_cell(getattr(rec, f)) for f in _CSV_FIELDS])
        return buf.getvalue()

    def plot_csv(self) -> tuple:
        """``(t, modulus)`` and ``(delta_p, sup_f_star, bound)`` tables."""
        a = io.StringIO()
        w = csv.writer(a, lineterminator="\n")
        w.writerow(["t", "modulus"])
        for t, mod in zip(self.t_grid[1:], self.adjacent_modulus):
            w.writerow([_cell(t), _cell(mod)])
        b = io.StringIO()
        w = csv.writer(b, lineterminator="\n")
        w.writerow(["r", "delta_p", "sup_f_star", "bound"])
        for rec in self.records:
            w.writerow([_cell(rec.r), _cell(rec.delta_p), _cell(rec.sup_f_star), _cell(rec.bound)])
        return a.getvalue(), b.getvalue()


def _cell(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    return f"{x:.10e}"


def adjacent_pairs(count: int) -> list:
    return [(j + 1, j) for j in range(count - 1)]


def _probe(lift: LiftResult, t_index: int, s_index: int, r: float) -> complex:
    lam = lift.pair_interval(t_index, s_index).base
    return r * (np.exp(1j * lam.theta) if lam.r > 0 else 1.0)


def main_theorem_check(lift: LiftResult, pairs: Iterable[tuple] | None = None,
                       r: float | Sequence[float] = 0.5, path: ProjectionPath | None = None,
                       J: int = KERNEL_GRID, J_theta: int = DEFAULT_GRID, refine: int = 4,
                       slack_bound: float = BOUND_SLACK, slack_chain: float = CHAIN_SLACK,
                       tol_inner: float = TOL_INNER, workers: int | None = None) -> ContinuityReport:
    """Evaluate the full inequality chain for each pair and radius.

    The probe point is ``p = r e^{i arg lam}`` with ``lam`` the base point of
    the interval holding the pair (``p = r`` when ``lam = 0``) and
    ``eta = sigma_m(G~_t(p))``.  The ceiling is

        [(1+r) sqrt(n/(1-r^2)) ||p_t - p_s|| + ||G~_t(p) - G~_s(p)||] / eta * slack.

    ``ceiling_measured`` replaces the kernel estimate by the measured
    ``||F||_inf`` and is valid whatever the kernel estimate does.  When
    ``path`` is omitted, projections are rebuilt from the lifted family.
    """
    radii = [r] if np.isscalar(r) else list(r)
    pairs = adjacent_pairs(len(lift.g_tilde)) if pairs is None else list(pairs)
    n = lift.model.n
    g = lift.g_tilde
    if path is not None:
        projections = path.projections
    else:
        needed = sorted({j for pair in pairs for j in pair})
        built = _map(lambda j: projection_from_inner(certify_inner(g[j], tol=math.inf), lift.model),
                     needed, workers)
        projections = dict(zip(needed, built))

    def one(job):
        (ti, si), rad = job
        F = kernel_diff(lift, ti, si, rad, J)
        sec = section_supremum_check(F, refine)
        dp = projection_distance(projections[ti], projections[si])
        bc = kernel_bound_check(F, dp, n, slack_bound)
        p = _probe(lift, ti, si, rad)
        vt, vs = evaluate(g[ti], p), evaluate(g[si], p)
        eta = float(np.linalg.svd(vt, compute_uv=False)[-1])
        interior = float(np.linalg.norm(vt - vs, 2))
        dist = sup_norm_distance(g[ti], g[si], J_theta)
        ceiling = ((1 + rad) * bc.bound + interior) / eta * slack_chain
        measured = ((1 + rad) * bc.sup_f + interior) / eta * slack_chain
        return PairRecord(
            t_index=ti, s_index=si, t=float(lift.t_grid[ti]), s=float(lift.t_grid[si]), r=rad,
            delta_p=dp, sup_f=bc.sup_f, sup_f_star=bc.sup_f, section_sup=sec.section_sup,
            section_gap=sec.gap, refine_shift=sec.refine_shift, bound=bc.bound,
            kernel_ratio=bc.ratio, l2_section=F.l2_section,
            l2_ratio=F.l2_section / bc.bound if bc.bound > 0 else 0.0, interior=interior, eta=eta, sup_distance=dist,
            ceiling=ceiling, ceiling_measured=measured, kernel_pass=bc.passed,
            section_pass=sec.passed, chain_pass=dist <= ceiling + ATOL,
            chain_measured_pass=dist <= measured + ATOL)

    jobs = [(pair, rad) for rad in radii for pair in pairs]
    records = _map(one, jobs, workers)
    inner = [certify_inner(s, tol=tol_inner).isometry_defect for s in g]
    moduli = [sup_norm_distance(g[j + 1], g[j], J_theta) for j in range(len(g) - 1)]
    return ContinuityReport(records, inner, tol_inner, slack_bound, slack_chain, moduli,
                            [float(t) for t in lift.t_grid])
