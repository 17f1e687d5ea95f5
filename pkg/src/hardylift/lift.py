"""Continuous selection of inner functions for a path of invariant subspaces.

Given projections ``p_t`` onto shift-invariant subspaces, every ``p_t H^2``
equals ``G_t H^2(C^m)`` for an inner ``G_t`` that is unique only up to a
constant unitary on the right.  The lift fixes that freedom at a base point
``lam`` of the disk:

* the projected kernels ``Lambda(z) = p (k_lam e_j)_j`` satisfy
  ``(1 - conj(lam) z) Lambda(z) = G(z) G(lam)^*``;
* ``G(lam) G(lam)^* = (1 - |lam|^2) Lambda(lam)`` is known from ``p`` alone;
* choosing ``G(lam)`` as the positive square root (``m = n``) or as
  ``A V`` for a tracked orthonormal eigenframe ``V`` (``m < n``) determines
  ``G(z) = (1 - conj(lam) z) Lambda(z) R`` with ``R`` a right inverse.

Base points come from a fixed lattice and are switched along a finite cover
of ``[0, 1]``; the pieces are glued by constant unitaries.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import HardyLiftError, InvarianceError, LiftError
from .hardy import (RANK_RTOL, OrthoProjection, ProjectionPath, TruncatedHardyModel,
                    numerical_rank, path_modulus, projection_distance, projection_from_inner,
                    wandering_dimension, _matrix_pairs)
from .series import (TOL_INNER, CirclePoint, InnerCertificate, MatrixLaurentSeries, _as_point,
                     _from_pairs, certify_inner, evaluate, sup_norm_distance)

__all__ = [
    "ETA_MIN",
    "DELTA_EIG",
    "TOL_LIFT",
    "DEFAULT_LATTICE",
    "candidate_lattice",
    "LambdaMatrix",
    "BaseGram",
    "EigenFrame",
    "CoverInterval",
    "LiftResult",
    "lambda_matrix",
    "gram_at_base",
    "psd_sqrt",
    "align_frame",
    "canonical_at_base",
    "extend_to_circle",
    "cover_path",
    "patch",
    "lift",
]

ETA_MIN = 1e-3
DELTA_EIG = 1e-6
TOL_LIFT = 1e-6
NEGATIVE_EIG_TOL = 1e-8
# assignment weight below which a frame column is flagged as ambiguous
_AMBIGUOUS_WEIGHT = 0.5


def candidate_lattice(radii: Sequence[float] = (0.0, 0.3, 0.6), count: int = 8,
                      offset: float = 0.0) -> tuple:
    """Base-point candidates ``r e^{2 pi i (j + offset) / count}``; radius 0 gives one point."""
    pts = []
    for r in radii:
        if r == 0:
            pts.append(CirclePoint(0.0, 0.0))
            continue
        for j in range(count):
            pts.append(CirclePoint(2 * math.pi * (j + offset) / count, r))
    return tuple(pts)


DEFAULT_LATTICE = candidate_lattice()


@dataclass(frozen=True, eq=False)
class LambdaMatrix:
    """Projected kernels ``Lambda(z)``: column ``j`` is ``p(k_lam e_j)``."""

    base: CirclePoint
    series: MatrixLaurentSeries
    tail_bound: float


class BaseGram(NamedTuple):
    matrix: np.ndarray
    asymmetry: float


@dataclass(frozen=True, eq=False)
class EigenFrame:
    """Eigenvalues of the base Gram matrix and an orthonormal frame of its range.

    ``clusters`` groups frame positions whose eigenvalues agree within the
    cluster tolerance.  Frames fresh from :func:`psd_sqrt` are in descending
    order; tracked frames keep the positions inherited from the previous step.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    clusters: tuple
    ambiguous: bool = False

    @property
    def orthonormality_defect(self) -> float:
        v = self.vectors
        return float(np.linalg.norm(v.conj().T @ v - np.eye(v.shape[1]), 2))


@dataclass(frozen=True)
class CoverInterval:
    base: CirclePoint
    start: int
    stop: int
    eta_floor: float

    def to_dict(self) -> dict:
        return {"base": {"theta": self.base.theta, "r": self.base.r},
                "start": self.start, "stop": self.stop, "etaFloor": self.eta_floor}

    @classmethod
    def from_dict(cls, d: dict) -> "CoverInterval":
        b = d["base"]
        return cls(CirclePoint(float(b["theta"]), float(b["r"])), int(d["start"]),
                   int(d["stop"]), float(d["etaFloor"]))


@dataclass(eq=False)
class LiftResult:
    """Lifted family ``G~_t`` with its cover, gluing unitaries and diagnostics."""

    model: TruncatedHardyModel
    m: int
    t_grid: np.ndarray
    g_tilde: tuple
    cover: tuple
    patch_unitaries: tuple
    diagnostics: dict = field(default_factory=dict)

    def interval_of(self, j: int) -> CoverInterval:
        """First cover interval containing grid index ``j``."""
        for iv in self.cover:
            if iv.start <= j <= iv.stop:
                return iv
        raise IndexError(j)

    def pair_interval(self, j: int, k: int) -> CoverInterval:
        """A cover interval containing both indices, else the one of ``j``."""
        for iv in self.cover:
            if iv.start <= min(j, k) and max(j, k) <= iv.stop:
                return iv
        return self.interval_of(j)

    def adjacent_moduli(self, J: int = 1024) -> np.ndarray:
        g = self.g_tilde
        return np.array([sup_norm_distance(g[j + 1], g[j], J) for j in range(len(g) - 1)])

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "m": self.m,
            "tGrid": [float(t) for t in self.t_grid],
            "gTilde": [g.to_dict() for g in self.g_tilde],
            "cover": [iv.to_dict() for iv in self.cover],
            "patchUnitaries": [_matrix_pairs(u) for u in self.patch_unitaries],
            "diagnostics": _jsonable(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LiftResult":
        model = TruncatedHardyModel(int(d["model"]["n"]), int(d["model"]["D"]))
        return cls(
            model=model,
            m=int(d["m"]),
            t_grid=np.asarray(d["tGrid"], dtype=float),
            g_tilde=tuple(MatrixLaurentSeries.from_dict(g) for g in d["gTilde"]),
            cover=tuple(CoverInterval.from_dict(c) for c in d["cover"]),
            patch_unitaries=tuple(_from_pairs(u) for u in d["patchUnitaries"]),
            diagnostics=dict(d.get("diagnostics", {})),
        )

    def residuals_csv(self) -> str:
        """Per-t diagnostics as CSV text (stable formatting)."""
        diag = self.diagnostics
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "interval", "inner_defect", "base_consistency", "roundtrip", "modulus"])
        moduli = diag.get("adjacent_modulus", [])
        for j, t in enumerate(self.t_grid):
            w.writerow([
                f"{t:.12g}",
                diag.get("interval", [""] * len(self.t_grid))[j],
                _fmt(diag.get("inner_defect", [None] * len(self.t_grid))[j]),
                _fmt(diag.get("base_consistency", [None] * len(self.t_grid))[j]),
                _fmt(diag.get("roundtrip", [None] * len(self.t_grid))[j]),
                _fmt(moduli[j - 1] if j > 0 and moduli else None),
            ])
        return buf.getvalue()


def _fmt(x) -> str:
    return "" if x is None else f"{x:.6e}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


# single-step operations --------------------------------------------------

def lambda_matrix(P: OrthoProjection, lam, model: TruncatedHardyModel) -> LambdaMatrix:
    """Columns ``P (k_lam e_j)`` with ``k_lam(z) = 1 / (1 - conj(lam) z)`` truncated at ``D``."""
    lam = _as_point(lam)
    if lam.r >= 1:
        raise LiftError("base point must lie inside the disk", stage="base", base=lam)
    cols = P.matrix @ model.kernel_vectors(lam.value)
    tail = lam.r ** (model.D + 1) / (1 - lam.r)
    return LambdaMatrix(lam, model.vectors_to_series(cols), tail)


def gram_at_base(L: LambdaMatrix) -> BaseGram:
    """``(1 - |lam|^2)`` times the Hermitian part of ``Lambda(lam)``; equals ``G(lam) G(lam)^*``."""
    v = (1 - L.base.r ** 2) * evaluate(L.series, L.base)
    asym = float(np.linalg.norm(v - v.conj().T, 2))
    g = (v + v.conj().T) / 2
    lowest = float(np.linalg.eigvalsh(g)[0])
    if lowest < -NEGATIVE_EIG_TOL:
        raise LiftError(f"base Gram matrix has eigenvalue {lowest:.2e}", stage="base", base=L.base)
    return BaseGram(g, asym)


def _clusters(mu: np.ndarray, delta: float) -> tuple:
    if mu.size == 0:
        return ()
    tol = delta * float(np.max(mu))
    groups, cur = [], [0]
    for i in range(1, mu.size):
        if abs(mu[i - 1] - mu[i]) <= tol:
            cur.append(i)
        else:
            groups.append(tuple(cur))
            cur = [i]
    groups.append(tuple(cur))
    return tuple(groups)


def _fix_phases(v: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column real positive."""
    idx = np.argmax(np.abs(v), axis=0)
    piv = v[idx, np.arange(v.shape[1])]
    return v * (np.abs(piv) / piv)


def _polar(x: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(x)
    return u @ vh


def psd_sqrt(gram: np.ndarray, m: int, delta_eig: float = DELTA_EIG):
    """Top-``m`` eigenframe of ``gram`` and its positive square root ``A``.

    Raises :class:`LiftError` (stage ``"base"``) when the numerical rank is
    not ``m``; the caller should move the base point.
    """
    gram = np.asarray(gram, dtype=complex)
    if np.linalg.norm(gram - gram.conj().T, 2) > 1e-8:
        raise LiftError("Gram matrix is not Hermitian", stage="base")
    w, v = np.linalg.eigh(gram)
    w, v = w[::-1], v[:, ::-1]
    rank = numerical_rank(np.clip(w, 0, None), RANK_RTOL)
    if rank != m:
        raise LiftError(f"numerical rank {rank} != wandering dimension {m}", stage="base")
    mu = w[:m].copy()
    vm = _fix_phases(v[:, :m])
    a = (vm * np.sqrt(mu)) @ vm.conj().T
    return EigenFrame(mu, vm, _clusters(mu, delta_eig)), a


def align_frame(current: EigenFrame, previous: EigenFrame) -> EigenFrame:
    """Match ``current`` to ``previous`` by maximal overlap, then Procrustes per cluster.

    A column of the previous frame is assigned to the cluster whose span holds
    most of it, so eigenvectors keep their position through a crossing instead
    of being re-sorted.  Inside each cluster the closest unitary rotation
    (orthogonal Procrustes) onto the previous columns is applied.
    """
    vc, vp = current.vectors, previous.vectors
    m = vc.shape[1]
    overlap = np.abs(vp.conj().T @ vc) ** 2
    clusters = current.clusters
    weights = np.stack([overlap[:, list(c)].sum(axis=1) for c in clusters], axis=1)
    slots = [ci for ci, c in enumerate(clusters) for _ in c]
    rows, cols = linear_sum_assignment(-weights[:, slots])
    assigned = {ci: [] for ci in range(len(clusters))}
    for r, c in zip(rows, cols):
        assigned[slots[c]].append(int(r))
    vectors = np.zeros_like(vc)
    mu = np.zeros(m)
    new_clusters = []
    ambiguous = False
    for ci, c in enumerate(clusters):
        pos = sorted(assigned[ci])
        basis = vc[:, list(c)]
        q = _polar(basis.conj().T @ vp[:, pos])
        vectors[:, pos] = basis @ q
        # rotated columns carry the Rayleigh quotients of the cluster
        mu[pos] = np.real(np.einsum("ji,j,ji->i", q.conj(), current.eigenvalues[list(c)], q))
        ambiguous |= bool(np.min(weights[pos, ci]) < _AMBIGUOUS_WEIGHT)
        new_clusters.append(tuple(pos))
    return EigenFrame(mu, vectors, tuple(sorted(new_clusters)), ambiguous)


def canonical_at_base(P: OrthoProjection, lam, m: int, model: TruncatedHardyModel,
                      previous: EigenFrame | None = None, delta_eig: float = DELTA_EIG):
    """Canonical value ``G~(lam)`` (``n x m``) and the frame that fixes it.

    ``m = n``: the positive square root of the Gram matrix.  ``m < n``:
    ``A V`` with ``V`` the eigenframe, aligned to ``previous`` when given and
    otherwise in descending order with the largest entry of each eigenvector
    real positive.
    """
    gram = gram_at_base(lambda_matrix(P, lam, model)).matrix
    frame, a = psd_sqrt(gram, m, delta_eig)
    if m == model.n:
        return a, frame
    if previous is not None:
        frame = align_frame(frame, previous)
    return a @ frame.vectors, frame


def _pinv_rank(gram: np.ndarray, m: int) -> np.ndarray:
    w, v = np.linalg.eigh(gram)
    w, v = w[::-1][:m], v[:, ::-1][:, :m]
    return (v / w) @ v.conj().T


def extend_to_circle(L: LambdaMatrix, base_g: np.ndarray, J: int = 512,
                     tol: float = TOL_INNER) -> InnerCertificate:
    """``G~(z) = (1 - conj(lam) z) Lambda(z) R`` with ``R = gram^+ G~(lam)``.

    For ``m = n`` and ``G~(lam) = A`` this is ``R = A^{-1}``; for ``m < n`` and
    ``G~(lam) = V diag(sqrt(mu))`` it is ``R = V diag(1/sqrt(mu))``.  The result
    is truncated at degree ``D`` and certified inner.
    """
    base_g = np.asarray(base_g, dtype=complex)
    m = base_g.shape[1]
    gram = gram_at_base(L).matrix
    r = _pinv_rank(gram, m) @ base_g
    lam = L.base.value
    D = L.series.hi
    h = L.series @ r
    g = (h - np.conj(lam) * h.shift(1)).truncate(D)
    cert = certify_inner(g, J=J, tol=tol)
    if not cert.valid:
        raise LiftError(f"extension is not inner (defect {cert.isometry_defect:.2e})",
                        stage="extend", base=L.base)
    return cert


# cover -------------------------------------------------------------------

def _first_max(values: np.ndarray, rtol: float = 1e-9) -> int:
    best = float(np.max(values))
    return int(np.flatnonzero(values >= best - rtol * abs(best))[0])


def base_scores(P: OrthoProjection, lattice: Sequence[CirclePoint], m: int,
                model: TruncatedHardyModel) -> np.ndarray:
    """``sigma_m(G(lam))`` for every candidate, from one batched product."""
    n = model.n
    kern = np.concatenate([model.kernel_vectors(p.value) for p in lattice], axis=1)
    big = kern.conj().T @ (P.matrix @ kern)
    scale = np.array([1 - p.r ** 2 for p in lattice])
    blocks = np.stack([big[i * n:(i + 1) * n, i * n:(i + 1) * n] for i in range(len(lattice))])
    blocks = scale[:, None, None] * (blocks + np.conj(np.swapaxes(blocks, 1, 2))) / 2
    w = np.linalg.eigvalsh(blocks)[:, ::-1]
    return np.sqrt(np.clip(w[:, m - 1], 0, None))


def cover_path(path: ProjectionPath, m: int, lattice: Sequence[CirclePoint] = DEFAULT_LATTICE,
               eta_min: float = ETA_MIN, workers: int | None = None,
               scores: np.ndarray | None = None) -> tuple:
    """Greedy finite cover of the t-grid by intervals with a fixed base point.

    Each interval keeps its base point while ``sigma_m(G_t(lam)) >= eta_min``;
    a new base point must be admissible at both the last good index and the
    next one, so consecutive intervals share one grid point.
    """
    if scores is None:
        scores = _map(lambda p: base_scores(p, lattice, m, path.model), path.projections, workers)
        scores = np.stack(scores)
    T = scores.shape[0]
    c = _first_max(scores[0])
    if scores[0, c] < eta_min:
        raise LiftError(f"no base point reaches eta_min at t={path.t_grid[0]:.4g}",
                        stage="cover", t_index=0)
    intervals, start = [], 0
    while True:
        k = start
        while k + 1 < T and scores[k + 1, c] >= eta_min:
            k += 1
        intervals.append(CoverInterval(lattice[c], start, k, float(np.min(scores[start:k + 1, c]))))
        if k == T - 1:
            return tuple(intervals)
        both = np.minimum(scores[k], scores[k + 1])
        c = _first_max(both)
        if both[c] < eta_min:
            raise LiftError(f"no base point reaches eta_min at t={path.t_grid[k + 1]:.4g}",
                            stage="cover", t_index=k + 1)
        start = k


# patching ----------------------------------------------------------------

def patch(segments: Sequence[Sequence[MatrixLaurentSeries]]):
    """Glue per-interval families with constant unitaries.

    Segment ``k`` starts at the grid point where segment ``k-1`` ends.  The
    unitary is the polar factor of the cross Gram ``sum_j next_j^* prev_j``
    at that point and right-multiplies all of segment ``k``.
    """
    out = list(segments[0])
    unitaries = []
    for k, seg in enumerate(segments[1:], start=1):
        prev, nxt = out[-1], seg[0]
        lo, hi = 0, max(prev.hi, nxt.hi)
        a, b = nxt.dense(lo, hi), prev.dense(lo, hi)
        cross = np.einsum("kij,kil->jl", a.conj(), b)
        u, s, vh = np.linalg.svd(cross)
        if s.min() < 0.5:
            raise LiftError(f"junction {k}: cross Gram is singular (sigma_min {s.min():.2e})",
                            stage="patch")
        U = u @ vh
        unitaries.append(U)
        out.extend(g @ U for g in seg[1:])
    return out, unitaries


# full pipeline -----------------------------------------------------------

def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _degenerate_runs(frames: list) -> list:
    """Maximal runs ``(positions, j1, j2)`` of a persisting multi-column cluster."""
    runs, open_runs = [], {}
    for j, f in enumerate(frames):
        present = {c for c in f.clusters if len(c) > 1}
        for c in list(open_runs):
            if c not in present:
                runs.append((c, open_runs.pop(c), j - 1))
        for c in present:
            open_runs.setdefault(c, j)
    runs.extend((c, j1, len(frames) - 1) for c, j1 in open_runs.items())
    return runs


def _track(grams: list, m: int, delta_eig: float) -> list:
    """Eigenframes along one interval, continuous through eigenvalue crossings.

    Pass one aligns each step to the previous one.  Pass two revisits steps
    where a cluster stays degenerate and interpolates linearly between the
    frame entering the cluster and the frame leaving it.
    """
    frames = []
    for g in grams:
        f, _ = psd_sqrt(g, m, delta_eig)
        frames.append(f if not frames else align_frame(f, frames[-1]))
    for pos, j1, j2 in _degenerate_runs(frames):
        pos = list(pos)
        entry = frames[j1 - 1].vectors[:, pos] if j1 > 0 else None
        exit_ = frames[j2 + 1].vectors[:, pos] if j2 + 1 < len(frames) else None
        if entry is None and exit_ is None:
            continue
        for j in range(j1, j2 + 1):
            if entry is None:
                x = exit_
            elif exit_ is None:
                x = entry
            else:
                w = (j - j1 + 1) / (j2 - j1 + 2)
                x = (1 - w) * entry + w * exit_
            basis = frames[j].vectors[:, pos]
            vecs = frames[j].vectors.copy()
            vecs[:, pos] = basis @ _polar(basis.conj().T @ x)
            frames[j] = replace(frames[j], vectors=vecs)
    return frames


def lift(path: ProjectionPath, lattice: Sequence[CirclePoint] = DEFAULT_LATTICE,
         eta_min: float = ETA_MIN, delta_eig: float = DELTA_EIG, J: int = 512,
         tol_inner: float = TOL_INNER, tol_lift: float = TOL_LIFT,
         workers: int | None = None, strict: bool = True) -> LiftResult:
    """Lift a projection path to a continuous family of inner functions.

    With ``strict`` the round-trip residual ``||p_t - P(G~_t)||`` must stay
    below ``tol_lift``; otherwise residuals are only recorded.
    """
    model = path.model
    try:
        dims = _map(lambda p: wandering_dimension(p, model), path.projections, workers)
    except InvarianceError as exc:
        raise LiftError(str(exc), stage="wandering") from exc
    if len(set(dims)) != 1:
        raise LiftError(f"wandering dimension varies along the path: {sorted(set(dims))}",
                        stage="wandering")
    m = dims[0]
    if m == 0:
        raise LiftError("zero subspace has no inner representative", stage="wandering")
    modulus = path_modulus(path)
    if np.any(modulus >= 1):
        raise LiftError(f"path step of norm {modulus.max():.3f} >= 1", stage="path",
                        t_index=int(np.argmax(modulus)))

    cover = cover_path(path, m, lattice, eta_min, workers)
    segments, frames_all, consistency = [], {}, {}
    for iv in cover:
        idx = list(range(iv.start, iv.stop + 1))
        lams = _map(lambda j: lambda_matrix(path.projections[j], iv.base, model), idx, workers)
        grams = [gram_at_base(L).matrix for L in lams]
        if m == model.n:
            roots = [psd_sqrt(g, m, delta_eig) for g in grams]
            frames = [f for f, _ in roots]
            bases = [a for _, a in roots]
        else:
            frames = _track(grams, m, delta_eig)
            bases = [psd_sqrt(g, m, delta_eig)[1] @ f.vectors for g, f in zip(grams, frames)]
        certs = _map(lambda k: extend_to_circle(lams[k], bases[k], J, tol_inner),
                     range(len(idx)), workers)
        for j, f, g, c in zip(idx, frames, grams, certs):
            frames_all.setdefault(j, f)
            val = evaluate(c.series, iv.base)
            consistency.setdefault(j, float(np.linalg.norm(val @ val.conj().T - g, 2)))
        segments.append([c.series for c in certs])

    g_tilde, unitaries = patch(segments)
    T = len(path)
    inner = [certify_inner(g, J=J, tol=tol_inner).isometry_defect for g in g_tilde]
    diagnostics = {
        "interval": [next(k for k, iv in enumerate(cover) if iv.start <= j <= iv.stop)
                     for j in range(T)],
        "inner_defect": inner,
        "base_consistency": [consistency[j] for j in range(T)],
        "ambiguous_frames": [j for j in range(T) if frames_all[j].ambiguous],
        "adjacent_modulus": [sup_norm_distance(g_tilde[j + 1], g_tilde[j])
                             for j in range(T - 1)],
        "path_modulus": modulus,
    }
    result = LiftResult(model, m, path.t_grid, tuple(g_tilde), cover, tuple(unitaries),
                        diagnostics)
    res = roundtrip_residuals(result, path, workers)
    diagnostics["roundtrip"] = res
    if strict and max(res) > tol_lift:
        j = int(np.argmax(res))
        raise LiftError(f"round-trip residual {res[j]:.2e} exceeds {tol_lift:.0e}",
                        stage="roundtrip", t_index=j)
    return result


def roundtrip_residuals(result: LiftResult, path: ProjectionPath,
                        workers: int | None = None) -> list:
    """``||p_t - projection_from_inner(G~_t)||`` for every grid point."""
    def one(j):
        cert = certify_inner(result.g_tilde[j], tol=np.inf)
        return projection_distance(path.projections[j], projection_from_inner(cert, path.model))
    return _map(one, range(len(path)), workers)
