"""Finite model of H^2(C^n): shift, block Toeplitz operators, projections.

Vectors of the model are coefficient vectors of C^n-valued polynomials of
degree at most ``D``; the basis element ``z^k e_i`` sits at index ``k*n + i``.

Every invariant subspace ``M = G H^2(C^m)`` is represented by its polynomial
part ``M ∩ Poly_D``.  That space is exactly the eigenvalue-one eigenspace of
``T_D(G) T_D(G)^*`` where ``T_D(G)`` is the lower-triangular block Toeplitz
compression of multiplication by ``G``, so it is computed from the first
``D + 1`` coefficients of ``G`` without any tail error.  The truncated shift
maps ``M ∩ Poly_{D-1}`` into ``M ∩ Poly_D``, which is how invariance and the
wandering space are tested below.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import CertificateError, DimensionError, DomainError, InvarianceError, ParameterError
from .series import InnerCertificate, MatrixLaurentSeries, _complex_pairs, _from_pairs

__all__ = [
    "TruncatedHardyModel",
    "OrthoProjection",
    "ProjectionPath",
    "RANK_RTOL",
    "TOL_INV",
    "shift_matrix",
    "toeplitz",
    "projection_from_inner",
    "invariance_defect",
    "wandering_dimension",
    "path_modulus",
    "numerical_rank",
    "projection_distance",
]

RANK_RTOL = 1e-8
TOL_INV = 1e-6
# singular values of T_D(G) are 1 on M ∩ Poly_D and O(tail) elsewhere
_UNIT_SV_CUT = 0.5


@dataclass(frozen=True)
class TruncatedHardyModel:
    """Polynomials of degree ``<= D`` with values in ``C^n``."""

    n: int
    D: int

    def __post_init__(self):
        if self.n < 1 or self.D < 1:
            raise ParameterError(f"need n >= 1 and D >= 1, got n={self.n}, D={self.D}")

    @property
    def dim(self) -> int:
        return self.n * (self.D + 1)

    def index(self, k: int, i: int) -> int:
        return k * self.n + i

    def block(self, k: int) -> slice:
        """Slice of the degree-``k`` coefficient block."""
        return slice(k * self.n, (k + 1) * self.n)

    def kernel_vectors(self, lam: complex) -> np.ndarray:
        """Columns ``k_lam e_j`` (coefficients ``conj(lam)**k``), shape (dim, n)."""
        powers = np.conj(complex(lam)) ** np.arange(self.D + 1)
        return np.kron(powers[:, None], np.eye(self.n))

    def vectors_to_series(self, vecs: np.ndarray) -> MatrixLaurentSeries:
        """Read the columns of a (dim, c) array as an ``n x c`` series."""
        vecs = np.asarray(vecs, dtype=complex)
        if vecs.ndim == 1:
            vecs = vecs[:, None]
        if vecs.shape[0] != self.dim:
            raise DimensionError(f"expected {self.dim} rows, got {vecs.shape[0]}")
        return MatrixLaurentSeries(vecs.reshape(self.D + 1, self.n, vecs.shape[1]))

    def series_to_vectors(self, series: MatrixLaurentSeries) -> np.ndarray:
        if not series.is_analytic or series.rows != self.n:
            raise DimensionError("series must be analytic with n rows")
        return series.dense(0, self.D).reshape(self.dim, series.cols)

    def to_dict(self) -> dict:
        return {"n": self.n, "D": self.D}


def numerical_rank(singular_values: np.ndarray, rtol: float = RANK_RTOL) -> int:
    s = np.abs(np.asarray(singular_values))
    if s.size == 0 or s.max() == 0:
        return 0
    return int(np.sum(s > rtol * s.max()))


def _norm2_bounded(x: np.ndarray, tol: float) -> float:
    """Spectral norm, skipping the SVD when the Frobenius bound already passes."""
    if x.size == 0:
        return 0.0
    fro = float(np.linalg.norm(x))
    return fro if fro <= tol else float(np.linalg.norm(x, 2))


def _matrix_pairs(m: np.ndarray) -> list:
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


@dataclass(frozen=True, eq=False)
class OrthoProjection:
    """Orthogonal projection on the model space.

    Use :meth:`from_matrix` or :meth:`from_basis`; both record the Hermitian
    and idempotent defects and reject matrices outside tolerance.
    """

    matrix: np.ndarray
    hermitian_defect: float
    idempotent_defect: float
    _basis: np.ndarray | None = field(default=None, repr=False)

    HERMITIAN_TOL = 1e-10
    IDEMPOTENT_TOL = 1e-8

    @classmethod
    def from_matrix(cls, matrix) -> "OrthoProjection":
        p = np.array(matrix, dtype=complex)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise DimensionError(f"projection must be square, got {p.shape}")
        herm = _norm2_bounded(p - p.conj().T, cls.HERMITIAN_TOL)
        idem = _norm2_bounded(p @ p - p, cls.IDEMPOTENT_TOL)
        if herm > cls.HERMITIAN_TOL or idem > cls.IDEMPOTENT_TOL:
            raise ParameterError(
                f"not an orthogonal projection (hermitian defect {herm:.2e}, "
                f"idempotent defect {idem:.2e})")
        p.setflags(write=False)
        return cls(p, herm, idem)

    @classmethod
    def from_basis(cls, q: np.ndarray) -> "OrthoProjection":
        """Projection ``Q Q^*`` onto the span of orthonormal columns ``q``."""
        q = np.asarray(q, dtype=complex)
        p = q @ q.conj().T
        proj = cls.from_matrix(p)
        q = q.copy()
        q.setflags(write=False)
        object.__setattr__(proj, "_basis", q)
        return proj

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def basis(self) -> np.ndarray:
        """Orthonormal basis of the range."""
        if self._basis is not None:
            return self._basis
        w, v = np.linalg.eigh(self.matrix)
        return v[:, w > 0.5]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def to_dict(self) -> dict:
        return {"matrix": _matrix_pairs(self.matrix)}

    @classmethod
    def from_dict(cls, d: dict) -> "OrthoProjection":
        return cls.from_matrix(_from_pairs(d["matrix"]))


@dataclass(frozen=True, eq=False)
class ProjectionPath:
    """A sampled family ``t -> p_t`` on an increasing grid from 0 to 1."""

    model: TruncatedHardyModel
    t_grid: np.ndarray
    projections: tuple

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ParameterError("t grid needs at least two points")
        if np.any(np.diff(t) <= 0) or t[0] != 0.0 or t[-1] != 1.0:
            raise ParameterError("t grid must increase strictly from 0 to 1")
        if len(self.projections) != t.size:
            raise DimensionError("one projection per grid point required")
        for p in self.projections:
            if p.dim != self.model.dim:
                raise DimensionError(f"projection dim {p.dim} != model dim {self.model.dim}")
        t.setflags(write=False)
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "projections", tuple(self.projections))

    def __len__(self):
        return len(self.projections)

    def to_dict(self) -> dict:
        return {
            "model": {"n": self.model.n, "D": self.model.D,
                      "tGrid": [float(x) for x in self.t_grid]},
            "projections": [p.to_dict() for p in self.projections],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProjectionPath":
        hdr = d["model"]
        model = TruncatedHardyModel(int(hdr["n"]), int(hdr["D"]))
        projections = [OrthoProjection.from_dict(p) for p in d["projections"]]
        return cls(model, np.asarray(hdr["tGrid"], dtype=float), tuple(projections))


def shift_matrix(model: TruncatedHardyModel) -> np.ndarray:
    """Truncated unilateral shift: ``z^k e_i -> z^{k+1} e_i``, degree ``D`` -> 0."""
    n = model.n
    s = np.zeros((model.dim, model.dim), dtype=complex)
    idx = np.arange(model.dim - n)
    s[idx + n, idx] = 1.0
    return s


def toeplitz(G: MatrixLaurentSeries, model: TruncatedHardyModel) -> np.ndarray:
    """Compression ``P_D M_G P_D`` as an ``n(D+1) x m(D+1)`` block matrix.

    Block ``(i, j)`` is ``G_{i-j}`` for ``i >= j``.  Columns of input degree
    ``j`` only see ``G_0..G_{D-j}``; the rest of the product is cut off.
    """
    if not G.is_analytic:
        raise DomainError("toeplitz operator needs an analytic symbol")
    if G.rows != model.n:
        raise DimensionError(f"symbol has {G.rows} rows, model has n={model.n}")
    D, n, m = model.D, model.n, G.cols
    c = G.dense(0, D)
    t = np.zeros((D + 1, n, D + 1, m), dtype=complex)
    for j in range(D + 1):
        t[j:, :, j, :] = c[:D + 1 - j]
    return t.reshape(n * (D + 1), m * (D + 1))


def projection_from_inner(G: InnerCertificate | MatrixLaurentSeries,
                          model: TruncatedHardyModel) -> OrthoProjection:
    """Projection onto the polynomial part ``G H^2 ∩ Poly_D``.

    The range is spanned by the left singular vectors of ``toeplitz(G)`` whose
    singular value is one; the remaining singular values are of the size of
    the coefficient tail of ``G`` beyond degree ``D``.
    """
    if isinstance(G, MatrixLaurentSeries):
        from .series import certify_inner
        G = certify_inner(G)
    if not G.valid:
        raise CertificateError(
            f"inner certificate rejected (defect {G.isometry_defect:.2e} > {G.tol:.0e})",
            defect=G.isometry_defect)
    u, s, _ = np.linalg.svd(toeplitz(G.series, model), full_matrices=False)
    return OrthoProjection.from_basis(u[:, s > _UNIT_SV_CUT])


def _lower_part(P: OrthoProjection, model: TruncatedHardyModel) -> np.ndarray:
    """Orthonormal basis of ``range(P) ∩ Poly_{D-1}``."""
    q = P.basis
    if q.shape[1] == 0:
        return q
    top = q[model.block(model.D), :]
    _, s, vh = np.linalg.svd(top, full_matrices=True)
    r = numerical_rank(s)
    return q @ vh[r:].conj().T


def invariance_defect(P: OrthoProjection, model: TruncatedHardyModel) -> float:
    """``||(I - P) S x||`` maximized over unit ``x`` in ``range(P) ∩ Poly_{D-1}``.

    Restricting to degree ``<= D-1`` makes the truncated shift exactly
    isometric on the tested vectors.
    """
    low = _lower_part(P, model)
    if low.shape[1] == 0:
        return 0.0
    shifted = shift_matrix(model) @ low
    q = P.basis
    resid = shifted - q @ (q.conj().T @ shifted)
    return float(np.linalg.norm(resid, 2))


def wandering_dimension(P: OrthoProjection, model: TruncatedHardyModel,
                        tol_inv: float = TOL_INV) -> int:
    """Dimension of ``M ⊖ S M`` for ``M = range(P)``.

    ``S M`` is taken as the shift of ``M ∩ Poly_{D-1}``, on which the
    truncated shift is isometric.
    """
    defect = invariance_defect(P, model)
    if defect > tol_inv:
        raise InvarianceError(f"projection is not invariant (defect {defect:.2e})")
    low = _lower_part(P, model)
    shifted = shift_matrix(model) @ low
    w = P.matrix - shifted @ shifted.conj().T
    return numerical_rank(np.linalg.eigvalsh(w))


def projection_distance(p: OrthoProjection, q: OrthoProjection) -> float:
    """Operator norm ``||p - q||``."""
    if p.dim != q.dim:
        raise DimensionError("projections live on different spaces")
    return float(np.max(np.abs(np.linalg.eigvalsh(p.matrix - q.matrix))))


def path_modulus(path: ProjectionPath) -> np.ndarray:
    """Norms ``||p_{t_{j+1}} - p_{t_j}||`` of consecutive differences."""
    ps = path.projections
    return np.array([projection_distance(ps[j + 1], ps[j]) for j in range(len(ps) - 1)])
