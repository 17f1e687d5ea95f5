"""Matrix-valued truncated Laurent series on the unit circle.

A :class:`MatrixLaurentSeries` stores the Fourier coefficients ``F_lo..F_hi``
of a ``rows x cols`` matrix function ``F(z) = sum_k F_k z^k``.  Analytic
series (``lo >= 0``) may also be evaluated inside the disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DimensionError, DomainError, ParameterError

__all__ = [
    "CirclePoint",
    "MatrixLaurentSeries",
    "InnerCertificate",
    "L2Distance",
    "DEFAULT_DEGREE",
    "DEFAULT_GRID",
    "TOL_INNER",
    "evaluate",
    "sample_grid",
    "l2_distance",
    "sup_norm_distance",
    "certify_inner",
    "op_norms",
]

DEFAULT_DEGREE = 64
_POLISH_PEAKS = 3
DEFAULT_GRID = 1024
TOL_INNER = 1e-6


@dataclass(frozen=True)
class CirclePoint:
    """The point ``r * exp(i theta)`` of the closed disk."""

    theta: float
    r: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ParameterError(f"radius must lie in [0, 1], got {self.r}")
        object.__setattr__(self, "theta", float(self.theta) % (2 * math.pi))

    @classmethod
    def from_complex(cls, z: complex) -> "CirclePoint":
        z = complex(z)
        return cls(theta=math.atan2(z.imag, z.real) if z != 0 else 0.0, r=abs(z))

    @property
    def value(self) -> complex:
        return self.r * complex(math.cos(self.theta), math.sin(self.theta))

    def __complex__(self):
        return self.value


PointLike = Union[CirclePoint, complex, float]


def _as_point(p: PointLike) -> CirclePoint:
    return p if isinstance(p, CirclePoint) else CirclePoint.from_complex(p)


def _complex_pairs(a: np.ndarray) -> list:
    return [[float(x.real), float(x.imag)] for x in np.ravel(a)]


def _from_pairs(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


class MatrixLaurentSeries:
    """Truncated Laurent series with ``rows x cols`` complex coefficients.

    Parameters
    ----------
    coeffs : array_like, shape (L, rows, cols)
        Coefficients ``F_lo, ..., F_{lo+L-1}``.
    lo : int
        Index of the first coefficient.

    Instances are immutable; arithmetic returns new series.
    """

    __slots__ = ("_coeffs", "_lo")
    # make ``ndarray @ series`` dispatch to __rmatmul__
    __array_ufunc__ = None

    def __init__(self, coeffs, lo: int = 0):
        c = np.array(coeffs, dtype=complex)
        if c.ndim == 2:
            c = c[:, :, None]
        if c.ndim != 3 or c.shape[0] == 0:
            raise DimensionError(f"coeffs must have shape (L, rows, cols), got {c.shape}")
        c.setflags(write=False)
        self._coeffs = c
        self._lo = int(lo)

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, matrix) -> "MatrixLaurentSeries":
        m = np.atleast_2d(np.asarray(matrix, dtype=complex))
        return cls(m[None], lo=0)

    @classmethod
    def monomial(cls, k: int, matrix) -> "MatrixLaurentSeries":
        m = np.atleast_2d(np.asarray(matrix, dtype=complex))
        return cls(m[None], lo=k)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "MatrixLaurentSeries":
        return cls(np.zeros((1, rows, cols), dtype=complex))

    # attributes ---------------------------------------------------------
    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def lo(self) -> int:
        return self._lo

    @property
    def hi(self) -> int:
        return self._lo + self._coeffs.shape[0] - 1

    @property
    def rows(self) -> int:
        return self._coeffs.shape[1]

    @property
    def cols(self) -> int:
        return self._coeffs.shape[2]

    @property
    def shape(self) -> tuple:
        return self._coeffs.shape[1:]

    @property
    def is_analytic(self) -> bool:
        return self._lo >= 0

    def coefficient(self, k: int) -> np.ndarray:
        if self.lo <= k <= self.hi:
            return self._coeffs[k - self.lo]
        return np.zeros(self.shape, dtype=complex)

    def dense(self, lo: int, hi: int) -> np.ndarray:
        """Coefficients on the index window ``lo..hi`` (zero padded)."""
        out = np.zeros((hi - lo + 1,) + self.shape, dtype=complex)
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a <= b:
            out[a - lo:b - lo + 1] = self._coeffs[a - self.lo:b - self.lo + 1]
        return out

    # arithmetic ---------------------------------------------------------
    def _check_same_shape(self, other):
        if self.shape != other.shape:
            raise DimensionError(f"shape mismatch {self.shape} vs {other.shape}")

    def __add__(self, other):
        if not isinstance(other, MatrixLaurentSeries):
            return NotImplemented
        self._check_same_shape(other)
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        return MatrixLaurentSeries(self.dense(lo, hi) + other.dense(lo, hi), lo)

    def __neg__(self):
        return MatrixLaurentSeries(-self._coeffs, self.lo)

    def __sub__(self, other):
        if not isinstance(other, MatrixLaurentSeries):
            return NotImplemented
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, MatrixLaurentSeries):
            return NotImplemented
        return MatrixLaurentSeries(self._coeffs * complex(scalar), self.lo)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, MatrixLaurentSeries):
            if self.cols != other.rows:
                raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
            a, b = self._coeffs, other._coeffs
            out = np.zeros((a.shape[0] + b.shape[0] - 1, self.rows, other.cols), dtype=complex)
            for j in range(b.shape[0]):
                out[j:j + a.shape[0]] += a @ b[j]
            return MatrixLaurentSeries(out, self.lo + other.lo)
        m = np.asarray(other, dtype=complex)
        if m.ndim != 2 or m.shape[0] != self.cols:
            raise DimensionError(f"cannot multiply {self.shape} by {m.shape}")
        return MatrixLaurentSeries(self._coeffs @ m, self.lo)

    def __rmatmul__(self, other):
        m = np.asarray(other, dtype=complex)
        if m.ndim != 2 or m.shape[1] != self.rows:
            raise DimensionError(f"cannot multiply {m.shape} by {self.shape}")
        return MatrixLaurentSeries(m @ self._coeffs, self.lo)

    def truncate(self, hi: int) -> "MatrixLaurentSeries":
        """Drop every coefficient above degree ``hi``."""
        if hi >= self.hi:
            return self
        if hi < self.lo:
            return MatrixLaurentSeries(np.zeros((1,) + self.shape), lo=self.lo)
        return MatrixLaurentSeries(self._coeffs[:hi - self.lo + 1], self.lo)

    def shift(self, k: int) -> "MatrixLaurentSeries":
        """Multiply by ``z**k``."""
        return MatrixLaurentSeries(self._coeffs, self.lo + k)

    def hs_norm(self) -> float:
        """L2 norm with the Hilbert-Schmidt norm pointwise (Parseval)."""
        return float(np.sqrt(np.sum(np.abs(self._coeffs) ** 2)))

    def __call__(self, p: PointLike) -> np.ndarray:
        return evaluate(self, p)

    def __repr__(self):
        return f"MatrixLaurentSeries(shape={self.shape}, lo={self.lo}, hi={self.hi})"

    def __eq__(self, other):
        if not isinstance(other, MatrixLaurentSeries):
            return NotImplemented
        return (self.lo == other.lo and self._coeffs.shape == other._coeffs.shape
                and bool(np.array_equal(self._coeffs, other._coeffs)))

    __hash__ = None

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "lo": self.lo,
            "coeffs": [_complex_pairs(c) for c in self._coeffs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MatrixLaurentSeries":
        rows, cols = int(d["rows"]), int(d["cols"])
        coeffs = [_from_pairs(c).reshape(rows, cols) for c in d["coeffs"]]
        return cls(np.array(coeffs), lo=int(d.get("lo", 0)))


def evaluate(series: MatrixLaurentSeries, p: PointLike) -> np.ndarray:
    """Return ``sum_k F_k (r e^{i theta})^k``.

    Interior points (``r < 1``) are only admissible for analytic series.
    """
    p = _as_point(p)
    if p.r < 1.0 and not series.is_analytic:
        raise DomainError("interior evaluation of a series with negative powers")
    z = p.value
    if p.r == 1.0:
        powers = np.exp(1j * p.theta * np.arange(series.lo, series.hi + 1))
    else:
        powers = z ** np.arange(series.lo, series.hi + 1)
    return np.einsum("k,kij->ij", powers, series.coeffs)


def sample_grid(series: MatrixLaurentSeries, J: int = DEFAULT_GRID) -> np.ndarray:
    """Values at ``theta_j = 2 pi j / J`` as an array of shape (J, rows, cols)."""
    if J < 2 * (series.hi - series.lo) + 1:
        raise ParameterError(
            f"grid size {J} below aliasing bound {2 * (series.hi - series.lo) + 1}")
    padded = np.zeros((J,) + series.shape, dtype=complex)
    padded[:series.coeffs.shape[0]] = series.coeffs
    values = J * np.fft.ifft(padded, axis=0)
    if series.lo:
        theta = 2 * np.pi * np.arange(J) / J
        values *= np.exp(1j * series.lo * theta)[:, None, None]
    return values


def op_norms(stack: np.ndarray) -> np.ndarray:
    """Spectral norms of a stack of matrices (last two axes)."""
    if stack.shape[-1] == 1 or stack.shape[-2] == 1:
        return np.sqrt(np.sum(np.abs(stack) ** 2, axis=(-2, -1)))
    if stack.shape[-1] > stack.shape[-2]:
        stack = np.conj(np.swapaxes(stack, -1, -2))
    k = stack.shape[-1]
    if k > 3:
        return np.linalg.norm(stack, ord=2, axis=(-2, -1))
    h = np.conj(np.swapaxes(stack, -1, -2)) @ stack
    return np.sqrt(np.maximum(_hermitian_top_eig(h), 0.0))


def _hermitian_top_eig(h: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of stacked 2x2 or 3x3 Hermitian matrices in closed form.

    Radicands are written as sums of squares so near-degenerate spectra do not
    lose precision.
    """
    d = np.real(np.diagonal(h, axis1=-2, axis2=-1))
    if h.shape[-1] == 2:
        half = (d[..., 0] - d[..., 1]) / 2
        return (d[..., 0] + d[..., 1]) / 2 + np.hypot(half, np.abs(h[..., 0, 1]))
    q = d.mean(axis=-1)
    off = np.abs(h[..., 0, 1]) ** 2 + np.abs(h[..., 0, 2]) ** 2 + np.abs(h[..., 1, 2]) ** 2
    p = np.sqrt((np.sum((d - q[..., None]) ** 2, axis=-1) + 2 * off) / 6)
    safe = np.where(p > 0, p, 1.0)
    b = (h - q[..., None, None] * np.eye(3)) / safe[..., None, None]
    half_det = np.real(
        b[..., 0, 0] * (b[..., 1, 1] * b[..., 2, 2] - b[..., 1, 2] * b[..., 2, 1])
        - b[..., 0, 1] * (b[..., 1, 0] * b[..., 2, 2] - b[..., 1, 2] * b[..., 2, 0])
        + b[..., 0, 2] * (b[..., 1, 0] * b[..., 2, 1] - b[..., 1, 1] * b[..., 2, 0])) / 2
    phi = np.arccos(np.clip(half_det, -1.0, 1.0)) / 3
    return np.where(p > 0, q + 2 * p * np.cos(phi), q)


class L2Distance(NamedTuple):
    hs: float
    """Parseval-exact distance with the Hilbert-Schmidt norm pointwise."""
    op: float
    """Grid quadrature of the squared operator norm, square-rooted."""


def _grid_for(*series: MatrixLaurentSeries, J: int | None) -> int:
    need = max(2 * (s.hi - s.lo) + 1 for s in series)
    if J is None:
        J = DEFAULT_GRID
        while J < need:
            J *= 2
    return J


def l2_distance(a: MatrixLaurentSeries, b: MatrixLaurentSeries,
                J: int | None = None) -> L2Distance:
    """L2 distance of two series on the circle.

    The Hilbert-Schmidt reading is exact from the coefficients.  The operator
    norm reading has no coefficient formula and is approximated on a grid;
    it never exceeds the HS value.
    """
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = a - b
    grid = sample_grid(diff, _grid_for(diff, J=J))
    op = float(np.sqrt(np.mean(op_norms(grid) ** 2)))
    return L2Distance(hs=diff.hs_norm(), op=op)


def sup_norm_distance(a: MatrixLaurentSeries, b: MatrixLaurentSeries,
                      J: int = DEFAULT_GRID, polish: bool = True) -> float:
    """Max over the theta grid of ``||a - b||``, optionally polished locally.

    With ``polish`` the best grid peaks are refined by a bounded scalar
    search within one grid step.  Either way the value is a maximum of
    actual samples, hence a lower bound for the essential supremum, and it
    converges as ``J`` grows for trigonometric polynomials.
    """
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = a - b
    norms = op_norms(sample_grid(diff, J))
    best = float(np.max(norms))
    if not polish or best == 0.0:
        return best
    step = 2 * math.pi / J
    peaks = np.flatnonzero((norms >= np.roll(norms, 1)) & (norms >= np.roll(norms, -1)))
    peaks = peaks[np.argsort(norms[peaks])[::-1][:_POLISH_PEAKS]]
    k = np.arange(diff.lo, diff.hi + 1)

    def neg(theta):
        val = np.einsum("k,kij->ij", np.exp(1j * theta * k), diff.coeffs)
        return -float(op_norms(val[None])[0])

    for j in peaks:
        res = minimize_scalar(neg, bounds=(j * step - step, j * step + step), method="bounded",
                              options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


@dataclass(frozen=True)
class InnerCertificate:
    """An analytic series together with its measured isometry defect."""

    series: MatrixLaurentSeries
    isometry_defect: float
    grid_size: int
    tol: float = TOL_INNER

    @property
    def valid(self) -> bool:
        return self.series.is_analytic and self.isometry_defect <= self.tol


def certify_inner(series: MatrixLaurentSeries, J: int = 512,
                  tol: float = TOL_INNER) -> InnerCertificate:
    """Measure ``max_theta ||G^* G - I||`` on a ``J``-point grid."""
    if not series.is_analytic:
        raise DomainError("inner functions must be analytic")
    while J < 2 * (series.hi - series.lo) + 1:
        J *= 2
    values = sample_grid(series, J)
    gram = np.conj(np.swapaxes(values, 1, 2)) @ values
    gram -= np.eye(series.cols)
    defect = float(np.max(op_norms(gram)))
    return InnerCertificate(series=series, isometry_defect=defect, grid_size=J, tol=tol)


def stack_series(items: Sequence[MatrixLaurentSeries], lo: int, hi: int) -> np.ndarray:
    """Dense coefficient array of shape (len(items), hi-lo+1, rows, cols)."""
    return np.stack([s.dense(lo, hi) for s in items])
