"""Ground-truth generators: Blaschke-Potapov products and paths of them.

An :class:`InnerPathSpec` describes ``t -> G_t = E * prod_j U_j(t) B_j(t)``
with ``B_j(t) = b_{a_j(t)} P_j + (I - P_j)``, a constant isometry ``E``
(``n x m``) and rank-one projectors ``P_j``.  Synthesizing the spec yields the
projection path together with the generating inner functions, which serve as
oracles for the lift.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import CertificateError, ParameterError, SpecError
from .hardy import OrthoProjection, ProjectionPath, TruncatedHardyModel, projection_from_inner
from .series import (DEFAULT_DEGREE, TOL_INNER, InnerCertificate, MatrixLaurentSeries,
                     _from_pairs, certify_inner)

__all__ = [
    "MAX_ZERO_MODULUS",
    "blaschke_scalar",
    "PotapovFactor",
    "Trajectory",
    "UnitaryTrajectory",
    "FactorPath",
    "InnerPathSpec",
    "potapov_product",
    "synthesize_path",
    "random_spec",
    "seeded_fixtures",
    "crossing_spec",
    "blaschke_path_spec",
]

MAX_ZERO_MODULUS = 0.9
_UNIT_TOL = 1e-12


def blaschke_scalar(a: complex, D: int = DEFAULT_DEGREE) -> MatrixLaurentSeries:
    """Coefficients of ``(|a|/a) (a - z) / (1 - conj(a) z)`` up to degree ``D``.

    For ``a = 0`` the factor is ``z``.
    """
    a = complex(a)
    if abs(a) >= 1:
        raise ParameterError(f"Blaschke zero must lie in the open disk, got {a}")
    c = np.zeros(D + 1, dtype=complex)
    if a == 0:
        c[1] = 1.0
    else:
        phase = abs(a) / a
        c[0] = abs(a)
        k = np.arange(1, D + 1)
        c[1:] = -phase * (1 - abs(a) ** 2) * np.conj(a) ** (k - 1)
    return MatrixLaurentSeries(c[:, None, None])


def _unitary_defect(u: np.ndarray) -> float:
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1]), 2))


def _polar_unitary(x: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(x)
    return u @ vh


@dataclass(frozen=True, eq=False)
class PotapovFactor:
    """``U (b_a P + I - P)`` with a rank-one orthogonal projector ``P``."""

    zero: complex
    projector: np.ndarray
    left_unitary: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.projector, dtype=complex)
        u = np.asarray(self.left_unitary, dtype=complex)
        if abs(self.zero) > MAX_ZERO_MODULUS:
            raise ParameterError(f"|a| = {abs(self.zero):.3f} exceeds {MAX_ZERO_MODULUS}")
        if np.linalg.norm(p @ p - p, 2) > _UNIT_TOL or np.linalg.norm(p - p.conj().T, 2) > _UNIT_TOL:
            raise ParameterError("projector is not an orthogonal projection")
        if abs(np.trace(p).real - 1) > 1e-9:
            raise ParameterError("projector must have rank one")
        if _unitary_defect(u) > _UNIT_TOL:
            raise ParameterError("left factor is not unitary")
        object.__setattr__(self, "projector", p)
        object.__setattr__(self, "left_unitary", u)

    @classmethod
    def from_vector(cls, a: complex, v, U=None) -> "PotapovFactor":
        v = np.asarray(v, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        U = np.eye(v.size, dtype=complex) if U is None else U
        return cls(complex(a), np.outer(v, v.conj()), U)

    def series(self, D: int = DEFAULT_DEGREE) -> MatrixLaurentSeries:
        m = self.projector.shape[0]
        b = blaschke_scalar(self.zero, D).coeffs[:, 0, 0]
        c = b[:, None, None] * self.projector[None]
        c[0] += np.eye(m) - self.projector
        return self.left_unitary @ MatrixLaurentSeries(c)


class Trajectory:
    """Piecewise-linear table ``t -> value`` on knots in ``[0, 1]``.

    Values may be scalars or arrays; without explicit knots the values are
    spread uniformly over ``[0, 1]``.
    """

    def __init__(self, values, knots=None):
        vals = np.asarray(values, dtype=complex)
        if vals.ndim == 0:
            vals = vals[None]
        if knots is None:
            knots = np.linspace(0.0, 1.0, len(vals)) if len(vals) > 1 else np.zeros(1)
        knots = np.asarray(knots, dtype=float)
        if knots.shape != (len(vals),):
            raise SpecError("knots and values must have the same length")
        if np.any(np.diff(knots) <= 0):
            raise SpecError("trajectory knots must increase strictly")
        self.values = vals
        self.knots = knots

    @classmethod
    def constant(cls, value) -> "Trajectory":
        return cls(np.asarray(value, dtype=complex)[None])

    def __call__(self, t: float):
        if len(self.knots) == 1:
            return self.values[0]
        j = int(np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, len(self.knots) - 2))
        t0, t1 = self.knots[j], self.knots[j + 1]
        w = float(np.clip((t - t0) / (t1 - t0), 0.0, 1.0))
        return (1 - w) * self.values[j] + w * self.values[j + 1]

    def to_dict(self) -> dict:
        return {"knots": [float(k) for k in self.knots],
                "values": [_pairs(v) for v in self.values]}


def _pairs(v):
    v = np.asarray(v, dtype=complex)
    if v.ndim == 0:
        return [float(v.real), float(v.imag)]
    return [_pairs(x) for x in v]


def _complex(x, ndim: int) -> np.ndarray:
    """Parse an ``ndim``-dimensional complex array given as reals or ``[re, im]`` pairs."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == ndim + 1 and arr.shape[-1] == 2:
        return _from_pairs(arr)
    if arr.ndim == ndim:
        return arr.astype(complex)
    raise SpecError(f"expected a {ndim}-d complex array, got shape {arr.shape}")


class UnitaryTrajectory:
    """Continuous unitary path, either ``base @ expm(i t H)`` or a table.

    Table entries are interpolated linearly and pulled back to the unitary
    group through their polar factor.
    """

    def __init__(self, base=None, generator=None, table: Trajectory | None = None, size=None):
        if table is None and base is None:
            base = np.eye(size, dtype=complex)
        self.base = None if base is None else np.asarray(base, dtype=complex)
        self.generator = None if generator is None else np.asarray(generator, dtype=complex)
        self.table = table
        if self.generator is not None and np.linalg.norm(self.generator - self.generator.conj().T) > 1e-12:
            raise SpecError("unitary generator must be Hermitian")

    def __call__(self, t: float) -> np.ndarray:
        if self.table is not None:
            return _polar_unitary(np.asarray(self.table(t)))
        if self.generator is None:
            return self.base
        return self.base @ scipy.linalg.expm(1j * t * self.generator)

    def to_dict(self):
        if self.table is not None:
            return [_pairs(v) for v in self.table.values] if np.allclose(
                self.table.knots, np.linspace(0, 1, len(self.table.knots))) else self.table.to_dict()
        d = {"base": _pairs(self.base)}
        if self.generator is not None:
            d["generator"] = _pairs(self.generator)
        return d


@dataclass(eq=False)
class FactorPath:
    """Parameter trajectories of one Potapov factor."""

    zero: Trajectory
    vector: np.ndarray
    unitary: UnitaryTrajectory | None = None

    def at(self, t: float) -> PotapovFactor:
        m = len(self.vector)
        U = np.eye(m, dtype=complex) if self.unitary is None else self.unitary(t)
        return PotapovFactor.from_vector(complex(self.zero(t)), self.vector, U)


@dataclass(eq=False)
class InnerPathSpec:
    """Specification of a path of ``n x m`` Blaschke-Potapov products."""

    n: int
    m: int
    D: int = DEFAULT_DEGREE
    t_count: int = 33
    embed: np.ndarray | None = None
    factors: list = field(default_factory=list)

    def __post_init__(self):
        if self.embed is None:
            self.embed = np.eye(self.n, self.m, dtype=complex)
        self.embed = np.asarray(self.embed, dtype=complex)
        self.validate()

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.t_count)

    @property
    def model(self) -> TruncatedHardyModel:
        return TruncatedHardyModel(self.n, self.D)

    def validate(self):
        if not 1 <= self.m <= self.n:
            raise SpecError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        if self.t_count < 2:
            raise SpecError("tGrid.count must be at least 2")
        if self.D < 1:
            raise SpecError("D must be positive")
        if self.embed.shape != (self.n, self.m):
            raise SpecError(f"embed must be {self.n}x{self.m}, got {self.embed.shape}")
        if _unitary_defect(self.embed) > 1e-10:
            raise SpecError("embed is not an isometry")
        for j, f in enumerate(self.factors):
            if len(f.vector) != self.m:
                raise SpecError(f"factor {j}: projector vector must have length m={self.m}")
            if np.linalg.norm(f.vector) == 0:
                raise SpecError(f"factor {j}: projector vector is zero")
            zeros = np.array([f.zero(t) for t in self.t_grid])
            if np.max(np.abs(zeros)) > MAX_ZERO_MODULUS:
                raise SpecError(f"factor {j}: |a(t)| exceeds {MAX_ZERO_MODULUS}")
            if len(zeros) > 1 and np.max(np.abs(np.diff(zeros))) > 0.5:
                raise SpecError(f"factor {j}: zero trajectory jumps by more than 0.5 per step")

    def factors_at(self, t: float) -> list:
        return [f.at(t) for f in self.factors]

    # JSON ---------------------------------------------------------------
    def to_dict(self) -> dict:
        out = {"n": self.n, "m": self.m, "D": self.D, "tGrid": {"count": self.t_count},
               "embed": {"matrix": _pairs(self.embed)}, "factors": []}
        for f in self.factors:
            d = {"a": f.zero.to_dict(), "P": {"vector": _pairs(f.vector)}}
            if f.unitary is not None:
                d["U"] = f.unitary.to_dict()
            out["factors"].append(d)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "InnerPathSpec":
        try:
            n, m = int(d["n"]), int(d["m"])
            D = int(d.get("D", DEFAULT_DEGREE))
            count = int(d.get("tGrid", {}).get("count", 33))
            embed = d.get("embed")
            embed = None if embed is None else _complex(embed["matrix"], 2)
            factors = [_factor_from_dict(f, m, j) for j, f in enumerate(d.get("factors", []))]
        except SpecError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"malformed spec: {exc!r}") from exc
        return cls(n=n, m=m, D=D, t_count=count, embed=embed, factors=factors)


def _factor_from_dict(f: dict, m: int, j: int) -> FactorPath:
    where = f"factors[{j}]"
    if "a" not in f or "P" not in f:
        raise SpecError(f"{where}: fields 'a' and 'P' are required")
    a = f["a"]
    if isinstance(a, dict):
        zero = Trajectory(_complex(a["values"], 1), a.get("knots"))
    else:
        zero = Trajectory(_complex(a, 1))
    vec = _complex(f["P"]["vector"], 1)
    unitary = None
    if "U" in f and f["U"] is not None:
        u = f["U"]
        if isinstance(u, dict) and "base" in u:
            unitary = UnitaryTrajectory(base=_complex(u["base"], 2),
                                        generator=None if "generator" not in u
                                        else _complex(u["generator"], 2))
        elif isinstance(u, dict):
            vals = _complex(u["values"], 3)
            unitary = UnitaryTrajectory(table=Trajectory(vals, u.get("knots")))
        else:
            vals = _complex(u, 3)
            unitary = UnitaryTrajectory(table=Trajectory(vals))
    return FactorPath(zero=zero, vector=vec, unitary=unitary)


def potapov_product(spec: InnerPathSpec, t_index: int, J: int = 512,
                    tol: float = TOL_INNER) -> InnerCertificate:
    """Certified ``embed @ prod_j U_j(t) B_j(t)`` at grid point ``t_index``."""
    t = spec.t_grid[t_index]
    G = MatrixLaurentSeries.constant(np.eye(spec.m))
    for fac in spec.factors_at(t):
        G = (G @ fac.series(spec.D)).truncate(spec.D)
    G = spec.embed @ G
    cert = certify_inner(G, J=J, tol=tol)
    if not cert.valid:
        raise CertificateError(
            f"product at t={t:.4g} has isometry defect {cert.isometry_defect:.2e} "
            f"(zeros {[complex(f.zero(t)) for f in spec.factors]})",
            defect=cert.isometry_defect)
    return cert


def synthesize_path(spec: InnerPathSpec, workers: int | None = None):
    """Projection path of ``spec`` plus the generating inner functions."""
    model = spec.model
    idx = range(spec.t_count)

    def one(j):
        cert = potapov_product(spec, j)
        return projection_from_inner(cert, model), cert

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, idx))
    else:
        results = [one(j) for j in idx]
    path = ProjectionPath(model, spec.t_grid, tuple(p for p, _ in results))
    return path, [c for _, c in results]


# fixtures ----------------------------------------------------------------

def _random_unit(rng, m):
    v = rng.normal(size=m) + 1j * rng.normal(size=m)
    return v / np.linalg.norm(v)


def _random_isometry(rng, n, m):
    x = rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))
    q, r = np.linalg.qr(x)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _random_hermitian(rng, m, scale):
    x = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    return scale * (x + x.conj().T) / 2


def _random_segment(rng, amax, amin=0.15):
    """Endpoints of a zero trajectory whose segment avoids the origin."""
    while True:
        ends = [math.sqrt(rng.uniform(amin ** 2, amax ** 2)) * np.exp(2j * np.pi * rng.uniform())
                for _ in range(2)]
        a0, a1 = ends
        # distance from 0 to the segment
        d = a1 - a0
        s = np.clip(-(np.conj(a0) * d).real / (abs(d) ** 2 or 1.0), 0.0, 1.0)
        if abs(a0 + s * d) >= amin and abs(a1 - a0) <= 0.6:
            return a0, a1


def random_spec(seed: int, n: int, m: int, n_factors: int, D: int = DEFAULT_DEGREE,
                t_count: int = 33, amax: float = 0.75) -> InnerPathSpec:
    """Seeded smooth fixture: linear zero trajectories, exponential unitaries."""
    rng = np.random.default_rng(seed)
    factors = []
    for _ in range(n_factors):
        a0, a1 = _random_segment(rng, amax)
        unitary = None
        if m > 1:
            unitary = UnitaryTrajectory(base=_random_isometry(rng, m, m),
                                        generator=_random_hermitian(rng, m, 0.3))
        factors.append(FactorPath(Trajectory([a0, a1]), _random_unit(rng, m), unitary))
    return InnerPathSpec(n=n, m=m, D=D, t_count=t_count,
                         embed=_random_isometry(rng, n, m), factors=factors)


_SHAPES = [(1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3)]


def seeded_fixtures(count: int = 20, seed: int = 20240601, D: int = DEFAULT_DEGREE,
                    t_count: int = 33) -> list:
    """``count`` fixtures cycling through every ``(n, m)`` with ``n <= 3``."""
    rng = np.random.default_rng(seed)
    specs = []
    for k in range(count):
        n, m = _SHAPES[k % len(_SHAPES)]
        nf = 1 + k % 3
        specs.append(random_spec(int(rng.integers(2 ** 31)), n, m, nf, D=D, t_count=t_count))
    return specs


def blaschke_path_spec(zeros: Sequence[complex] | Trajectory, t_count: int = 33,
                       D: int = DEFAULT_DEGREE) -> InnerPathSpec:
    """Scalar path ``t -> b_{a(t)}`` from a table of zeros."""
    traj = zeros if isinstance(zeros, Trajectory) else Trajectory(list(zeros))
    return InnerPathSpec(n=1, m=1, D=D, t_count=t_count,
                         factors=[FactorPath(traj, np.ones(1))])


def crossing_spec(t_count: int = 33, D: int = DEFAULT_DEGREE, spin: float = 0.8) -> InnerPathSpec:
    """``n = 3, m = 2`` fixture whose base-point singular values cross at ``t = 0.5``.

    ``G_t = E R(t) diag(b_{a_1(t)}, b_{a_2(t)})`` with real zeros moving
    towards each other (they coincide at ``t = 0.5``) and a slowly rotating
    ``R(t)``, so the eigenvectors of the base-point Gram matrix turn while
    their eigenvalues cross.
    """
    gen = spin * np.array([[0, -1j], [1j, 0]])
    embed = np.array([[1, 0], [0, 1 / math.sqrt(2)], [0, 1 / math.sqrt(2)]], dtype=complex)
    factors = [
        FactorPath(Trajectory([0.2, 0.6]), np.array([1.0, 0.0]),
                   UnitaryTrajectory(base=np.eye(2), generator=gen)),
        FactorPath(Trajectory([0.6, 0.2]), np.array([0.0, 1.0])),
    ]
    return InnerPathSpec(n=3, m=2, D=D, t_count=t_count, embed=embed, factors=factors)
