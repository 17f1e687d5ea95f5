"""Continuous inner-function lifts of paths of shift-invariant subspaces.

Submodules
----------
series
    Matrix Laurent series on the circle, evaluation, norms, inner certificates.
hardy
    Truncated vector-valued Hardy space, projections, shift invariance.
innergen
    Blaschke-Potapov products and seeded path fixtures.
lift
    Base-point normalization, interval cover and unitary patching.
verify
    Kernel estimates and the sup-norm continuity chain.
cli
    ``hardylift`` command line pipeline.
"""

__version__ = "0.1.0"

from .errors import (CertificateError, DimensionError, DomainError, HardyLiftError,
                     InvarianceError, LiftError, ParameterError, SpecError)
from .series import (CirclePoint, InnerCertificate, MatrixLaurentSeries, certify_inner, evaluate,
                     l2_distance, sample_grid, sup_norm_distance)
from .hardy import (OrthoProjection, ProjectionPath, TruncatedHardyModel, invariance_defect,
                    path_modulus, projection_distance, projection_from_inner, toeplitz,
                    wandering_dimension)
from .innergen import (InnerPathSpec, PotapovFactor, blaschke_path_spec, blaschke_scalar,
                       crossing_spec, potapov_product, random_spec, seeded_fixtures, synthesize_path)
from .lift import LiftResult, candidate_lattice, lift
from .verify import ContinuityReport, kernel_constant, main_theorem_check

__all__ = [
    "__version__",
    "CertificateError", "DimensionError", "DomainError", "HardyLiftError", "InvarianceError",
    "LiftError", "ParameterError", "SpecError",
    "CirclePoint", "InnerCertificate", "MatrixLaurentSeries", "certify_inner", "evaluate",
    "l2_distance", "sample_grid", "sup_norm_distance",
    "OrthoProjection", "ProjectionPath", "TruncatedHardyModel", "invariance_defect",
    "path_modulus", "projection_distance", "projection_from_inner", "toeplitz",
    "wandering_dimension",
    "InnerPathSpec", "PotapovFactor", "blaschke_path_spec", "blaschke_scalar", "crossing_spec",
    "potapov_product",
    "random_spec", "seeded_fixtures", "synthesize_path",
    "LiftResult", "candidate_lattice", "lift",
    "ContinuityReport", "kernel_constant", "main_theorem_check",
]
