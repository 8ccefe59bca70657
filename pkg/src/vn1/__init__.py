"""Exact von Neumann measurement of operators with spectrum in {-1, 0, 1}."""

from .detectors import (
    DetectorMoments,
    DiscreteCanonicalDetector,
    GaussianDetector,
    GridSpec,
    MatrixDetector,
    OperatorAverages,
    discrete_conjugate_pair,
    discrete_moments,
    discrete_wigner,
    gaussian_moments,
    gaussian_moments_quadrature,
    matrix_operator_averages,
    translation_operator,
)
from .engine import (
    MeasurementResult,
    MeasurementSetup,
    average_output_canonical,
    average_output_general,
    postselection_probability,
    run,
)
from .errors import (
    ConsistencyError,
    LinearRegimeError,
    OrthogonalityError,
    ValidationError,
    Vn1Error,
)
from .spin import (
    SX,
    SY,
    SZ,
    AffineSpectrumMap,
    SpinOperator,
    affine_decompose,
    embed_two_qubit,
    exp_phi_S,
    make_spin1_axis,
    validate_operator,
)
from .states import Postselection, SystemState
from .weakvalues import WeakValues, classify_special_case, fidelity, weak_values

__version__ = "0.1.0"
