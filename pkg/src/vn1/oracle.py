"""Brute-force reference: evolve the joint state and postselect it.

Nothing here uses weak values or the closed-form engine; the module only
builds ``rho+ = U (rho_i x rho_D) U^dagger`` explicitly, applies
``E_f x 1``, traces out the system and reads the detector.
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.linalg import expm

from ._linalg import as_matrix, check_hermitian, dag, expect, hermitian_function
from .detectors import DiscreteCanonicalDetector, GaussianDetector, MatrixDetector
from .errors import OrthogonalityError, ValidationError
from .spin import SpinOperator

if TYPE_CHECKING:  # pragma: no cover
    from .engine import MeasurementResult, MeasurementSetup

MAX_DETECTOR_DIM = 512
PF_FLOOR = 1e-14
GRID_SIZES = (128, 256, 512)


@dataclass(frozen=True)
class JointState:
    """System-detector density matrix, system factor first."""

    rho: np.ndarray
    n_s: int
    n_d: int


@dataclass(frozen=True)
class ConditionedDetectorState:
    """Normalized detector state after postselection and its success probability."""

    rho_df: np.ndarray
    p_f: float


@dataclass(frozen=True)
class OracleResult:
    p_f: float
    avg_output: float
    error_bar: float = 0.0


@dataclass(frozen=True)
class ComparisonReport:
    dp_f: float
    davg: float
    rel_p_f: float
    rel_avg: float
    tol: float
    passed: bool
    suspects: tuple = ()


def _spin_matrix(spin):
    return spin.matrix if isinstance(spin, SpinOperator) else as_matrix(spin, "observable")


def interaction_unitary(spin, q_op, coupling, method="spectral"):
    """``exp(i lambda S x Q)`` on the joint space.

    ``"spectral"`` uses the quadratic closure of ``exp(i phi S)`` per
    eigenvalue of ``Q``; ``"expm"`` exponentiates the full joint generator
    (independent cross-check, slower).
    """
    s = _spin_matrix(spin)
    q = as_matrix(q_op, "coupling operator")
    check_hermitian(q, "coupling operator", tol=1e-10)
    n_s, n_d = s.shape[0], q.shape[0]
    if method == "expm":
        return expm(1j * coupling * np.kron(s, q))
    if method != "spectral":
        raise ValidationError(f"unknown method {method!r}")
    sin_q = hermitian_function(q, lambda w: np.sin(coupling * w))
    t_q = hermitian_function(q, lambda w: 2.0 * np.sin(0.5 * coupling * w) ** 2)
    return np.eye(n_s * n_d) + 1j * np.kron(s, sin_q) - np.kron(s @ s, t_q)


def evolve_joint(rho_i, rho_d, spin, q_op, coupling, method="spectral"):
    """Joint state after the interaction."""
    rho_i = as_matrix(getattr(rho_i, "rho", rho_i), "system state")
    rho_d = as_matrix(rho_d, "detector state")
    if rho_d.shape[0] > MAX_DETECTOR_DIM:
        raise ValidationError(f"detector dimension {rho_d.shape[0]} exceeds the dense cap {MAX_DETECTOR_DIM}")
    u = interaction_unitary(spin, q_op, coupling, method)
    rho = u @ np.kron(rho_i, rho_d) @ dag(u)
    return JointState(rho, rho_i.shape[0], rho_d.shape[0])


def partial_trace_system(op, n_s, n_d):
    """Trace out the first (system) factor."""
    return np.einsum("ajak->jk", op.reshape(n_s, n_d, n_s, n_d))


def postselect(joint, e_f):
    """Detector state conditioned on the postselection ``e_f``."""
    e = as_matrix(getattr(e_f, "effect", e_f), "postselection")
    n_s, n_d = joint.n_s, joint.n_d
    r = joint.rho.reshape(n_s, n_d, n_s, n_d)
    unnorm = np.einsum("ab,bjak->jk", e, r)
    p_f = float(np.trace(unnorm).real)
    if p_f <= PF_FLOOR:
        raise OrthogonalityError(f"postselection probability {p_f:.3e} is zero", p_f)
    return ConditionedDetectorState(unnorm / p_f, p_f)


def oracle_average(cond, o_op):
    """``Tr[O rho_D|f]``."""
    val = expect(as_matrix(o_op, "readout operator"), cond.rho_df)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ValidationError(f"readout average has imaginary part {val.imag:.3e}")
    return float(val.real)


def _matrix_oracle(system, post, spin, det, coupling, method):
    joint = evolve_joint(system, det.rho, spin, det.q_op, coupling, method)
    cond = postselect(joint, post)
    return OracleResult(cond.p_f, oracle_average(cond, det.o_op))


def run_oracle(setup, method="spectral", grid_sizes=GRID_SIZES, span=8.0):
    """Reference values for a measurement setup.

    Gaussian pointers are discretized on position grids of the given sizes;
    the finest grid gives the value and the spread over grids the error bar.
    """
    det = setup.detector
    args = (setup.system.rho, setup.postselection.effect, setup.observable)
    if isinstance(det, MatrixDetector):
        return _matrix_oracle(*args, det, setup.coupling, method)
    if isinstance(det, DiscreteCanonicalDetector):
        return _matrix_oracle(*args, det.as_matrix_detector(), setup.coupling, method)
    if isinstance(det, GaussianDetector):
        results = [
            _matrix_oracle(*args, det.discretize(n, span), setup.coupling, method) for n in sorted(grid_sizes)
        ]
        best = results[-1]
        bar = max(
            max(abs(r.p_f - best.p_f), abs(r.avg_output - best.avg_output)) for r in results[:-1]
        ) if len(results) > 1 else 0.0
        return OracleResult(best.p_f, best.avg_output, bar)
    raise ValidationError(f"unsupported detector type {type(det).__name__}")


def compare(engine, oracle, tol):
    """Compare an engine result with oracle values.

    Args:
        engine: ``MeasurementResult``.
        oracle: :class:`OracleResult` or a ``(p_f, avg)`` pair.
        tol: absolute tolerance on both quantities.

    When the readout disagrees, ``suspects`` lists the engine summands whose
    sign flip would close the gap.
    """
    if not isinstance(oracle, OracleResult):
        oracle = OracleResult(*oracle)
    dp = engine.p_f - oracle.p_f
    da = engine.avg_output - oracle.avg_output
    rel = lambda d, ref: abs(d) / abs(ref) if ref else abs(d)  # noqa: E731
    passed = abs(dp) <= tol and abs(da) <= tol
    suspects = ()
    if abs(da) > tol:
        gap = engine.avg_output - oracle.avg_output
        suspects = tuple(
            label
            for label, val in engine.terms.items()
            if abs(val) * engine.prefactor > tol and abs(gap - 2.0 * engine.prefactor * val) <= tol
        )
    return ComparisonReport(
        dp_f=dp,
        davg=da,
        rel_p_f=rel(dp, oracle.p_f),
        rel_avg=rel(da, oracle.avg_output),
        tol=tol,
        passed=passed,
        suspects=suspects,
    )
