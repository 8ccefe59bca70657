"""Exact closed-form measurement statistics.

The interaction ``U = exp(i lambda Q S)`` expands as
``1 + i s S - t S^2`` with ``s = sin(lambda Q)`` and ``t = 1 - cos(lambda Q)``
acting on the detector.  Tracing out the system leaves every statistic as a
finite combination of weak values and detector averages:

    P_f = w { 1 - 2<s> A'' + <s^2> B - 2<t> C' + 2<st> D'' + <t^2> E }

    <O>_f = (w / P_f) { <i[O,s]> A' - <{O,s}> A'' - <{O,t}> C' - <i[O,t]> C''
                        + <sOs> B + <i(sOt - tOs)> D' + <tOs + sOt> D''
                        + <tOt> E }

for a centered readout ``O``.  Primes denote real parts, double primes
imaginary parts.  For a canonical pointer read out in ``P`` the operator
averages reduce to phase-space quasi-averages (see
:func:`canonical_terms`).
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

from .detectors import (
    Q_CONVENTION,
    DetectorMoments,
    DiscreteCanonicalDetector,
    GaussianDetector,
    MatrixDetector,
    OperatorAverages,
    discrete_moments,
    gaussian_moments,
    matrix_operator_averages,
)
from .errors import ConsistencyError, OrthogonalityError, ValidationError
from .spin import SpinOperator, validate_operator
from .states import Postselection, SystemState, as_postselection, as_system_state
from .weakvalues import OMEGA_MIN, WeakValues, weak_values

NEGATIVE_PF_TOL = 1e-10
TERM_LABELS = ("A'", "A''", "C'", "C''", "B", "D'", "D''", "E")
READOUTS = ("canonical_p", "explicit")

CONVENTIONS = {
    "basis_order": "S_z eigenbasis |+1>, |0>, |-1>; system factor first in tensor products",
    "discrete_q_eigenvalues": Q_CONVENTION,
    "coupling_insertion": "U = exp(i lambda Q S); canonical commutator terms carry a factor lambda",
    "readout_centering": "readout replaced by O - <O>; the offset is added back to avg_output",
}

Detector = Union[GaussianDetector, DiscreteCanonicalDetector, MatrixDetector]


@dataclass(frozen=True)
class MeasurementSetup:
    """Everything needed to evaluate one measurement.

    ``readout`` is ``"canonical_p"`` for Gaussian and discrete pointers and
    ``"explicit"`` for matrix detectors (whose ``o_op`` is the readout).
    ``postselection=None`` means no postselection.
    """

    system: SystemState
    observable: SpinOperator
    detector: Detector
    coupling: float
    postselection: Optional[Postselection] = None
    readout: Optional[str] = None

    def __post_init__(self):
        system = as_system_state(self.system)
        obs = self.observable if isinstance(self.observable, SpinOperator) else validate_operator(self.observable)
        post = as_postselection(self.postselection, system.dim)
        if not (system.dim == obs.dim == post.dim):
            raise ValidationError(
                f"dimension mismatch: state {system.dim}, observable {obs.dim}, postselection {post.dim}"
            )
        if not math.isfinite(self.coupling):
            raise ValidationError("coupling must be finite")
        readout = self.readout or ("explicit" if isinstance(self.detector, MatrixDetector) else "canonical_p")
        if readout not in READOUTS:
            raise ValidationError(f"readout must be one of {READOUTS}, got {readout!r}")
        if isinstance(self.detector, MatrixDetector) != (readout == "explicit"):
            raise ValidationError(f"readout {readout!r} does not match detector {type(self.detector).__name__}")
        if not isinstance(self.detector, (GaussianDetector, DiscreteCanonicalDetector, MatrixDetector)):
            raise ValidationError(f"unsupported detector type {type(self.detector).__name__}")
        object.__setattr__(self, "system", system)
        object.__setattr__(self, "observable", obs)
        object.__setattr__(self, "postselection", post)
        object.__setattr__(self, "coupling", float(self.coupling))
        object.__setattr__(self, "readout", readout)


@dataclass(frozen=True)
class MeasurementResult:
    """Postselection probability and conditioned mean readout.

    ``avg_output = offset + prefactor * sum(terms.values())`` with
    ``prefactor = omega / p_f``; ``terms`` holds the eight labeled summands.
    """

    p_f: float
    avg_output: float
    terms: dict
    prefactor: float
    offset: float
    weak_values: WeakValues
    metadata: dict = field(default_factory=dict)


def _probability_inputs(avgs):
    if isinstance(avgs, DetectorMoments):
        return avgs.m_sin, avgs.sin_sq, avgs.one_minus_cos, avgs.sin_one_minus_cos, avgs.one_minus_cos_sq
    if isinstance(avgs, OperatorAverages):
        return avgs.s, avgs.s2, avgs.t, avgs.st, avgs.t2
    raise ValidationError(f"expected DetectorMoments or OperatorAverages, got {type(avgs).__name__}")


def postselection_probability(wv, avgs):
    """Probability of a successful postselection.

    Args:
        wv: weak values of the setup.
        avgs: :class:`DetectorMoments` or :class:`OperatorAverages` at the
            same coupling.

    Raises:
        ConsistencyError: if the result is below ``-1e-10``.
    """
    wv = wv.unscaled()
    s, s2, t, st, t2 = _probability_inputs(avgs)
    p = wv.omega * (
        1.0
        - 2.0 * s * wv.A.imag
        + s2 * wv.B
        - 2.0 * t * wv.C.real
        + 2.0 * st * wv.D.imag
        + t2 * wv.E
    )
    if p < -NEGATIVE_PF_TOL:
        raise ConsistencyError(f"negative postselection probability {p:.3e}: inconsistent inputs")
    if p < 0:
        warnings.warn(f"postselection probability {p:.3e} clamped to 0", stacklevel=2)
        p = 0.0
    return float(p)


def general_terms(wv, oa):
    """Eight labeled summands of the general-readout formula (inside the braces)."""
    wv = wv.unscaled()
    return {
        "A'": oa.comm_s * wv.A.real,
        "A''": -oa.anti_s * wv.A.imag,
        "C'": -oa.anti_t * wv.C.real,
        "C''": -oa.comm_t * wv.C.imag,
        "B": oa.sos * wv.B,
        "D'": -oa.i_tos_minus_sot * wv.D.real,
        "D''": oa.tos_plus_sot * wv.D.imag,
        "E": oa.tot * wv.E,
    }


def canonical_terms(wv, m):
    """Summands for a canonical pointer read out in ``P``.

    With ``[P, f(lambda Q)] = -i lambda f'(lambda Q)`` and symmetric products
    mapping to phase-space products, the operator averages become::

        <i[P,s]>          -> lambda <cos>
        <{P,s}>           -> 2 <P sin>
        <{P,t}>           -> 2 <P (1-cos)>
        <i[P,t]>          -> lambda <sin>
        <sPs>             -> <P sin^2>
        <i(sPt - tPs)>    -> lambda <sin^2 - cos (1-cos)>
        <tPs + sPt>       -> 2 <P sin (1-cos)>
        <tPt>             -> <P (1-cos)^2>

    ``m`` must already be centered (``m.m_p == 0``).
    """
    wv = wv.unscaled()
    lam = m.coupling
    return {
        "A'": lam * m.m_cos * wv.A.real,
        "A''": -2.0 * m.m_p_sin * wv.A.imag,
        "C'": -2.0 * m.p_one_minus_cos * wv.C.real,
        "C''": -lam * m.m_sin * wv.C.imag,
        "B": m.p_sin_sq * wv.B,
        "D'": lam * (m.sin_sq - m.cos_one_minus_cos) * wv.D.real,
        "D''": 2.0 * m.p_sin_one_minus_cos * wv.D.imag,
        "E": m.p_one_minus_cos_sq * wv.E,
    }


def _conditioned(wv, terms, p_f):
    if not p_f > 0:
        raise OrthogonalityError(f"postselection probability {p_f!r} <= 0: nothing to condition on", p_f)
    return wv.unscaled().omega / p_f * math.fsum(terms.values())


def average_output_general(wv, oa, p_f):
    """Conditioned mean of a centered readout from operator averages."""
    return _conditioned(wv, general_terms(wv, oa), p_f)


def average_output_canonical(wv, m, p_f):
    """Conditioned mean of the canonical readout ``P - <P>`` from quasi-averages."""
    if not isinstance(m, DetectorMoments):
        raise ValidationError("canonical readout needs DetectorMoments (Gaussian or discrete pointer)")
    if abs(m.m_p) > 1e-14:
        m = m.centered()
    return _conditioned(wv, canonical_terms(wv, m), p_f)


def _canonical_route(wv, m):
    offset = m.m_p
    mc = m.centered()
    p_f = postselection_probability(wv, mc)
    terms = canonical_terms(wv, mc)
    return p_f, terms, offset


def _general_route(wv, det, lam):
    oa = matrix_operator_averages(det, lam)
    p_f = postselection_probability(wv, oa)
    return p_f, general_terms(wv, oa), oa.o_mean


def run(setup, omega_min=OMEGA_MIN):
    """Evaluate postselection probability and conditioned readout of a setup.

    Gaussian pointers use the closed-form quasi-averages.  Discrete pointers
    use the exact operator route; the phase-space (discrete Wigner) route is
    evaluated as well and its deviation is reported in ``metadata``.
    """
    wv = weak_values(setup.system, setup.postselection, setup.observable, omega_min=omega_min)
    det, lam = setup.detector, setup.coupling
    meta = {"conventions": dict(CONVENTIONS)}
    if isinstance(det, GaussianDetector):
        p_f, terms, offset = _canonical_route(wv, gaussian_moments(det, lam))
        meta["route"] = "canonical-gaussian"
    elif isinstance(det, DiscreteCanonicalDetector):
        p_f, terms, offset = _general_route(wv, det.as_matrix_detector(), lam)
        meta["route"] = "general-discrete"
        meta["integer_coupling"] = float(lam).is_integer()
        pw, wterms, woff = _canonical_route(wv, discrete_moments(det, lam))
        if pw > 0 and p_f > 0:
            wavg = woff + wv.omega / pw * math.fsum(wterms.values())
            exact = offset + wv.omega / p_f * math.fsum(terms.values())
            meta["wigner_route_avg"] = wavg
            meta["wigner_route_difference"] = wavg - exact
    else:
        p_f, terms, offset = _general_route(wv, det, lam)
        meta["route"] = "general-matrix"
    if p_f > setup.postselection.max_eigenvalue + NEGATIVE_PF_TOL:
        raise ConsistencyError(f"postselection probability {p_f!r} exceeds the largest eigenvalue of E_f")
    if not p_f > 0:
        raise OrthogonalityError(f"postselection never succeeds (P_f = {p_f!r})", p_f)
    prefactor = wv.omega / p_f
    avg = offset + prefactor * math.fsum(terms.values())
    meta["readout_offset"] = offset
    return MeasurementResult(
        p_f=p_f,
        avg_output=float(avg),
        terms={k: float(v) for k, v in terms.items()},
        prefactor=float(prefactor),
        offset=float(offset),
        weak_values=wv,
        metadata=meta,
    )

