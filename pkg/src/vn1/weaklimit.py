"""Small-coupling expansions of the exact results and their validity checks.

Three truncations are provided, all for a centered readout ``O``:

``second_order``
    ``P_f ~ w {1 - 2 l <Q> A'' + l^2 <Q^2> (B - C')}`` and
    ``<O> ~ (w/P_f) {l (<i[O,Q]> A' - <{O,Q}> A'')
    + l^2/2 (-<{O,Q^2}> C' - <i[O,Q^2]> C'' + 2 <QOQ> B)}``.
``interpolation``
    the same with every ``C`` term dropped.
``linear``
    ``<O> ~ l (<i[O,Q]> A' - <{O, Q - <Q>}> A'')`` and ``P_f ~ w``.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._linalg import anticommutator, commutator, dag, expect
from .detectors import DiscreteCanonicalDetector, GaussianDetector, MatrixDetector
from .engine import MeasurementSetup, run
from .errors import LinearRegimeError, ValidationError
from .spin import exp_phi_S
from .states import SystemState
from .weakvalues import OMEGA_MIN, weak_values

VARIANTS = ("second_order", "interpolation", "linear")
WCOND_THRESHOLD = 0.1
DEFAULT_DELTA = 0.2
LINEAR_MARGIN = 0.5
NOISE_FLOOR = 1e2 * np.finfo(float).eps


@dataclass(frozen=True)
class ExpansionInputs:
    """Detector averages needed by the expansions (readout already centered)."""

    q_mean: float
    q2_mean: float
    comm_q: float  # <i[O,Q]>
    anti_q: float  # <{O,Q}>
    anti_q2: float  # <{O,Q^2}>
    comm_q2: float  # <i[O,Q^2]>
    qoq: float  # <Q O Q>
    o_mean: float = 0.0

    @property
    def q_rms(self):
        return math.sqrt(max(self.q2_mean, 0.0))


@dataclass(frozen=True)
class WeakExpansionResult:
    variant: str
    p_f_approx: float
    avg_approx: float
    margin: float = float("nan")


@dataclass(frozen=True)
class ValidityReport:
    wcond_value: float
    wcond_pass: bool
    moment_bound_margin: tuple
    delta: float
    gauge_offset_applied: float
    coherence_scale: float
    kennard_ok: bool = True


@dataclass(frozen=True)
class ScanResult:
    rows: list
    slopes: dict
    window: tuple
    notes: list = field(default_factory=list)


def expansion_inputs(detector):
    """Averages of ``Q``-polynomials against the (centered) readout."""
    if isinstance(detector, GaussianDetector):
        qb, c = detector.mean_q, detector.cov_qp
        return ExpansionInputs(
            q_mean=qb,
            q2_mean=qb**2 + detector.sigma_q**2,
            comm_q=1.0,
            anti_q=2.0 * c,
            anti_q2=4.0 * c * qb,
            comm_q2=2.0 * qb,
            qoq=2.0 * c * qb,
            o_mean=detector.mean_p,
        )
    if isinstance(detector, DiscreteCanonicalDetector):
        detector = detector.as_matrix_detector()
    if not isinstance(detector, MatrixDetector):
        raise ValidationError(f"unsupported detector type {type(detector).__name__}")
    rho, q = detector.rho, detector.q_op
    o_mean = detector.mean(detector.o_op)
    o = detector.o_op - o_mean * np.eye(detector.dim)
    q2 = q @ q

    def avg(x):
        return float(expect(x, rho).real)

    return ExpansionInputs(
        q_mean=avg(q),
        q2_mean=avg(q2),
        comm_q=avg(1j * commutator(o, q)),
        anti_q=avg(anticommutator(o, q)),
        anti_q2=avg(anticommutator(o, q2)),
        comm_q2=avg(1j * commutator(o, q2)),
        qoq=avg(q @ o @ q),
        o_mean=o_mean,
    )


def _first_order(wv, inp, lam):
    return lam * (inp.comm_q * wv.A.real - inp.anti_q * wv.A.imag)


def expand_second_order(wv, inp, coupling):
    """Expansion through ``lambda^2`` including the ``C`` terms."""
    lam = float(coupling)
    w = wv.omega
    p = w * (1.0 - 2.0 * lam * inp.q_mean * wv.A.imag + lam**2 * inp.q2_mean * (wv.B - wv.C.real))
    num = _first_order(wv, inp, lam) + 0.5 * lam**2 * (
        -inp.anti_q2 * wv.C.real - inp.comm_q2 * wv.C.imag + 2.0 * inp.qoq * wv.B
    )
    return WeakExpansionResult("second_order", p, inp.o_mean + w / p * num)


def expand_interpolation(wv, inp, coupling):
    """Second-order expansion with the ``C`` weak value neglected."""
    lam = float(coupling)
    w = wv.omega
    p = w * (1.0 - 2.0 * lam * inp.q_mean * wv.A.imag + lam**2 * inp.q2_mean * wv.B)
    num = _first_order(wv, inp, lam) + lam**2 * inp.qoq * wv.B
    return WeakExpansionResult("interpolation", p, inp.o_mean + w / p * num)


def linear_margin(wv, inp, coupling):
    """``lambda (|A| + sqrt(B)) Q_rms``; the linear formula needs it below 0.5."""
    return abs(coupling) * (abs(wv.A) + math.sqrt(max(wv.B, 0.0))) * inp.q_rms


def expand_linear(wv, inp, coupling, omega_floor=OMEGA_MIN, strict=True):
    """First-order readout with the postselection probability left at ``omega``.

    Raises:
        LinearRegimeError: when ``strict`` and the overlap is below
            ``omega_floor`` or :func:`linear_margin` reaches 0.5.
    """
    lam = float(coupling)
    margin = linear_margin(wv, inp, lam)
    if strict and (wv.omega < omega_floor or margin >= LINEAR_MARGIN):
        raise LinearRegimeError(
            f"linear regime invalid: margin {margin:.3g} (needs < {LINEAR_MARGIN}), omega {wv.omega:.3g}",
            margin,
        )
    # {O, Q - <Q>} = {O, Q} - 2 <Q> O and <O> = 0 after centering
    avg = _first_order(wv, inp, lam)
    return WeakExpansionResult("linear", wv.omega, inp.o_mean + avg, margin)


def _q_distribution(detector):
    """Eigenvalues of ``Q`` and their probabilities under the detector state."""
    if isinstance(detector, DiscreteCanonicalDetector):
        detector = detector.as_matrix_detector()
    w, v = np.linalg.eigh(detector.q_op)
    probs = np.real(np.einsum("ji,jk,ki->i", v.conj(), detector.rho, v))
    return w, np.clip(probs, 0.0, None)


def validity_check(detector, coupling, delta=DEFAULT_DELTA, n_max=6, threshold=WCOND_THRESHOLD, spin_max=1.0):
    """Diagnostics for the weak regime.

    Reports ``2 lambda sigma_Q`` against ``threshold`` and, for
    ``n = 1..n_max``, the margins ``delta^n - (2 lambda max|S|)^n <|Q - <Q>|^n>``.
    The mean of ``Q`` is gauged away before the moments are taken.
    """
    lam = abs(float(coupling))
    if isinstance(detector, GaussianDetector):
        sigma = detector.sigma_q
        offset = detector.mean_q
        moments = [detector.abs_central_moment(n) for n in range(1, n_max + 1)]
        kennard = detector.coherence_scale <= detector.sigma_p * (1 + 1e-12)
    else:
        w, probs = _q_distribution(detector)
        offset = float(np.dot(probs, w))
        dev = np.abs(w - offset)
        sigma = math.sqrt(float(np.dot(probs, dev**2)))
        moments = [float(np.dot(probs, dev**n)) for n in range(1, n_max + 1)]
        kennard = True
    wcond = 2.0 * lam * sigma
    margins = tuple(delta**n - (2.0 * lam * spin_max) ** n * m for n, m in enumerate(moments, start=1))
    return ValidityReport(
        wcond_value=wcond,
        wcond_pass=wcond < threshold,
        moment_bound_margin=margins,
        delta=delta,
        gauge_offset_applied=offset,
        coherence_scale=0.5 / sigma if sigma > 0 else float("inf"),
        kennard_ok=bool(kennard),
    )


def gauge_out_mean(setup):
    """Move the pointer mean ``<Q>`` into a rotation of the prepared state.

    ``exp(i l Q S) = exp(i l (Q - <Q>) S) exp(i l <Q> S)``, so the same
    statistics follow from a centered pointer and the rotated preparation
    ``R rho_i R^dagger`` with ``R = exp(i l <Q> S)``.  For a Gaussian pointer
    the centering is a translation in ``Q``, which leaves ``P`` statistics
    unchanged.

    Returns:
        tuple: ``(new_setup, offset)``.
    """
    det = setup.detector
    if isinstance(det, GaussianDetector):
        offset = det.mean_q
        new_det = replace(det, mean_q=0.0)
    else:
        mdet = det.as_matrix_detector() if isinstance(det, DiscreteCanonicalDetector) else det
        offset = mdet.mean(mdet.q_op)
        new_det = MatrixDetector(mdet.rho, mdet.q_op - offset * np.eye(mdet.dim), mdet.o_op)
    r = exp_phi_S(setup.observable, setup.coupling * offset).matrix
    rho = r @ setup.system.rho @ dag(r)
    new = MeasurementSetup(
        system=SystemState(rho),
        observable=setup.observable,
        detector=new_det,
        coupling=setup.coupling,
        postselection=setup.postselection,
        readout="explicit" if isinstance(new_det, MatrixDetector) else setup.readout,
    )
    return new, offset


def fit_slope(lams, errs):
    """Least-squares slope of ``log|err|`` against ``log lambda``; ``None`` if under-determined."""
    lams = np.asarray(lams, dtype=float)
    errs = np.abs(np.asarray(errs, dtype=float))
    keep = np.isfinite(errs) & (errs > NOISE_FLOOR) & (lams > 0)
    if keep.sum() < 3:
        return None
    slope, _ = np.polyfit(np.log(lams[keep]), np.log(errs[keep]), 1)
    return float(slope)


def convergence_scan(setup, lambdas, window=(1e-4, 1e-2)):
    """Exact engine against the three truncations over a coupling grid.

    Returns:
        ScanResult: one row per coupling (in the given order) and the
        log-log error slope of each variant fitted inside ``window``.
    """
    lambdas = [float(x) for x in lambdas]
    if not lambdas or any(x <= 0 for x in lambdas):
        raise ValidationError("coupling grid must be non-empty and positive")
    wv = weak_values(setup.system, setup.postselection, setup.observable)
    inp = expansion_inputs(setup.detector)
    rows = []
    for lam in lambdas:
        exact = run(replace(setup, coupling=lam))
        row = {"lambda": lam, "exact_p_f": exact.p_f, "exact_avg": exact.avg_output}
        approx = (
            expand_second_order(wv, inp, lam),
            expand_interpolation(wv, inp, lam),
            expand_linear(wv, inp, lam, strict=False),
        )
        for res in approx:
            row[res.variant] = res.avg_approx
            row[f"err_{res.variant}"] = abs(res.avg_approx - exact.avg_output)
        row["linear_valid"] = approx[2].margin < LINEAR_MARGIN
        rows.append(row)
    lo, hi = window
    inside = [r for r in rows if lo <= r["lambda"] <= hi]
    notes = []
    if len({r["lambda"] for r in inside}) < 3:
        notes.append("fewer than three couplings inside the fit window")
    slopes = {}
    for v in VARIANTS:
        slopes[v] = fit_slope([r["lambda"] for r in inside], [r[f"err_{v}"] for r in inside])
        if slopes[v] is None:
            notes.append(f"{v}: errors at noise floor, slope not applicable")
    return ScanResult(rows=rows, slopes=slopes, window=(lo, hi), notes=notes)
