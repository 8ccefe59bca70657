"""Detector (pointer) models and the detector-side averages they supply.

Three families are supported:

* :class:`GaussianDetector` -- continuous pointer with canonical pair
  ``[Q, P] = i`` and a (possibly mixed, correlated) Gaussian Wigner
  function.  Its quasi-averages are evaluated in closed form.
* :class:`DiscreteCanonicalDetector` -- a ``d``-level pointer whose readout
  ``P`` has eigenvalues ``j / sqrt(d)``, ``j = -J..J``, and whose coupling
  variable ``Q`` generates cyclic shifts of the readout basis.
* :class:`MatrixDetector` -- arbitrary density matrix, coupling operator
  and readout operator.

Canonical detectors produce :class:`DetectorMoments` (phase-space
quasi-averages of trigonometric functions of ``lambda * Q`` weighted by
powers of ``P``); matrix detectors produce :class:`OperatorAverages`.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from ._linalg import (
    anticommutator,
    as_matrix,
    check_density_matrix,
    check_hermitian,
    commutator,
    dag,
    expect,
    frozen,
    hermitian_function,
    max_abs,
    projector,
)
from .errors import ValidationError

UNCERTAINTY_TOL = 1e-12
IMAG_TOL = 1e-12

# Discrete coupling variable: Q_k = 2 pi k / d, so that exp(iQ) is the unit shift.
Q_CONVENTION = "Q_k = 2*pi*k/d (exp(iQ) is the unit cyclic shift of the P basis)"


# ---------------------------------------------------------------------------
# detector families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianDetector:
    """Gaussian pointer state in canonical units (``[Q, P] = i``).

    Attributes:
        mean_q, mean_p: first moments.
        sigma_q, sigma_p: standard deviations.
        cov_qp: symmetrised covariance ``<{dQ, dP}>/2``.
    """

    mean_q: float = 0.0
    mean_p: float = 0.0
    sigma_q: float = 0.5
    sigma_p: float = 1.0
    cov_qp: float = 0.0

    def __post_init__(self):
        vals = [self.mean_q, self.mean_p, self.sigma_q, self.sigma_p, self.cov_qp]
        if not all(np.isfinite(v) for v in vals):
            raise ValidationError("Gaussian detector parameters must be finite")
        if self.sigma_q <= 0 or self.sigma_p <= 0:
            raise ValidationError("sigma_q and sigma_p must be positive")
        det = self.sigma_q**2 * self.sigma_p**2 - self.cov_qp**2
        if det < 0.25 - UNCERTAINTY_TOL:
            raise ValidationError(
                f"uncertainty relation violated: sigma_q^2 sigma_p^2 - cov^2 = {det:.6g} < 1/4"
            )

    @classmethod
    def pure(cls, sigma_q, mean_q=0.0, mean_p=0.0):
        """Minimum-uncertainty state with no Q-P correlation."""
        return cls(mean_q, mean_p, sigma_q, 0.5 / sigma_q, 0.0)

    @property
    def coherence_scale(self):
        """Scale ``1/(2 sigma_q)`` over which coherences in the P basis decay."""
        return 0.5 / self.sigma_q

    @property
    def covariance(self):
        return np.array([[self.sigma_q**2, self.cov_qp], [self.cov_qp, self.sigma_p**2]])

    def wigner(self, q, p):
        """Wigner density at ``(q, p)`` (broadcasting)."""
        cov = self.covariance
        inv = np.linalg.inv(cov)
        dq = np.asarray(q) - self.mean_q
        dp = np.asarray(p) - self.mean_p
        quad = inv[0, 0] * dq**2 + 2 * inv[0, 1] * dq * dp + inv[1, 1] * dp**2
        return np.exp(-0.5 * quad) / (2 * np.pi * np.sqrt(np.linalg.det(cov)))

    def abs_central_moment(self, n):
        """``E|Q - mean_q|^n``."""
        from scipy.special import gamma

        return self.sigma_q**n * 2 ** (n / 2) * gamma((n + 1) / 2) / np.sqrt(np.pi)

    def discretize(self, n=256, span=8.0):
        """Position-grid representation with ``n`` points over ``mean_q +- span*sigma_q``.

        The readout is the spectral (FFT) momentum operator on the grid, so
        the returned :class:`MatrixDetector` reads out ``P``.
        """
        half = span * self.sigma_q
        h = 2 * half / n
        x = self.mean_q - half + h * np.arange(n)
        xa, xb = np.meshgrid(x, x, indexing="ij")
        xm = 0.5 * (xa + xb)
        y = xa - xb
        vq = self.sigma_q**2
        mu_p = self.mean_p + self.cov_qp / vq * (xm - self.mean_q)
        v_p = self.sigma_p**2 - self.cov_qp**2 / vq
        marg = np.exp(-((xm - self.mean_q) ** 2) / (2 * vq)) / np.sqrt(2 * np.pi * vq)
        rho = marg * np.exp(1j * mu_p * y - 0.5 * v_p * y**2) * h
        rho = 0.5 * (rho + dag(rho))
        rho /= np.trace(rho).real
        k = 2 * np.pi * np.fft.fftfreq(n, h)
        f = np.fft.fft(np.eye(n), axis=0, norm="ortho")
        p_op = dag(f) @ (k[:, None] * f)
        return MatrixDetector(rho, np.diag(x), 0.5 * (p_op + dag(p_op)), validate_state=False)


@dataclass(frozen=True)
class DiscreteCanonicalDetector:
    """``d``-level pointer with a cyclic conjugate pair; ``rho`` in the P basis ordered ``j = -J..J``."""

    d: int
    rho: np.ndarray

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 3:
            raise ValidationError(f"discrete detector needs integer d >= 3, got {self.d!r}")
        rho = check_density_matrix(self.rho, "detector state")
        if rho.shape[0] != self.d:
            raise ValidationError(f"detector state has dim {rho.shape[0]}, expected {self.d}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "rho", frozen(rho))

    @classmethod
    def basis_state(cls, d, j):
        """Readout eigenstate ``|j>``; ``j`` may be half-integer for even ``d``."""
        labels = readout_labels(d)
        idx = np.flatnonzero(np.isclose(labels, j))
        if idx.size != 1:
            raise ValidationError(f"label {j!r} is not in {labels.tolist()}")
        vec = np.zeros(d)
        vec[idx[0]] = 1.0
        return cls(d, projector(vec))

    @property
    def J(self):
        return (self.d - 1) / 2

    def as_matrix_detector(self):
        p_op, q_op = discrete_conjugate_pair(self.d)
        return MatrixDetector(self.rho, q_op, p_op)


@dataclass(frozen=True)
class MatrixDetector:
    """Explicit detector: state, coupling operator ``Q`` and readout ``O``."""

    rho: np.ndarray
    q_op: np.ndarray
    o_op: np.ndarray
    validate_state: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self.validate_state:
            rho = check_density_matrix(self.rho, "detector state")
        else:
            rho = as_matrix(self.rho, "detector state")
        q = as_matrix(self.q_op, "coupling operator")
        o = as_matrix(self.o_op, "readout operator")
        check_hermitian(q, "coupling operator", tol=1e-10)
        check_hermitian(o, "readout operator", tol=1e-10)
        if not (rho.shape == q.shape == o.shape):
            raise ValidationError(
                f"detector shapes disagree: rho {rho.shape}, Q {q.shape}, O {o.shape}"
            )
        object.__setattr__(self, "rho", frozen(rho))
        object.__setattr__(self, "q_op", frozen(0.5 * (q + dag(q))))
        object.__setattr__(self, "o_op", frozen(0.5 * (o + dag(o))))

    @property
    def dim(self):
        return self.rho.shape[0]

    def mean(self, op):
        return float(expect(op, self.rho).real)


# ---------------------------------------------------------------------------
# averages
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DetectorMoments:
    """Quasi-averages of ``P^a f(lambda Q)`` against the pointer Wigner function.

    Only the nine base moments are stored; the products appearing in the
    canonical-readout formula follow from double-angle identities and are
    exposed as properties.  ``notes`` carries diagnostics (e.g. a coarse
    quadrature grid).
    """

    coupling: float
    m_cos: float
    m_sin: float
    m_cos2: float
    m_sin2: float
    m_p: float
    m_p_cos: float
    m_p_sin: float
    m_p_cos2: float
    m_p_sin2: float
    notes: tuple = ()

    BASE = ("m_cos", "m_sin", "m_cos2", "m_sin2", "m_p", "m_p_cos", "m_p_sin", "m_p_cos2", "m_p_sin2")
    COMPOSITE = (
        "sin_sq",
        "one_minus_cos",
        "sin_one_minus_cos",
        "one_minus_cos_sq",
        "cos_one_minus_cos",
        "p_sin_sq",
        "p_one_minus_cos",
        "p_sin_one_minus_cos",
        "p_one_minus_cos_sq",
    )

    def centered(self):
        """Moments of ``P - <P>`` instead of ``P`` (unbiased readout)."""
        pb = self.m_p
        return replace(
            self,
            m_p=0.0,
            m_p_cos=self.m_p_cos - pb * self.m_cos,
            m_p_sin=self.m_p_sin - pb * self.m_sin,
            m_p_cos2=self.m_p_cos2 - pb * self.m_cos2,
            m_p_sin2=self.m_p_sin2 - pb * self.m_sin2,
        )

    # functions of Q only
    @property
    def sin_sq(self):
        return 0.5 * (1.0 - self.m_cos2)

    @property
    def one_minus_cos(self):
        return 1.0 - self.m_cos

    @property
    def sin_one_minus_cos(self):
        return self.m_sin - 0.5 * self.m_sin2

    @property
    def one_minus_cos_sq(self):
        return 1.0 - 2.0 * self.m_cos + 0.5 * (1.0 + self.m_cos2)

    @property
    def cos_one_minus_cos(self):
        return self.m_cos - 0.5 * (1.0 + self.m_cos2)

    # P times functions of Q
    @property
    def p_sin_sq(self):
        return 0.5 * (self.m_p - self.m_p_cos2)

    @property
    def p_one_minus_cos(self):
        return self.m_p - self.m_p_cos

    @property
    def p_sin_one_minus_cos(self):
        return self.m_p_sin - 0.5 * self.m_p_sin2

    @property
    def p_one_minus_cos_sq(self):
        return self.m_p - 2.0 * self.m_p_cos + 0.5 * (self.m_p + self.m_p_cos2)

    def as_dict(self):
        out = {name: getattr(self, name) for name in self.BASE}
        out.update({name: getattr(self, name) for name in self.COMPOSITE})
        return out


@dataclass(frozen=True)
class OperatorAverages:
    """Detector-side scalars entering the exact formulas for a general readout.

    With ``s = sin(lambda Q)``, ``t = 1 - cos(lambda Q)`` and ``O`` the
    (centered) readout, each field is ``Tr[X rho_D]`` for the Hermitian
    operator ``X`` named in the comment.
    """

    s: float  # s
    s2: float  # s^2
    t: float  # t
    st: float  # s t
    t2: float  # t^2
    comm_s: float  # i[O, s]
    anti_s: float  # {O, s}
    anti_t: float  # {O, t}
    comm_t: float  # i[O, t]
    sos: float  # s O s
    i_tos_minus_sot: float  # i(t O s - s O t)
    tos_plus_sot: float  # t O s + s O t
    tot: float  # t O t
    o_mean: float = 0.0  # <O> removed before the others were evaluated


# ---------------------------------------------------------------------------
# Gaussian moments
# ---------------------------------------------------------------------------


def gaussian_moments(det, coupling):
    """Closed-form quasi-averages for a Gaussian pointer.

    Uses the characteristic function ``<exp(iuQ)> = exp(iu Qbar - u^2 sq^2/2)``
    and ``<P exp(iuQ)> = (Pbar + iu cov) <exp(iuQ)>`` with ``u = a*lambda``.
    """
    lam = float(coupling)

    def char(a):
        u = a * lam
        c = np.exp(1j * u * det.mean_q - 0.5 * (u * det.sigma_q) ** 2)
        return c, (det.mean_p + 1j * u * det.cov_qp) * c

    c1, pc1 = char(1)
    c2, pc2 = char(2)
    return DetectorMoments(
        coupling=lam,
        m_cos=c1.real,
        m_sin=c1.imag,
        m_cos2=c2.real,
        m_sin2=c2.imag,
        m_p=det.mean_p,
        m_p_cos=pc1.real,
        m_p_sin=pc1.imag,
        m_p_cos2=pc2.real,
        m_p_sin2=pc2.imag,
    )


@dataclass(frozen=True)
class GridSpec:
    """Product grid for phase-space quadrature.

    ``n`` points per axis spanning ``mean +- span*sigma``; ``check`` repeats
    the quadrature on a grid of half the resolution and flags disagreement
    above ``tol``.
    """

    n: int = 241
    span: float = 8.0
    check: bool = True
    tol: float = 1e-8


def _quadrature_base(det, lam, n, span):
    q = det.mean_q + det.sigma_q * np.linspace(-span, span, n)
    p = det.mean_p + det.sigma_p * np.linspace(-span, span, n)
    hq, hp = q[1] - q[0], p[1] - p[0]
    qq, pp = np.meshgrid(q, p, indexing="ij")
    w = det.wigner(qq, pp)
    # trapezoid weights (the end points are ~exp(-span^2/2) anyway)
    wq = np.full(n, hq)
    wp = np.full(n, hp)
    wq[[0, -1]] *= 0.5
    wp[[0, -1]] *= 0.5
    w = w * np.outer(wq, wp)
    lq = lam * qq

    def avg(f):
        return float(np.sum(w * f))

    return DetectorMoments(
        coupling=lam,
        m_cos=avg(np.cos(lq)),
        m_sin=avg(np.sin(lq)),
        m_cos2=avg(np.cos(2 * lq)),
        m_sin2=avg(np.sin(2 * lq)),
        m_p=avg(pp),
        m_p_cos=avg(pp * np.cos(lq)),
        m_p_sin=avg(pp * np.sin(lq)),
        m_p_cos2=avg(pp * np.cos(2 * lq)),
        m_p_sin2=avg(pp * np.sin(2 * lq)),
    )


def gaussian_moments_quadrature(det, coupling, grid=None):
    """Same quasi-averages as :func:`gaussian_moments` by 2-D quadrature of the Wigner density.

    Serves as an independent check of the closed form.  When the grid check
    is on and a half-resolution grid disagrees by more than ``grid.tol``
    the returned moments carry a ``"coarse-grid"`` note.
    """
    grid = grid or GridSpec()
    lam = float(coupling)
    fine = _quadrature_base(det, lam, grid.n, grid.span)
    if not grid.check:
        return fine
    coarse = _quadrature_base(det, lam, max(grid.n // 2 + 1, 3), grid.span)
    gap = max(abs(getattr(fine, k) - getattr(coarse, k)) for k in DetectorMoments.BASE)
    if gap > grid.tol:
        return replace(fine, notes=(f"coarse-grid: half-resolution estimate differs by {gap:.3e}",))
    return fine


# ---------------------------------------------------------------------------
# discrete canonical pair
# ---------------------------------------------------------------------------


def readout_labels(d):
    """``j = -J, -J+1, ..., J`` with ``J = (d-1)/2``."""
    return np.arange(d) - (d - 1) / 2


def fourier_basis(d):
    """Columns are the coupling-variable eigenstates ``|k~> = d^-1/2 sum_j exp(-2 pi i j k/d) |j>``."""
    j = readout_labels(d)
    return np.exp(-2j * np.pi * np.outer(j, j) / d) / np.sqrt(d)


def translation_operator(d):
    """Cyclic shift ``T|j> = (-1)^((d-1) r) |j (+) 1>`` of the readout basis.

    ``r`` counts how many times ``d`` was subtracted to bring ``j+1`` back
    into ``-J..J`` (so only the wrap from ``J`` to ``-J`` can carry a sign,
    and only for even ``d``).
    """
    if d < 2:
        raise ValidationError("translation operator needs d >= 2")
    t = np.zeros((d, d), dtype=complex)
    for i in range(d):
        wraps, target = divmod(i + 1, d)
        t[target, i] = (-1) ** ((d - 1) * wraps)
    return t


def q_eigenvalues(d, convention="shift"):
    """Eigenvalues of the discrete coupling variable.

    ``"shift"`` (operative): ``2 pi k / d``.  ``"sqrt"``: the alternative
    labeling ``2 pi k / sqrt(d)``, for reporting only.
    """
    k = readout_labels(d)
    if convention == "shift":
        return 2 * np.pi * k / d
    if convention == "sqrt":
        return 2 * np.pi * k / np.sqrt(d)
    raise ValidationError(f"unknown Q convention {convention!r}")


def discrete_conjugate_pair(d):
    """Readout ``P = diag(j/sqrt(d))`` and coupling ``Q`` diagonal in the Fourier basis.

    ``exp(iQ)`` equals :func:`translation_operator` exactly.
    """
    if d < 3:
        raise ValidationError("discrete conjugate pair needs d >= 3")
    p_op = np.diag(readout_labels(d) / np.sqrt(d)).astype(complex)
    f = fourier_basis(d)
    q_op = (f * q_eigenvalues(d)) @ dag(f)
    return p_op, 0.5 * (q_op + dag(q_op))


def discrete_wigner(det):
    """Table ``W[j, k] = Re(<k~|j><j|rho|k~>)`` (rows: readout ``j``, columns: ``k``).

    Summing a row gives ``<j|rho|j>``; summing a column gives ``<k~|rho|k~>``.
    """
    rho = det.rho if hasattr(det, "rho") else np.asarray(det)
    f = fourier_basis(rho.shape[0])
    return np.real(f.conj() * (rho @ f))


def discrete_moments(det, coupling):
    """Quasi-averages ``sum_jk W[j,k] f(P_j, lambda Q_k)`` for the canonical-readout formula."""
    lam = float(coupling)
    w = discrete_wigner(det)
    d = det.d
    p = (readout_labels(d) / np.sqrt(d))[:, None]
    lq = lam * q_eigenvalues(d)[None, :]

    def avg(f):
        return float(np.sum(w * f))

    return DetectorMoments(
        coupling=lam,
        m_cos=avg(np.cos(lq)),
        m_sin=avg(np.sin(lq)),
        m_cos2=avg(np.cos(2 * lq)),
        m_sin2=avg(np.sin(2 * lq)),
        m_p=avg(p),
        m_p_cos=avg(p * np.cos(lq)),
        m_p_sin=avg(p * np.sin(lq)),
        m_p_cos2=avg(p * np.cos(2 * lq)),
        m_p_sin2=avg(p * np.sin(2 * lq)),
        notes=() if float(lam).is_integer() else ("non-integer coupling: exp(i lambda Q) is not a basis shift",),
    )


# ---------------------------------------------------------------------------
# explicit matrices
# ---------------------------------------------------------------------------


def coupling_functions(q_op, coupling):
    """``(sin(lambda Q), 1 - cos(lambda Q))`` by spectral calculus."""
    s = hermitian_function(q_op, lambda w: np.sin(coupling * w))
    # 2 sin^2(x/2) avoids cancellation for small arguments
    t = hermitian_function(q_op, lambda w: 2.0 * np.sin(0.5 * coupling * w) ** 2)
    return s, t


def matrix_operator_averages(det, coupling, center=True):
    """All detector scalars of the general exact formula for a matrix detector.

    Args:
        det: :class:`MatrixDetector`.
        coupling: ``lambda``.
        center: replace ``O`` by ``O - <O>`` first (unbiased readout).
    """
    rho, o = det.rho, np.array(det.o_op)
    o_mean = det.mean(o) if center else 0.0
    o = o - o_mean * np.eye(det.dim)
    s, t = coupling_functions(det.q_op, coupling)

    def avg(x, name):
        val = expect(x, rho)
        if abs(val.imag) > IMAG_TOL * max(1.0, max_abs(x)):
            raise ValidationError(f"average of {name} has imaginary part {val.imag:.3e}")
        return float(val.real)

    tos, sot = t @ o @ s, s @ o @ t
    return OperatorAverages(
        s=avg(s, "s"),
        s2=avg(s @ s, "s^2"),
        t=avg(t, "t"),
        st=avg(0.5 * anticommutator(s, t), "st"),
        t2=avg(t @ t, "t^2"),
        comm_s=avg(1j * commutator(o, s), "i[O,s]"),
        anti_s=avg(anticommutator(o, s), "{O,s}"),
        anti_t=avg(anticommutator(o, t), "{O,t}"),
        comm_t=avg(1j * commutator(o, t), "i[O,t]"),
        sos=avg(s @ o @ s, "sOs"),
        i_tos_minus_sot=avg(1j * (tos - sot), "i(tOs-sOt)"),
        tos_plus_sot=avg(tos + sot, "tOs+sOt"),
        tot=avg(t @ o @ t, "tOt"),
        o_mean=o_mean,
    )

