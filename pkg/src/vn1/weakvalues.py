"""Overlap and generalized weak values of a preparation/postselection pair.

For a measured operator ``S`` (with ``S^3 = S``) five ratios of traces
control the exact measurement statistics::

    A = Tr[E S rho] / w          B = Tr[E S rho S] / w
    C = Tr[E S^2 rho] / w        D = Tr[E S rho S^2] / w
    E = Tr[E S^2 rho S^2] / w    with w = Tr[E rho]

``B`` and ``E`` are real; ``A``, ``C`` and ``D`` are complex in general.
They are "weak values" by analogy only: nothing here assumes a weak
coupling.
"""

from dataclasses import dataclass, field

import numpy as np

from ._linalg import commutator, expect, max_abs
from .errors import OrthogonalityError, ValidationError
from .spin import SpinOperator, validate_operator
from .states import as_postselection, as_system_state

OMEGA_MIN = 1e-12
COMMUTE_TOL = 1e-10
REAL_TOL = 1e-12


@dataclass(frozen=True)
class WeakValues:
    """The overlap and the five generalized weak values.

    When built with ``scaled=True`` the five values are multiplied by
    ``omega`` (plain traces), which stays finite for orthogonal pairs.
    """

    omega: float
    A: complex
    B: float
    C: complex
    D: complex
    E: float
    scaled: bool = False

    def as_dict(self):
        out = {"omega": self.omega}
        for name in "ABCDE":
            val = complex(getattr(self, name))
            out[name] = (val.real, val.imag)
        return out

    def unscaled(self):
        if not self.scaled:
            return self
        w = self.omega
        return WeakValues(w, self.A / w, self.B / w, self.C / w, self.D / w, self.E / w)


@dataclass(frozen=True)
class SpecialCaseReport:
    """Which structural shortcuts apply, and how well their identities hold.

    ``residuals`` maps every class name to ``{identity: max-norm residual}``;
    residuals are computed for all classes, ``flags`` says which ones the
    inputs are expected to satisfy.
    """

    flags: dict
    residuals: dict = field(default_factory=dict)

    def active_residuals(self):
        return {k: v for k, v in self.residuals.items() if self.flags.get(k)}

    def max_active_residual(self):
        vals = [r for group in self.active_residuals().values() for r in group.values()]
        return max(vals, default=0.0)


def _coerce(rho_i, e_f, spin):
    state = as_system_state(rho_i)
    post = as_postselection(e_f, state.dim)
    if not isinstance(spin, SpinOperator):
        spin = validate_operator(spin)
    if not (state.dim == post.dim == spin.dim):
        raise ValidationError(
            f"dimension mismatch: state {state.dim}, postselection {post.dim}, operator {spin.dim}"
        )
    return state.rho, post.effect, spin.matrix


def fidelity(rho_i, e_f):
    """Overlap ``Tr[E_f rho_i]`` between preparation and postselection."""
    state = as_system_state(rho_i)
    post = as_postselection(e_f, state.dim)
    if state.dim != post.dim:
        raise ValidationError(f"dimension mismatch: state {state.dim}, postselection {post.dim}")
    val = expect(post.effect, state.rho)
    return max(float(val.real), 0.0)


def _resolved(w):
    """Eigenvalues with those below the eigensolver's resolution set to zero."""
    floor = 10 * w.size * np.finfo(float).eps * max(w.max(), 0.0)
    return np.where(w > floor, w, 0.0)


def _traces(rho, e, s):
    """``omega`` and the five numerators from the spectral factors of ``rho`` and ``E``.

    With ``rho = sum p_k |k><k|`` and ``E = sum e_l |l><l|`` every trace is
    ``sum e_l p_k <l|X|k> conj(<l|Y|k>)`` for ``X, Y`` in ``{1, S, S^2}``.
    Summing amplitude products keeps ``omega``, ``B`` and ``E`` non-negative
    and, for rank-one ends, makes the pure-state identities hold to rounding.
    """
    p, vk = np.linalg.eigh(rho)
    ev, vl = np.linalg.eigh(e)
    weight = np.outer(_resolved(ev), _resolved(p))
    amp1 = vl.conj().T @ vk
    amp_s = vl.conj().T @ s @ vk
    amp_s2 = vl.conj().T @ (s @ s) @ vk

    def form(x, y):
        return np.sum(weight * x * y.conj())

    return (
        float(np.sum(weight * np.abs(amp1) ** 2)),
        form(amp_s, amp1),
        float(np.sum(weight * np.abs(amp_s) ** 2)),
        form(amp_s2, amp1),
        form(amp_s, amp_s2),
        float(np.sum(weight * np.abs(amp_s2) ** 2)),
    )


def weak_values(rho_i, e_f, spin, omega_min=OMEGA_MIN, scaled=False):
    """Compute the overlap and the five weak values.

    Args:
        rho_i: prepared system state (``SystemState`` or density matrix).
        e_f: postselection element, or ``None`` for no postselection.
        spin: measured operator.
        omega_min: overlaps at or below this floor raise
            :class:`OrthogonalityError` (unless ``scaled``).
        scaled: return the omega-multiplied traces instead of ratios.

    Returns:
        WeakValues
    """
    rho, e, s = _coerce(rho_i, e_f, spin)
    omega, *traces = _traces(rho, e, s)
    if scaled:
        a, b, c, d, ee = traces
        return WeakValues(omega, complex(a), float(b.real), complex(c), complex(d), float(ee.real), scaled=True)
    if omega <= omega_min:
        raise OrthogonalityError(
            f"orthogonal preparation/postselection: omega = {omega:.3e} <= {omega_min:g}; "
            "weak values diverge (use scaled=True for the finite traces)",
            omega,
        )
    a, b, c, d, ee = (t / omega for t in traces)
    return WeakValues(omega, complex(a), float(b.real), complex(c), complex(d), float(ee.real))


def _rank_one(m, tol=1e-10):
    w = np.sort(np.linalg.eigvalsh(m))
    return w[-1] > 0 and (len(w) < 2 or w[-2] <= tol * w[-1])


def special_case_residuals(wv):
    """Residuals of every structural identity, grouped by the class implying it."""
    A, B, C, D, E = wv.A, wv.B, wv.C, wv.D, wv.E
    return {
        "spin_half_like": {
            "C-1": abs(C - 1.0),
            "D-A": abs(D - A),
            "E-1": abs(E - 1.0),
        },
        "commutes_with_S": {
            "Im A": abs(A.imag),
            "Im C": abs(C.imag),
            "Im D": abs(D.imag),
            "C-B": abs(C - B),
            "E-B": abs(E - B),
            "D-A": abs(D - A),
        },
        "commutes_with_S2": {
            "Im C": abs(C.imag),
            "D-A": abs(D - A),
            # E equals C (and not B) once S^2 commutes with either end
            "E-C": abs(E - C),
        },
        "pure_pure": {
            "B-|A|^2": abs(B - abs(A) ** 2),
            "E-|C|^2": abs(E - abs(C) ** 2),
            "D-A*conj(C)": abs(D - A * np.conj(C)),
        },
    }


def classify_special_case(rho_i, e_f, spin, tol=COMMUTE_TOL, omega_min=OMEGA_MIN):
    """Detect structural special cases and check the identities they imply.

    Classes:
        ``spin_half_like``: ``S^2`` acts as the identity on the support of
        the preparation or of the postselection.
        ``commutes_with_S``: ``[E_f, S] = 0`` or ``[rho_i, S] = 0``.
        ``commutes_with_S2``: the same with ``S^2``.
        ``pure_pure``: both ends are rank one.
    """
    rho, e, s = _coerce(rho_i, e_f, spin)
    s2 = s @ s
    e_scale = max(max_abs(e), 1e-300)
    en = e / e_scale
    flags = {
        "spin_half_like": max_abs(s2 @ rho - rho) <= tol or max_abs(s2 @ en - en) <= tol,
        "commutes_with_S": max_abs(commutator(en, s)) <= tol or max_abs(commutator(rho, s)) <= tol,
        "commutes_with_S2": max_abs(commutator(en, s2)) <= tol or max_abs(commutator(rho, s2)) <= tol,
        "pure_pure": _rank_one(rho) and _rank_one(e),
    }
    wv = weak_values(rho, e, spin, omega_min=omega_min)
    return SpecialCaseReport(flags=flags, residuals=special_case_residuals(wv))
