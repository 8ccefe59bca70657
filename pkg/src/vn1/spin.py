"""Operators with spectrum in {-1, 0, +1} and their exponentials.

Every observable handled by the package satisfies ``S @ S @ S == S``.  For
such operators the exponential closes after the quadratic term::

    exp(i phi S) = 1 + i sin(phi) S - (1 - cos(phi)) S^2

which is what makes all closed-form measurement results exact.

Basis convention: spin-1 matrices are written in the S_z eigenbasis ordered
``|+1>, |0>, |-1>``.
"""

from dataclasses import dataclass

import numpy as np

from ._linalg import (
    as_matrix,
    check_hermitian,
    dag,
    frozen,
    max_abs,
)
from .errors import ValidationError

CUBIC_TOL = 1e-10
UNITARY_TOL = 1e-12
EIGEN_SNAP_TOL = 1e-8
ALLOWED_DIMS = (2, 3, 4)

_R2 = 1.0 / np.sqrt(2.0)
SX = np.array([[0, _R2, 0], [_R2, 0, _R2], [0, _R2, 0]], dtype=complex)
SY = np.array([[0, -1j * _R2, 0], [1j * _R2, 0, -1j * _R2], [0, 1j * _R2, 0]], dtype=complex)
SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)


@dataclass(frozen=True)
class SpinOperator:
    """A Hermitian matrix obeying ``S^3 = S``.

    Use :func:`validate_operator` or :func:`make_spin1_axis` to build one;
    the constructor validates too.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix, "spin operator")
        _check_spin(m)
        object.__setattr__(self, "matrix", frozen(0.5 * (m + dag(m))))

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def square(self):
        return self.matrix @ self.matrix

    def eigenvalues(self):
        """Eigenvalues snapped to {-1, 0, 1}, ascending."""
        w = np.linalg.eigvalsh(self.matrix)
        return np.round(w)

    def __neg__(self):
        return SpinOperator(-self.matrix)


@dataclass(frozen=True)
class UnitaryMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix, "unitary")
        res = max_abs(m @ dag(m) - np.eye(m.shape[0]))
        if res > UNITARY_TOL:
            raise ValidationError(f"matrix is not unitary (max |U U^dagger - 1| = {res:.3e})")
        object.__setattr__(self, "matrix", frozen(m))


@dataclass(frozen=True)
class AffineSpectrumMap:
    """``X = delta_x * S + x2``; the three eigenvalues are ``x2 + (k - 2) delta_x``."""

    delta_x: float
    x2: float

    def __post_init__(self):
        if not self.delta_x > 0:
            raise ValidationError(f"delta_x must be positive, got {self.delta_x!r}")

    @property
    def eigenvalues(self):
        return tuple(self.x2 + (k - 2) * self.delta_x for k in (1, 2, 3))

    def recompose(self, spin):
        s = spin.matrix if isinstance(spin, SpinOperator) else np.asarray(spin)
        return self.delta_x * s + self.x2 * np.eye(s.shape[0])


def _check_spin(m):
    if m.shape[0] not in ALLOWED_DIMS:
        raise ValidationError(f"spin operator must be {ALLOWED_DIMS}-dimensional, got {m.shape[0]}")
    check_hermitian(m, "spin operator")
    res = max_abs(m @ m @ m - m)
    if res > CUBIC_TOL:
        raise ValidationError(
            f"operator violates the cubic identity S^3 = S (max residual {res:.3e} > {CUBIC_TOL:g})"
        )
    w = np.linalg.eigvalsh(0.5 * (m + dag(m)))
    off = np.max(np.abs(w - np.round(w))) if w.size else 0.0
    if off > EIGEN_SNAP_TOL or np.any(np.abs(np.round(w)) > 1):
        raise ValidationError(f"eigenvalues {w} are not in {{-1, 0, 1}}")


def validate_operator(m):
    """Wrap any matrix satisfying ``M^3 = M`` as a :class:`SpinOperator`.

    Accepts 3x3 and 4x4 inputs (the two-spin embedding) as well as 2x2
    Pauli-type operators, which satisfy the identity with ``S^2 = 1``.
    """
    return SpinOperator(m)


def make_spin1_axis(n):
    """Spin-1 component along the unit vector ``n``.

    Args:
        n: three real components; must have unit norm within 1e-10.

    Returns:
        SpinOperator: ``n_x S_x + n_y S_y + n_z S_z``.
    """
    n = np.asarray(n, dtype=float).ravel()
    if n.shape != (3,):
        raise ValidationError(f"axis must have three components, got {n.shape}")
    norm = np.linalg.norm(n)
    if abs(norm - 1.0) > 1e-10:
        raise ValidationError(
            f"axis must be a unit vector (|n| = {norm:.12g}); normalize it first, e.g. n / |n|"
        )
    return SpinOperator(n[0] * SX + n[1] * SY + n[2] * SZ)


def exp_phi_S(spin, phi):
    """``exp(i phi S)`` from the closed quadratic form.

    No matrix exponential is evaluated; the result is exact up to the
    rounding of ``sin`` and ``cos``.
    """
    s = spin.matrix
    eye = np.eye(spin.dim)
    u = eye + 1j * np.sin(phi) * s - (1.0 - np.cos(phi)) * (s @ s)
    return UnitaryMatrix(u)


def embed_two_qubit(spin3):
    """Embed a 3x3 triplet operator into the 4x4 space of two spin-1/2.

    The singlet sector comes first and carries the eigenvalue 0.
    """
    if spin3.dim != 3:
        raise ValidationError(f"embedding needs a 3x3 operator, got dim {spin3.dim}")
    out = np.zeros((4, 4), dtype=complex)
    out[1:, 1:] = spin3.matrix
    return SpinOperator(out)


def affine_decompose(x):
    """Split an operator with three equally spaced eigenvalues.

    Returns:
        tuple: ``(AffineSpectrumMap, SpinOperator)`` with
        ``x = delta_x * S + x2``.

    Raises:
        ValidationError: on unequal spacing or a degenerate spectrum.
    """
    x = as_matrix(x, "operator")
    check_hermitian(x, "operator")
    x = 0.5 * (x + dag(x))
    w_all = np.linalg.eigvalsh(x)
    span = w_all[-1] - w_all[0]
    if span <= 1e-12 * max(1.0, abs(w_all[-1])):
        raise ValidationError("degenerate spectrum: spacing is zero")
    # group eigenvalues closer than 1e-8 of the spread (repeated levels)
    groups = [[w_all[0]]]
    for v in w_all[1:]:
        if v - groups[-1][-1] > 1e-8 * span:
            groups.append([v])
        else:
            groups[-1].append(v)
    if len(groups) != 3:
        raise ValidationError(f"expected three distinct eigenvalues, got {w_all}")
    x1, x2, x3 = (float(np.mean(g)) for g in groups)
    gap1, gap2 = x2 - x1, x3 - x2
    if abs(gap1 - gap2) > 1e-8 * (x3 - x1):
        raise ValidationError(f"eigenvalues are not equally spaced (gaps {gap1!r} and {gap2!r})")
    delta = 0.5 * (gap1 + gap2)
    amap = AffineSpectrumMap(float(delta), float(x2))
    s = (x - x2 * np.eye(x.shape[0])) / delta
    return amap, SpinOperator(s)
