"""Small dense linear-algebra helpers used across the package."""

import numpy as np

from .errors import ValidationError

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-12
TRACE_TOL = 1e-12


def as_matrix(m, name="matrix"):
    """Return ``m`` as a complex square 2-D array (a fresh copy)."""
    arr = np.array(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def frozen(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def dag(m):
    return m.conj().T


def max_abs(m):
    """Max-norm (largest absolute entry); 0 for empty input."""
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def commutator(a, b):
    return a @ b - b @ a


def anticommutator(a, b):
    return a @ b + b @ a


def hermitian_residual(m):
    return max_abs(m - dag(m))


def check_hermitian(m, name="matrix", tol=HERMITIAN_TOL):
    res = hermitian_residual(m)
    if res > tol:
        raise ValidationError(f"{name} is not Hermitian (max |M - M^dagger| = {res:.3e} > {tol:g})")


def check_density_matrix(rho, name="density matrix"):
    """Validate Hermiticity, positivity and unit trace; returns the symmetrised matrix."""
    rho = as_matrix(rho, name)
    check_hermitian(rho, name)
    rho = 0.5 * (rho + dag(rho))
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValidationError(f"{name} must have unit trace, got {tr!r}")
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -PSD_TOL:
        raise ValidationError(f"{name} is not positive semidefinite (min eigenvalue {lo:.3e})")
    return rho


def projector(vec, normalize=True):
    v = np.asarray(vec, dtype=complex).ravel()
    if normalize:
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise ValidationError("cannot build a projector from the zero vector")
        v = v / nrm
    return np.outer(v, v.conj())


def hermitian_function(h, func):
    """Apply ``func`` to a Hermitian matrix through its eigendecomposition."""
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ValidationError(f"eigendecomposition failed: {exc}") from exc
    return (v * func(w)) @ dag(v)


def expect(op, rho):
    """Tr[op rho] as a complex number."""
    return np.einsum("ij,ji->", op, rho)
