"""System-side inputs: the prepared state and the postselection element."""

import warnings
from dataclasses import dataclass

import numpy as np

from ._linalg import (
    PSD_TOL,
    as_matrix,
    check_density_matrix,
    check_hermitian,
    dag,
    frozen,
    projector,
)
from .errors import ValidationError


@dataclass(frozen=True)
class SystemState:
    """Density matrix of the measured system before the interaction."""

    rho: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", frozen(check_density_matrix(self.rho, "system state")))

    @classmethod
    def pure(cls, psi):
        """Pure state from a (not necessarily normalized) vector."""
        return cls(projector(psi))

    @classmethod
    def maximally_mixed(cls, dim):
        return cls(np.eye(dim) / dim)

    @property
    def dim(self):
        return self.rho.shape[0]

    def is_pure(self, tol=1e-10):
        return abs(np.trace(self.rho @ self.rho).real - 1.0) <= tol


@dataclass(frozen=True)
class Postselection:
    """Positive operator selecting a subset of runs.

    The trace is unrestricted.  Eigenvalues above one are allowed but
    trigger a warning, since such an element cannot be part of a POVM.
    """

    effect: np.ndarray

    def __post_init__(self):
        e = as_matrix(self.effect, "postselection")
        check_hermitian(e, "postselection")
        e = 0.5 * (e + dag(e))
        w = np.linalg.eigvalsh(e)
        if w.min() < -PSD_TOL:
            raise ValidationError(f"postselection is not positive semidefinite (min eigenvalue {w.min():.3e})")
        if w.max() > 1.0 + PSD_TOL:
            warnings.warn(
                f"postselection has eigenvalue {w.max():.6g} > 1; not a POVM element",
                stacklevel=3,
            )
        object.__setattr__(self, "effect", frozen(e))

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim))

    @classmethod
    def pure(cls, phi, weight=1.0):
        return cls(weight * projector(phi))

    @property
    def dim(self):
        return self.effect.shape[0]

    @property
    def max_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.effect).max())


def as_system_state(x):
    return x if isinstance(x, SystemState) else SystemState(x)


def as_postselection(x, dim=None):
    if x is None:
        if dim is None:
            raise ValidationError("dimension needed to build the trivial postselection")
        return Postselection.identity(dim)
    return x if isinstance(x, Postselection) else Postselection(x)
