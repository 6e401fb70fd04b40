"""Incrementally grown orthonormal bases for nested state subspaces.

The adaptive sampling loop grows one basis column at a time from newly
observed state deviations.  Earlier columns are never modified, so the basis
after j extensions has the basis after j-1 extensions as an exact prefix;
lifted controllers built on the old basis therefore act identically on the
old coordinates of states from the new subspace.

A candidate direction is accepted only if its component orthogonal to the
current span exceeds ``ortho_tol * max(||w||, 1)``; the absolute floor
avoids accepting noise directions once trajectories have decayed close to
the steady state.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation

DEFAULT_ORTHO_TOL = 1e-8
COARSE_ORTHO_TOL = 1e-2

# hard invariant on the stored columns, independent of ortho_tol
_ORTHONORMALITY_TOL = 1e-10


@dataclass(frozen=True)
class OrthonormalBasis:
    V: np.ndarray
    ortho_tol: float = DEFAULT_ORTHO_TOL
    _fingerprint: str = field(default="", repr=False, compare=False)

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float)
        if V.ndim != 2:
            raise ContractViolation(f"basis matrix must be 2-dimensional, got shape {V.shape}")
        if V.size and not np.all(np.isfinite(V)):
            raise ContractViolation("basis matrix contains non-finite entries")
        if self.ortho_tol < 0:
            raise ContractViolation("ortho_tol must be nonnegative")
        if V.shape[1] > V.shape[0]:
            raise ContractViolation(f"more columns than rows: shape {V.shape}")
        if V.shape[1]:
            gram = V.T @ V
            dev = np.max(np.abs(gram - np.eye(V.shape[1])))
            if dev > _ORTHONORMALITY_TOL:
                raise ContractViolation(
                    f"columns are not orthonormal (max deviation {dev:.3e})"
                )
        frozen = np.array(V, copy=True)
        frozen.setflags(write=False)
        object.__setattr__(self, "V", frozen)
        digest = hashlib.sha256()
        digest.update(str(frozen.shape).encode())
        digest.update(frozen.tobytes())
        object.__setattr__(self, "_fingerprint", digest.hexdigest()[:16])

    @classmethod
    def empty(cls, state_dim, ortho_tol=DEFAULT_ORTHO_TOL):
        return cls(np.zeros((state_dim, 0)), ortho_tol)

    @property
    def state_dim(self):
        return self.V.shape[0]

    @property
    def rank(self):
        return self.V.shape[1]

    @property
    def fingerprint(self):
        return self._fingerprint

    def column(self, k):
        return self.V[:, k].copy()

    def extend(self, w):
        """Try to append the direction of ``w``; returns (basis, accepted).

        The residual is re-orthogonalized twice (classical Gram-Schmidt,
        two passes) before the acceptance test.  A zero vector is rejected
        without error.
        """
        w = np.asarray(w, dtype=float)
        if w.shape != (self.state_dim,):
            raise ContractViolation(f"vector has shape {w.shape}, expected ({self.state_dim},)")
        if not np.all(np.isfinite(w)):
            raise ContractViolation("vector contains non-finite entries")
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return self, False
        v = w - self.V @ (self.V.T @ w)
        v = v - self.V @ (self.V.T @ v)
        res = float(np.linalg.norm(v))
        if res <= self.ortho_tol * max(norm_w, 1.0):
            return self, False
        Vnew = np.hstack([self.V, (v / res)[:, None]])
        return OrthonormalBasis(Vnew, self.ortho_tol), True

    def coordinates(self, w):
        """Coefficients of ``w`` in the basis and the out-of-span residual norm."""
        w = np.asarray(w, dtype=float)
        if w.shape != (self.state_dim,):
            raise ContractViolation(f"vector has shape {w.shape}, expected ({self.state_dim},)")
        coeffs = self.V.T @ w
        residual = float(np.linalg.norm(w - self.V @ coeffs))
        return coeffs, residual

    def is_prefix_of(self, other):
        """True when this basis forms the leading columns of ``other`` exactly."""
        if self.state_dim != other.state_dim or self.rank > other.rank:
            return False
        return bool(np.array_equal(self.V, other.V[:, : self.rank]))
