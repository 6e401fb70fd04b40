"""Input/state/response data triplets and the shift/project/extend operations.

Samples collected from a black-box system are stored columnwise: T inputs
(p x T), the states at which the system was queried (N x T), and the model
responses (N x T).  For continuous-time systems a response column is the
time derivative at the sample, for discrete-time systems it is the successor
state.  Downstream inference works in shifted coordinates relative to a
steady state and, optionally, on projections onto a low-dimensional
orthonormal basis.

Triplets are immutable values; appending a sample returns a new triplet.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .subspace import OrthonormalBasis


class TimeDomain(enum.Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


def _as_array(a, name, ndim):
    out = np.asarray(a, dtype=float)
    if out.ndim != ndim:
        raise ContractViolation(f"{name} must be {ndim}-dimensional, got shape {out.shape}")
    if out.size and not np.all(np.isfinite(out)):
        raise ContractViolation(f"{name} contains non-finite entries")
    return out


def _frozen(a):
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SteadyState:
    """Equilibrium pair: f(x_bar, u_bar) = 0 in continuous time, = x_bar in discrete time."""

    x_bar: np.ndarray
    u_bar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_bar", _frozen(_as_array(self.x_bar, "x_bar", 1)))
        object.__setattr__(self, "u_bar", _frozen(_as_array(self.u_bar, "u_bar", 1)))

    @property
    def state_dim(self):
        return self.x_bar.shape[0]

    @property
    def input_dim(self):
        return self.u_bar.shape[0]


class _TripletBase:
    """Shape checks shared by the raw/shifted/reduced triplet values."""

    _STATE_FIELDS = ()

    def _check(self, U, X, Y):
        if not (U.shape[1] == X.shape[1] == Y.shape[1]):
            raise ContractViolation(
                f"inconsistent sample counts: U has {U.shape[1]}, X has {X.shape[1]}, Y has {Y.shape[1]}"
            )
        if X.shape[0] != Y.shape[0]:
            raise ContractViolation(
                f"state/response row mismatch: {X.shape[0]} vs {Y.shape[0]}"
            )

    @property
    def num_samples(self):
        return getattr(self, self._STATE_FIELDS[0]).shape[1]

    @property
    def input_dim(self):
        return self.U.shape[0]


@dataclass(frozen=True)
class DataTriplet(_TripletBase):
    """Raw samples (U, X, Y) as returned by the queried model."""

    U: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    domain: TimeDomain

    _STATE_FIELDS = ("X", "Y")

    def __post_init__(self):
        U = _as_array(self.U, "U", 2)
        X = _as_array(self.X, "X", 2)
        Y = _as_array(self.Y, "Y", 2)
        self._check(U, X, Y)
        object.__setattr__(self, "U", _frozen(U))
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "Y", _frozen(Y))

    @classmethod
    def empty(cls, input_dim, state_dim, domain):
        return cls(
            np.zeros((input_dim, 0)), np.zeros((state_dim, 0)), np.zeros((state_dim, 0)), domain
        )

    @property
    def state_dim(self):
        return self.X.shape[0]


@dataclass(frozen=True)
class ShiftedTriplet(_TripletBase):
    """Columnwise shifts of a raw triplet into steady-state-relative coordinates."""

    U: np.ndarray
    X_tilde: np.ndarray
    Y_tilde: np.ndarray
    domain: TimeDomain

    _STATE_FIELDS = ("X_tilde", "Y_tilde")

    def __post_init__(self):
        U = _as_array(self.U, "U", 2)
        Xt = _as_array(self.X_tilde, "X_tilde", 2)
        Yt = _as_array(self.Y_tilde, "Y_tilde", 2)
        self._check(U, Xt, Yt)
        object.__setattr__(self, "U", _frozen(U))
        object.__setattr__(self, "X_tilde", _frozen(Xt))
        object.__setattr__(self, "Y_tilde", _frozen(Yt))

    @property
    def state_dim(self):
        return self.X_tilde.shape[0]


@dataclass(frozen=True)
class ReducedTriplet(_TripletBase):
    """Shifted data projected onto an orthonormal basis of rank r."""

    U: np.ndarray
    X_hat: np.ndarray
    Y_hat: np.ndarray
    domain: TimeDomain

    _STATE_FIELDS = ("X_hat", "Y_hat")

    def __post_init__(self):
        U = _as_array(self.U, "U", 2)
        Xh = _as_array(self.X_hat, "X_hat", 2)
        Yh = _as_array(self.Y_hat, "Y_hat", 2)
        self._check(U, Xh, Yh)
        object.__setattr__(self, "U", _frozen(U))
        object.__setattr__(self, "X_hat", _frozen(Xh))
        object.__setattr__(self, "Y_hat", _frozen(Yh))

    @property
    def reduced_dim(self):
        return self.X_hat.shape[0]


def shift_data(raw: DataTriplet, ss: SteadyState, f_ss) -> ShiftedTriplet:
    """Shift a raw triplet columnwise by (u_bar, x_bar, f(x_bar, u_bar)).

    ``f_ss`` is the model response at the steady state and is passed
    explicitly so that inexact, numerically computed steady states are
    handled the same way as analytic ones.  For an exact steady state it is
    the zero vector in continuous time and ``x_bar`` in discrete time.
    """
    f_ss = _as_array(f_ss, "f_ss", 1)
    if ss.state_dim != raw.state_dim:
        raise ContractViolation(
            f"steady state dimension {ss.state_dim} does not match data dimension {raw.state_dim}"
        )
    if ss.input_dim != raw.input_dim:
        raise ContractViolation(
            f"steady input dimension {ss.input_dim} does not match data dimension {raw.input_dim}"
        )
    if f_ss.shape[0] != raw.state_dim:
        raise ContractViolation(
            f"f_ss has length {f_ss.shape[0]}, expected {raw.state_dim}"
        )
    return ShiftedTriplet(
        raw.U - ss.u_bar[:, None],
        raw.X - ss.x_bar[:, None],
        raw.Y - f_ss[:, None],
        raw.domain,
    )


def project_data(shifted: ShiftedTriplet, basis: OrthonormalBasis) -> ReducedTriplet:
    """Project shifted state/response data onto the basis; inputs pass through."""
    if not isinstance(basis, OrthonormalBasis):
        raise ContractViolation("basis must be an OrthonormalBasis")
    if basis.state_dim != shifted.state_dim:
        raise ContractViolation(
            f"basis has {basis.state_dim} rows, data has {shifted.state_dim}"
        )
    Vt = basis.V.T
    return ReducedTriplet(shifted.U, Vt @ shifted.X_tilde, Vt @ shifted.Y_tilde, shifted.domain)


def append_sample(trip: DataTriplet, u, x, y) -> DataTriplet:
    """Return a new triplet with one more sample column; existing columns are untouched."""
    u = _as_array(u, "u", 1)
    x = _as_array(x, "x", 1)
    y = _as_array(y, "y", 1)
    if u.shape[0] != trip.input_dim:
        raise ContractViolation(f"input has length {u.shape[0]}, expected {trip.input_dim}")
    if x.shape[0] != trip.state_dim or y.shape[0] != trip.state_dim:
        raise ContractViolation(
            f"state/response have lengths {x.shape[0]}/{y.shape[0]}, expected {trip.state_dim}"
        )
    return DataTriplet(
        np.hstack([trip.U, u[:, None]]),
        np.hstack([trip.X, x[:, None]]),
        np.hstack([trip.Y, y[:, None]]),
        trip.domain,
    )


# ---------------------------------------------------------------------------
# serialization


def _write_matrix_csv(path, M):
    header = ",".join(f"col_{j}" for j in range(M.shape[1]))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(M.shape[0]):
            fh.write(",".join(repr(v) for v in M[i]) + "\n")


def _read_matrix_csv(path, rows, cols):
    with open(path) as fh:
        lines = fh.read().splitlines()
    body = lines[1:]
    if len(body) != rows:
        raise ContractViolation(f"{path}: expected {rows} rows, found {len(body)}")
    M = np.zeros((rows, cols))
    for i, line in enumerate(body):
        vals = [float(v) for v in line.split(",")] if line else []
        if len(vals) != cols:
            raise ContractViolation(f"{path}: row {i} has {len(vals)} values, expected {cols}")
        M[i] = vals
    return M


def save_triplet(trip: DataTriplet, directory):
    """Write U.csv / X.csv / Y.csv plus a small meta.json into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    _write_matrix_csv(os.path.join(directory, "U.csv"), trip.U)
    _write_matrix_csv(os.path.join(directory, "X.csv"), trip.X)
    _write_matrix_csv(os.path.join(directory, "Y.csv"), trip.Y)
    meta = {
        "domain": trip.domain.value,
        "input_dim": trip.input_dim,
        "state_dim": trip.state_dim,
        "num_samples": trip.num_samples,
    }
    with open(os.path.join(directory, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def load_triplet(directory) -> DataTriplet:
    with open(os.path.join(directory, "meta.json")) as fh:
        meta = json.load(fh)
    T = meta["num_samples"]
    U = _read_matrix_csv(os.path.join(directory, "U.csv"), meta["input_dim"], T)
    X = _read_matrix_csv(os.path.join(directory, "X.csv"), meta["state_dim"], T)
    Y = _read_matrix_csv(os.path.join(directory, "Y.csv"), meta["state_dim"], T)
    return DataTriplet(U, X, Y, TimeDomain(meta["domain"]))


def triplet_to_nested_lists(trip: DataTriplet):
    """Row-major nested lists for embedding in JSON experiment records."""
    return {
        "domain": trip.domain.value,
        "U": trip.U.tolist(),
        "X": trip.X.tolist(),
        "Y": trip.Y.tolist(),
    }
