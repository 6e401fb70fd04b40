"""Black-box model contract and the time integrators the benchmarks share.

A queryable model exposes its dimensions, its time domain, pointwise
evaluation of the evolution function f(x, u), time integration under an
input policy, a steady state (with the cached value of f there, so that
numerically computed equilibria are handled like exact ones) and, when
available, the Jacobians at the steady state for verification.

Models are immutable after construction, including any cached matrix
factorizations, and can be shared freely across concurrent runs.
"""

from __future__ import annotations

import abc

import numpy as np
import scipy.linalg

from ..errors import ContractViolation, DivergenceError, ModelConstructionError
from ..triplets import SteadyState, TimeDomain


class QueryableModel(abc.ABC):
    domain: TimeDomain
    sample_time: float = 1.0
    rk4_step: float = 0.02

    @property
    @abc.abstractmethod
    def state_dim(self):
        ...

    @property
    @abc.abstractmethod
    def input_dim(self):
        ...

    @abc.abstractmethod
    def query(self, x, u):
        """Evaluate f(x, u): time derivative (CT) or successor state (DT)."""

    @abc.abstractmethod
    def steady_state(self) -> SteadyState:
        ...

    def steady_state_response(self):
        """f(x_bar, u_bar); zero (CT) or x_bar (DT) for exact steady states."""
        ss = self.steady_state()
        if self.domain is TimeDomain.CONTINUOUS:
            return np.zeros(self.state_dim)
        return ss.x_bar.copy()

    def jacobians_at_steady_state(self):
        """(J_x, J_u) at the steady state, or None when unavailable."""
        return None

    def integrate(self, x, input_policy, t_a, t_b):
        return integrate_model(self, x, input_policy, t_a, t_b)


def integrate_model(model, x, input_policy, t_a, t_b):
    """Advance the state from t_a to t_b under ``input_policy(t, x)``.

    Discrete time steps through integer times via repeated queries; for
    continuous time the classical Runge-Kutta scheme with the model's fixed
    internal step is used.
    """
    if t_b < t_a:
        raise ContractViolation(f"time interval reversed: [{t_a}, {t_b}]")
    if model.domain is TimeDomain.DISCRETE:
        steps = int(round(t_b - t_a))
        if abs((t_b - t_a) - steps) > 1e-9:
            raise ContractViolation("discrete-time schedules must use integer gaps")
        for k in range(steps):
            t = t_a + k
            x = model.query(x, input_policy(t, x))
            if not np.all(np.isfinite(x)):
                raise DivergenceError(f"state diverged at step {k + 1}", partial_trajectory=x)
        return x
    return rk4_integrate(model, x, input_policy, t_a, t_b, model.rk4_step)


def rk4_integrate(model, x, input_policy, t_a, t_b, h):
    """Classical 4th-order Runge-Kutta with inputs evaluated at stage times.

    ``h`` must divide the interval up to rounding; each step costs four
    model queries.
    """
    span = float(t_b - t_a)
    if span == 0.0:
        return np.array(x, dtype=float)
    if h <= 0:
        raise ContractViolation("step size must be positive")
    steps = int(round(span / h))
    if steps < 1 or abs(steps * h - span) > 1e-9 * max(1.0, abs(span)):
        raise ContractViolation(f"step {h} does not divide interval of length {span}")
    x = np.array(x, dtype=float)
    trajectory = [x.copy()]
    for k in range(steps):
        t = t_a + k * h
        k1 = model.query(x, input_policy(t, x))
        x2 = x + 0.5 * h * k1
        k2 = model.query(x2, input_policy(t + 0.5 * h, x2))
        x3 = x + 0.5 * h * k2
        k3 = model.query(x3, input_policy(t + 0.5 * h, x3))
        x4 = x + h * k3
        k4 = model.query(x4, input_policy(t + h, x4))
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(
                f"state diverged during step {k + 1} of {steps}",
                partial_trajectory=np.array(trajectory),
            )
        trajectory.append(x.copy())
    return x


# ---------------------------------------------------------------------------
# implicit-explicit Euler


def imex_euler_step(A_impl, g_expl, B, x, u, tau):
    """One implicit-explicit Euler step.

    The linear operator ``A_impl`` is treated implicitly, the remainder
    ``g_expl`` (may be None) and the control term explicitly:

        x_next = (I - tau * A_impl)^{-1} (x + tau * (g_expl(x) + B u))

    This one-shot form factors the implicit operator on every call; models
    cache the factorization through :class:`ImexStepper`.
    """
    return ImexStepper(A_impl, g_expl, B, tau).step(x, u)


class ImexStepper:
    """Cached-factorization implicit-explicit Euler step."""

    def __init__(self, A_impl, g_expl, B, tau):
        A_impl = np.asarray(A_impl, dtype=float)
        if A_impl.ndim != 2 or A_impl.shape[0] != A_impl.shape[1]:
            raise ContractViolation("implicit operator must be square")
        if tau <= 0:
            raise ContractViolation("step size must be positive")
        self.A_impl = A_impl
        self.B = np.asarray(B, dtype=float)
        self.g_expl = g_expl
        self.tau = float(tau)
        n = A_impl.shape[0]
        M = np.eye(n) - self.tau * A_impl
        try:
            self._lu = scipy.linalg.lu_factor(M)
        except scipy.linalg.LinAlgError as exc:
            raise ModelConstructionError(f"implicit operator is singular: {exc}") from exc
        if not np.all(np.isfinite(self._lu[0])):
            raise ModelConstructionError("implicit operator factorization is not finite")
        diag = np.abs(np.diag(self._lu[0]))
        if np.min(diag) <= 1e-14 * max(np.max(diag), 1.0):
            raise ModelConstructionError("implicit operator is numerically singular")

    def step(self, x, u):
        rhs = x + self.tau * (self.B @ u)
        if self.g_expl is not None:
            rhs = rhs + self.tau * self.g_expl(x)
        return scipy.linalg.lu_solve(self._lu, rhs)

    def solve_implicit(self, rhs):
        """(I - tau * A_impl)^{-1} rhs, for Jacobian assembly."""
        return scipy.linalg.lu_solve(self._lu, rhs)


# ---------------------------------------------------------------------------
# generic model classes


class LinearStateSpaceModel(QueryableModel):
    """x' = A x + B u (CT) or x+ = A x + B u (DT) with steady state (0, 0)."""

    def __init__(self, A, B, domain, sample_time=None, rk4_step=0.02):
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ContractViolation("A must be square")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise ContractViolation("B row count must match A")
        self.A = A
        self.B = B
        self.domain = domain
        if sample_time is None:
            sample_time = 1.0 if domain is TimeDomain.DISCRETE else 0.1
        self.sample_time = float(sample_time)
        self.rk4_step = float(rk4_step)
        self._ss = SteadyState(np.zeros(A.shape[0]), np.zeros(B.shape[1]))

    @property
    def state_dim(self):
        return self.A.shape[0]

    @property
    def input_dim(self):
        return self.B.shape[1]

    def query(self, x, u):
        return self.A @ x + self.B @ u

    def steady_state(self):
        return self._ss

    def jacobians_at_steady_state(self):
        return self.A.copy(), self.B.copy()


class DiscreteImexModel(QueryableModel):
    """Discrete-time model obtained from continuous-time pieces by IMEX Euler.

    The linear operator is handled implicitly, the nonlinear remainder and
    the controls explicitly.  The implicit factorization is computed once.
    """

    domain = TimeDomain.DISCRETE
    sample_time = 1.0

    def __init__(self, A_impl, g_expl, B, tau, ss: SteadyState, g_jac=None, f_ss_residual=None):
        self._stepper = ImexStepper(A_impl, g_expl, B, tau)
        self.tau = float(tau)
        self._ss = ss
        self._g_jac = g_jac
        self._f_ss = None
        residual = np.zeros(ss.state_dim) if f_ss_residual is None else np.asarray(f_ss_residual)
        self._residual = residual

    @property
    def state_dim(self):
        return self._ss.state_dim

    @property
    def input_dim(self):
        return self._stepper.B.shape[1]

    def query(self, x, u):
        return self._stepper.step(x, u)

    def steady_state(self):
        return self._ss

    def steady_state_response(self):
        return self._ss.x_bar + self._residual

    def jacobians_at_steady_state(self):
        n = self.state_dim
        inner = np.eye(n)
        if self._g_jac is not None:
            inner = inner + self.tau * self._g_jac(self._ss.x_bar)
        Jx = self._stepper.solve_implicit(inner)
        Ju = self._stepper.solve_implicit(self.tau * self._stepper.B)
        return Jx, Ju


class ContinuousSplitModel(QueryableModel):
    """Continuous-time model f(x, u) = A x + g(x) + B u with analytic Jacobians."""

    domain = TimeDomain.CONTINUOUS

    def __init__(self, A, g, B, ss: SteadyState, g_jac=None, sample_time=0.1, rk4_step=0.02,
                 f_ss_residual=None):
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self._g = g
        self._g_jac = g_jac
        self._ss = ss
        self.sample_time = float(sample_time)
        self.rk4_step = float(rk4_step)
        residual = np.zeros(ss.state_dim) if f_ss_residual is None else np.asarray(f_ss_residual)
        self._residual = residual

    @property
    def state_dim(self):
        return self.A.shape[0]

    @property
    def input_dim(self):
        return self.B.shape[1]

    def query(self, x, u):
        out = self.A @ x + self.B @ u
        if self._g is not None:
            out = out + self._g(x)
        return out

    def steady_state(self):
        return self._ss

    def steady_state_response(self):
        return self._residual.copy()

    def jacobians_at_steady_state(self):
        Jx = self.A.copy()
        if self._g_jac is not None:
            Jx = Jx + self._g_jac(self._ss.x_bar)
        return Jx, self.B.copy()
