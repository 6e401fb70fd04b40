"""Tubular reactor with one exothermic reaction, desk scale.

One-dimensional advection-diffusion-reaction model for a reactant
concentration and the temperature along the tube, in dimensionless form on
z in (0, 1) with n finite-volume cells (N = 2n states):

    dc/dt     = (1/Pe) c_zz - c_z - Da * c * exp(gamma - gamma / theta)
    dtheta/dt = (1/Pe) theta_zz - theta_z - beta * (theta - 1)
                + heat_release * Da * c * exp(gamma - gamma / theta) + u2

Inflow boundaries are of Danckwerts type with feed values c_in = 1 + u1 and
theta_in = 1; the outflow is zero-gradient.  Advection uses first-order
upwinding, diffusion a central stencil.  With the documented constants the
nonzero steady state (found by damped Newton from the all-ones profile) is
oscillatory-unstable: the Jacobian carries a complex eigenvalue pair with
positive real part, so undisturbed simulations spiral away into a limit
cycle.

Constants (fixed, dimensionless): Pe = 5, gamma = 25, heat_release = 0.5,
beta = 2.5, and a Damkohler number Da = 0.185 placed above the oscillatory
instability threshold of this discretization.

The discrete-time variant applies implicit-explicit Euler with sampling
time tau = 0.01: transport implicit, reaction and controls explicit.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractViolation, ModelConstructionError
from ..triplets import SteadyState, TimeDomain
from .base import ContinuousSplitModel, DiscreteImexModel

PECLET = 5.0
GAMMA = 25.0
HEAT_RELEASE = 0.5
BETA = 2.5
DAMKOHLER = 0.185
_EXP_CAP = 60.0  # saturation guard for states far outside the operating region


def _transport_operator(n):
    """Upwind advection + central diffusion with ghost-cell boundaries.

    Returns (L, b_in): L is the n x n linear operator acting on one species,
    b_in the coefficient vector of the inflow feed value.  The Danckwerts
    inlet condition (face value minus diffusive flux equals the feed) is
    eliminated through a ghost cell; the outlet ghost copies the last cell.
    """
    h = 1.0 / n
    a = 1.0 / (PECLET * h)
    # ghost = kappa_in * feed + kappa_1 * x_1
    kappa_in = 1.0 / (0.5 + a)
    kappa_1 = -(0.5 - a) / (0.5 + a)
    L = np.zeros((n, n))
    b_in = np.zeros(n)
    inv_h2 = 1.0 / (PECLET * h * h)
    inv_h = 1.0 / h
    for i in range(n):
        # diffusion: (x_{i-1} - 2 x_i + x_{i+1}) / (Pe h^2)
        L[i, i] += -2.0 * inv_h2
        if i > 0:
            L[i, i - 1] += inv_h2
        if i < n - 1:
            L[i, i + 1] += inv_h2
        # advection (upwind): -(x_i - x_{i-1}) / h
        L[i, i] += -inv_h
        if i > 0:
            L[i, i - 1] += inv_h
    # inlet ghost enters cell 0 through both stencils
    L[0, 0] += (inv_h2 + inv_h) * kappa_1
    b_in[0] = (inv_h2 + inv_h) * kappa_in
    # outlet ghost (zero gradient) enters cell n-1 through diffusion only
    L[n - 1, n - 1] += inv_h2
    return L, b_in


def _arrhenius(c, theta):
    expo = np.where(theta > 0, GAMMA - GAMMA / np.maximum(theta, 1e-12), -_EXP_CAP)
    return c * np.exp(np.minimum(expo, _EXP_CAP))


def _assemble(n, damkohler):
    L, b_in = _transport_operator(n)
    A = np.zeros((2 * n, 2 * n))
    A[:n, :n] = L
    A[n:, n:] = L - BETA * np.eye(n)
    a0 = np.zeros(2 * n)
    a0[:n] = b_in * 1.0          # feed concentration 1
    a0[n:] = b_in * 1.0 + BETA   # feed temperature 1, cooling reference 1
    B = np.zeros((2 * n, 2))
    B[:n, 0] = b_in              # inflow concentration actuation
    B[n:, 1] = 1.0               # distributed temperature actuation

    def reaction(x):
        c, theta = x[:n], x[n:]
        r = damkohler * _arrhenius(c, theta)
        out = np.zeros(2 * n)
        out[:n] = -r
        out[n:] = HEAT_RELEASE * r
        return out

    def reaction_jac(x):
        c, theta = x[:n], x[n:]
        theta_safe = np.maximum(theta, 1e-12)
        expo = np.where(theta > 0, GAMMA - GAMMA / theta_safe, -_EXP_CAP)
        e = np.exp(np.minimum(expo, _EXP_CAP))
        dr_dc = damkohler * e
        dr_dth = damkohler * c * e * (GAMMA / theta_safe**2) * (theta > 0)
        J = np.zeros((2 * n, 2 * n))
        idx = np.arange(n)
        J[idx, idx] = -dr_dc
        J[idx, idx + n] = -dr_dth
        J[idx + n, idx] = HEAT_RELEASE * dr_dc
        J[idx + n, idx + n] = HEAT_RELEASE * dr_dth
        return J

    def g(x):
        return a0 + reaction(x)

    return A, B, g, reaction_jac


def _newton_steady_state(A, g, g_jac, x0, tol=1e-11, max_iter=100):
    """Damped Newton on F(x) = A x + g(x) from a documented initial guess."""
    x = np.array(x0, dtype=float)
    F = A @ x + g(x)
    norm_F = np.linalg.norm(F)
    for _ in range(max_iter):
        if norm_F <= tol:
            return x, F
        J = A + g_jac(x)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise ModelConstructionError(f"singular Jacobian in steady-state Newton: {exc}") from exc
        lam = 1.0
        while lam > 1e-10:
            x_new = x + lam * step
            F_new = A @ x_new + g(x_new)
            if np.all(np.isfinite(F_new)) and np.linalg.norm(F_new) < (1.0 - 0.25 * lam) * norm_F:
                x, F, norm_F = x_new, F_new, np.linalg.norm(F_new)
                break
            lam *= 0.5
        else:
            raise ModelConstructionError("steady-state Newton stalled")
    raise ModelConstructionError(
        f"steady-state Newton did not reach residual {tol:.1e} (got {norm_F:.3e})"
    )


def make_reactor1d(cells=100, p=2, domain=TimeDomain.DISCRETE, tau=0.01,
                   damkohler=DAMKOHLER):
    """Tubular reactor model; see the module docstring for the equations."""
    if cells < 10:
        raise ContractViolation("need at least 10 cells")
    if p != 2:
        raise ContractViolation("the reactor exposes exactly 2 inputs")
    n = cells
    A, B, g, g_jac = _assemble(n, damkohler)
    x_guess = np.ones(2 * n)
    x_bar, residual = _newton_steady_state(A, g, g_jac, x_guess)
    ss = SteadyState(x_bar, np.zeros(2))
    if domain is TimeDomain.CONTINUOUS:
        return ContinuousSplitModel(
            A, g, B, ss, g_jac=g_jac, sample_time=0.1, rk4_step=0.002,
            f_ss_residual=residual,
        )
    model = DiscreteImexModel(A, g, B, tau, ss, g_jac=g_jac)
    dt_residual = model.query(x_bar, np.zeros(2)) - x_bar
    return DiscreteImexModel(A, g, B, tau, ss, g_jac=g_jac, f_ss_residual=dt_residual)
