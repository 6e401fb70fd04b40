"""Linear benchmark systems: random synthetic plants and the unstable heat patch.

The synthetic generator draws a block-diagonal spectrum with a prescribed
number of unstable modes, hides it behind a random orthogonal similarity and
resamples the input matrix until the pair is controllable.  The heat model
is a 5-point-stencil Laplacian on the unit square with Dirichlet boundary,
destabilized by a uniform shift; its discrete-time variant applies implicit
Euler to the full linear operator with the controls explicit.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from ..errors import ContractViolation, ModelConstructionError
from ..triplets import TimeDomain
from .base import LinearStateSpaceModel

_CONTROLLABILITY_TOL = 1e-10


class LinearSynthetic(LinearStateSpaceModel):
    """Random stabilizable plant with known intrinsic dimension."""

    def __init__(self, A, B, domain, n_unstable):
        super().__init__(A, B, domain)
        self.n_unstable = int(n_unstable)
        # controllable by construction: trajectories can reach the full space
        self.n_min = A.shape[0]


def _controllable(A, B):
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    ctrb = np.hstack(blocks)
    sv = np.linalg.svd(ctrb, compute_uv=False)
    return sv.size >= n and sv[n - 1] > _CONTROLLABILITY_TOL * sv[0]


def _spectrum_blocks(rng, n, n_unstable, domain):
    """Real block-diagonal matrix with the requested unstable mode count.

    Discrete time places unstable radii in [1.05, 1.5] and stable radii in
    [0.2, 0.9]; continuous time uses real parts in [0.05, 0.5] and
    [-1.5, -0.2].  Where two slots remain, a rotation block realizes a
    complex pair at the drawn radius / real part.
    """
    D = np.zeros((n, n))
    slots = [(True, n_unstable), (False, n - n_unstable)]
    idx = 0
    for unstable, count in slots:
        remaining = count
        while remaining > 0:
            pair = remaining >= 2 and bool(rng.random() < 0.5)
            if domain is TimeDomain.DISCRETE:
                lo, hi = (1.05, 1.5) if unstable else (0.2, 0.9)
                rho = rng.uniform(lo, hi)
                if pair:
                    ang = rng.uniform(0.2, np.pi - 0.2)
                    a, b = rho * np.cos(ang), rho * np.sin(ang)
                    D[idx : idx + 2, idx : idx + 2] = [[a, b], [-b, a]]
                    idx += 2
                    remaining -= 2
                else:
                    D[idx, idx] = rho * rng.choice([-1.0, 1.0])
                    idx += 1
                    remaining -= 1
            else:
                if unstable:
                    re = rng.uniform(0.05, 0.5)
                else:
                    re = rng.uniform(-1.5, -0.2)
                if pair:
                    im = rng.uniform(0.2, 1.5)
                    D[idx : idx + 2, idx : idx + 2] = [[re, im], [-im, re]]
                    idx += 2
                    remaining -= 2
                else:
                    D[idx, idx] = re
                    idx += 1
                    remaining -= 1
    return D


def make_linear_synthetic(rng, n, p, n_unstable, domain) -> LinearSynthetic:
    """Random controllable plant with ``n_unstable`` unstable modes."""
    if not 1 <= n_unstable <= n <= 50:
        raise ContractViolation(f"need 1 <= n_unstable <= n <= 50, got n={n}, n_unstable={n_unstable}")
    if p < 1:
        raise ContractViolation("need at least one input")
    D = _spectrum_blocks(rng, n, n_unstable, domain)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    A = Q.T @ D @ Q
    for _ in range(100):
        B = rng.standard_normal((n, p))
        if _controllable(A, B):
            return LinearSynthetic(A, B, domain, n_unstable)
    raise ModelConstructionError("controllability resampling exceeded 100 tries")


# ---------------------------------------------------------------------------
# unstable heat flow on the unit square


def laplacian_2d(n_side):
    """Dense 5-point Laplacian on the interior grid of the unit square."""
    h = 1.0 / (n_side + 1)
    main = np.zeros((n_side, n_side))
    T1d = (
        np.diag(-2.0 * np.ones(n_side))
        + np.diag(np.ones(n_side - 1), 1)
        + np.diag(np.ones(n_side - 1), -1)
    )
    eye = np.eye(n_side)
    return (np.kron(eye, T1d) + np.kron(T1d, eye)) / h**2


def laplacian_2d_eigenvalues(n_side):
    """Analytic spectrum: sums of the 1-D sine-mode values, descending."""
    h = 1.0 / (n_side + 1)
    k = np.arange(1, n_side + 1)
    lam1d = -4.0 / h**2 * np.sin(k * np.pi * h / 2.0) ** 2
    lam = (lam1d[:, None] + lam1d[None, :]).ravel()
    return np.sort(lam)[::-1]


def default_heat_shift(n_side, n_unstable=1, margin=5.0):
    """Shift making exactly ``n_unstable`` continuous-time modes unstable.

    For the default discrete-time sampling time 0.1 the shifted unstable
    modes must stay below 2/tau = 20 to remain unstable after implicit
    Euler; with the Laplacian's spectral gaps that restricts the default to
    a single unstable mode.
    """
    lam = laplacian_2d_eigenvalues(n_side)
    if n_unstable >= lam.size:
        raise ContractViolation("too many unstable modes requested")
    lo = -lam[n_unstable - 1]
    hi = -lam[n_unstable]
    c = lo + min(margin, 0.5 * (hi - lo))
    if c >= hi:
        raise ModelConstructionError("no shift yields the requested unstable count")
    return float(c)


def _input_patches(n_side):
    """Two disjoint square indicator patches as input directions.

    The centers deliberately break the grid's x/y symmetry: symmetric
    placements couple identically to the degenerate sine-mode pairs of the
    Laplacian, leaving one direction of a double unstable eigenvalue
    uncontrollable.
    """
    B = np.zeros((n_side * n_side, 2))
    w = max(1, n_side // 8)
    centers = [(n_side // 4, n_side // 3), (2 * n_side // 3, 3 * n_side // 4)]
    for col, (ci, cj) in enumerate(centers):
        for i in range(max(0, ci - w), min(n_side, ci + w + 1)):
            for j in range(max(0, cj - w), min(n_side, cj + w + 1)):
                B[i * n_side + j, col] = 1.0
    return B


def make_heat2d(n_side=20, c=None, domain=TimeDomain.DISCRETE, tau=0.1) -> LinearStateSpaceModel:
    """Unstable heat flow: A = Laplacian + c * I, two patch inputs, steady state 0.

    The discrete-time variant is the implicit Euler map with explicit
    controls, x+ = (I - tau A)^{-1} (x + tau B u), assembled once from the
    cached factorization.
    """
    if n_side < 4:
        raise ContractViolation("need n_side >= 4")
    if c is None:
        c = default_heat_shift(n_side)
    A = laplacian_2d(n_side) + float(c) * np.eye(n_side * n_side)
    B = _input_patches(n_side)
    if domain is TimeDomain.CONTINUOUS:
        model = LinearStateSpaceModel(A, B, domain, sample_time=0.1, rk4_step=0.002)
        model.shift = float(c)
        return model
    lu = scipy.linalg.lu_factor(np.eye(A.shape[0]) - tau * A)
    A_dt = scipy.linalg.lu_solve(lu, np.eye(A.shape[0]))
    B_dt = scipy.linalg.lu_solve(lu, tau * B)
    model = LinearStateSpaceModel(A_dt, B_dt, TimeDomain.DISCRETE)
    model.shift = float(c)
    model.tau = float(tau)
    return model
