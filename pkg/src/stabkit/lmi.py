"""Informativity-for-stabilization tests via matrix-inequality feasibility.

Given reduced data (U, X, Y) with X, Y of size r x T, a single feedback gain
stabilizes *every* linear model consistent with the data exactly when a
matrix variable Theta (T x r) satisfies

    continuous time:  X Theta symmetric,  X Theta > 0,
                      Y Theta + Theta^T Y^T < 0

    discrete time:    X Theta symmetric,
                      [[X Theta, Y Theta], [(Y Theta)^T, X Theta]] > 0

and the gain is then K = U Theta (X Theta)^{-1}.  Strict inequalities are
decided through a margined feasibility problem: maximize t subject to
blocks(Theta) >= t * I, with the homogeneity of the cone removed by the
linear normalization trace(blocks(Theta)) = block size.  The optimizer is a
dense log-barrier Newton method; problem sizes here are tiny (r, T up to a
hundred or so), so dense factorizations are the right tool and no external
modeling layer is needed.

If the barrier path is inconclusive, a construction fallback tries to
assemble a certificate directly from an identified model (least squares,
pole placement / Riccati gain, Lyapunov solve); any candidate is accepted
only if the assembled Theta passes the exact block-eigenvalue test, so the
fallback cannot produce false positives.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ContractViolation, NumericalFailure, RankDeficientData
from .subspace import OrthonormalBasis
from .triplets import ReducedTriplet, TimeDomain

_COND_LIMIT = 1e12


# ---------------------------------------------------------------------------
# result types


@dataclass(frozen=True)
class StabilityVerdict:
    """Spectral stability decision.

    ``extremum`` is the spectral abscissa (continuous time) or the spectral
    radius (discrete time).  Boundary spectra (abscissa exactly 0, radius
    exactly 1) are classified unstable: conservative for a stabilization
    tool.
    """

    stable: bool
    extremum: float
    domain: TimeDomain


@dataclass(frozen=True)
class Controller:
    """Feedback gain in full coordinates with its reduced counterpart.

    ``gain`` is p x N, ``gain_reduced`` is p x r and the two are tied
    together by the basis the controller was inferred with:
    gain = gain_reduced @ V.T.
    """

    gain: np.ndarray
    gain_reduced: np.ndarray
    basis_rank: int
    basis_fingerprint: str

    def __post_init__(self):
        K = np.asarray(self.gain, dtype=float)
        Kh = np.asarray(self.gain_reduced, dtype=float)
        if K.ndim != 2 or Kh.ndim != 2 or K.shape[0] != Kh.shape[0]:
            raise ContractViolation("controller gain matrices have inconsistent shapes")
        if Kh.shape[1] != self.basis_rank:
            raise ContractViolation("reduced gain width does not match basis rank")
        K = np.array(K, copy=True)
        Kh = np.array(Kh, copy=True)
        K.setflags(write=False)
        Kh.setflags(write=False)
        object.__setattr__(self, "gain", K)
        object.__setattr__(self, "gain_reduced", Kh)

    def check_consistent(self, basis: OrthonormalBasis, tol=1e-13):
        """Verify gain == gain_reduced @ V.T for the inferring basis."""
        if basis.fingerprint != self.basis_fingerprint:
            raise ContractViolation("controller was inferred with a different basis")
        lifted = self.gain_reduced @ basis.V.T
        scale = max(float(np.linalg.norm(lifted)), 1.0)
        return float(np.linalg.norm(self.gain - lifted)) <= tol * scale


@dataclass(frozen=True)
class LmiCertificate:
    """Feasible point of the strict informativity inequalities.

    ``margin`` is the smallest eigenvalue of the certified blocks under the
    trace normalization trace(blocks) = block size.
    """

    theta: np.ndarray
    margin: float

    def __post_init__(self):
        th = np.array(np.asarray(self.theta, dtype=float), copy=True)
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)


class LmiStatus(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    INFEASIBLE_AT_TOL = "infeasible_at_tolerance"


@dataclass(frozen=True)
class LmiResult:
    status: LmiStatus
    certificate: LmiCertificate | None
    margin_estimate: float
    newton_iterations: int
    message: str = ""

    @property
    def feasible(self):
        return self.status is LmiStatus.FEASIBLE


# ---------------------------------------------------------------------------
# spectral checks


def spectral_verdict(M, domain: TimeDomain) -> StabilityVerdict:
    """Stability of a square matrix: abscissa < 0 (CT) or radius < 1 (DT)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractViolation(f"matrix must be square, got shape {M.shape}")
    if M.size and not np.all(np.isfinite(M)):
        raise ContractViolation("matrix contains non-finite entries")
    if M.size == 0:
        raise ContractViolation("matrix is empty")
    try:
        eigs = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigenvalue iteration failed: {exc}") from exc
    if domain is TimeDomain.CONTINUOUS:
        extremum = float(np.max(eigs.real))
        return StabilityVerdict(extremum < 0.0, extremum, domain)
    extremum = float(np.max(np.abs(eigs)))
    return StabilityVerdict(extremum < 1.0, extremum, domain)


def right_inverse_check(reduced: ReducedTriplet) -> StabilityVerdict:
    """Sufficient stability witness via the Moore-Penrose right inverse.

    Requires X_hat to have full row rank; the verdict is the spectrum of
    Y_hat @ pinv(X_hat).  This is a test-side witness, not the decision
    procedure (one right inverse out of many).
    """
    X, Y = reduced.X_hat, reduced.Y_hat
    if X.shape[1] < 1:
        raise ContractViolation("empty data")
    sv = np.linalg.svd(X, compute_uv=False)
    if sv.size == 0 or sv[-1] <= 1e-10 * sv[0] or sv.size < X.shape[0]:
        raise RankDeficientData(
            f"state data has numerical row rank below {X.shape[0]}"
        )
    return spectral_verdict(Y @ np.linalg.pinv(X), reduced.domain)


# ---------------------------------------------------------------------------
# block assembly


def default_strictness(reduced: ReducedTriplet) -> float:
    """Margin below which a block is not considered strictly positive."""
    stacked = np.vstack([reduced.X_hat, reduced.Y_hat])
    return 1e-8 * (1.0 + float(np.linalg.norm(stacked)))


def _blocks(P, Q, domain):
    """Assemble the symmetric block matrix whose positivity is required."""
    P = 0.5 * (P + P.T)
    if domain is TimeDomain.DISCRETE:
        top = np.hstack([P, Q])
        bot = np.hstack([Q.T, P])
        return np.vstack([top, bot])
    r = P.shape[0]
    out = np.zeros((2 * r, 2 * r))
    out[:r, :r] = P
    out[r:, r:] = -(Q + Q.T)
    return out


def _blocks_of_theta(X, Y, theta_vec, domain):
    r, T = X.shape
    Th = theta_vec.reshape(T, r, order="F")
    return _blocks(X @ Th, Y @ Th, domain)


def evaluate_certificate(reduced: ReducedTriplet, theta) -> tuple[float, float]:
    """(smallest block eigenvalue, symmetry defect of X Theta) for a candidate."""
    theta = np.asarray(theta, dtype=float)
    P = reduced.X_hat @ theta
    Q = reduced.Y_hat @ theta
    sym_defect = float(np.max(np.abs(P - P.T))) if P.size else 0.0
    M = _blocks(P, Q, reduced.domain)
    return float(np.linalg.eigvalsh(M).min()), sym_defect


def _margin_and_norm(reduced, theta):
    M = _blocks(reduced.X_hat @ theta, reduced.Y_hat @ theta, reduced.domain)
    return float(np.linalg.eigvalsh(M).min()), float(np.linalg.norm(M))


def _noise_floor(block_norm):
    """Smallest positive margin distinguishable from rounding error.

    Eigenvalue evaluation noise sits near machine epsilon times the block
    norm; three orders of headroom on top of that separates genuinely thin
    certificates from boundary cases.  Certificates scale linearly in
    Theta, so feasibility itself is decided against this floor; the
    delivered Theta is then rescaled until its absolute margin clears the
    requested strictness.
    """
    return max(1e-13, 1e-12 * block_norm)


# ---------------------------------------------------------------------------
# max-margin barrier solver


def _equality_system(Xs, Ys, domain):
    """Rows enforcing symmetry of X Theta plus the trace normalization."""
    r, T = Xs.shape
    IX = np.kron(np.eye(r), Xs)  # vec(X Theta) = IX @ vec(Theta), column-major
    rows = []
    for j in range(r):
        for i in range(j):
            rows.append(IX[i + j * r] - IX[j + i * r])
    diag_ix = [i + i * r for i in range(r)]
    if domain is TimeDomain.DISCRETE:
        trace_row = 2.0 * IX[diag_ix].sum(axis=0)
    else:
        IYdiag = np.kron(np.eye(r), Ys)[diag_ix].sum(axis=0)
        trace_row = IX[diag_ix].sum(axis=0) - 2.0 * IYdiag
    E = np.vstack(rows + [trace_row]) if rows else trace_row[None, :]
    e = np.zeros(E.shape[0])
    e[-1] = 2.0 * r
    return E, e


def _direction_tensor(Xs, Ys, Z, domain):
    """Orthonormalized block-space images of the equality null-space directions.

    Directions that do not move the blocks at all are dropped; the kept
    images are orthonormal in the Frobenius inner product, which keeps the
    Newton system well scaled.
    """
    r, T = Xs.shape
    m = 2 * r
    d = Z.shape[1]
    if d == 0:
        return np.zeros((0, m, m)), np.zeros((T * r, 0))
    imgs = np.empty((d, m, m))
    for i in range(d):
        imgs[i] = _blocks_of_theta(Xs, Ys, Z[:, i], domain)
    F = imgs.reshape(d, m * m)
    Uf, sf, Vtf = np.linalg.svd(F, full_matrices=False)
    if sf.size == 0 or sf[0] == 0.0:
        return np.zeros((0, m, m)), np.zeros((T * r, 0))
    keep = sf > 1e-12 * sf[0]
    k = int(np.count_nonzero(keep))
    Ablk = Vtf[:k].reshape(k, m, m)
    Ablk = 0.5 * (Ablk + np.transpose(Ablk, (0, 2, 1)))
    theta_dirs = Z @ (Uf[:, :k] / sf[:k])
    return Ablk, theta_dirs


def _is_pd(S):
    try:
        np.linalg.cholesky(S)
        return True
    except np.linalg.LinAlgError:
        return False


class _BarrierState:
    def __init__(self, A0, Ablk):
        self.A0 = A0
        self.Ablk = Ablk
        self.m = A0.shape[0]
        self.k = Ablk.shape[0]
        self.Aflat = Ablk.reshape(self.k, self.m * self.m) if self.k else np.zeros((0, self.m**2))

    def A(self, z):
        if self.k == 0:
            return self.A0
        return self.A0 + np.tensordot(z, self.Ablk, axes=(0, 0))

    def potential(self, z, t, mu):
        S = self.A(z) - t * np.eye(self.m)
        # Cholesky doubles as the definiteness check: the determinant sign
        # alone would accept negative-definite S of even dimension.
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            return -np.inf, S
        logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
        return t + mu * logdet, S

    def derivatives(self, S, mu):
        """Gradient and Hessian of t + mu*logdet(A(z) - t I) in (z, t)."""
        Sinv = np.linalg.inv(S)
        Sinv = 0.5 * (Sinv + Sinv.T)
        Sinv2 = Sinv @ Sinv
        k, m = self.k, self.m
        g = np.empty(k + 1)
        H = np.empty((k + 1, k + 1))
        if k:
            W = (self.Aflat @ Sinv.reshape(m * m)).ravel()  # trace(Sinv A_i)
            g[:k] = mu * W
            SA = np.einsum("ab,ibc->iac", Sinv, self.Ablk)  # Sinv A_i
            SAflat = SA.reshape(k, m * m)
            SATflat = np.transpose(SA, (0, 2, 1)).reshape(k, m * m)
            H[:k, :k] = -mu * (SAflat @ SATflat.T)
            H[:k, k] = mu * (self.Aflat @ Sinv2.reshape(m * m))
            H[k, :k] = H[:k, k]
        g[k] = 1.0 - mu * np.trace(Sinv)
        H[k, k] = -mu * np.trace(Sinv2)
        return g, H


def _maximize_margin(A0, Ablk, eps, feasible_exit=0.02, mu_min=1e-12,
                     max_stages=28, max_newton=40):
    """Follow the barrier path of: maximize t s.t. A0 + sum z_i A_i >= t I.

    Returns (z, t, margin, upper_bound, newton_iterations).  ``upper_bound``
    is the path estimate t + m*mu, valid once Newton has converged at the
    current stage; it lets callers stop early when even the bound falls
    below the strictness threshold.
    """
    state = _BarrierState(A0, Ablk)
    m, k = state.m, state.k
    lam0 = float(np.linalg.eigvalsh(A0).min())
    t = lam0 - max(1.0, abs(lam0))
    z = np.zeros(k)
    mu = max((lam0 - t) / m, 1e-3)
    total_newton = 0
    upper = np.inf
    margin = lam0
    for _ in range(max_stages):
        for _ in range(max_newton):
            phi, S = state.potential(z, t, mu)
            if not np.isfinite(phi):
                raise NumericalFailure("barrier iterate left the feasible cone")
            g, H = state.derivatives(S, mu)
            try:
                step = np.linalg.solve(-H + 1e-14 * np.eye(k + 1), g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(-H, g, rcond=None)[0]
            decrement = float(g @ step)
            if not np.isfinite(decrement):
                raise NumericalFailure("barrier Newton step is not finite")
            if decrement <= 0:
                break
            alpha = 1.0
            improved = False
            while alpha > 1e-13:
                z_new = z + alpha * step[:k]
                t_new = t + alpha * step[k]
                phi_new, _ = state.potential(z_new, t_new, mu)
                if phi_new > phi + 0.25 * alpha * decrement:
                    z, t = z_new, t_new
                    improved = True
                    break
                alpha *= 0.5
            total_newton += 1
            if not improved or decrement < 1e-12 * max(1.0, abs(phi)):
                break
        margin = float(np.linalg.eigvalsh(state.A(z)).min())
        upper = t + m * mu
        if margin > feasible_exit:
            break
        if upper < 0.0:
            # even the path upper bound is negative: no interior point exists
            break
        mu *= 0.1
        if mu < mu_min:
            break
    return z, t, margin, upper, total_newton


# ---------------------------------------------------------------------------
# construction fallback


def _rescue_certificate(reduced: ReducedTriplet, balanced: ReducedTriplet):
    """Try to assemble a certificate from an identified model.

    Candidates combine the right-inverse witness (inputs that already came
    from a feedback law reveal that law as U X^+) with least-squares
    identification plus pole placement and a Riccati gain; construction
    happens on the balanced data, but each candidate Theta is validated
    with the exact block test on the original data, so the fallback cannot
    produce false positives.  Because these points carry an analytic
    Lyapunov backing, the acceptance floor sits just above eigenvalue
    rounding noise.
    """
    X, Y, U = balanced.X_hat, balanced.Y_hat, balanced.U
    r, T = X.shape
    p = U.shape[0]
    W = np.vstack([X, U])
    sol, *_ = np.linalg.lstsq(W.T, Y.T, rcond=None)
    A_id = sol[:r].T
    B_id = sol[r:].T
    dt = reduced.domain is TimeDomain.DISCRETE
    # right-inverse witness: when the inputs already came from a feedback law,
    # U X^+ recovers that gain and Y X^+ the closed loop it induces
    candidates = []
    sv = np.linalg.svd(X, compute_uv=False)
    if sv.size >= r and sv[r - 1] > 1e-12 * sv[0]:
        Xpinv = np.linalg.pinv(X)
        candidates.append((U @ Xpinv, Y @ Xpinv))
    gains = []
    try:
        import scipy.signal

        base = np.linspace(0.05, 0.45, r)
        poles = base * (-1.0) ** np.arange(r) if dt else -0.2 - base
        placed = scipy.signal.place_poles(A_id, B_id, poles)
        gains.append(-placed.gain_matrix)
    except Exception:
        pass
    try:
        Qw, Rw = np.eye(r), np.eye(p)
        if dt:
            Pare = scipy.linalg.solve_discrete_are(A_id, B_id, Qw, Rw)
            gains.append(-np.linalg.solve(Rw + B_id.T @ Pare @ B_id, B_id.T @ Pare @ A_id))
        else:
            Pare = scipy.linalg.solve_continuous_are(A_id, B_id, Qw, Rw)
            gains.append(-np.linalg.solve(Rw, B_id.T @ Pare))
    except Exception:
        pass
    candidates.extend((K, A_id + B_id @ K) for K in gains)
    for K, Acl in candidates:
        try:
            if dt:
                P = scipy.linalg.solve_discrete_lyapunov(Acl, np.eye(r))
            else:
                P = scipy.linalg.solve_continuous_lyapunov(Acl, -np.eye(r))
        except Exception:
            continue
        P = 0.5 * (P + P.T)
        if not _is_pd(P):
            continue
        theta, *_ = np.linalg.lstsq(W, np.vstack([P, K @ P]), rcond=None)
        margin, block_norm = _margin_and_norm(reduced, theta)
        if margin > max(1e-13, 100.0 * np.finfo(float).eps * block_norm):
            return theta, margin
    return None


# ---------------------------------------------------------------------------
# public entry points


def solve_informativity_lmi(reduced: ReducedTriplet, eps_strict=None) -> LmiResult:
    """Decide strict feasibility of the informativity inequalities.

    Returns an :class:`LmiResult`; infeasibility is a result, while solver
    breakdown raises :class:`NumericalFailure`.
    """
    X, Y = reduced.X_hat, reduced.Y_hat
    r, T = X.shape
    if r < 1 or T < 1:
        raise ContractViolation(f"need r >= 1 and T >= 1, got r={r}, T={T}")
    if T * r > 40000:
        raise ContractViolation(f"problem size T*r = {T * r} exceeds the desk-scale limit")
    eps = float(default_strictness(reduced) if eps_strict is None else eps_strict)

    # In continuous time, scaling Y is a time reparametrization and leaves
    # feasibility (and the recovered gain) unchanged, so the two blocks can
    # be balanced before solving.  Discrete time admits no such freedom.
    if reduced.domain is TimeDomain.CONTINUOUS:
        y_norm = float(np.linalg.norm(Y))
        time_scale = float(np.linalg.norm(X)) / y_norm if y_norm > 0 else 1.0
        balanced = ReducedTriplet(reduced.U, X, time_scale * Y, reduced.domain)
    else:
        balanced = reduced
    Xb, Yb = balanced.X_hat, balanced.Y_hat

    # column scaling of the stacked data is pure preconditioning: the blocks
    # generated by the rescaled variable are identical to the original ones.
    col_norms = np.linalg.norm(np.vstack([Xb, Yb]), axis=0)
    col_norms[col_norms == 0.0] = 1.0
    Xs = Xb / col_norms
    Ys = Yb / col_norms

    E, e = _equality_system(Xs, Ys, reduced.domain)
    theta0, *_ = np.linalg.lstsq(E, e, rcond=None)
    if np.linalg.norm(E @ theta0 - e) > 1e-7 * np.linalg.norm(e):
        return LmiResult(
            LmiStatus.INFEASIBLE, None, -np.inf, 0,
            "trace normalization unreachable: no strictly feasible point exists",
        )
    Z = scipy.linalg.null_space(E)
    Ablk, theta_dirs = _direction_tensor(Xs, Ys, Z, reduced.domain)
    A0 = _blocks_of_theta(Xs, Ys, theta0, reduced.domain)

    try:
        z, t, margin, upper, iters = _maximize_margin(A0, Ablk, eps)
    except NumericalFailure:
        raise
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"barrier solve failed: {exc}") from exc

    theta_scaled = theta0 + (theta_dirs @ z if z.size else 0.0)
    theta = (theta_scaled.reshape(T, r, order="F").T / col_norms).T
    exact_margin, block_norm = _margin_and_norm(reduced, theta)
    message = ""
    accepted = exact_margin > _noise_floor(block_norm)

    if not accepted:
        rescued = _rescue_certificate(reduced, balanced)
        if rescued is not None:
            theta, exact_margin = rescued
            message = "constructed certificate"
            accepted = True

    if accepted:
        # interior point found; rescale so the delivered absolute margin
        # clears the requested strictness (certificates scale linearly)
        scale = min(max(1.0, 2.0 * eps / exact_margin), 1e14)
        theta = theta * scale
        exact_margin = exact_margin * scale
        if exact_margin > eps:
            cert = LmiCertificate(theta, exact_margin)
            return LmiResult(LmiStatus.FEASIBLE, cert, exact_margin, iters, message)

    if upper < eps and exact_margin <= 0.0:
        return LmiResult(
            LmiStatus.INFEASIBLE, None, exact_margin, iters,
            f"maximal margin bounded by {upper:.3e} < strictness {eps:.3e}",
        )
    return LmiResult(
        LmiStatus.INFEASIBLE_AT_TOL, None, exact_margin, iters,
        f"achieved margin {exact_margin:.3e} below strictness {eps:.3e}",
    )


def controller_from_certificate(
    reduced: ReducedTriplet, cert: LmiCertificate, basis: OrthonormalBasis
) -> Controller:
    """Recover K_hat = U Theta (X Theta)^{-1} and lift it with the basis."""
    theta = cert.theta
    r = reduced.reduced_dim
    if theta.shape != (reduced.num_samples, r):
        raise ContractViolation(
            f"certificate shape {theta.shape} does not match data ({reduced.num_samples}, {r})"
        )
    if basis.rank != r:
        raise ContractViolation(f"basis rank {basis.rank} does not match reduced dimension {r}")
    P = reduced.X_hat @ theta
    cond = np.linalg.cond(P)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise NumericalFailure(f"X Theta is numerically singular (cond {cond:.3e})")
    K_hat = np.linalg.solve(P.T, (reduced.U @ theta).T).T
    K = K_hat @ basis.V.T
    return Controller(K, K_hat, r, basis.fingerprint)
