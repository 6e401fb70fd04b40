"""Adaptive data sampling: the iterative inference loop, re-projection, baselines.

The iterative loop alternates between exciting the system and re-inferring a
feedback gain.  While no gain is known, inputs are random draws centered at
the steady input; afterwards the most recent gain closes the loop, which
keeps trajectories near the steady state and, by construction, makes the
collected samples informative for stabilization over the grown subspace.
Each iteration appends exactly one sample; the subspace is extended with the
newly visited state direction only while the previous gain still certified
stabilization (or the basis is empty), so unstable directions are not
accumulated faster than they can be handled.

When inference fails - infeasible or numerically - the data set is rebuilt
by re-projection: the model is queried at scaled basis directions around the
steady state (plus optional random in-span extras), with inputs from the
last known gain when one exists.  This restores an identity leading block
in the projected state data and typically resolves the failure.

Unguided baselines collect a budget of samples under purely random inputs
(single or restarted trajectories), grow the basis by the same rule, and
run inference once at the end with the same re-projection fallback.
"""

from __future__ import annotations

import enum
from contextlib import contextmanager
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractViolation, StabkitError
from .inference import InferenceStatus, infer_controller
from .lmi import Controller
from .rngs import BASELINE, REPROJECTION, WARMUP, stream
from .subspace import OrthonormalBasis
from .triplets import DataTriplet, SteadyState, TimeDomain, append_sample
from .models.base import integrate_model


class TerminationReason(enum.Enum):
    DISTANCE_TOL = "distance_tol"
    MAX_ITERS = "max_iters"
    RANK_STAGNATION = "rank_stagnation"
    ABORTED = "aborted"


@dataclass(frozen=True)
class IciConfig:
    """Knobs of one adaptive run.

    ``None`` fields are resolved against the model at run start:
    stop_tol = 1e-6 * max(1, ||x_bar||), alpha = 1e-2 * max(1, ||x_bar||),
    reproj_extra = input dimension, warmup_input_stddev =
    1e-2 * (1 + ||u_bar||).
    """

    max_iters: int = 60
    stop_tol: float | None = None
    ortho_tol: float = 1e-8
    alpha: float | None = None
    reproj_extra: int | None = None
    rng_seed: int = 0
    warmup_input_stddev: float | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ContractViolation("max_iters must be positive")
        if self.stop_tol is not None and self.stop_tol <= 0:
            raise ContractViolation("stop_tol must be positive")
        if self.ortho_tol < 0:
            raise ContractViolation("ortho_tol must be nonnegative")
        if self.alpha is not None and self.alpha <= 0:
            raise ContractViolation("alpha must be positive")
        if self.reproj_extra is not None and self.reproj_extra < 0:
            raise ContractViolation("reproj_extra must be nonnegative")
        if self.warmup_input_stddev is not None and self.warmup_input_stddev <= 0:
            raise ContractViolation("warmup_input_stddev must be positive")

    def resolve(self, model, ss: SteadyState) -> "IciConfig":
        """Fill model-dependent defaults; idempotent."""
        scale_x = max(1.0, float(np.linalg.norm(ss.x_bar)))
        scale_u = 1.0 + float(np.linalg.norm(ss.u_bar))
        return replace(
            self,
            stop_tol=self.stop_tol if self.stop_tol is not None else 1e-6 * scale_x,
            alpha=self.alpha if self.alpha is not None else 1e-2 * scale_x,
            reproj_extra=self.reproj_extra if self.reproj_extra is not None else model.input_dim,
            warmup_input_stddev=(
                self.warmup_input_stddev
                if self.warmup_input_stddev is not None
                else 1e-2 * scale_u
            ),
        )


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    queries_total: int
    basis_rank: int
    proj_residual: float
    ctrl_change: float
    distance: float
    status: str
    reproj_used: bool


@dataclass
class IciTrace:
    """Per-iteration diagnostics plus the query breakdown of the whole run."""

    rows: list = field(default_factory=list)
    sample_queries: int = 0
    integration_queries: int = 0
    reprojection_queries: int = 0

    @property
    def total_queries(self):
        return self.sample_queries + self.integration_queries + self.reprojection_queries

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("iter,queries,rank,proj_residual,ctrl_change,distance,status,reproj\n")
            for r in self.rows:
                fh.write(
                    f"{r.iteration},{r.queries_total},{r.basis_rank},{r.proj_residual!r},"
                    f"{r.ctrl_change!r},{r.distance!r},{r.status},{int(r.reproj_used)}\n"
                )

    def to_json_rows(self):
        return [
            {
                "iter": r.iteration,
                "queries": r.queries_total,
                "rank": r.basis_rank,
                "proj_residual": r.proj_residual,
                "ctrl_change": r.ctrl_change,
                "distance": r.distance,
                "status": r.status,
                "reproj": bool(r.reproj_used),
            }
            for r in self.rows
        ]


@dataclass(frozen=True)
class IciResult:
    controller: Controller | None
    triplet: DataTriplet
    basis: OrthonormalBasis
    trace: IciTrace
    terminated_by: TerminationReason

    @property
    def total_queries(self):
        return self.trace.total_queries


class QueryCounter:
    """Model wrapper that counts queries by purpose.

    Implements the queryable-model surface by delegation, so the integrators
    and the re-projection routine can be handed the counter itself and every
    stage evaluation is accounted for.
    """

    def __init__(self, model):
        self._model = model
        self.counts = {"samples": 0, "integration": 0, "reprojection": 0}
        self._mode = "samples"

    # queryable-model surface -------------------------------------------------
    @property
    def domain(self):
        return self._model.domain

    @property
    def state_dim(self):
        return self._model.state_dim

    @property
    def input_dim(self):
        return self._model.input_dim

    @property
    def sample_time(self):
        return self._model.sample_time

    @property
    def rk4_step(self):
        return self._model.rk4_step

    def steady_state(self):
        return self._model.steady_state()

    def steady_state_response(self):
        return self._model.steady_state_response()

    def jacobians_at_steady_state(self):
        return self._model.jacobians_at_steady_state()

    def query(self, x, u):
        self.counts[self._mode] += 1
        return self._model.query(x, u)

    def integrate(self, x, input_policy, t_a, t_b):
        with self.mode("integration"):
            return integrate_model(self, x, input_policy, t_a, t_b)

    # accounting ---------------------------------------------------------------
    @contextmanager
    def mode(self, name):
        prev = self._mode
        self._mode = name
        try:
            yield
        finally:
            self._mode = prev

    @property
    def total(self):
        return sum(self.counts.values())


def _resolve_times(model, times, max_iters):
    if times is None:
        gap = 1.0 if model.domain is TimeDomain.DISCRETE else model.sample_time
        return np.arange(max_iters + 1, dtype=float) * gap
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.shape[0] < max_iters + 1:
        raise ContractViolation(
            f"schedule must provide at least max_iters + 1 = {max_iters + 1} points"
        )
    if np.any(np.diff(times) <= 0):
        raise ContractViolation("schedule times must be strictly increasing")
    return times


def _feedback_policy(gain, ss):
    def policy(t, x, K=gain, x_bar=ss.x_bar, u_bar=ss.u_bar):
        return K @ (x - x_bar) + u_bar

    return policy


def _constant_policy(u_held):
    def policy(t, x, u=u_held):
        return u

    return policy


def reproject(
    basis: OrthonormalBasis,
    ss: SteadyState,
    model,
    alpha,
    T_req,
    K_opt: Controller | None,
    rng,
    input_stddev=None,
):
    """Rebuild a data triplet by querying at scaled basis directions.

    The first r columns place the state at x_bar + alpha * v_k, so the
    projected state data starts with alpha times the identity; further
    columns use random unit combinations of the basis.  Inputs come from the
    given gain when present, otherwise they are random draws centered at the
    steady input.  From the point where the data could be informative on
    paper (one column fewer than the basis rank), inference is attempted
    after every sample and the loop exits early on success.
    """
    r = basis.rank
    if r < 1:
        raise ContractViolation("re-projection needs a nonempty basis")
    if T_req < 1:
        raise ContractViolation("must request at least one sample")
    if alpha <= 0:
        raise ContractViolation("state scaling must be positive")
    if input_stddev is None:
        input_stddev = 1e-2 * (1.0 + float(np.linalg.norm(ss.u_bar)))
    f_ss = model.steady_state_response()
    p = model.input_dim
    trip = DataTriplet.empty(p, model.state_dim, model.domain)
    for k in range(1, T_req + 1):
        if k <= r:
            deviation = alpha * basis.column(k - 1)
        else:
            combo = basis.V @ rng.standard_normal(r)
            norm = np.linalg.norm(combo)
            while norm < 1e-300:
                combo = basis.V @ rng.standard_normal(r)
                norm = np.linalg.norm(combo)
            deviation = alpha * combo / norm
        if K_opt is not None:
            u = K_opt.gain @ deviation + ss.u_bar
        else:
            u = ss.u_bar + input_stddev * rng.standard_normal(p)
        x = ss.x_bar + deviation
        y = model.query(x, u)
        trip = append_sample(trip, u, x, y)
        if k + 1 >= r:
            outcome = infer_controller(trip, ss, f_ss, basis)
            if outcome.status is InferenceStatus.STABILIZING:
                break
    return trip


def run_ici(model, ss=None, x0=None, times=None, cfg: IciConfig | None = None) -> IciResult:
    """Adaptive sampling loop; returns the final gain, data, basis and trace.

    Stops when the trajectory distance to the steady state falls below the
    tolerance while a certified gain exists, when the subspace stops growing
    for input-dimension + 1 consecutive iterations with inference succeeding
    (rank stagnation), at the iteration cap, or when repeated failures after
    re-projection make progress impossible.
    """
    cfg = IciConfig() if cfg is None else cfg
    if ss is None:
        ss = model.steady_state()
    resolved = cfg.resolve(model, ss)
    counter = QueryCounter(model)
    rng_warm = stream(resolved.rng_seed, WARMUP)
    rng_reproj = stream(resolved.rng_seed, REPROJECTION)
    N, p = model.state_dim, model.input_dim
    f_ss = model.steady_state_response()
    times = _resolve_times(model, times, resolved.max_iters)
    x = ss.x_bar.copy() if x0 is None else np.array(x0, dtype=float)
    if x.shape != (N,):
        raise ContractViolation(f"initial state has shape {x.shape}, expected ({N},)")

    trip = DataTriplet.empty(p, N, model.domain)
    basis = OrthonormalBasis.empty(N, resolved.ortho_tol)
    controller: Controller | None = None
    K_prev = np.zeros((p, N))
    last_stabilizing = False
    rows = []
    stagnant = 0
    failed_after_reproj = 0
    terminated = TerminationReason.MAX_ITERS

    for j in range(1, resolved.max_iters + 1):
        t_prev, t_next = times[j - 1], times[j]
        if controller is None:
            u_held = ss.u_bar + resolved.warmup_input_stddev * rng_warm.standard_normal(p)
            policy = _constant_policy(u_held)
        else:
            policy = _feedback_policy(controller.gain, ss)
        u = policy(t_prev, x)
        try:
            y = counter.query(x, u)
            if model.domain is TimeDomain.DISCRETE and abs((t_next - t_prev) - 1.0) < 1e-9:
                # one-step schedules: the query already is the next state
                x_next = y
            else:
                x_next = counter.integrate(x, policy, t_prev, t_next)
        except StabkitError:
            terminated = TerminationReason.ABORTED
            break

        attempted = accepted = False
        if basis.rank == 0 or last_stabilizing:
            attempted = True
            basis, accepted = basis.extend(x - ss.x_bar)
        trip = append_sample(trip, u, x, y)

        status = "not_run"
        reproj_used = False
        if basis.rank >= 1:
            outcome = infer_controller(trip, ss, f_ss, basis)
            status = outcome.status.value
            if outcome.status is not InferenceStatus.STABILIZING:
                reproj_used = True
                try:
                    with counter.mode("reprojection"):
                        trip = reproject(
                            basis, ss, counter, resolved.alpha,
                            basis.rank + resolved.reproj_extra, controller, rng_reproj,
                            input_stddev=resolved.warmup_input_stddev,
                        )
                except StabkitError:
                    terminated = TerminationReason.ABORTED
                    break
                outcome = infer_controller(trip, ss, f_ss, basis)
                status = outcome.status.value
            if outcome.status is InferenceStatus.STABILIZING:
                controller = outcome.controller
                failed_after_reproj = 0
            elif reproj_used:
                failed_after_reproj += 1

        K_cur = controller.gain if controller is not None else np.zeros((p, N))
        ctrl_change = float(
            np.linalg.norm(K_cur - K_prev) / max(np.linalg.norm(K_prev), 1.0)
        )
        K_prev = K_cur
        last_stabilizing = status == "stabilizing"
        x = x_next
        distance = float(np.linalg.norm(x - ss.x_bar))
        _, proj_residual = basis.coordinates(x - ss.x_bar)
        rows.append(
            IterationRecord(
                j, counter.total, basis.rank, proj_residual, ctrl_change,
                distance, status, reproj_used,
            )
        )

        stagnant = stagnant + 1 if (attempted and not accepted and last_stabilizing) else 0
        if controller is not None and distance < resolved.stop_tol:
            terminated = TerminationReason.DISTANCE_TOL
            break
        if stagnant >= p + 1:
            terminated = TerminationReason.RANK_STAGNATION
            break
        if failed_after_reproj >= 2:
            terminated = TerminationReason.ABORTED
            break

    trace = IciTrace(
        rows,
        counter.counts["samples"],
        counter.counts["integration"],
        counter.counts["reprojection"],
    )
    return IciResult(controller, trip, basis, trace, terminated)


def run_baseline(
    model,
    ss=None,
    x0=None,
    times=None,
    n_trajectories=1,
    budget=None,
    cfg: IciConfig | None = None,
) -> IciResult:
    """Unguided data collection with random inputs, then one inference pass.

    The budget is split evenly over ``n_trajectories`` restarts from the
    initial state.  Inference runs once on the full triplet and falls back
    to re-projection (without a gain) on failure, mirroring how the adaptive
    loop recovers from uninformative data.
    """
    cfg = IciConfig() if cfg is None else cfg
    if ss is None:
        ss = model.steady_state()
    resolved = cfg.resolve(model, ss)
    if budget is None or budget < 1:
        raise ContractViolation("budget must be a positive sample count")
    if n_trajectories < 1 or budget % n_trajectories != 0:
        raise ContractViolation(
            f"budget {budget} must divide into {n_trajectories} equal segments"
        )
    segment = budget // n_trajectories
    counter = QueryCounter(model)
    rng_base = stream(resolved.rng_seed, BASELINE)
    rng_reproj = stream(resolved.rng_seed, REPROJECTION)
    N, p = model.state_dim, model.input_dim
    f_ss = model.steady_state_response()
    x0 = ss.x_bar.copy() if x0 is None else np.array(x0, dtype=float)
    gap = 1.0 if model.domain is TimeDomain.DISCRETE else model.sample_time

    trip = DataTriplet.empty(p, N, model.domain)
    basis = OrthonormalBasis.empty(N, resolved.ortho_tol)
    rows = []
    aborted = False
    step_index = 0
    for _traj in range(n_trajectories):
        x = x0.copy()
        for _k in range(segment):
            u = ss.u_bar + resolved.warmup_input_stddev * rng_base.standard_normal(p)
            try:
                y = counter.query(x, u)
                if model.domain is TimeDomain.DISCRETE:
                    x_next = y
                else:
                    t = step_index * gap
                    x_next = counter.integrate(x, _constant_policy(u), t, t + gap)
            except StabkitError:
                aborted = True
                break
            basis, _ = basis.extend(x - ss.x_bar)
            trip = append_sample(trip, u, x, y)
            x = x_next
            step_index += 1
            rows.append(
                IterationRecord(
                    step_index, counter.total, basis.rank,
                    basis.coordinates(x - ss.x_bar)[1], 0.0,
                    float(np.linalg.norm(x - ss.x_bar)), "not_run", False,
                )
            )
            if not np.all(np.isfinite(x)):
                aborted = True
                break
        if aborted:
            break

    controller = None
    status = "not_run"
    reproj_used = False
    if not aborted and basis.rank >= 1 and trip.num_samples >= 1:
        outcome = infer_controller(trip, ss, f_ss, basis)
        status = outcome.status.value
        if outcome.status is not InferenceStatus.STABILIZING:
            reproj_used = True
            try:
                with counter.mode("reprojection"):
                    trip = reproject(
                        basis, ss, counter, resolved.alpha,
                        basis.rank + resolved.reproj_extra, None, rng_reproj,
                        input_stddev=resolved.warmup_input_stddev,
                    )
                outcome = infer_controller(trip, ss, f_ss, basis)
                status = outcome.status.value
            except StabkitError:
                aborted = True
        if outcome.status is InferenceStatus.STABILIZING:
            controller = outcome.controller
    if rows:
        last = rows[-1]
        K_norm = float(np.linalg.norm(controller.gain)) if controller is not None else 0.0
        rows[-1] = IterationRecord(
            last.iteration, counter.total, basis.rank, last.proj_residual,
            K_norm, last.distance, status, reproj_used,
        )
    trace = IciTrace(
        rows,
        counter.counts["samples"],
        counter.counts["integration"],
        counter.counts["reprojection"],
    )
    reason = TerminationReason.ABORTED if aborted else TerminationReason.MAX_ITERS
    return IciResult(controller, trip, basis, trace, reason)


def simulate_closed_loop(model, ss: SteadyState, gain, x_start, n_steps):
    """Distances to the steady state along a feedback-closed simulation.

    Runs ``n_steps`` sampling intervals under u = K (x - x_bar) + u_bar and
    returns the n_steps + 1 distances.  If the state blows up the remaining
    entries are set to infinity.  Verification runs query the raw model and
    are not part of any sampling budget.
    """
    x = np.array(x_start, dtype=float)
    distances = np.empty(n_steps + 1)
    distances[0] = np.linalg.norm(x - ss.x_bar)
    policy = _feedback_policy(np.asarray(gain, dtype=float), ss)
    gap = 1.0 if model.domain is TimeDomain.DISCRETE else model.sample_time
    for k in range(n_steps):
        try:
            if model.domain is TimeDomain.DISCRETE:
                x = model.query(x, policy(k, x))
            else:
                x = integrate_model(model, x, policy, k * gap, (k + 1) * gap)
        except StabkitError:
            distances[k + 1 :] = np.inf
            return distances
        if not np.all(np.isfinite(x)):
            distances[k + 1 :] = np.inf
            return distances
        distances[k + 1] = np.linalg.norm(x - ss.x_bar)
    return distances
