"""Experiment records: canonical JSON plus derived CSV outputs.

JSON is the canonical record; floats are serialized with ``repr`` (shortest
round-trip, up to 17 significant digits) and keys are sorted, so identical
runs produce byte-identical files apart from the wall time.  Files are
written atomically (temp file + rename).
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .adaptive import IciResult, simulate_closed_loop
from .lmi import spectral_verdict
from .rngs import VERIFICATION, stream
from .triplets import SteadyState, triplet_to_nested_lists

VERIFICATION_STEPS = 500
VERIFICATION_RATIO = 1e-3


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-record-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def verify_controller(model, ss: SteadyState, controller, seed,
                      n_steps=VERIFICATION_STEPS, ratio_required=VERIFICATION_RATIO):
    """Spectral check (when Jacobians exist) plus a perturbed closed-loop run.

    The perturbation has norm 1e-2 * max(1, ||x_bar||) and is drawn from the
    dedicated verification stream of the run seed.  Returns the verification
    dict and the simulated distance trajectory (None without a controller).
    """
    verification = {"spectral": None, "simulation": None}
    distances = None
    if controller is None:
        return verification, distances
    jac = model.jacobians_at_steady_state()
    if jac is not None:
        J_x, J_u = jac
        verdict = spectral_verdict(J_x + J_u @ controller.gain, model.domain)
        verification["spectral"] = {
            "available": True,
            "stable": bool(verdict.stable),
            "extremum": float(verdict.extremum),
        }
    rng = stream(seed, VERIFICATION)
    delta = rng.standard_normal(model.state_dim)
    pert_norm = 1e-2 * max(1.0, float(np.linalg.norm(ss.x_bar)))
    delta *= pert_norm / np.linalg.norm(delta)
    distances = simulate_closed_loop(model, ss, controller.gain, ss.x_bar + delta, n_steps)
    initial = float(distances[0])
    final = float(distances[-1])
    ratio = final / initial if initial > 0 else float("inf")
    verification["simulation"] = {
        "perturbation_norm": pert_norm,
        "steps": n_steps,
        "initial_distance": initial,
        "final_distance": final if np.isfinite(final) else None,
        "ratio": ratio if np.isfinite(ratio) else None,
        "passed": bool(np.isfinite(ratio) and ratio <= ratio_required),
    }
    return verification, distances


def decide_outcome(result: IciResult, verification) -> str:
    if result.terminated_by.value == "aborted":
        return "aborted"
    if result.controller is None:
        return "failed"
    sim = verification.get("simulation")
    if sim is None or not sim["passed"]:
        return "failed"
    spectral = verification.get("spectral")
    if spectral is not None and not spectral["stable"]:
        return "failed"
    return "stabilized"


def build_record(config, model_info, method, result: IciResult, verification,
                 outcome, wall_time_ms):
    """Assemble the canonical record dict for one experiment run."""
    controller = result.controller
    record = {
        "schema": "stabkit-record-v1",
        "config": config,
        "model": model_info,
        "method": method,
        "total_queries": result.total_queries,
        "query_breakdown": {
            "samples": result.trace.sample_queries,
            "integration": result.trace.integration_queries,
            "reprojection": result.trace.reprojection_queries,
        },
        "outcome": outcome,
        "verification": verification,
        "trace": result.trace.to_json_rows(),
        "result": {
            "terminated_by": result.terminated_by.value,
            "basis_rank": result.basis.rank,
            "num_samples": result.triplet.num_samples,
            "controller_present": controller is not None,
            "controller_frobenius": (
                float(np.linalg.norm(controller.gain)) if controller is not None else None
            ),
            "triplet": triplet_to_nested_lists(result.triplet),
        },
        "wall_time_ms": wall_time_ms,
    }
    return record


def write_record_json(path, record):
    _atomic_write(path, json.dumps(record, sort_keys=True, indent=2) + "\n")


def write_trajectory_csv(path, distances):
    lines = ["step,distance"]
    if distances is not None:
        for k, d in enumerate(distances):
            lines.append(f"{k},{float(d)!r}")
    _atomic_write(path, "\n".join(lines) + "\n")


def canonical_without_wall_time(record_text):
    """Record content with the wall time removed, for reproducibility checks."""
    data = json.loads(record_text)
    data.pop("wall_time_ms", None)
    return json.dumps(data, sort_keys=True, indent=2)
