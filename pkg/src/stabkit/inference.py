"""Low-dimensional controller inference from raw data and an orthonormal basis.

One call composes the whole pipeline: shift the raw triplet into
steady-state-relative coordinates, project it onto the basis, decide
informativity through the matrix-inequality solver, and on success recover
the reduced gain and lift it back to full coordinates.  The caller owns the
basis policy; nothing here chooses or grows subspaces.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, NumericalFailure
from .lmi import (
    Controller,
    LmiCertificate,
    LmiResult,
    LmiStatus,
    controller_from_certificate,
    solve_informativity_lmi,
)
from .subspace import OrthonormalBasis
from .triplets import DataTriplet, SteadyState, project_data, shift_data


class InferenceStatus(enum.Enum):
    STABILIZING = "stabilizing"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class InferenceOutcome:
    """Result of one inference attempt.

    A controller and its certificate are present exactly when the status is
    ``STABILIZING``.
    """

    status: InferenceStatus
    controller: Controller | None = None
    certificate: LmiCertificate | None = None
    detail: str = ""

    def __post_init__(self):
        stab = self.status is InferenceStatus.STABILIZING
        if stab != (self.controller is not None) or stab != (self.certificate is not None):
            raise ContractViolation(
                "controller and certificate must be present exactly for stabilizing outcomes"
            )


def infer_controller(
    raw: DataTriplet, ss: SteadyState, f_ss, basis: OrthonormalBasis, eps_strict=None
) -> InferenceOutcome:
    """Infer a feedback gain stabilizing every model consistent with the data.

    ``f_ss`` is the model response at the steady state, passed explicitly so
    exact and numerically computed steady states are treated uniformly.
    """
    if basis.rank < 1:
        raise ContractViolation("basis must contain at least one direction")
    if raw.num_samples < 1:
        raise ContractViolation("need at least one data sample")
    reduced = project_data(shift_data(raw, ss, f_ss), basis)
    try:
        result: LmiResult = solve_informativity_lmi(reduced, eps_strict=eps_strict)
    except NumericalFailure as exc:
        return InferenceOutcome(InferenceStatus.NUMERICAL_FAILURE, detail=str(exc))
    if result.status is not LmiStatus.FEASIBLE:
        return InferenceOutcome(InferenceStatus.INFEASIBLE, detail=result.message)
    try:
        controller = controller_from_certificate(reduced, result.certificate, basis)
    except NumericalFailure as exc:
        return InferenceOutcome(InferenceStatus.NUMERICAL_FAILURE, detail=str(exc))
    if not np.all(np.isfinite(controller.gain)):
        return InferenceOutcome(
            InferenceStatus.NUMERICAL_FAILURE, detail="recovered gain is not finite"
        )
    return InferenceOutcome(
        InferenceStatus.STABILIZING, controller, result.certificate, result.message
    )
