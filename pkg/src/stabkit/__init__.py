"""stabkit: stabilizing feedback controllers for black-box systems from scarce data.

The toolkit decides, from sampled input/state/response triplets alone,
whether the data certifies a stabilizing state feedback (a matrix-inequality
feasibility problem), recovers the gain when it does, and - its core piece -
generates such data adaptively with as few model queries as possible by
closing the loop with each intermediate gain while growing a subspace of
visited state directions.  Benchmarks, unguided baselines and a reproducible
experiment command line round out the package.
"""

__version__ = "0.1.0"

from .adaptive import (
    IciConfig,
    IciResult,
    IciTrace,
    IterationRecord,
    QueryCounter,
    TerminationReason,
    reproject,
    run_baseline,
    run_ici,
    simulate_closed_loop,
)
from .errors import (
    ContractViolation,
    DivergenceError,
    ModelConstructionError,
    NumericalFailure,
    RankDeficientData,
    StabkitError,
)
from .inference import InferenceOutcome, InferenceStatus, infer_controller
from .lmi import (
    Controller,
    LmiCertificate,
    LmiResult,
    LmiStatus,
    StabilityVerdict,
    controller_from_certificate,
    default_strictness,
    evaluate_certificate,
    right_inverse_check,
    solve_informativity_lmi,
    spectral_verdict,
)
from .models import (
    LinearStateSpaceModel,
    LinearSynthetic,
    QueryableModel,
    get_model,
    imex_euler_step,
    make_heat2d,
    make_linear_synthetic,
    make_reactor1d,
    make_toda,
    rk4_integrate,
)
from .subspace import COARSE_ORTHO_TOL, DEFAULT_ORTHO_TOL, OrthonormalBasis
from .triplets import (
    DataTriplet,
    ReducedTriplet,
    ShiftedTriplet,
    SteadyState,
    TimeDomain,
    append_sample,
    load_triplet,
    project_data,
    save_triplet,
    shift_data,
)

__all__ = [name for name in dir() if not name.startswith("_")]
