"""Benchmark queryable systems and their time integrators.

The registry maps short names to factories so experiment drivers can build
models from configuration: ``heat2d``, ``reactor1d``, ``toda`` and
``linsynth``.
"""

from __future__ import annotations

from ..errors import ContractViolation
from ..rngs import MODELGEN, stream
from ..triplets import TimeDomain
from .base import (
    ContinuousSplitModel,
    DiscreteImexModel,
    ImexStepper,
    LinearStateSpaceModel,
    QueryableModel,
    imex_euler_step,
    integrate_model,
    rk4_integrate,
)
from .linear import (
    LinearSynthetic,
    default_heat_shift,
    laplacian_2d,
    laplacian_2d_eigenvalues,
    make_heat2d,
    make_linear_synthetic,
)
from .reactor import make_reactor1d
from .toda import make_toda

MODEL_NAMES = ("heat2d", "reactor1d", "toda", "linsynth")


def _parse_domain(domain):
    if isinstance(domain, TimeDomain):
        return domain
    key = str(domain).lower()
    if key in ("dt", "discrete", "discrete_time"):
        return TimeDomain.DISCRETE
    if key in ("ct", "continuous", "continuous_time"):
        return TimeDomain.CONTINUOUS
    raise ContractViolation(f"unknown time domain {domain!r}")


def get_model(name, seed=0, domain="dt", **params) -> QueryableModel:
    """Build a registered model; ``params`` override the desk-scale defaults."""
    dom = _parse_domain(domain)
    if name == "heat2d":
        return make_heat2d(
            n_side=int(params.pop("n_side", 20)),
            c=params.pop("c", None),
            domain=dom,
            tau=float(params.pop("tau", 0.1)),
        )
    if name == "reactor1d":
        return make_reactor1d(
            cells=int(params.pop("cells", 100)),
            domain=dom,
            tau=float(params.pop("tau", 0.01)),
        )
    if name == "toda":
        return make_toda(
            m=int(params.pop("particles", 100)),
            domain=dom,
            tau=float(params.pop("tau", 0.1)),
        )
    if name == "linsynth":
        n = int(params.pop("n", 6))
        p = int(params.pop("p", 2))
        n_unstable = int(params.pop("n_unstable", max(1, min(2, n))))
        rng = stream(seed, MODELGEN)
        return make_linear_synthetic(rng, n, p, n_unstable, dom)
    raise ContractViolation(f"unknown model {name!r}; known: {', '.join(MODEL_NAMES)}")


__all__ = [
    "ContinuousSplitModel",
    "DiscreteImexModel",
    "ImexStepper",
    "LinearStateSpaceModel",
    "LinearSynthetic",
    "MODEL_NAMES",
    "QueryableModel",
    "default_heat_shift",
    "get_model",
    "imex_euler_step",
    "integrate_model",
    "laplacian_2d",
    "laplacian_2d_eigenvalues",
    "make_heat2d",
    "make_linear_synthetic",
    "make_reactor1d",
    "make_toda",
    "rk4_integrate",
]
