"""Deterministic random-stream derivation for experiments.

A single 64-bit seed is split into independent per-purpose streams through
``numpy.random.SeedSequence`` spawn keys, so that changing one consumer
(say, the number of warm-up draws) never shifts the randomness seen by
another.  The purpose indices are fixed:

======  ========================================
index   purpose
======  ========================================
0       warm-up input draws (adaptive sampling)
1       re-projection coefficients and inputs
2       baseline (unguided) input draws
3       synthetic model generation
4       verification perturbations
======  ========================================

Identical ``(seed, purpose)`` pairs always yield bit-identical streams,
which is what makes experiment records reproducible.
"""

import numpy as np

from .errors import ContractViolation

WARMUP = 0
REPROJECTION = 1
BASELINE = 2
MODELGEN = 3
VERIFICATION = 4

_MAX_SEED = 2**64


def stream(seed, purpose):
    """Return the PCG64 generator for one purpose under a 64-bit run seed."""
    seed = int(seed)
    if not 0 <= seed < _MAX_SEED:
        raise ContractViolation(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(int(purpose),))
    return np.random.default_rng(ss)
