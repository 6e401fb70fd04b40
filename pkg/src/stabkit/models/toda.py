"""Mass-spring-damper chain with exponential springs, split into clusters.

m particles carry displacement and velocity states (N = 2m).  Particles are
grouped into three clusters; exponential springs connect consecutive
particles within a cluster, while the clusters themselves are mechanically
disconnected (the physical picture: separately formed crystal clusters that
drift relative to each other unless held in place).  Each cluster has one
input that applies a common force to all of its particles.

    q_i' = v_i
    v_i' = phi(q_{i+1} - q_i) - phi(q_i - q_{i-1}) - damping * v_i + (B u)_i

with the spring law phi(d) = exp(d) - 1 (unit linear stiffness at rest) and
terms dropped where a neighbor does not exist.  A uniform displacement of a
cluster produces no spring force, so every cluster carries a neutral
translation mode: the uncontrolled spectrum touches the stability boundary
and perturbed clusters never return to the reference position on their own.

The discrete-time variant applies implicit-explicit Euler with sampling
time tau = 0.1: damping and the linearized spring coupling implicit, the
nonlinear spring remainder and the controls explicit.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractViolation
from ..triplets import SteadyState, TimeDomain
from .base import ContinuousSplitModel, DiscreteImexModel

DAMPING = 0.4
_EXP_CAP = 60.0


def _cluster_sizes(m, clusters=3):
    base = m // clusters
    rem = m % clusters
    return [base + (1 if k < rem else 0) for k in range(clusters)]


def _coupling_graph(m):
    """Adjacency of consecutive particles within each cluster."""
    sizes = _cluster_sizes(m)
    edges = []
    start = 0
    for size in sizes:
        for i in range(start, start + size - 1):
            edges.append((i, i + 1))
        start += size
    return sizes, edges


def _spring_force(q, edges):
    f = np.zeros_like(q)
    for i, j in edges:
        d = np.clip(q[j] - q[i], -_EXP_CAP, _EXP_CAP)
        tension = np.expm1(d)  # exp(d) - 1
        f[i] += tension
        f[j] -= tension
    return f


def _spring_jacobian(q, edges):
    m = q.shape[0]
    J = np.zeros((m, m))
    for i, j in edges:
        d = np.clip(q[j] - q[i], -_EXP_CAP, _EXP_CAP)
        k = np.exp(d)
        J[i, i] -= k
        J[i, j] += k
        J[j, i] += k
        J[j, j] -= k
    return J


def make_toda(m=100, p=3, domain=TimeDomain.DISCRETE, tau=0.1, damping=DAMPING):
    """Three-cluster exponential spring chain; see the module docstring."""
    if m < 12:
        raise ContractViolation("need at least 12 particles")
    if p != 3:
        raise ContractViolation("the chain exposes exactly 3 cluster inputs")
    sizes, edges = _coupling_graph(m)
    # linearized spring coupling at the rest state (unit stiffness)
    L = _spring_jacobian(np.zeros(m), edges)
    A = np.zeros((2 * m, 2 * m))
    A[:m, m:] = np.eye(m)
    A[m:, :m] = L
    A[m:, m:] = -damping * np.eye(m)
    B = np.zeros((2 * m, 3))
    start = 0
    for k, size in enumerate(sizes):
        B[m + start : m + start + size, k] = 1.0
        start += size

    def g(x):
        q = x[:m]
        out = np.zeros(2 * m)
        out[m:] = _spring_force(q, edges) - L @ q
        return out

    def g_jac(x):
        q = x[:m]
        J = np.zeros((2 * m, 2 * m))
        J[m:, :m] = _spring_jacobian(q, edges) - L
        return J

    ss = SteadyState(np.zeros(2 * m), np.zeros(3))
    if domain is TimeDomain.CONTINUOUS:
        return ContinuousSplitModel(A, g, B, ss, g_jac=g_jac, sample_time=0.1, rk4_step=0.02)
    return DiscreteImexModel(A, g, B, tau, ss, g_jac=g_jac)
