"""Branching-process solver for the three epidemiological quantities.

Probability of emergence, epidemic threshold and expected epidemic size are
computed from the multi-type recursion over mask types: ``h_c[i]`` (``h_s[i]``)
is the probability that the infection subtree reached through a community
(school) edge leaving a type-i infector stays finite,

    h_c[i] = sum_j m[j] * (1 - Tc[i,j] + Tc[i,j] * Phi_c(h_c[j], h_s[j]))

where ``Phi_c(a, b)`` is the edge-biased (excess degree) sum
``sum_d P[d] * k_c / <k_c> * a**(k_c - 1) * b**k_s`` over the joint colored
degree distribution, and analogously for school edges.  The epidemic
threshold is the unit spectral radius of the linearization of this map at the
all-ones point, and the epidemic size follows from the dual recursion on
non-infection probabilities ``q`` where the transmission matrices act
transposed (the neighbor infects the focal node).

Two interchangeable evaluation kernels exist for the degree sums: a generic
one over truncated pmf grids and a closed-form one using exp(lam*(z-1)) when
both layers are Poisson.  They agree to ~1e-8 and serve as mutual
cross-checks; the closed form keeps parameter sweeps fast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    ScenarioConfig,
    TransmissibilityMatrices,
    build_transmissibility,
    colored_degree_pmf,
)

__all__ = [
    "ConvergenceError",
    "ExtinctionState",
    "SizeState",
    "AnalyticReport",
    "extinction_step",
    "solve_extinction",
    "emergence_probability",
    "build_jacobian",
    "spectral_radius",
    "critical_scaling",
    "size_step",
    "solve_size",
    "epidemic_size",
    "analyze",
]


class ConvergenceError(RuntimeError):
    """A fixed-point iteration or eigen-solve failed to converge."""

    def __init__(self, message: str, iterations: int = 0, residual: float = math.nan):
        super().__init__(f"{message} (iterations={iterations}, residual={residual:g})")
        self.iterations = iterations
        self.residual = residual


# ---------------------------------------------------------------------------
# Degree-sum kernels


class _PoissonKernel:
    """Closed-form joint-PGF sums when both layers are Poisson."""

    def __init__(self, lam_c: float, lam_s: float, alpha: float):
        self._lc = lam_c
        self._ls = lam_s
        self._a = alpha
        self.mean_kc = lam_c
        self.mean_ks = alpha * lam_s
        # E[k (k-1)] / E[k] of the layer's own distribution
        self.excess_factor_c = lam_c
        self.excess_factor_s = lam_s

    def _gc(self, a):
        return np.exp(self._lc * (a - 1.0))

    def _gs(self, b):
        return np.exp(self._ls * (b - 1.0))

    def excess_c(self, a, b):
        # following a community edge, membership of the far node is still Bernoulli(alpha)
        return self._gc(a) * (self._a * self._gs(b) + (1.0 - self._a))

    def excess_s(self, a, b):
        # a school edge can only lead to a school member
        return self._gc(a) * self._gs(b)

    def node(self, a, b):
        return self._gc(a) * (self._a * self._gs(b) + (1.0 - self._a))


class _GridKernel:
    """Truncated-pmf sums over the joint colored-degree grid.

    All three sums are literal contractions against the (k_c, k_s) grid; the
    excess sums are normalized by the same contraction evaluated at the
    all-ones point so that the trivial fixed point is exact in floating
    point.  Cost per evaluation is O(M * kc_max * ks_max).
    """

    def __init__(self, cfg: ScenarioConfig):
        joint = colored_degree_pmf(cfg)
        grid = joint.grid()
        grid /= grid.sum()  # condition on the truncated support
        kc = np.arange(grid.shape[0], dtype=float)
        ks = np.arange(grid.shape[1], dtype=float)
        self._grid = grid
        self._grid_c = grid * kc[:, None]  # weight k_c, for community-edge bias
        self._grid_s = grid * ks[None, :]
        self.mean_kc = float(self._grid_c.sum())
        self.mean_ks = float(self._grid_s.sum())
        ec_num = float(np.sum(self._grid_c * np.maximum(kc - 1.0, 0.0)[:, None]))
        es_num = float(np.sum(self._grid_s * np.maximum(ks - 1.0, 0.0)[None, :]))
        self.excess_factor_c = ec_num / self.mean_kc if self.mean_kc > 0 else 0.0
        self.excess_factor_s = es_num / self.mean_ks if self.mean_ks > 0 else 0.0
        ones = np.ones(1)
        self._norm_c = self._contract(self._grid_c, ones, ones, shift_c=True)[0]
        self._norm_s = self._contract(self._grid_s, ones, ones, shift_s=True)[0]

    def _contract(self, weights, a, b, shift_c=False, shift_s=False):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        kc_max = weights.shape[0] - 1
        ks_max = weights.shape[1] - 1
        pa = np.power(a[:, None], np.arange(kc_max + 1)[None, :])
        pb = np.power(b[:, None], np.arange(ks_max + 1)[None, :])
        if shift_c:  # a**(k_c - 1); the k_c = 0 row carries zero weight
            pa = np.concatenate([np.zeros((a.size, 1)), pa[:, :-1]], axis=1)
        if shift_s:
            pb = np.concatenate([np.zeros((b.size, 1)), pb[:, :-1]], axis=1)
        return np.einsum("kl,jk,jl->j", weights, pa, pb)

    def excess_c(self, a, b):
        return self._contract(self._grid_c, a, b, shift_c=True) / self._norm_c

    def excess_s(self, a, b):
        return self._contract(self._grid_s, a, b, shift_s=True) / self._norm_s

    def node(self, a, b):
        return self._contract(self._grid, a, b)


def _make_kernel(cfg: ScenarioConfig):
    engine = cfg.engine
    if engine == "auto":
        both_poisson = cfg.dist_c.kind == "poisson" and cfg.dist_s.kind == "poisson"
        engine = "poisson" if both_poisson else "grid"
    if engine == "poisson":
        return _PoissonKernel(cfg.dist_c.lam, cfg.dist_s.lam, cfg.alpha)
    return _GridKernel(cfg)


# ---------------------------------------------------------------------------
# Extinction recursion and probability of emergence


@dataclass(frozen=True)
class ExtinctionState:
    """Extinction probabilities following an edge out of a type-i infector."""

    h_c: np.ndarray
    h_s: np.ndarray
    iterations: int = 0
    residual: float = math.nan


def _ext_step(h_c, h_s, m, T, kern):
    # layers without edges keep their h pinned at 1 (no such edges exist)
    if kern.mean_kc > 0.0:
        phi_c = kern.excess_c(h_c, h_s)
        new_c = 1.0 - T.tc @ (m * (1.0 - phi_c))
    else:
        new_c = np.ones_like(h_c)
    if kern.mean_ks > 0.0:
        phi_s = kern.excess_s(h_c, h_s)
        new_s = 1.0 - T.ts @ (m * (1.0 - phi_s))
    else:
        new_s = np.ones_like(h_s)
    return new_c, new_s


def extinction_step(
    state: ExtinctionState, cfg: ScenarioConfig, T: TransmissibilityMatrices
) -> ExtinctionState:
    """One synchronous update of the extinction recursion."""
    kern = _make_kernel(cfg)
    new_c, new_s = _ext_step(state.h_c, state.h_s, cfg.masks.m, T, kern)
    return ExtinctionState(h_c=new_c, h_s=new_s)


def solve_extinction(
    cfg: ScenarioConfig, T: TransmissibilityMatrices | None = None
) -> ExtinctionState:
    """Smallest fixed point of the extinction recursion.

    Iterates from the all-zeros start, which converges monotonically upward
    to the extinction probability vector; starting at 1 would only recover
    the trivial fixed point.
    """
    if T is None:
        T = build_transmissibility(cfg)
    kern = _make_kernel(cfg)
    m = cfg.masks.m
    M = m.size
    h_c = np.zeros(M) if kern.mean_kc > 0 else np.ones(M)
    h_s = np.zeros(M) if kern.mean_ks > 0 else np.ones(M)
    for it in range(1, cfg.max_iter + 1):
        new_c, new_s = _ext_step(h_c, h_s, m, T, kern)
        resid = max(
            float(np.max(np.abs(new_c - h_c))), float(np.max(np.abs(new_s - h_s)))
        )
        h_c, h_s = new_c, new_s
        if resid < cfg.tol:
            return ExtinctionState(h_c=h_c, h_s=h_s, iterations=it, residual=resid)
    raise ConvergenceError("extinction recursion did not converge", cfg.max_iter, resid)


def emergence_probability(
    cfg: ScenarioConfig, T: TransmissibilityMatrices, state: ExtinctionState
) -> tuple[np.ndarray, float]:
    """Per-type and population-average probability of emergence.

    A type-i initiator seeds an infinite infected component with probability
    1 - sum_d P[d] * h_c[i]**k_c * h_s[i]**k_s; the average weighs initiator
    types by the mask mix.
    """
    kern = _make_kernel(cfg)
    pe_by_type = np.maximum(1.0 - kern.node(state.h_c, state.h_s), 0.0)
    pe_avg = float(cfg.masks.m @ pe_by_type)
    return pe_by_type, pe_avg


# ---------------------------------------------------------------------------
# Threshold


def build_jacobian(cfg: ScenarioConfig, T: TransmissibilityMatrices) -> np.ndarray:
    """Linearization of the extinction recursion at the all-ones point.

    Block layout [[J_cc, J_cs], [J_sc, J_ss]], mask type ascending within
    each block:

        J_cc[i,j] = m[j] * Tc[i,j] * E[k_c (k_c-1)] / E[k_c]
        J_cs[i,j] = m[j] * Tc[i,j] * <k_s>
        J_sc[i,j] = m[j] * Ts[i,j] * <k_c>
        J_ss[i,j] = m[j] * Ts[i,j] * E[k_s (k_s-1)] / E[k_s]

    with population means <.>.  A layer with no edges drops out of the block
    structure entirely (its equations are identically 1).
    """
    kern = _make_kernel(cfg)
    m = cfg.masks.m[None, :]
    has_c = kern.mean_kc > 0.0
    has_s = kern.mean_ks > 0.0
    if has_c and has_s:
        return np.block(
            [
                [kern.excess_factor_c * T.tc * m, kern.mean_ks * T.tc * m],
                [kern.mean_kc * T.ts * m, kern.excess_factor_s * T.ts * m],
            ]
        )
    if has_c:
        return kern.excess_factor_c * T.tc * m
    if has_s:
        return kern.excess_factor_s * T.ts * m
    return np.zeros((0, 0))


def _charpoly_radius(J: np.ndarray) -> float:
    # Faddeev-LeVerrier coefficients, then the largest root modulus.
    n = J.shape[0]
    eye = np.eye(n)
    M = np.zeros_like(J)
    c = 1.0
    coeffs = [1.0]
    for k in range(1, n + 1):
        M = J @ (M + c * eye)
        c = -np.trace(M) / k
        coeffs.append(c)
    roots = np.roots(coeffs)
    return float(np.max(np.abs(roots))) if roots.size else 0.0


def spectral_radius(J: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Largest eigenvalue modulus of a nonnegative matrix.

    Power iteration from a strictly positive start; the dominant eigenvalue
    of a nonnegative matrix is real and >= 0, so the Rayleigh quotient
    converges whenever the matrix is primitive.  On stagnation (e.g. an
    imprimitive zero pattern) falls back to characteristic-polynomial roots
    for sizes up to 8.
    """
    J = np.asarray(J, dtype=float)
    if J.size == 0:
        return 0.0
    n = J.shape[0]
    x = np.full(n, 1.0 / math.sqrt(n))
    lam = 0.0
    for _ in range(max_iter):
        y = J @ x
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            # a positive start only enters the kernel when every eigenvalue is 0
            return 0.0
        lam = float(x @ y)
        x = y / norm
        if float(np.max(np.abs(J @ x - lam * x))) <= tol * max(1.0, abs(lam)):
            return abs(lam)
    if n <= 8:
        return _charpoly_radius(J)
    raise ConvergenceError("power iteration stagnated", max_iter, abs(lam))


def critical_scaling(cfg: ScenarioConfig) -> float:
    """Common factor on (tc, ts) that puts the scenario exactly on threshold.

    The Jacobian is linear in both baseline transmissibilities, so
    theta* = 1 / rho.  Returns ``math.inf`` when rho is 0, i.e. no epidemic
    is possible at any transmissibility.  The result is re-verified by
    recomputing rho at the scaled matrices.
    """
    T = build_transmissibility(cfg)
    rho = spectral_radius(build_jacobian(cfg, T), tol=1e-12)
    if rho <= 0.0:
        return math.inf
    theta = 1.0 / rho
    scaled = TransmissibilityMatrices(tc=T.tc * theta, ts=T.ts * theta)
    rho_check = spectral_radius(build_jacobian(cfg, scaled), tol=1e-12)
    if abs(rho_check - 1.0) > 1e-9:
        raise ConvergenceError("threshold scaling verification failed", 0, abs(rho_check - 1.0))
    return theta


# ---------------------------------------------------------------------------
# Epidemic size


@dataclass(frozen=True)
class SizeState:
    """Non-infection probabilities in the level recursion.

    ``q_c[i]`` (``q_s[i]``) is the probability that a type-i node reached via
    a community (school) edge is not infected by anything below it; ``q_inf``
    is the same for a root node, available once converged.
    """

    q_c: np.ndarray
    q_s: np.ndarray
    q_inf: np.ndarray | None = None
    iterations: int = 0
    residual: float = math.nan


def _escape_factors(q_c, q_s, m, T, kern):
    # Per focal type i: probability one incoming contact does not infect it.
    # The infector is the neighbor, hence the transposed matrix index order.
    u_c = 1.0 - T.tc.T @ (m * (1.0 - q_c)) if kern.mean_kc > 0.0 else np.ones_like(q_c)
    u_s = 1.0 - T.ts.T @ (m * (1.0 - q_s)) if kern.mean_ks > 0.0 else np.ones_like(q_s)
    return u_c, u_s


def _size_step(q_c, q_s, m, T, kern):
    u_c, u_s = _escape_factors(q_c, q_s, m, T, kern)
    new_c = kern.excess_c(u_c, u_s) if kern.mean_kc > 0.0 else np.ones_like(q_c)
    new_s = kern.excess_s(u_c, u_s) if kern.mean_ks > 0.0 else np.ones_like(q_s)
    return new_c, new_s


def size_step(state: SizeState, cfg: ScenarioConfig, T: TransmissibilityMatrices) -> SizeState:
    """One synchronous update of the size recursion (one tree level up)."""
    kern = _make_kernel(cfg)
    new_c, new_s = _size_step(state.q_c, state.q_s, cfg.masks.m, T, kern)
    return SizeState(q_c=new_c, q_s=new_s)


def solve_size(cfg: ScenarioConfig, T: TransmissibilityMatrices | None = None) -> SizeState:
    """Fixed point of the size recursion from the all-zeros start, plus the
    root-node non-infection probabilities."""
    if T is None:
        T = build_transmissibility(cfg)
    kern = _make_kernel(cfg)
    m = cfg.masks.m
    M = m.size
    q_c = np.zeros(M) if kern.mean_kc > 0 else np.ones(M)
    q_s = np.zeros(M) if kern.mean_ks > 0 else np.ones(M)
    for it in range(1, cfg.max_iter + 1):
        new_c, new_s = _size_step(q_c, q_s, m, T, kern)
        resid = max(
            float(np.max(np.abs(new_c - q_c))), float(np.max(np.abs(new_s - q_s)))
        )
        q_c, q_s = new_c, new_s
        if resid < cfg.tol:
            u_c, u_s = _escape_factors(q_c, q_s, m, T, kern)
            q_inf = kern.node(u_c, u_s)
            return SizeState(q_c=q_c, q_s=q_s, q_inf=q_inf, iterations=it, residual=resid)
    raise ConvergenceError("size recursion did not converge", cfg.max_iter, resid)


def epidemic_size(
    cfg: ScenarioConfig, T: TransmissibilityMatrices | None = None
) -> tuple[np.ndarray, float]:
    """Per-type and total expected infected fraction given emergence."""
    state = solve_size(cfg, T)
    es_by_type = np.maximum(1.0 - state.q_inf, 0.0)
    es_total = float(cfg.masks.m @ es_by_type)
    return es_by_type, es_total


# ---------------------------------------------------------------------------
# Full report


@dataclass(frozen=True)
class AnalyticReport:
    """Solver outputs in the same shape the simulator reports."""

    pe_by_type: np.ndarray
    pe_avg: float
    rho: float
    es_by_type: np.ndarray
    es_total: float
    extinction_iterations: int
    extinction_residual: float
    size_iterations: int
    size_residual: float


def analyze(cfg: ScenarioConfig) -> AnalyticReport:
    """Run the full analytic pipeline on a validated scenario."""
    T = build_transmissibility(cfg)
    ext = solve_extinction(cfg, T)
    pe_by_type, pe_avg = emergence_probability(cfg, T, ext)
    rho = spectral_radius(build_jacobian(cfg, T))
    size = solve_size(cfg, T)
    es_by_type = np.maximum(1.0 - size.q_inf, 0.0)
    es_total = float(cfg.masks.m @ es_by_type)
    return AnalyticReport(
        pe_by_type=pe_by_type,
        pe_avg=pe_avg,
        rho=rho,
        es_by_type=es_by_type,
        es_total=es_total,
        extinction_iterations=ext.iterations,
        extinction_residual=ext.residual,
        size_iterations=size.iterations,
        size_residual=size.residual,
    )
